"""Feature spaces, white-noise stimuli, HOG extraction, and renderers.

A feature space is a tagged R^d in which both stimuli and estimated bias
templates live.  Three kinds are supported:

* ``raw_pixel`` -- the vector is a grayscale image, row-major.
* ``hog`` -- histogram-of-oriented-gradients cells (see ``extract_hog``).
* ``external`` -- opaque vectors supplied from file; only the dimension
  is known, so they can be estimated over and classified but not rendered.

White-noise sampling is deterministic: each stimulus is fully determined
by its 64-bit seed (Philox-keyed, see ``noisebias.rng``), which is what
lets trial logs store seeds instead of vectors.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np
from PIL import Image, PngImagePlugin

from . import rng
from .errors import InputError, SpaceMismatchError

RAW_PIXEL = "raw_pixel"
HOG = "hog"
EXTERNAL = "external"
_KINDS = (RAW_PIXEL, HOG, EXTERNAL)

_HOG_NORM_EPS = 1e-6


@dataclass(frozen=True)
class FeatureSpace:
    """Descriptor of one feature domain R^d.

    Geometry fields are kind-specific: hog spaces carry the cell grid
    (``cells_x``, ``cells_y``, ``orientations``, ``cell_size_px``),
    raw-pixel spaces carry ``width`` and ``height``.  ``dimension`` must
    be consistent with the geometry.
    """

    id: str
    kind: str
    dimension: int
    cells_x: int = 0
    cells_y: int = 0
    orientations: int = 0
    cell_size_px: int = 0
    width: int = 0
    height: int = 0

    def __post_init__(self):
        if not self.id:
            raise InputError("feature space id must be nonempty")
        if self.kind not in _KINDS:
            raise InputError(f"unknown feature space kind {self.kind!r}")
        if self.dimension < 1:
            raise InputError("dimension must be >= 1")
        if self.kind == HOG:
            geom = (self.cells_x, self.cells_y, self.orientations, self.cell_size_px)
            if any(g < 1 for g in geom):
                raise InputError("hog geometry fields must all be >= 1")
            if self.dimension != self.cells_x * self.cells_y * self.orientations:
                raise InputError(
                    "hog dimension must equal cells_x * cells_y * orientations"
                )
        elif self.kind == RAW_PIXEL:
            if self.width < 1 or self.height < 1:
                raise InputError("raw_pixel width and height must be >= 1")
            if self.dimension != self.width * self.height:
                raise InputError("raw_pixel dimension must equal width * height")

    @staticmethod
    def hog(id: str, cells_x: int, cells_y: int, orientations: int,
            cell_size_px: int) -> "FeatureSpace":
        return FeatureSpace(
            id=id, kind=HOG,
            dimension=cells_x * cells_y * orientations,
            cells_x=cells_x, cells_y=cells_y,
            orientations=orientations, cell_size_px=cell_size_px,
        )

    @staticmethod
    def raw_pixel(id: str, width: int, height: int) -> "FeatureSpace":
        return FeatureSpace(id=id, kind=RAW_PIXEL, dimension=width * height,
                            width=width, height=height)

    @staticmethod
    def external(id: str, dimension: int) -> "FeatureSpace":
        return FeatureSpace(id=id, kind=EXTERNAL, dimension=dimension)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "dimension": self.dimension}
        if self.kind == HOG:
            d.update(cells_x=self.cells_x, cells_y=self.cells_y,
                     orientations=self.orientations,
                     cell_size_px=self.cell_size_px)
        elif self.kind == RAW_PIXEL:
            d.update(width=self.width, height=self.height)
        return d

    @staticmethod
    def from_dict(d: dict) -> "FeatureSpace":
        kind = d.get("kind")
        if kind == HOG:
            return FeatureSpace.hog(d["id"], d["cells_x"], d["cells_y"],
                                    d["orientations"], d["cell_size_px"])
        if kind == RAW_PIXEL:
            return FeatureSpace.raw_pixel(d["id"], d["width"], d["height"])
        if kind == EXTERNAL:
            return FeatureSpace.external(d["id"], d["dimension"])
        raise InputError(f"unknown feature space kind {kind!r}")


@dataclass
class FeatureVector:
    """A dense vector tagged with the id of the space it lives in."""

    space_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise InputError("feature vector values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise InputError("feature vector values must be finite")
        self.values = v

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


@dataclass
class GrayImage:
    """Grayscale render target; pixel values in [0, 1], row-major."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.shape != (self.height, self.width):
            raise InputError("pixel array shape must be (height, width)")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise InputError("pixel values must lie in [0, 1]")
        self.pixels = p

    def upscale(self, factor: int) -> "GrayImage":
        """Nearest-neighbor upscaling by an integer factor."""
        if factor < 1:
            raise InputError("upscale factor must be >= 1")
        p = np.repeat(np.repeat(self.pixels, factor, axis=0), factor, axis=1)
        return GrayImage(self.width * factor, self.height * factor, p)

    def to_png_bytes(self, text: Optional[dict] = None) -> bytes:
        """Encode as 8-bit grayscale PNG (deterministic byte stream).

        ``text`` entries become tEXt chunks, e.g. embedded tool config.
        """
        arr = np.round(self.pixels * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        info = None
        if text:
            info = PngImagePlugin.PngInfo()
            for key in sorted(text):
                info.add_text(key, text[key])
        Image.fromarray(arr, mode="L").save(buf, format="PNG", pnginfo=info)
        return buf.getvalue()

    def save_png(self, path, text: Optional[dict] = None) -> None:
        with open(path, "wb") as f:
            f.write(self.to_png_bytes(text=text))


def sample_white_noise(space: FeatureSpace, seed: int) -> FeatureVector:
    """I.i.d. standard-normal vector in ``space``, determined by ``seed``.

    Equal (space, seed) pairs give bit-identical vectors; distinct seeds
    key independent Philox streams.
    """
    g = rng.generator(seed)
    return FeatureVector(space.id, g.standard_normal(space.dimension))


def _require_same_space(a: FeatureVector, b: FeatureVector) -> None:
    if a.space_id != b.space_id or a.dimension != b.dimension:
        raise SpaceMismatchError(
            f"vectors from different spaces: {a.space_id!r} (d={a.dimension}) "
            f"vs {b.space_id!r} (d={b.dimension})"
        )


def dot(a: FeatureVector, b: FeatureVector) -> float:
    _require_same_space(a, b)
    return float(np.dot(a.values, b.values))


def cosine(a: FeatureVector, b: FeatureVector) -> float:
    _require_same_space(a, b)
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise InputError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(a.values, b.values) / (na * nb), -1.0, 1.0))


def l2_normalize(a: FeatureVector) -> FeatureVector:
    n = np.linalg.norm(a.values)
    if n == 0.0:
        raise InputError("cannot normalize a zero vector")
    return FeatureVector(a.space_id, a.values / n)


def extract_hog(image: GrayImage, space: FeatureSpace) -> FeatureVector:
    """Histogram-of-oriented-gradients features for ``image``.

    Variant implemented here, chosen for the smallest interpretable
    descriptor (no block normalization):

    * centered-difference gradients ([-1, 0, 1] taps), replicate padding
      at the borders;
    * unsigned orientations (mod pi) voted into ``space.orientations``
      bins with linear interpolation between the two nearest bin centers
      (bin k is centered at angle k*pi/n, so a pure horizontal-gradient
      edge lands entirely in bin 0);
    * magnitude-weighted per-cell histograms over cell_size_px cells;
    * per-cell L2 normalization v / sqrt(|v|^2 + eps^2), eps = 1e-6.

    The output is row-major over cells, orientation-fastest:
    index = (cy * cells_x + cx) * orientations + bin.
    """
    if space.kind != HOG:
        raise InputError(f"extract_hog requires a hog space, got {space.kind!r}")
    h_expect = space.cells_y * space.cell_size_px
    w_expect = space.cells_x * space.cell_size_px
    if image.height != h_expect or image.width != w_expect:
        raise InputError(
            f"image is {image.width}x{image.height} px but space {space.id!r} "
            f"requires {w_expect}x{h_expect}"
        )

    padded = np.pad(image.pixels, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)

    n_bins = space.orientations
    t = (angle / (np.pi / n_bins)) % n_bins
    lower = np.floor(t).astype(np.intp) % n_bins
    upper = (lower + 1) % n_bins
    w_upper = t - np.floor(t)
    w_lower = 1.0 - w_upper

    rows, cols = np.indices(image.pixels.shape)
    cy = rows // space.cell_size_px
    cx = cols // space.cell_size_px

    hist = np.zeros((space.cells_y, space.cells_x, n_bins))
    np.add.at(hist, (cy, cx, lower), magnitude * w_lower)
    np.add.at(hist, (cy, cx, upper), magnitude * w_upper)

    norms = np.sqrt(np.sum(hist ** 2, axis=2, keepdims=True) + _HOG_NORM_EPS ** 2)
    hist = hist / norms
    return FeatureVector(space.id, hist.reshape(-1))


def render_glyph(x: FeatureVector, space: FeatureSpace, scale: int) -> GrayImage:
    """Draw a hog vector as oriented line glyphs, one cell per hog cell.

    Each orientation bin contributes a line through the cell center along
    the corresponding *edge* direction (perpendicular to the gradient
    direction of the bin), with brightness proportional to the bin weight
    clamped at zero.  Negative weights carry no orientation energy and
    draw nothing.  The whole image is normalized to [0, 1] by its maximum;
    an all-nonpositive vector renders black.
    """
    if space.kind != HOG:
        raise InputError(f"render_glyph requires a hog space, got {space.kind!r}")
    if x.space_id != space.id or x.dimension != space.dimension:
        raise SpaceMismatchError(
            f"vector space {x.space_id!r} does not match {space.id!r}"
        )
    if scale < 1:
        raise InputError("scale must be a positive integer")

    weights = np.maximum(x.values, 0.0).reshape(
        space.cells_y, space.cells_x, space.orientations
    )
    img = np.zeros((space.cells_y * scale, space.cells_x * scale))

    half = (scale - 1) / 2.0
    # Oversampled line rasterization: 4 samples per pixel of line length.
    s = np.linspace(-half, half, max(4 * scale, 8))
    for cy in range(space.cells_y):
        for cx in range(space.cells_x):
            cell = weights[cy, cx]
            if not np.any(cell > 0.0):
                continue
            y0 = cy * scale + half
            x0 = cx * scale + half
            for b in range(space.orientations):
                w = cell[b]
                if w <= 0.0:
                    continue
                grad_angle = b * np.pi / space.orientations
                edge_angle = grad_angle + np.pi / 2.0
                px = np.clip(np.rint(x0 + s * math.cos(edge_angle)).astype(int),
                             cx * scale, (cx + 1) * scale - 1)
                py = np.clip(np.rint(y0 + s * math.sin(edge_angle)).astype(int),
                             cy * scale, (cy + 1) * scale - 1)
                np.maximum.at(img, (py, px), w)

    peak = img.max()
    if peak > 0.0:
        img = img / peak
    return GrayImage(space.cells_x * scale, space.cells_y * scale, img)


def render_pixel(x: FeatureVector, space: FeatureSpace) -> GrayImage:
    """Affine min-max map of a raw-pixel vector into [0, 1].

    A constant vector has no range and maps to uniform 0.5.
    """
    if space.kind != RAW_PIXEL:
        raise InputError(f"render_pixel requires a raw_pixel space, got {space.kind!r}")
    if x.space_id != space.id or x.dimension != space.dimension:
        raise SpaceMismatchError(
            f"vector space {x.space_id!r} does not match {space.id!r}"
        )
    v = x.values
    lo, hi = v.min(), v.max()
    if hi > lo:
        p = (v - lo) / (hi - lo)
    else:
        p = np.full_like(v, 0.5)
    return GrayImage(space.width, space.height,
                     p.reshape(space.height, space.width))


def render_for_labeling(x: FeatureVector, space: FeatureSpace,
                        scale: int) -> GrayImage:
    """Space-appropriate visualization at a given pixel scale.

    Hog vectors get line glyphs at ``scale`` px per cell; raw-pixel
    vectors get the min-max render upscaled ``scale``-fold.  External
    spaces have no known geometry and cannot be rendered.
    """
    if space.kind == HOG:
        return render_glyph(x, space, scale)
    if space.kind == RAW_PIXEL:
        return render_pixel(x, space).upscale(scale)
    raise InputError(f"cannot render vectors of an {space.kind!r} space")


# --- repo-wide vector JSONL format -----------------------------------------
#
# One JSON object per line: {"id": str, "space": str, "label": -1|1 (optional),
# "values": [float, ...]}.  Template lines add "kind": "template" plus
# template metadata.  Writers keep a fixed key order and compact separators
# so identical data serializes to identical bytes.


def dumps_compact(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def vector_record(id: str, space_id: str, values: np.ndarray,
                  label: Optional[int] = None, **metadata) -> dict:
    rec: dict = {"id": id, "space": space_id}
    if label is not None:
        if label not in (-1, 1):
            raise InputError("label must be -1 or 1")
        rec["label"] = int(label)
    for key, val in metadata.items():
        rec[key] = val
    rec["values"] = [float(v) for v in np.asarray(values, dtype=np.float64)]
    return rec


def write_vector_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(dumps_compact(rec))
            f.write("\n")


def read_vector_jsonl(path) -> list[dict]:
    """Parse a vector JSONL file; ``values`` become float64 arrays."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if "values" not in rec or "space" not in rec:
                raise InputError(f"{path}:{lineno}: missing 'space' or 'values'")
            rec["values"] = np.asarray(rec["values"], dtype=np.float64)
            if rec.get("label") is not None and rec["label"] not in (-1, 1):
                raise InputError(f"{path}:{lineno}: label must be -1 or 1")
            out.append(rec)
    return out
