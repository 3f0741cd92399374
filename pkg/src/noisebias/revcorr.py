"""Trial records and reverse-correlation template estimators.

An observer's internal decision template is estimated by averaging the
stimuli that elicited each response and differencing the averages:

* noise-only mode: ``c = mean(responded A) - mean(responded B)`` over
  pure white-noise stimuli, with no real images anywhere;
* classic (stimulus) mode: ``c = (mean_AA + mean_BA) - (mean_AB + mean_BB)``
  where cell XY holds stimuli whose true class is X and response was Y.

Catch trials (known-answer items used to vet labelers) are recorded but
never enter any estimate.  Accumulators are value-like and mergeable, so
trials can be aggregated in shards and combined; sums are kept exactly
(see ``noisebias.exact``), which makes any shard/merge grouping
bit-identical to sequential accumulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .errors import EstimationError, InputError, SpaceMismatchError
from .exact import ExactVectorSum
from .features import FeatureSpace, FeatureVector, sample_white_noise

CLASS_A = "A"
CLASS_B = "B"
_CLASSES = (CLASS_A, CLASS_B)

MODE_CLASSIC = "classic"
MODE_NOISE_ONLY = "noise_only"

# Cell keys are (true_class, response); true_class None marks the
# noise-only pseudo-cells.
CELL_KEYS = (
    (CLASS_A, CLASS_A), (CLASS_A, CLASS_B),
    (CLASS_B, CLASS_A), (CLASS_B, CLASS_B),
    (None, CLASS_A), (None, CLASS_B),
)


def _cell_name(key: tuple) -> str:
    true_class, response = key
    return f"{true_class or '·'}{response}"


@dataclass(frozen=True)
class TrialRecord:
    """One observer decision on one stimulus.

    For non-catch noise trials the stimulus is fully determined by
    (sample_seed, space_id); for stimulus-mode trials it additionally
    needs the per-class base vector (see ``reconstruct_stimulus``).
    """

    trial_id: str
    sample_seed: int
    space_id: str
    response: str
    is_catch: bool = False
    true_class: Optional[str] = None
    observer_id: str = ""
    cohort: Optional[str] = None
    timestamp: int = 0

    def __post_init__(self):
        if self.response not in _CLASSES:
            raise InputError(f"response must be one of {_CLASSES}, got {self.response!r}")
        if self.true_class is not None and self.true_class not in _CLASSES:
            raise InputError(f"true_class must be one of {_CLASSES} or absent")
        if self.is_catch and self.true_class is None:
            raise InputError("catch trials must carry true_class")

    @property
    def correct(self) -> Optional[bool]:
        if self.true_class is None:
            return None
        return self.response == self.true_class


@dataclass
class _Cell:
    sum: ExactVectorSum
    count: int


class TemplateAccumulator:
    """Mergeable per-response-cell running sums and counts.

    Value-like: ``accumulate`` and ``merge`` return new accumulators and
    never mutate their inputs, so partially-built accumulators can be
    reused and combined freely.
    """

    def __init__(self, space_id: str, dimension: int,
                 _cells: Optional[dict] = None):
        if dimension < 1:
            raise InputError("dimension must be >= 1")
        self.space_id = space_id
        self.dimension = dimension
        self._cells: dict[tuple, _Cell] = _cells if _cells is not None else {
            key: _Cell(ExactVectorSum(dimension), 0) for key in CELL_KEYS
        }

    @staticmethod
    def empty(space: FeatureSpace) -> "TemplateAccumulator":
        return TemplateAccumulator(space.id, space.dimension)

    def count(self, true_class: Optional[str], response: str) -> int:
        return self._cells[(true_class, response)].count

    def cell_sum(self, true_class: Optional[str], response: str) -> np.ndarray:
        return self._cells[(true_class, response)].sum.value()

    def cell_mean(self, true_class: Optional[str], response: str) -> np.ndarray:
        cell = self._cells[(true_class, response)]
        if cell.count == 0:
            raise EstimationError(
                f"no trials in response cell {_cell_name((true_class, response))}"
            )
        return cell.sum.value() / cell.count

    @property
    def total_count(self) -> int:
        return sum(c.count for c in self._cells.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemplateAccumulator):
            return NotImplemented
        if (self.space_id, self.dimension) != (other.space_id, other.dimension):
            return False
        for key in CELL_KEYS:
            a, b = self._cells[key], other._cells[key]
            if a.count != b.count:
                return False
            if not np.array_equal(a.sum.value(), b.sum.value()):
                return False
        return True


@dataclass
class Template:
    """An estimated decision template in some feature space."""

    space_id: str
    values: np.ndarray
    trials_used: int
    mode: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise InputError("template values must be finite")
        if self.trials_used < 1:
            raise InputError("trials_used must be >= 1")
        self.values = v

    def as_vector(self) -> FeatureVector:
        return FeatureVector(self.space_id, self.values)

    def normalized(self) -> FeatureVector:
        """Unit-norm copy, as required when used as an orientation prior."""
        n = np.linalg.norm(self.values)
        if n == 0.0:
            raise InputError("cannot normalize an all-zero template")
        return FeatureVector(self.space_id, self.values / n)


def accumulate(acc: TemplateAccumulator, trial: TrialRecord,
               x: FeatureVector) -> TemplateAccumulator:
    """Fold one trial into the accumulator (pure; returns a new one).

    Catch trials leave the accumulator unchanged: they exist to vet
    labelers and are discarded from template estimation.
    """
    if trial.space_id != acc.space_id or x.space_id != acc.space_id:
        raise SpaceMismatchError(
            f"trial/vector space {trial.space_id!r}/{x.space_id!r} does not "
            f"match accumulator space {acc.space_id!r}"
        )
    if x.dimension != acc.dimension:
        raise SpaceMismatchError(
            f"vector dimension {x.dimension} != accumulator dimension {acc.dimension}"
        )
    if trial.is_catch:
        return acc
    key = (trial.true_class, trial.response)
    cells = dict(acc._cells)
    old = cells[key]
    new_sum = old.sum.copy()
    new_sum.add(x.values)
    cells[key] = _Cell(new_sum, old.count + 1)
    return TemplateAccumulator(acc.space_id, acc.dimension, _cells=cells)


def merge(a: TemplateAccumulator, b: TemplateAccumulator) -> TemplateAccumulator:
    """Cellwise sum/count addition; commutative and associative in value."""
    if a.space_id != b.space_id or a.dimension != b.dimension:
        raise SpaceMismatchError(
            f"cannot merge accumulators over {a.space_id!r} (d={a.dimension}) "
            f"and {b.space_id!r} (d={b.dimension})"
        )
    cells = {}
    for key in CELL_KEYS:
        ca, cb = a._cells[key], b._cells[key]
        s = ca.sum.copy()
        s.merge(cb.sum)
        cells[key] = _Cell(s, ca.count + cb.count)
    return TemplateAccumulator(a.space_id, a.dimension, _cells=cells)


def estimate_noise_only(acc: TemplateAccumulator) -> Template:
    """Difference of response-conditioned noise means."""
    empty = [
        _cell_name((None, r)) for r in _CLASSES if acc.count(None, r) == 0
    ]
    if empty:
        raise EstimationError(
            "cannot estimate: empty response cell(s) " + ", ".join(empty)
        )
    c = acc.cell_mean(None, CLASS_A) - acc.cell_mean(None, CLASS_B)
    used = acc.count(None, CLASS_A) + acc.count(None, CLASS_B)
    return Template(acc.space_id, c, used, MODE_NOISE_ONLY)


def estimate_classic(acc: TemplateAccumulator) -> Template:
    """Four-cell estimate from stimulus-mode trials."""
    empty = [
        _cell_name(key) for key in CELL_KEYS[:4] if acc._cells[key].count == 0
    ]
    if empty:
        raise EstimationError(
            "cannot estimate: empty response cell(s) " + ", ".join(empty)
        )
    m = {key: acc.cell_mean(*key) for key in CELL_KEYS[:4]}
    c = (m[(CLASS_A, CLASS_A)] + m[(CLASS_B, CLASS_A)]) \
        - (m[(CLASS_A, CLASS_B)] + m[(CLASS_B, CLASS_B)])
    used = sum(acc._cells[key].count for key in CELL_KEYS[:4])
    return Template(acc.space_id, c, used, MODE_CLASSIC)


def estimate_cohorts(
    trials: Iterable[tuple[TrialRecord, FeatureVector]],
    key: Optional[Callable[[TrialRecord], Optional[str]]] = None,
) -> tuple[dict[str, Template], list[str]]:
    """Per-cohort noise-only estimates.

    ``key`` selects the cohort tag (default: the record's ``cohort``
    field) and must be present on every non-catch trial.  Cohorts whose
    response cells are not both populated are omitted and reported in
    the returned warnings list.
    """
    key = key or (lambda rec: rec.cohort)
    accs: dict[str, TemplateAccumulator] = {}
    for rec, x in trials:
        if rec.is_catch:
            continue
        tag = key(rec)
        if tag is None:
            raise InputError(f"trial {rec.trial_id!r} has no cohort tag")
        if tag not in accs:
            accs[tag] = TemplateAccumulator(rec.space_id, x.dimension)
        accs[tag] = accumulate(accs[tag], rec, x)
    templates: dict[str, Template] = {}
    warnings: list[str] = []
    for tag in sorted(accs):
        try:
            templates[tag] = estimate_noise_only(accs[tag])
        except EstimationError as e:
            warnings.append(f"cohort {tag!r} omitted: {e}")
    return templates, warnings


def reconstruct_stimulus(record: TrialRecord, space: FeatureSpace,
                         base_a: Optional[FeatureVector] = None,
                         base_b: Optional[FeatureVector] = None) -> FeatureVector:
    """Regenerate the stimulus a trial record refers to.

    Noise trials need only (seed, space).  Stimulus-mode trials are the
    true class's base vector plus seed noise, so the bases used during
    the session must be supplied.
    """
    noise = sample_white_noise(space, record.sample_seed)
    if record.true_class is None or record.is_catch:
        return noise
    base = base_a if record.true_class == CLASS_A else base_b
    if base is None:
        raise InputError(
            f"trial {record.trial_id!r} has true_class {record.true_class!r}; "
            "its stimulus needs the matching base vector"
        )
    if base.space_id != space.id:
        raise SpaceMismatchError("base vector space does not match")
    return FeatureVector(space.id, base.values + noise.values)


# --- trial-log JSONL ---------------------------------------------------------
#
# One record per line, fixed field order.  Optional fields (true_class,
# cohort) are omitted when absent so round-trips are byte-stable.  Lines
# whose object carries "kind": "meta" are tool metadata (embedded config)
# and are skipped by the reader.

_LOG_FIELDS = ("trial_id", "sample_seed", "space_id", "true_class", "response",
               "is_catch", "observer_id", "cohort", "timestamp")


def record_to_dict(rec: TrialRecord) -> dict:
    d: dict = {"trial_id": rec.trial_id, "sample_seed": rec.sample_seed,
               "space_id": rec.space_id}
    if rec.true_class is not None:
        d["true_class"] = rec.true_class
    d["response"] = rec.response
    d["is_catch"] = rec.is_catch
    d["observer_id"] = rec.observer_id
    if rec.cohort is not None:
        d["cohort"] = rec.cohort
    d["timestamp"] = rec.timestamp
    return d


def record_from_dict(d: dict) -> TrialRecord:
    unknown = set(d) - set(_LOG_FIELDS)
    if unknown:
        raise InputError(f"unknown trial-log fields: {sorted(unknown)}")
    try:
        return TrialRecord(
            trial_id=str(d["trial_id"]),
            sample_seed=int(d["sample_seed"]),
            space_id=str(d["space_id"]),
            response=d["response"],
            is_catch=bool(d.get("is_catch", False)),
            true_class=d.get("true_class"),
            observer_id=str(d.get("observer_id", "")),
            cohort=d.get("cohort"),
            timestamp=int(d.get("timestamp", 0)),
        )
    except KeyError as e:
        raise InputError(f"trial record missing field {e.args[0]!r}") from e


def record_to_json(rec: TrialRecord) -> str:
    return json.dumps(record_to_dict(rec), separators=(",", ":"))


def write_trial_log(path, records: Iterable[TrialRecord],
                    meta: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if meta is not None:
            f.write(json.dumps({"kind": "meta", **meta},
                               separators=(",", ":")) + "\n")
        for rec in records:
            f.write(record_to_json(rec) + "\n")


def iter_trial_log(path) -> Iterator[TrialRecord]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if isinstance(d, dict) and d.get("kind") == "meta":
                continue
            try:
                yield record_from_dict(d)
            except InputError as e:
                raise InputError(f"{path}:{lineno}: {e}") from e


def read_trial_log(path) -> list[TrialRecord]:
    return list(iter_trial_log(path))
