"""Linear SVM with an optional hyperplane-orientation constraint.

The model minimizes the standard hinge objective

    lambda/2 * ||w||^2  +  sum_i max(0, 1 - y_i (w.x_i + b))

optionally subject to the second-order-cone constraint

    theta * ||w||_2  <=  w . c        (unit axis c, theta in (0, 1])

which bounds the angle between ``w`` and a prior direction ``c`` by
``arccos(theta)``.  The bias ``b`` is neither regularized nor
constrained.

The feasible set is a convex cone with a closed-form Euclidean
projection (``project_to_cone``), so the problem is solved in-repo by
accelerated projected gradient descent on a smoothed hinge with a
decreasing smoothing schedule, plus an exact one-dimensional bias
minimization between stages.  No external optimizer is used.  For
two-dimensional instances, ``grid_optimum_2d`` provides an independent
brute-force oracle against which the solver can be certified.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError, SpaceMismatchError
from .features import FeatureVector

_AXIS_NORM_TOL = 1e-9

# Stopping rule for the iterative solver: relative objective change below
# _PLATEAU_TOL across a _PLATEAU_WINDOW-iteration window, hard iteration cap.
_PLATEAU_WINDOW = 50
_PLATEAU_TOL = 1e-6
_MAX_ITERS = 200_000

# Hinge-smoothing continuation schedule.  Each stage runs to plateau with a
# Huberized hinge of width mu; the smoothed objective brackets the true one
# within n*mu/2, so the last stage pins the solution to ~1e-9 * n absolute.
_MU_STAGES = tuple(10.0 ** -k for k in range(1, 10))


def _axis_values(axis) -> np.ndarray:
    if isinstance(axis, FeatureVector):
        return axis.values
    return np.asarray(axis, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ConeConstraint:
    """Feasible set {w : theta * ||w|| <= w . axis} for a unit axis.

    ``theta`` is the cosine bound: feasible vectors lie within
    ``arccos(theta)`` of the axis.  ``theta = 1`` degenerates the cone to
    the ray along the axis.
    """

    axis: np.ndarray
    theta: float

    def __post_init__(self):
        axis = _axis_values(self.axis).copy()
        if axis.ndim != 1 or axis.size == 0:
            raise InputError("cone axis must be a nonempty 1-D vector")
        if not np.all(np.isfinite(axis)):
            raise InputError("cone axis must be finite")
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > _AXIS_NORM_TOL:
            raise InputError(
                f"cone axis must be unit norm within {_AXIS_NORM_TOL} "
                f"(got ||axis|| = {norm!r}); l2-normalize it first"
            )
        theta = float(self.theta)
        if not math.isfinite(theta) or not 0.0 < theta <= 1.0:
            raise InputError(f"theta must lie in (0, 1], got {self.theta!r}")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "theta", theta)

    @staticmethod
    def from_degrees(axis, half_angle_deg: float) -> "ConeConstraint":
        """Constraint allowing at most ``half_angle_deg`` degrees of tilt.

        The angle must lie in [0, 90) so that theta = cos(angle) stays in
        (0, 1].
        """
        if not 0.0 <= half_angle_deg < 90.0:
            raise InputError("half angle must lie in [0, 90) degrees")
        return ConeConstraint(axis, math.cos(math.radians(half_angle_deg)))

    @property
    def dimension(self) -> int:
        return self.axis.shape[0]

    @property
    def half_angle(self) -> float:
        """Maximum allowed angle to the axis, in radians."""
        return math.acos(min(1.0, self.theta))


def cone_residual(v, cone: ConeConstraint) -> float:
    """Constraint violation max(0, theta*||v|| - v.axis); 0 iff feasible."""
    v = np.asarray(v, dtype=np.float64)
    return max(0.0, cone.theta * float(np.linalg.norm(v)) - float(v @ cone.axis))


def project_to_cone(v, cone: ConeConstraint) -> np.ndarray:
    """Euclidean projection of ``v`` onto the cone's feasible set.

    Decompose v = s*axis + z with z orthogonal to the axis, and let
    t = tan(arccos theta).  Then:

    * feasible points (s >= 0 and ||z|| <= s*t) map to themselves;
    * points in the polar cone (s <= -t*||z||) map to the origin;
    * everything else maps to the nearest boundary point
      beta * (axis + t * z/||z||) with beta = (s + t*||z||)/(1 + t^2).

    The explicit s >= 0 check matters only for theta = 1 (t = 0), where
    ||z|| <= s*t alone would wrongly accept v = -axis as feasible.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != cone.axis.shape:
        raise InputError(
            f"vector has shape {v.shape}, cone axis has shape {cone.axis.shape}"
        )
    c = cone.axis
    theta = cone.theta
    s = float(v @ c)
    z = v - s * c
    nz = float(np.linalg.norm(z))
    t = math.sqrt(max(0.0, 1.0 - theta * theta)) / theta
    if s >= 0.0 and nz <= s * t:
        return v.copy()
    if s <= -t * nz:
        return np.zeros_like(v)
    beta = (s + t * nz) / (1.0 + t * t)
    radial = 0.0 if nz == 0.0 else t / nz
    return beta * (c + radial * z)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """One training point: feature vector plus a label in {-1, +1}."""

    x: FeatureVector
    y: int

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise InputError(f"label must be -1 or +1, got {self.y!r}")


@dataclass(frozen=True)
class SolverReport:
    """Diagnostics from a fit: iteration count, termination mode,
    constraint violation of the returned weights, and ||w|| (a near-zero
    norm flags a degenerate solution that satisfies any cone vacuously).
    """

    iterations: int
    converged: bool
    feasibility_residual: float
    w_norm: float


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Immutable fitted model.  ``objective`` is recomputed from (w, b)
    at construction time by the fitting routine, never carried over from
    solver internals.
    """

    w: np.ndarray
    b: float
    lam: float
    constraint: Optional[ConeConstraint]
    objective: float
    solver_report: Optional[SolverReport] = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).copy()
        if w.ndim != 1:
            raise InputError("model weights must be a 1-D vector")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if not self.lam > 0.0:
            raise InputError("lambda must be > 0")

    @property
    def dimension(self) -> int:
        return self.w.shape[0]


def _stack_examples(data: Sequence[LabeledExample]):
    if not data:
        raise InputError("training data is empty; need both classes present")
    y = np.array([ex.y for ex in data], dtype=np.float64)
    if not (np.any(y > 0) and np.any(y < 0)):
        present = "+1" if y[0] > 0 else "-1"
        raise InputError(
            f"training data contains only class {present}; both classes "
            "are required to fit"
        )
    spaces = {ex.x.space_id for ex in data}
    if len(spaces) > 1:
        raise SpaceMismatchError(
            f"training examples span multiple feature spaces: {sorted(spaces)}"
        )
    dims = {ex.x.dimension for ex in data}
    if len(dims) > 1:
        raise InputError(f"training examples have mixed dimensions: {sorted(dims)}")
    X = np.stack([ex.x.values for ex in data])
    return X, y


def _objective_arrays(w, b, X, y, lam, margins=None) -> float:
    r = (1.0 if margins is None else margins) - y * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.maximum(r, 0.0).sum())


def objective(model: SvmModel, data: Sequence[LabeledExample]) -> float:
    """Recompute lambda/2 ||w||^2 + total hinge loss of ``model`` on ``data``."""
    X, y = _stack_examples(data)
    if X.shape[1] != model.dimension:
        raise InputError(
            f"data dimension {X.shape[1]} does not match model dimension "
            f"{model.dimension}"
        )
    return _objective_arrays(model.w, model.b, X, y, model.lam)


def predict(model: SvmModel, x: Union[FeatureVector, np.ndarray]) -> float:
    """Decision score w.x + b (positive means class +1)."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, np.float64)
    if values.shape != model.w.shape:
        raise InputError(
            f"input has shape {values.shape}, model expects {model.w.shape}"
        )
    return float(model.w @ values + model.b)


def _hinge_min_over_b(scores, y, margins):
    """Exact minimum over the bias of sum_i max(0, m_i - y_i(score_i + b)).

    ``scores`` holds w.x_i along the last axis for any batch of models.
    The sum is piecewise linear and convex in b, coercive whenever both
    labels are present, so its minimum is attained at a breakpoint
    b = y_i*m_i - score_i; all breakpoints are evaluated via sorted
    prefix/suffix sums.  Returns (min values, argmin biases) with the
    leading batch shape.
    """
    a = margins - y * scores
    t = y * a
    order = np.argsort(t, axis=-1)
    t_s = np.take_along_axis(t, order, axis=-1)
    pos = np.broadcast_to(y > 0, t.shape)
    pos_s = np.take_along_axis(pos, order, axis=-1)
    pos_t = np.where(pos_s, t_s, 0.0)
    neg_t = np.where(pos_s, 0.0, t_s)
    pos_cnt_suf = np.flip(np.cumsum(np.flip(pos_s, -1), axis=-1), -1)
    pos_sum_suf = np.flip(np.cumsum(np.flip(pos_t, -1), axis=-1), -1)
    neg_cnt_pre = np.cumsum(~pos_s, axis=-1)
    neg_sum_pre = np.cumsum(neg_t, axis=-1)
    # Hinge total at b = t_k: positives with breakpoint above t_k are
    # active, negatives with breakpoint below t_k are active; ties
    # contribute zero either way.
    totals = (pos_sum_suf - t_s * pos_cnt_suf) + (t_s * neg_cnt_pre - neg_sum_pre)
    k = np.argmin(totals, axis=-1)
    fmin = np.take_along_axis(totals, k[..., None], axis=-1)[..., 0]
    bmin = np.take_along_axis(t_s, k[..., None], axis=-1)[..., 0]
    return fmin, bmin


def _solve_pairs(X, y, lam, m, max_iters):
    """Exact unconstrained minimizer via dual pairwise coordinate ascent.

    The dual of lam/2 wᵀw + Σ max(0, m_i − y_i(wᵀx_i + b)) is
    max_g Σ m_i g_i − 1/(2 lam)·||Σ g_i y_i x_i||² over 0 ≤ g ≤ 1 with
    Σ y_i g_i = 0 (the bias acts as the equality multiplier).  Each step
    moves the maximal violating pair along the feasible two-coordinate
    direction, which converges to the dual optimum; w = Σ g_i y_i x_i/lam
    and b is recovered exactly.  Terminates on a duality-gap certificate.
    """
    n, _ = X.shape
    K = X @ X.T
    diag = np.diag(K).copy()
    gy = np.zeros(n)            # g_i * y_i
    box = np.zeros(n)           # g_i
    s = np.zeros(n)             # x_k.w for w = (gy @ X)/lam
    eps = 1e-12
    it = 0
    converged = False
    best = None
    while it < max_iters:
        r = y * m - s
        up = ((y > 0) & (box < 1.0 - eps)) | ((y < 0) & (box > eps))
        dn = ((y > 0) & (box > eps)) | ((y < 0) & (box < 1.0 - eps))
        # Duality-gap certificate (exact bias on the primal side).
        fh, bb = _hinge_min_over_b(s[None, :], y, m)
        wn2 = float(gy @ s) / lam
        primal = 0.5 * lam * wn2 + float(fh[0])
        dual = float(m @ box) - 0.5 * lam * wn2
        if best is None or primal < best[2]:
            best = (gy.copy(), float(bb[0]), primal)
        if primal - dual <= 1e-10 * max(1.0, abs(primal)):
            converged = True
            break
        if not up.any() or not dn.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, r, -np.inf)))
        j = int(np.argmin(np.where(dn, r, np.inf)))
        viol = r[i] - r[j]
        if viol <= 1e-14 * max(1.0, abs(r[i]) + abs(r[j])):
            converged = True
            break
        t_cap = min(1.0 - box[i] if y[i] > 0 else box[i],
                    box[j] if y[j] > 0 else 1.0 - box[j])
        denom = diag[i] + diag[j] - 2.0 * K[i, j]
        t = t_cap if denom <= 0.0 else min(t_cap, lam * viol / denom)
        box[i] += y[i] * t
        box[j] -= y[j] * t
        gy[i] += t
        gy[j] -= t
        s += (t / lam) * (K[i] - K[j])
        it += 1
        if it % 512 == 0:
            s = (K @ gy) / lam  # shed incremental round-off
    gy, b, primal = best
    w = (gy @ X) / lam
    return w, float(b), float(primal), it, converged


def _solve(X, y, lam, cone=None, margins=None, *,
           max_iters=_MAX_ITERS, plateau_window=_PLATEAU_WINDOW,
           plateau_tol=_PLATEAU_TOL):
    """Two-phase solve: exact dual ascent, then projected gradient.

    Phase one solves the unconstrained problem exactly via pairwise dual
    coordinate ascent; when there is no cone, or the unconstrained
    optimum already lies inside the cone, that solution is returned
    directly.  Otherwise phase two runs one FISTA pass per smoothing
    stage of the Huberized hinge (warm-started from the projected phase
    one solution, with adaptive restart on objective increase),
    projecting w onto the cone at every step; b is left free.  After
    each stage the iterate is polished with exact line searches (bias,
    ray through the origin, active-set direction).  Returns the best
    iterate seen, which is always feasible because iterates are
    projections.
    """
    n, d = X.shape
    m = np.ones(n) if margins is None else np.asarray(margins, dtype=np.float64)
    A = y[:, None] * X

    def proj(w):
        return project_to_cone(w, cone) if cone is not None else w

    def f_true(w, b):
        r = m - (A @ w + y * b)
        return 0.5 * lam * float(w @ w) + float(np.maximum(r, 0.0).sum())

    def bias_polish(w, b, f):
        fh, bb = _hinge_min_over_b((X @ w)[None, :], y, m)
        cand = 0.5 * lam * float(w @ w) + float(fh[0])
        if cand < f:
            return float(bb[0]), cand
        return b, f

    # Rescaling w by a nonnegative factor stays inside the cone, so the
    # exact (scale, bias) optimum along the current direction is always
    # an admissible polish; after the gradient phase the direction error
    # dominates, so this removes most of the plateau slack.
    rho_cap = float(np.linalg.norm(X, axis=1).sum()) / lam + 1.0

    def ray_polish(w, b, f):
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return w, b, f
        u = w / norm
        s = (X @ u)[None, :]

        def val(rho):
            fh, _ = _hinge_min_over_b(rho * s, y, m)
            return 0.5 * lam * rho * rho + float(fh[0])

        lo, hi = 0.0, rho_cap
        for _ in range(90):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if val(m1) <= val(m2):
                hi = m2
            else:
                lo = m1
        rho = 0.5 * (lo + hi)
        fh, bb = _hinge_min_over_b(rho * s, y, m)
        cand = 0.5 * lam * rho * rho + float(fh[0])
        if cand < f:
            return rho * u, float(bb[0]), cand
        return w, b, f

    def segment_min(w, b, f, target):
        # Exact (step, bias) minimum along the segment to ``target``;
        # the restriction of a jointly convex objective to a segment
        # (bias minimized out) is convex, so ternary search applies.
        d = target - w
        if not np.any(d):
            return w, b, f
        sw, sd = X @ w, X @ d
        ww, wd, dd = float(w @ w), float(w @ d), float(d @ d)

        def val(t):
            fh, bb = _hinge_min_over_b((sw + t * sd)[None, :], y, m)
            quad = ww + 2.0 * t * wd + t * t * dd
            return 0.5 * lam * quad + float(fh[0]), float(bb[0])

        lo, hi = 0.0, 1.0
        for _ in range(70):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if val(m1)[0] <= val(m2)[0]:
                hi = m2
            else:
                lo = m1
        t = 0.5 * (lo + hi)
        cand, bb = val(t)
        cand1, bb1 = val(1.0)
        if cand1 < cand:
            t, cand, bb = 1.0, cand1, bb1
        if cand < f:
            return w + t * d, bb, cand
        return w, b, f

    def active_set_polish(w, b, f):
        # Holding the set of margin-violating examples fixed, the exact
        # stationary point of the local model is sum(y_i x_i)/lambda over
        # that set; walk toward it (projected when constrained) as long
        # as the true objective improves.  Exact at generic optima where
        # no example sits exactly on the margin.
        for _ in range(30):
            r = m - (A @ w + y * b)
            target = A[r > 1e-12].sum(axis=0) / lam
            if cone is not None:
                target = project_to_cone(target, cone)
            w2, b2, f2 = segment_min(w, b, f, target)
            if f2 >= f - 1e-12 * max(1.0, abs(f)):
                return w2, b2, f2
            w, b, f = w2, b2, f2
        return w, b, f

    w0, b0, f0, total, dual_ok = _solve_pairs(X, y, lam, m, max_iters)
    b0, f0 = bias_polish(w0, b0, f0)
    if cone is None or cone_residual(w0, cone) == 0.0:
        # No cone, or the unconstrained optimum is already feasible and
        # hence optimal under the cone; the polish keeps w feasible
        # because improvement targets are projected.
        w0, b0, f0 = active_set_polish(w0, b0, f0)
        report = SolverReport(iterations=total, converged=dual_ok,
                              feasibility_residual=float(
                                  cone_residual(w0, cone)) if cone is not None else 0.0,
                              w_norm=float(np.linalg.norm(w0)))
        return w0, float(b0), report

    aug = np.hstack([A, y[:, None]])
    sig2 = float(np.linalg.norm(aug, 2)) ** 2
    if not np.isfinite(sig2) or sig2 <= 0.0:
        sig2 = float(np.sum(aug * aug))

    w = proj(w0)
    b = b0
    f_cur = f_true(w, b)
    b, f_cur = bias_polish(w, b, f_cur)
    w, b, f_cur = ray_polish(w, b, f_cur)
    w, b, f_cur = active_set_polish(w, b, f_cur)
    best_w, best_b, best_f = w.copy(), b, f_cur
    stage_budget = max(1000, max_iters // len(_MU_STAGES))
    plateaued = False
    for mu in _MU_STAGES:
        if total >= max_iters:
            break
        step = 1.0 / (lam + sig2 / mu)
        yw, yb = w.copy(), b
        t_mom = 1.0
        window = deque([f_cur], maxlen=plateau_window + 1)
        plateaued = False
        for _ in range(min(stage_budget, max_iters - total)):
            total += 1
            r = m - (A @ yw + y * yb)
            g = np.clip(r / mu, 0.0, 1.0)
            gw = lam * yw - A.T @ g
            gb = -float(y @ g)
            w_new = proj(yw - step * gw)
            b_new = yb - step * gb
            f_new = f_true(w_new, b_new)
            if f_new < best_f:
                best_w, best_b, best_f = w_new.copy(), b_new, f_new
            if f_new > f_cur:
                t_new = 1.0
                yw, yb = w_new.copy(), b_new
            else:
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
                gamma = (t_mom - 1.0) / t_new
                yw = w_new + gamma * (w_new - w)
                yb = b_new + gamma * (b_new - b)
            w, b, f_cur, t_mom = w_new, b_new, f_new, t_new
            window.append(f_new)
            if len(window) == plateau_window + 1:
                if max(window) - min(window) <= plateau_tol * max(1.0, abs(f_new)):
                    plateaued = True
                    break
        b, f_cur = bias_polish(w, b, f_cur)
        w, b, f_cur = ray_polish(w, b, f_cur)
        w, b, f_cur = active_set_polish(w, b, f_cur)
        if f_cur < best_f:
            best_w, best_b, best_f = w.copy(), b, f_cur

    best_b, best_f = bias_polish(best_w, best_b, best_f)
    best_w, best_b, best_f = ray_polish(best_w, best_b, best_f)
    best_w, best_b, best_f = active_set_polish(best_w, best_b, best_f)
    resid = cone_residual(best_w, cone) if cone is not None else 0.0
    report = SolverReport(
        iterations=total,
        converged=plateaued,
        feasibility_residual=float(resid),
        w_norm=float(np.linalg.norm(best_w)),
    )
    return best_w, float(best_b), report


def fit_svm(data: Sequence[LabeledExample], lam: float, *,
            max_iters: int = _MAX_ITERS) -> SvmModel:
    """Fit the unconstrained hinge-loss SVM."""
    if not lam > 0.0:
        raise InputError("lambda must be > 0")
    X, y = _stack_examples(data)
    w, b, report = _solve(X, y, float(lam), max_iters=max_iters)
    obj = _objective_arrays(w, b, X, y, float(lam))
    return SvmModel(w=w, b=b, lam=float(lam), constraint=None,
                    objective=obj, solver_report=report)


def fit_cone_svm(data: Sequence[LabeledExample], lam: float,
                 cone: ConeConstraint, *,
                 max_iters: int = _MAX_ITERS) -> SvmModel:
    """Fit the SVM with weights constrained to the cone's feasible set."""
    if not lam > 0.0:
        raise InputError("lambda must be > 0")
    X, y = _stack_examples(data)
    if cone.dimension != X.shape[1]:
        raise InputError(
            f"cone axis dimension {cone.dimension} does not match data "
            f"dimension {X.shape[1]}"
        )
    w, b, report = _solve(X, y, float(lam), cone=cone, max_iters=max_iters)
    obj = _objective_arrays(w, b, X, y, float(lam))
    return SvmModel(w=w, b=b, lam=float(lam), constraint=cone,
                    objective=obj, solver_report=report)


def _fit_soft_prior(data: Sequence[LabeledExample], lam: float,
                    axis) -> SvmModel:
    """Baseline with the shifted regularizer lambda/2 ||w - c||^2.

    Substituting u = w - c turns this into the standard problem in u with
    per-example margins m_i = 1 - y_i * c.x_i, which the main solver
    handles directly.  The returned model's ``objective`` field is the
    *standard* objective recomputed at (w, b), keeping the SvmModel
    contract; the shifted objective is internal to the fit.
    """
    if not lam > 0.0:
        raise InputError("lambda must be > 0")
    c = _axis_values(axis)
    X, y = _stack_examples(data)
    if c.shape != (X.shape[1],):
        raise InputError("prior direction dimension does not match data")
    margins = 1.0 - y * (X @ c)
    u, b, report = _solve(X, y, float(lam), margins=margins)
    w = u + c
    obj = _objective_arrays(w, b, X, y, float(lam))
    return SvmModel(w=w, b=b, lam=float(lam), constraint=None,
                    objective=obj, solver_report=report)


# --- brute-force oracle ------------------------------------------------------


def _min_over_scale_and_bias(phis, X, y, lam, rho_max, iters=90):
    """For each direction angle, minimize over radius and bias.

    The objective restricted to w = rho*u(phi) is jointly convex in
    (rho, b); minimizing b exactly leaves a convex 1-D function of rho,
    which a ternary search over [0, rho_max] minimizes.  All directions
    are processed as one vectorized batch.  Returns (objectives, radii,
    biases) per angle.
    """
    margins = np.ones(len(y))
    U = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    S = U @ X.T

    def value(rho):
        fh, _ = _hinge_min_over_b(rho[:, None] * S, y, margins)
        return 0.5 * lam * rho * rho + fh

    lo = np.zeros(len(phis))
    hi = np.full(len(phis), rho_max)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        keep_low = value(m1) <= value(m2)
        hi = np.where(keep_low, m2, hi)
        lo = np.where(keep_low, lo, m1)
    rho = 0.5 * (lo + hi)
    fh, bias = _hinge_min_over_b(rho[:, None] * S, y, margins)
    return 0.5 * lam * rho * rho + fh, rho, bias


def grid_optimum_2d(data: Sequence[LabeledExample], lam: float,
                    cone: Optional[ConeConstraint] = None, *,
                    coarse: int = 361, refine: int = 65, stages: int = 4):
    """Brute-force optimum of the (optionally cone-constrained) objective
    for 2-D data, independent of the iterative solver.

    Directions are swept on an angular grid (restricted to the feasible
    arc when a cone is given); per direction, the radius is found by
    ternary search (the restriction is convex in (radius, bias)) and the
    bias exactly by breakpoint enumeration.  The angular grid is then
    refined around the incumbent.  Refinement is sound because the
    objective is convex in (w, b): its sublevel sets project to convex
    planar sets, so the set of direction angles attaining any value
    threshold is a single arc and the coarse argmin localizes the basin.

    The certified radius bound is ||w*|| <= sum_i ||x_i|| / lambda, from
    stationarity of the objective.  Returns (w, b, objective).
    """
    if not lam > 0.0:
        raise InputError("lambda must be > 0")
    X, y = _stack_examples(data)
    if X.shape[1] != 2:
        raise InputError("grid_optimum_2d requires 2-D data")
    if cone is not None and cone.dimension != 2:
        raise InputError("cone axis must be 2-D")

    rho_max = max(1e-6, float(np.linalg.norm(X, axis=1).sum()) / lam)
    if cone is not None:
        psi = math.atan2(cone.axis[1], cone.axis[0])
        alpha = cone.half_angle
        arc = (psi - alpha, psi + alpha)
        phis = (np.linspace(arc[0], arc[1], coarse) if alpha > 0.0
                else np.array([psi]))
    else:
        arc = None
        phis = np.linspace(-math.pi, math.pi, coarse, endpoint=False)

    best = None
    for _ in range(stages + 1):
        objs, rhos, biases = _min_over_scale_and_bias(phis, X, y, lam, rho_max)
        k = int(np.argmin(objs))
        if best is None or objs[k] < best[0]:
            best = (float(objs[k]), float(phis[k]), float(rhos[k]),
                    float(biases[k]))
        if len(phis) < 2:
            break
        spacing = float(phis[1] - phis[0])
        lo_phi = best[1] - 2.0 * spacing
        hi_phi = best[1] + 2.0 * spacing
        if arc is not None:
            lo_phi = max(lo_phi, arc[0])
            hi_phi = min(hi_phi, arc[1])
        phis = np.linspace(lo_phi, hi_phi, refine)

    # w = 0 candidate: bias-only model, evaluated exactly.
    fh, b0 = _hinge_min_over_b(np.zeros((1, len(y))), y, np.ones(len(y)))
    if float(fh[0]) < best[0]:
        return np.zeros(2), float(b0[0]), float(fh[0])

    obj, phi, rho, bias = best
    w = rho * np.array([math.cos(phi), math.sin(phi)])
    return w, bias, obj


# --- model serialization ------------------------------------------------------


def model_to_dict(model: SvmModel) -> dict:
    d = {
        "w": [float(v) for v in model.w],
        "b": model.b,
        "lambda": model.lam,
    }
    if model.constraint is not None:
        d["theta"] = model.constraint.theta
        d["axis"] = [float(v) for v in model.constraint.axis]
    d["objective"] = model.objective
    return d


def model_from_dict(d: dict) -> SvmModel:
    try:
        w = np.asarray(d["w"], dtype=np.float64)
        b = float(d["b"])
        lam = float(d["lambda"])
        obj = float(d["objective"])
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed model record: {e}") from e
    constraint = None
    if "theta" in d or "axis" in d:
        if "theta" not in d or "axis" not in d:
            raise InputError("model record must carry both theta and axis, or neither")
        constraint = ConeConstraint(np.asarray(d["axis"], dtype=np.float64),
                                    float(d["theta"]))
    return SvmModel(w=w, b=b, lam=lam, constraint=constraint, objective=obj)


def model_to_json(model: SvmModel) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":"))


def model_from_json(text: str) -> SvmModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid model JSON: {e}") from e
    if not isinstance(d, dict):
        raise InputError("model JSON must be an object")
    return model_from_dict(d)
