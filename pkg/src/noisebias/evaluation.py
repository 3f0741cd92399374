"""Ranking evaluation and desk-scale experiment runners.

Average precision here is the all-points sum AP = sum_k (R_k - R_{k-1}) * P_k
over a fully deterministic ranking: scores sort descending, ties break by
ascending item id.  The sum is accumulated in exact rational arithmetic and
rounded to float once, so hand-computed byte-exact expectations hold.

The experiment runners reproduce two directional effects on synthetic
Gaussian data: an informative prior direction helps a cone-constrained SVM
most when positive examples are scarce, and helps generalization under a
distribution shift between train and test, with the advantage fading as
training data grows.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import rng
from .conesvm import (ConeConstraint, LabeledExample, SvmModel,
                      _fit_soft_prior, fit_cone_svm, fit_svm, predict)
from .errors import InputError, SpaceMismatchError
from .features import FeatureVector, vector_record
from .revcorr import Template

CONDITION_CHANCE = "chance"
CONDITION_HUMAN = "human"
CONDITION_SVM = "svm"
CONDITION_SVM_PRIOR = "svm_prior"
CONDITION_SOFT_PRIOR = "soft_prior"


@dataclass(frozen=True)
class ScoredLabel:
    """One ranked item: classifier score, true label in {-1,+1}, stable id."""

    score: float
    label: int
    id: str

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InputError(f"score for item {self.id!r} must be finite")
        if self.label not in (-1, 1):
            raise InputError(f"label must be -1 or +1, got {self.label!r}")


@dataclass(frozen=True, eq=False)
class LabeledVector:
    """A feature vector with a binary label and a stable id for ranking."""

    id: str
    x: FeatureVector
    y: int

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise InputError(f"label must be -1 or +1, got {self.y!r}")
        if not self.id:
            raise InputError("labeled vector id must be nonempty")

    def as_example(self) -> LabeledExample:
        return LabeledExample(x=self.x, y=self.y)


@dataclass(frozen=True)
class APResult:
    ap: float
    chance: float
    n_positive: int
    n_total: int


def average_precision(items: Sequence[ScoredLabel]) -> float:
    """All-points average precision of a deterministic ranking.

    Items sort by descending score with ties broken by ascending id.
    AP = sum over positive ranks k of (R_k - R_{k-1}) * P_k, accumulated
    exactly as rationals and converted to float once at the end.
    """
    if not items:
        raise InputError("average precision needs at least one item")
    n_pos = sum(1 for it in items if it.label == 1)
    if n_pos == 0:
        raise InputError(
            "average precision is undefined with no positive items"
        )
    ranked = sorted(items, key=lambda it: (-it.score, it.id))
    total = Fraction(0)
    tp = 0
    for k, it in enumerate(ranked, start=1):
        if it.label == 1:
            tp += 1
            # Delta recall is exactly 1/n_pos per positive.
            total += Fraction(1, n_pos) * Fraction(tp, k)
    return float(total)


def chance_ap(labels: Sequence[int]) -> float:
    """Positive prevalence n_pos/n, the mean AP of random rankings."""
    if len(labels) == 0:
        raise InputError("chance_ap needs at least one label")
    for lab in labels:
        if lab not in (-1, 1):
            raise InputError(f"label must be -1 or +1, got {lab!r}")
    n_pos = sum(1 for lab in labels if lab == 1)
    return float(Fraction(n_pos, len(labels)))


def _ap_result(scored: list[ScoredLabel]) -> APResult:
    labels = [it.label for it in scored]
    return APResult(
        ap=average_precision(scored),
        chance=chance_ap(labels),
        n_positive=sum(1 for lab in labels if lab == 1),
        n_total=len(labels),
    )


def eval_template(template: Template, data: Sequence[LabeledVector]) -> APResult:
    """Rank ``data`` by the raw dot product with the template (no bias)."""
    if not data:
        raise InputError("evaluation data is empty")
    scored = []
    for lv in data:
        if lv.x.space_id != template.space_id:
            raise SpaceMismatchError(
                f"vector {lv.id!r} lives in space {lv.x.space_id!r}, "
                f"template in {template.space_id!r}"
            )
        scored.append(ScoredLabel(
            score=float(np.dot(template.values, lv.x.values)),
            label=lv.y, id=lv.id))
    return _ap_result(scored)


def eval_model(model: SvmModel, data: Sequence[LabeledVector]) -> APResult:
    """Rank ``data`` by the model's decision scores w.x + b."""
    if not data:
        raise InputError("evaluation data is empty")
    scored = [ScoredLabel(score=predict(model, lv.x), label=lv.y, id=lv.id)
              for lv in data]
    return _ap_result(scored)


@dataclass(frozen=True, eq=False)
class SyntheticDatasetSpec:
    """Two isotropic Gaussian classes, optionally shifted as a block.

    ``shift`` is added to both class means and models a dataset-level
    covariate shift: the optimal separating *direction* is unchanged,
    but a classifier's bias calibrated on an unshifted dataset is wrong
    on a shifted one.
    """

    d: int
    mu_pos: np.ndarray
    mu_neg: np.ndarray
    sigma: float
    n_pos: int
    n_neg: int
    seed: int
    shift: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.d < 1:
            raise InputError("dimension must be >= 1")
        for name in ("mu_pos", "mu_neg", "shift"):
            raw = getattr(self, name)
            if raw is None and name == "shift":
                arr = np.zeros(self.d)
            else:
                arr = np.asarray(raw, dtype=np.float64)
            if arr.shape != (self.d,):
                raise InputError(f"{name} must have shape ({self.d},)")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InputError("sigma must be finite and > 0")
        if self.n_pos < 0 or self.n_neg < 0:
            raise InputError("sample counts must be >= 0")

    @property
    def space_id(self) -> str:
        return f"synthetic-d{self.d}"

    def with_seed(self, seed: int) -> "SyntheticDatasetSpec":
        return SyntheticDatasetSpec(
            d=self.d, mu_pos=self.mu_pos, mu_neg=self.mu_neg,
            sigma=self.sigma, n_pos=self.n_pos, n_neg=self.n_neg,
            seed=seed, shift=self.shift)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "mu_pos": [float(v) for v in self.mu_pos],
            "mu_neg": [float(v) for v in self.mu_neg],
            "sigma": self.sigma,
            "shift": [float(v) for v in self.shift],
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SyntheticDatasetSpec":
        try:
            return SyntheticDatasetSpec(
                d=int(d["d"]), mu_pos=d["mu_pos"], mu_neg=d["mu_neg"],
                sigma=float(d["sigma"]), n_pos=int(d["n_pos"]),
                n_neg=int(d["n_neg"]), seed=int(d["seed"]),
                shift=d.get("shift"))
        except KeyError as e:
            raise InputError(f"synthetic spec missing field {e}") from e


def generate_synthetic(spec: SyntheticDatasetSpec) -> list[LabeledVector]:
    """Draw the dataset described by ``spec``; same spec, same bytes.

    Positives come first in the draw order, so truncating the positive
    list is a deterministic subsample.
    """
    g = rng.generator(spec.seed)
    out = []
    pos = spec.mu_pos + spec.shift + spec.sigma * g.standard_normal((spec.n_pos, spec.d))
    neg = spec.mu_neg + spec.shift + spec.sigma * g.standard_normal((spec.n_neg, spec.d))
    for i in range(spec.n_pos):
        out.append(LabeledVector(f"pos-{i:05d}",
                                 FeatureVector(spec.space_id, pos[i]), 1))
    for i in range(spec.n_neg):
        out.append(LabeledVector(f"neg-{i:05d}",
                                 FeatureVector(spec.space_id, neg[i]), -1))
    return out


@dataclass(frozen=True)
class ConditionResult:
    """APs of one (method, condition) cell over repeats."""

    method: str
    condition: int
    aps: tuple

    def __post_init__(self):
        if len(self.aps) < 1:
            raise InputError("a condition needs at least one AP value")
        for ap in self.aps:
            if not (0.0 <= ap <= 1.0):
                raise InputError(f"AP {ap!r} outside [0, 1]")

    @property
    def mean_ap(self) -> float:
        return float(np.mean(self.aps))

    @property
    def std_ap(self) -> float:
        return float(np.std(self.aps))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "condition": self.condition,
            "aps": [float(a) for a in self.aps],
            "mean_ap": self.mean_ap,
            "std_ap": self.std_ap,
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Per-condition AP table plus the full configuration that produced it."""

    experiment: str
    config: dict
    results: tuple

    def mean_ap(self, method: str, condition: int) -> float:
        for r in self.results:
            if r.method == method and r.condition == condition:
                return r.mean_ap
        raise InputError(f"no result for method={method!r} condition={condition!r}")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=False)

    def to_csv(self) -> str:
        """Mean-AP table: one row per condition, one column per method."""
        methods = []
        for r in self.results:
            if r.method not in methods:
                methods.append(r.method)
        conditions = sorted({r.condition for r in self.results})
        cells = {(r.method, r.condition): r.mean_ap for r in self.results}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["condition"] + methods)
        for cond in conditions:
            row = [cond]
            for m in methods:
                v = cells.get((m, cond))
                row.append("" if v is None else f"{v:.6f}")
            writer.writerow(row)
        return buf.getvalue()


def _unit_prior(prior: Template) -> np.ndarray:
    norm = float(np.linalg.norm(prior.values))
    if norm == 0.0:
        raise InputError("prior template is the zero vector")
    return prior.values / norm


def _check_pool(name: str, pool: Sequence[LabeledVector], space_id: str):
    if not pool:
        raise InputError(f"{name} pool is empty")
    for lv in pool:
        if lv.x.space_id != space_id:
            raise SpaceMismatchError(
                f"{name} pool vector {lv.id!r} is in space "
                f"{lv.x.space_id!r}, expected {space_id!r}")


def run_low_data_experiment(prior: Template,
                            train_pool: Sequence[LabeledVector],
                            test_pool: Sequence[LabeledVector],
                            positives_per_condition: Sequence[int],
                            lam: float, theta: float, repeats: int,
                            seed: int) -> ExperimentReport:
    """AP versus number of positive training examples, with and without
    the orientation prior.

    Per repeat and per condition n: a seeded subsample of n positives is
    joined with every negative in the train pool, an unconstrained SVM
    and a cone-constrained SVM (axis = normalized prior, given theta)
    are fit, and both are scored by AP on the test pool.  The
    ``chance`` and ``human`` (prior-alone) baselines are deterministic,
    recorded once per condition.  Conditions with 0 positives carry the
    baselines only.
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    if not positives_per_condition:
        raise InputError("need at least one condition")
    axis = _unit_prior(prior)
    _check_pool("train", train_pool, prior.space_id)
    _check_pool("test", test_pool, prior.space_id)
    train_ids = {lv.id for lv in train_pool}
    overlap = sorted(train_ids & {lv.id for lv in test_pool})
    if overlap:
        raise InputError(f"train/test pools overlap: {overlap[:5]}")

    positives = [lv for lv in train_pool if lv.y == 1]
    negatives = [lv for lv in train_pool if lv.y == -1]
    need = max(positives_per_condition)
    if need > len(positives):
        raise InputError(
            f"conditions need up to {need} positives but the train pool "
            f"has only {len(positives)}")
    if not negatives:
        raise InputError("train pool has no negatives")

    chance = chance_ap([lv.y for lv in test_pool])
    human = eval_template(prior, test_pool).ap

    results = []
    for n in positives_per_condition:
        results.append(ConditionResult(CONDITION_CHANCE, n, (chance,)))
        results.append(ConditionResult(CONDITION_HUMAN, n, (human,)))

    neg_examples = [lv.as_example() for lv in negatives]
    svm_aps = {n: [] for n in positives_per_condition if n > 0}
    prior_aps = {n: [] for n in positives_per_condition if n > 0}
    for r in range(repeats):
        g = rng.generator(rng.derive_seed(seed, r))
        perm = g.permutation(len(positives))
        for n in svm_aps:
            chosen = [positives[j].as_example() for j in perm[:n]]
            train = chosen + neg_examples
            plain = fit_svm(train, lam)
            coned = fit_cone_svm(train, lam, ConeConstraint(axis, theta))
            svm_aps[n].append(eval_model(plain, test_pool).ap)
            prior_aps[n].append(eval_model(coned, test_pool).ap)
    for n in sorted(svm_aps):
        results.append(ConditionResult(CONDITION_SVM, n, tuple(svm_aps[n])))
        results.append(ConditionResult(CONDITION_SVM_PRIOR, n,
                                       tuple(prior_aps[n])))

    config = {
        "experiment": "low_data",
        "lambda": lam,
        "theta": theta,
        "repeats": repeats,
        "seed": seed,
        "positives_per_condition": [int(n) for n in positives_per_condition],
        "train_pool_size": len(train_pool),
        "test_pool_size": len(test_pool),
        "prior": {
            "space": prior.space_id,
            "trials_used": prior.trials_used,
            "values": [float(v) for v in prior.values],
        },
    }
    return ExperimentReport("low_data", config, tuple(results))


def run_cross_dataset_experiment(prior: Template,
                                 spec_train: SyntheticDatasetSpec,
                                 spec_test: SyntheticDatasetSpec,
                                 sizes: Sequence[int], lam: float,
                                 theta: float, repeats: int) -> ExperimentReport:
    """Generalization under distribution shift versus training-set size.

    Per repeat: a fresh training dataset is drawn from ``spec_train``
    (seed derived from the spec seed and the repeat index), truncated to
    ``size`` examples per class, and three models are fit: plain SVM,
    cone-constrained SVM (axis = normalized prior), and a baseline with
    the shifted regularizer lambda/2 ||w - c||^2.  All are scored by AP
    on one fixed dataset drawn from ``spec_test``.
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    if not sizes or min(sizes) < 1:
        raise InputError("sizes must be positive")
    if spec_train.d != spec_test.d:
        raise InputError("train and test specs must share a dimension")
    if max(sizes) > min(spec_train.n_pos, spec_train.n_neg):
        raise InputError(
            f"sizes go up to {max(sizes)} but spec_train draws only "
            f"{spec_train.n_pos} positives / {spec_train.n_neg} negatives")
    axis = _unit_prior(prior)
    if prior.space_id != spec_train.space_id:
        raise SpaceMismatchError(
            f"prior space {prior.space_id!r} does not match synthetic "
            f"space {spec_train.space_id!r}")

    test_pool = generate_synthetic(spec_test)
    methods = (CONDITION_SVM, CONDITION_SVM_PRIOR, CONDITION_SOFT_PRIOR)
    aps = {(m, s): [] for m in methods for s in sizes}
    for r in range(repeats):
        pool = generate_synthetic(
            spec_train.with_seed(rng.derive_seed(spec_train.seed, r)))
        positives = [lv for lv in pool if lv.y == 1]
        negatives = [lv for lv in pool if lv.y == -1]
        for size in sizes:
            train = ([lv.as_example() for lv in positives[:size]]
                     + [lv.as_example() for lv in negatives[:size]])
            fitted = {
                CONDITION_SVM: fit_svm(train, lam),
                CONDITION_SVM_PRIOR: fit_cone_svm(
                    train, lam, ConeConstraint(axis, theta)),
                CONDITION_SOFT_PRIOR: _fit_soft_prior(train, lam, axis),
            }
            for method, model in fitted.items():
                aps[(method, size)].append(eval_model(model, test_pool).ap)

    results = tuple(
        ConditionResult(m, s, tuple(aps[(m, s)]))
        for s in sorted(set(int(s) for s in sizes)) for m in methods)
    config = {
        "experiment": "cross_dataset",
        "lambda": lam,
        "theta": theta,
        "repeats": repeats,
        "sizes": [int(s) for s in sizes],
        "spec_train": spec_train.to_dict(),
        "spec_test": spec_test.to_dict(),
        "prior": {
            "space": prior.space_id,
            "trials_used": prior.trials_used,
            "values": [float(v) for v in prior.values],
        },
    }
    return ExperimentReport("cross_dataset", config, tuple(results))


# --- labeled-vector JSONL bridging -------------------------------------------


def labeled_vector_records(data: Sequence[LabeledVector]):
    """Vector-JSONL records (id/space/label/values) for ``data``."""
    return [vector_record(lv.id, lv.x.space_id, lv.x.values, label=lv.y)
            for lv in data]


def labeled_vectors_from_records(records) -> list[LabeledVector]:
    out = []
    for rec in records:
        if rec.get("kind") == "meta":
            continue
        if rec.get("label") not in (-1, 1):
            raise InputError(
                f"record {rec.get('id')!r} has no usable label; expected -1 or 1")
        out.append(LabeledVector(
            id=str(rec["id"]),
            x=FeatureVector(rec["space"], rec["values"]),
            y=int(rec["label"])))
    return out
