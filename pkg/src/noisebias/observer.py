"""Simulated observer: linear template + internal noise + threshold.

The observer answers "A" when ``dot(c*, x) + eta >= tau`` with
``eta ~ Normal(0, sigma^2)`` drawn from the observer's own seeded stream.
Under white Gaussian stimuli this is exactly the generative model for
which response-conditioned noise averaging recovers (a vector
proportional to) the true template, so it serves as the ground-truth
oracle for every statistical property of the estimators.

The internal-noise stream is separate from the stimulus stream: stimuli
come from per-trial seeds, responses from the observer's seed, so tests
can hold one fixed while varying the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .errors import InputError, SpaceMismatchError
from .features import FeatureSpace, FeatureVector, sample_white_noise
from .revcorr import CLASS_A, CLASS_B, TrialRecord

_UNIT_NORM_TOL = 1e-9


@dataclass
class LinearObserver:
    template: FeatureVector
    sigma: float
    tau: float
    seed: int

    # Internal-noise stream for standalone respond() calls; sequential.
    _stream: Optional[np.random.Generator] = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        n = np.linalg.norm(self.template.values)
        if abs(n - 1.0) > _UNIT_NORM_TOL:
            raise InputError(
                f"observer template must be unit norm (got ||c||={n!r}); "
                "normalize it first"
            )
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InputError("sigma must be finite and >= 0")
        if not np.isfinite(self.tau):
            raise InputError("tau must be finite")

    def _noise_stream(self) -> np.random.Generator:
        if self._stream is None:
            self._stream = rng.generator(self.seed)
        return self._stream


def decide(obs: LinearObserver, x: FeatureVector, eta: float) -> str:
    """Pure decision rule given an already-drawn internal noise value."""
    if x.space_id != obs.template.space_id:
        raise SpaceMismatchError(
            f"stimulus space {x.space_id!r} does not match observer space "
            f"{obs.template.space_id!r}"
        )
    score = float(np.dot(obs.template.values, x.values)) + eta
    return CLASS_A if score >= obs.tau else CLASS_B


def respond(obs: LinearObserver, x: FeatureVector) -> str:
    """One decision; consumes exactly one draw from the observer's stream."""
    eta = obs.sigma * float(obs._noise_stream().standard_normal())
    return decide(obs, x, eta)


@dataclass(frozen=True)
class CatchItem:
    """A known-answer trial injected at a fixed position of a session."""

    position: int
    true_class: str
    seed: int

    def __post_init__(self):
        if self.true_class not in (CLASS_A, CLASS_B):
            raise InputError("catch true_class must be 'A' or 'B'")
        if self.position < 0:
            raise InputError("catch position must be nonnegative")


def run_session(obs: LinearObserver, space: FeatureSpace, n_trials: int,
                base_seed: int, catch_plan: Optional[list[CatchItem]] = None,
                observer_id: str = "sim", cohort: Optional[str] = None,
                ) -> list[TrialRecord]:
    """Simulate a noise-labeling session; replayable bit-exactly.

    Trial i uses the stimulus seed ``derive_seed(base_seed, i)``.  The
    response stream is re-keyed from the observer's seed at the start of
    every session, so identical arguments always produce identical
    records.  Catch-plan positions replace the scheduled noise stimulus
    with the plan's seeded item and mark the record accordingly; the
    observer answers catch items through the same decision rule.
    """
    if n_trials < 1:
        raise InputError("n_trials must be >= 1")
    if space.id != obs.template.space_id:
        raise SpaceMismatchError("observer template space does not match session space")
    catches = {c.position: c for c in (catch_plan or [])}
    noise_stream = rng.generator(obs.seed)
    records = []
    for i in range(n_trials):
        eta = obs.sigma * float(noise_stream.standard_normal())
        catch = catches.get(i)
        if catch is not None:
            x = sample_white_noise(space, catch.seed)
            records.append(TrialRecord(
                trial_id=f"{observer_id}-{i:06d}",
                sample_seed=catch.seed, space_id=space.id,
                response=decide(obs, x, eta), is_catch=True,
                true_class=catch.true_class, observer_id=observer_id,
                cohort=cohort, timestamp=0,
            ))
            continue
        seed = rng.derive_seed(base_seed, i)
        x = sample_white_noise(space, seed)
        records.append(TrialRecord(
            trial_id=f"{observer_id}-{i:06d}",
            sample_seed=seed, space_id=space.id,
            response=decide(obs, x, eta), is_catch=False,
            observer_id=observer_id, cohort=cohort, timestamp=0,
        ))
    return records


def run_stimulus_session(obs: LinearObserver, space: FeatureSpace,
                         base_a: FeatureVector, base_b: FeatureVector,
                         n_trials: int, base_seed: int,
                         observer_id: str = "sim",
                         cohort: Optional[str] = None) -> list[TrialRecord]:
    """Simulate a two-class session with real stimuli perturbed by noise.

    Trial i presents ``base`` of the (deterministically alternating)
    true class plus seed-derived white noise, and records the true class
    so the four-cell estimator applies.  Stimuli are reconstructible via
    ``reconstruct_stimulus`` given the same base vectors.
    """
    if n_trials < 1:
        raise InputError("n_trials must be >= 1")
    for base in (base_a, base_b):
        if base.space_id != space.id:
            raise SpaceMismatchError("base vector space does not match session space")
    if space.id != obs.template.space_id:
        raise SpaceMismatchError("observer template space does not match session space")
    noise_stream = rng.generator(obs.seed)
    records = []
    for i in range(n_trials):
        eta = obs.sigma * float(noise_stream.standard_normal())
        true_class = CLASS_A if i % 2 == 0 else CLASS_B
        base = base_a if true_class == CLASS_A else base_b
        seed = rng.derive_seed(base_seed, i)
        noise = sample_white_noise(space, seed)
        x = FeatureVector(space.id, base.values + noise.values)
        records.append(TrialRecord(
            trial_id=f"{observer_id}-{i:06d}",
            sample_seed=seed, space_id=space.id,
            response=decide(obs, x, eta), is_catch=False,
            true_class=true_class, observer_id=observer_id,
            cohort=cohort, timestamp=0,
        ))
    return records
