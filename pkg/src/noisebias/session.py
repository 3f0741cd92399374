"""Crowd-labeling sessions with catch-trial quality control.

A session serves seeded noise stimuli (rendered at three scales) to any
number of workers, records yes/no answers in an append-only JSONL log,
and maintains a live bias-template estimate over the answers of
currently-qualified workers.

Determinism and replayability are the core contracts:

* Stimulus schedules are pure functions of (session seed, worker id,
  trial index): the noise seed, whether the slot is a catch trial, and
  which catch item it serves are all recomputed identically at any time,
  which makes fetches idempotent and logs replayable.
* Catch slots occur every ``period = round(1/catch_rate)`` trials at a
  per-worker seeded offset, so their count over n trials is exact, not
  binomial.
* Qualification is a pure function of a worker's full catch history
  (at least ``min_catch_seen`` catches answered, accuracy at least
  ``min_catch_accuracy``), and the live template always equals the
  offline estimator applied to the log filtered to the non-catch trials
  of currently-qualified workers.  A worker dropping below the bar is
  thereby excluded retroactively; one rising above it is included
  retroactively.  Exact (error-free) accumulation makes this equality
  bit-level, independent of grouping order.
* The log is the single source of truth: rebuilding a session from disk
  reproduces the in-memory state exactly.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import rng
from .errors import EstimationError, InputError
from .features import (EXTERNAL, FeatureSpace, FeatureVector, GrayImage,
                       render_for_labeling, sample_white_noise)
from .revcorr import (CLASS_A, CLASS_B, Template, TemplateAccumulator,
                      TrialRecord, accumulate, estimate_noise_only, merge,
                      record_to_json)

RESPONSE_YES = "yes"
RESPONSE_NO = "no"
# Wire protocol: "yes" (target seen) maps to class A, "no" to class B.
_RESPONSE_TO_CLASS = {RESPONSE_YES: CLASS_A, RESPONSE_NO: CLASS_B}

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")

_CONFIG_FILE = "config.json"
_LOG_FILE = "trials.jsonl"


class UnknownStimulusError(InputError):
    """The submitted stimulus_id was never issued to this worker."""


class DuplicateSessionError(InputError):
    """A session with this id already exists in the data directory."""


class SessionNotFoundError(InputError):
    """No persisted session with this id."""


@dataclass(frozen=True)
class QualificationRule:
    """A worker counts as qualified once they have answered at least
    ``min_catch_seen`` catch trials with accuracy >= ``min_catch_accuracy``
    (compared with 1e-9 slack to absorb float division).
    """

    min_catch_seen: int
    min_catch_accuracy: float

    def __post_init__(self):
        if self.min_catch_seen < 0:
            raise InputError("min_catch_seen must be >= 0")
        if not 0.0 < self.min_catch_accuracy <= 1.0:
            raise InputError("min_catch_accuracy must lie in (0, 1]")

    def qualified(self, catch_seen: int, catch_correct: int) -> bool:
        if catch_seen < self.min_catch_seen:
            return False
        if catch_seen == 0:
            return True
        return catch_correct >= self.min_catch_accuracy * catch_seen - 1e-9

    def to_dict(self) -> dict:
        return {"min_catch_seen": self.min_catch_seen,
                "min_catch_accuracy": self.min_catch_accuracy}


@dataclass(frozen=True, eq=False)
class CatchSource:
    """One known-answer stimulus: either a noise seed or stored values."""

    true_class: str
    seed: Optional[int] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.true_class not in (CLASS_A, CLASS_B):
            raise InputError("catch true_class must be 'A' or 'B'")
        if (self.seed is None) == (self.values is None):
            raise InputError("catch item needs exactly one of seed or values")
        if self.values is not None:
            v = np.asarray(self.values, dtype=np.float64)
            if v.ndim != 1 or not np.all(np.isfinite(v)):
                raise InputError("catch values must be a finite 1-D vector")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)

    def vector(self, space: FeatureSpace) -> FeatureVector:
        if self.seed is not None:
            return sample_white_noise(space, self.seed)
        if self.values.shape[0] != space.dimension:
            raise InputError(
                f"catch vector has dimension {self.values.shape[0]}, "
                f"space needs {space.dimension}")
        return FeatureVector(space.id, self.values)

    def to_dict(self) -> dict:
        d: dict = {"true_class": self.true_class}
        if self.seed is not None:
            d["seed"] = self.seed
        else:
            d["values"] = [float(v) for v in self.values]
        return d

    @staticmethod
    def from_dict(d: dict) -> "CatchSource":
        return CatchSource(true_class=d.get("true_class"),
                           seed=d.get("seed"),
                           values=d.get("values"))


@dataclass(frozen=True, eq=False)
class SessionConfig:
    session_id: str
    space: FeatureSpace
    category_name: str
    n_target_trials: int
    scales: tuple
    catch_rate: float
    catch_pool: tuple
    qualification: QualificationRule
    seed: int

    def __post_init__(self):
        if not _SESSION_ID_RE.match(self.session_id or ""):
            raise InputError(
                "session_id must be nonempty and use only letters, digits, "
                "'.', '_' or '-'")
        if self.space.kind == EXTERNAL:
            raise InputError(
                "labeling sessions need a renderable space (hog or raw_pixel)")
        if not self.category_name:
            raise InputError("category_name must be nonempty")
        if self.n_target_trials < 1:
            raise InputError("n_target_trials must be >= 1")
        scales = tuple(int(s) for s in self.scales)
        if len(scales) != 3 or any(s < 1 for s in scales):
            raise InputError("scales must be exactly 3 positive integers")
        object.__setattr__(self, "scales", scales)
        if not 0.0 <= self.catch_rate < 1.0:
            raise InputError("catch_rate must lie in [0, 1)")
        pool = tuple(self.catch_pool)
        object.__setattr__(self, "catch_pool", pool)
        if self.catch_rate > 0.0 and not pool:
            raise InputError("catch_rate > 0 requires a nonempty catch_pool")
        for item in pool:
            if item.values is not None and \
                    item.values.shape[0] != self.space.dimension:
                raise InputError(
                    "catch_pool vector dimension does not match the space")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    @property
    def catch_period(self) -> int:
        """Catch slots recur every this many trials (0 = never).

        The effective catch rate is 1/round(1/catch_rate); rates are
        honored exactly when 1/catch_rate is an integer.
        """
        if self.catch_rate == 0.0:
            return 0
        return max(1, round(1.0 / self.catch_rate))

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "space": self.space.to_dict(),
            "category_name": self.category_name,
            "n_target_trials": self.n_target_trials,
            "scales": list(self.scales),
            "catch_rate": self.catch_rate,
            "catch_pool": [c.to_dict() for c in self.catch_pool],
            "qualification": self.qualification.to_dict(),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SessionConfig":
        if not isinstance(d, dict):
            raise InputError("session config must be a JSON object")
        required = ("session_id", "space", "category_name",
                    "n_target_trials", "scales")
        missing = [k for k in required if k not in d]
        if missing:
            raise InputError(f"session config missing fields: {missing}")
        catch_rate = float(d.get("catch_rate", 0.0))
        qual = d.get("qualification")
        if qual is None:
            # Catch-free sessions cannot demand catch history.
            qual_rule = (QualificationRule(5, 0.8) if catch_rate > 0.0
                         else QualificationRule(0, 0.8))
        else:
            qual_rule = QualificationRule(
                min_catch_seen=int(qual.get("min_catch_seen", 5)),
                min_catch_accuracy=float(qual.get("min_catch_accuracy", 0.8)))
        return SessionConfig(
            session_id=str(d["session_id"]),
            space=FeatureSpace.from_dict(d["space"]),
            category_name=str(d["category_name"]),
            n_target_trials=int(d["n_target_trials"]),
            scales=tuple(d["scales"]),
            catch_rate=catch_rate,
            catch_pool=tuple(CatchSource.from_dict(c)
                             for c in d.get("catch_pool", [])),
            qualification=qual_rule,
            seed=int(d.get("seed", 0)),
        )


@dataclass
class Stimulus:
    """One served trial: the underlying vector rendered at three scales.

    ``is_catch`` and ``true_class`` exist for server-side bookkeeping
    only and must never reach a client serialization.
    """

    stimulus_id: str
    vector: FeatureVector
    images: list
    index: int
    total: int
    is_catch: bool
    true_class: Optional[str]
    sample_seed: int


@dataclass
class _WorkerState:
    labeled: int = 0
    catch_seen: int = 0
    catch_correct: int = 0
    acc: Optional[TemplateAccumulator] = None


def _stimulus_id(worker: str, index: int) -> str:
    return f"{index:06d}:{worker}"


def _parse_stimulus_id(stimulus_id: str) -> Optional[tuple]:
    head, sep, worker = stimulus_id.partition(":")
    if not sep or len(head) != 6 or not head.isdigit():
        return None
    return int(head), worker


class LabelingSession:
    """One category's labeling run; all mutation goes through a lock.

    Use ``create`` for a fresh session or ``load`` to rebuild one from
    its persisted config and trial log.
    """

    def __init__(self, config: SessionConfig, directory: str):
        self.config = config
        self.directory = directory
        self._lock = threading.RLock()
        self._workers: dict[str, _WorkerState] = {}
        self._log_handle = None

    # -- lifecycle -------------------------------------------------------

    @classmethod
    def create(cls, config: SessionConfig, data_dir: str) -> "LabelingSession":
        directory = os.path.join(data_dir, config.session_id)
        if os.path.exists(os.path.join(directory, _CONFIG_FILE)):
            raise DuplicateSessionError(
                f"session {config.session_id!r} already exists")
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, _CONFIG_FILE), "w",
                  encoding="utf-8") as f:
            json.dump(config.to_dict(), f, indent=2)
            f.write("\n")
        session = cls(config, directory)
        session._open_log()
        return session

    @classmethod
    def load(cls, data_dir: str, session_id: str) -> "LabelingSession":
        directory = os.path.join(data_dir, session_id)
        config_path = os.path.join(directory, _CONFIG_FILE)
        if not os.path.exists(config_path):
            raise SessionNotFoundError(f"no session {session_id!r} under {data_dir}")
        with open(config_path, "r", encoding="utf-8") as f:
            config = SessionConfig.from_dict(json.load(f))
        if config.session_id != session_id:
            raise InputError(
                f"directory {session_id!r} holds config for "
                f"{config.session_id!r}")
        session = cls(config, directory)
        log_path = session.log_path
        if os.path.exists(log_path):
            from .revcorr import iter_trial_log
            for record in iter_trial_log(log_path):
                session._apply(record)
        session._open_log()
        return session

    @property
    def log_path(self) -> str:
        return os.path.join(self.directory, _LOG_FILE)

    def _open_log(self):
        self._log_handle = open(self.log_path, "a", encoding="utf-8")

    def close(self):
        with self._lock:
            if self._log_handle is not None:
                self._log_handle.close()
                self._log_handle = None

    # -- deterministic schedule ------------------------------------------

    def _worker(self, worker: str) -> _WorkerState:
        if not worker:
            raise InputError("worker id must be nonempty")
        ws = self._workers.get(worker)
        if ws is None:
            ws = _WorkerState(acc=TemplateAccumulator.empty(self.config.space))
            self._workers[worker] = ws
        return ws

    def _is_catch_slot(self, worker: str, index: int) -> bool:
        period = self.config.catch_period
        if period == 0:
            return False
        offset = rng.mix_seeds(self.config.seed,
                               f"catch-offset:{worker}") % period
        return (index + offset) % period == 0

    def _catch_item(self, worker: str, index: int) -> tuple:
        """Deterministic (pool index, CatchSource) for a catch slot."""
        pool = self.config.catch_pool
        k = rng.mix_seeds(self.config.seed,
                          f"catch-pick:{worker}:{index}") % len(pool)
        return k, pool[k]

    def _noise_seed(self, worker: str, index: int) -> int:
        return rng.mix_seeds(self.config.seed, f"stimulus:{worker}:{index}")

    def _build_stimulus(self, worker: str, index: int) -> Stimulus:
        cfg = self.config
        if self._is_catch_slot(worker, index):
            pool_index, item = self._catch_item(worker, index)
            vec = item.vector(cfg.space)
            is_catch, true_class, seed = True, item.true_class, pool_index
        else:
            seed = self._noise_seed(worker, index)
            vec = sample_white_noise(cfg.space, seed)
            is_catch, true_class = False, None
        images = [render_for_labeling(vec, cfg.space, s) for s in cfg.scales]
        return Stimulus(
            stimulus_id=_stimulus_id(worker, index), vector=vec,
            images=images, index=index, total=cfg.n_target_trials,
            is_catch=is_catch, true_class=true_class, sample_seed=seed)

    # -- serving ----------------------------------------------------------

    def next_stimulus(self, worker: str) -> Optional[Stimulus]:
        """The worker's outstanding stimulus, or None when they are done.

        Calling repeatedly without submitting a label returns the same
        stimulus, bit for bit.
        """
        with self._lock:
            ws = self._worker(worker)
            if ws.labeled >= self.config.n_target_trials:
                return None
            return self._build_stimulus(worker, ws.labeled)

    def submit_label(self, worker: str, stimulus_id: str, response: str,
                     timestamp: int = 0) -> dict:
        """Record one yes/no answer; duplicates acknowledge without effect."""
        if response not in _RESPONSE_TO_CLASS:
            raise InputError(
                f"response must be {RESPONSE_YES!r} or {RESPONSE_NO!r}, "
                f"got {response!r}")
        with self._lock:
            ws = self._worker(worker)
            parsed = _parse_stimulus_id(stimulus_id)
            if parsed is None or parsed[1] != worker:
                raise UnknownStimulusError(
                    f"stimulus {stimulus_id!r} was not issued to worker "
                    f"{worker!r}")
            index = parsed[0]
            if index < ws.labeled:
                return self._ack(ws)
            if index > ws.labeled or index >= self.config.n_target_trials:
                raise UnknownStimulusError(
                    f"stimulus {stimulus_id!r} is not outstanding "
                    f"(expected index {ws.labeled})")
            stim = self._build_stimulus(worker, index)
            record = TrialRecord(
                trial_id=stim.stimulus_id,
                sample_seed=stim.sample_seed,
                space_id=self.config.space.id,
                response=_RESPONSE_TO_CLASS[response],
                is_catch=stim.is_catch,
                true_class=stim.true_class,
                observer_id=worker,
                cohort=None,
                timestamp=timestamp,
            )
            self._append(record)
            self._apply(record, vector=stim.vector)
            return self._ack(ws)

    def _ack(self, ws: _WorkerState) -> dict:
        return {
            "progress": {"labeled": ws.labeled,
                         "total": self.config.n_target_trials},
            "qualified": self.config.qualification.qualified(
                ws.catch_seen, ws.catch_correct),
        }

    def _append(self, record: TrialRecord):
        self._log_handle.write(record_to_json(record))
        self._log_handle.write("\n")
        self._log_handle.flush()

    def _apply(self, record: TrialRecord, vector: Optional[FeatureVector] = None):
        """State update shared by live submits and log replay."""
        ws = self._worker(record.observer_id)
        ws.labeled += 1
        if record.is_catch:
            ws.catch_seen += 1
            if record.response == record.true_class:
                ws.catch_correct += 1
            return
        if vector is None:
            vector = sample_white_noise(self.config.space, record.sample_seed)
        ws.acc = accumulate(ws.acc, record, vector)

    # -- estimation --------------------------------------------------------

    def qualified_workers(self) -> list:
        with self._lock:
            rule = self.config.qualification
            return sorted(w for w, ws in self._workers.items()
                          if rule.qualified(ws.catch_seen, ws.catch_correct))

    def worker_status(self, worker: str) -> dict:
        with self._lock:
            ws = self._worker(worker)
            return {
                "labeled": ws.labeled,
                "catch_seen": ws.catch_seen,
                "catch_correct": ws.catch_correct,
                "qualified": self.config.qualification.qualified(
                    ws.catch_seen, ws.catch_correct),
            }

    def current_template(self) -> tuple:
        """(Template, glyph image) over qualified workers' non-catch trials.

        Raises EstimationError while either response cell is still empty,
        which callers surface as a not-ready status.
        """
        with self._lock:
            rule = self.config.qualification
            combined = TemplateAccumulator.empty(self.config.space)
            for worker in sorted(self._workers):
                ws = self._workers[worker]
                if rule.qualified(ws.catch_seen, ws.catch_correct):
                    combined = merge(combined, ws.acc)
            template = estimate_noise_only(combined)
            glyph = render_for_labeling(template.as_vector(), self.config.space,
                                        max(self.config.scales))
            return template, glyph

    # -- export -------------------------------------------------------------

    def iter_export_lines(self) -> Iterator[str]:
        """Raw log lines (each ending in a newline); empty session, no lines."""
        with self._lock:
            self._log_handle.flush()
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, "r", encoding="utf-8") as f:
            for line in f:
                yield line


def list_sessions(data_dir: str) -> list:
    """Session ids persisted under ``data_dir``, sorted."""
    if not os.path.isdir(data_dir):
        return []
    out = []
    for name in sorted(os.listdir(data_dir)):
        if os.path.exists(os.path.join(data_dir, name, _CONFIG_FILE)):
            out.append(name)
    return out
