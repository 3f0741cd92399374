"""Seeded random-number plumbing shared by the whole package.

Every stochastic quantity in this codebase is derived from explicit 64-bit
seeds through exactly two primitives, so that any run can be replayed
bit-for-bit from its logged seeds:

* ``generator(seed)`` returns a numpy ``Generator`` backed by the
  counter-based Philox4x64 bit generator, keyed by the seed.  Distinct keys
  give statistically independent streams, which is what lets trial logs
  reference stimuli by seed alone.
* ``derive_seed(base, index)`` maps a (base seed, index) pair to a fresh
  64-bit seed via SplitMix64.  It is stateless, so the i-th seed of a
  schedule can be recomputed without generating the first i-1.

Seeds are accepted as any Python int and reduced mod 2**64; derived seeds
are returned in [0, 2**63) so they stay inside a signed 64-bit range for
JSON consumers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
# SplitMix64 constants (Steele, Lea & Flood 2014).
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def generator(seed: int) -> np.random.Generator:
    """Philox-backed generator keyed by ``seed`` (reduced mod 2**64)."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def splitmix64(state: int) -> int:
    """One SplitMix64 output step for the given 64-bit state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, index: int) -> int:
    """Deterministic per-index seed for schedules keyed by ``base``.

    Nonnegative and < 2**63.  Stateless: derive_seed(b, i) never depends
    on other indices.
    """
    if index < 0:
        raise ValueError("index must be nonnegative")
    z = splitmix64((base & _MASK64) ^ splitmix64(index))
    return z >> 1


def mix_seeds(base: int, tag: str) -> int:
    """Fold a string tag (e.g. a worker id) into a base seed.

    Uses a stable byte-level hash, not Python's randomized ``hash``.
    """
    h = 0xCBF29CE484222325  # FNV-1a offset basis
    for b in tag.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return splitmix64((base & _MASK64) ^ h) >> 1
