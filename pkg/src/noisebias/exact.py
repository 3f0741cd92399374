"""Error-free vector accumulation.

Running sums of float64 vectors are kept as Shewchuk-style expansions
(lists of partial arrays whose exact real sum equals the accumulated
total).  Addition and merging are error-free transformations, so the
represented value is the exact real-number sum of everything added, in
any order and any grouping.  Reading the value out rounds that exact sum
once per coordinate (via ``math.fsum``), which makes sharded-and-merged
accumulation bit-identical to sequential accumulation.

Arrays held in the partials list are never mutated in place; copies are
shallow.
"""

from __future__ import annotations

import math

import numpy as np


class ExactVectorSum:
    """Exact sum of a sequence of float64 vectors of fixed dimension."""

    __slots__ = ("dimension", "_partials")

    def __init__(self, dimension: int):
        self.dimension = dimension
        self._partials: list[np.ndarray] = []

    def add(self, x: np.ndarray) -> None:
        """Add one vector, exactly."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected shape ({self.dimension},), got {x.shape}")
        new_partials: list[np.ndarray] = []
        for p in self._partials:
            # Branch-free two-sum: s + err == x + p exactly, any magnitudes.
            s = x + p
            bv = s - x
            err = (x - (s - bv)) + (p - bv)
            if err.any():
                new_partials.append(err)
            x = s
        new_partials.append(x)
        self._partials = new_partials
        if len(self._partials) > 12:
            self._compress()

    def _compress(self) -> None:
        # A row survives ``add`` if any single coordinate is nonzero, so row
        # count outgrows the per-coordinate expansion lengths.  Packing each
        # column's nonzero entries upward (order preserved) and dropping the
        # all-zero tail rows changes no per-coordinate sum.
        stacked = np.stack(self._partials, axis=0)
        order = np.argsort(stacked == 0.0, axis=0, kind="stable")
        packed = np.take_along_axis(stacked, order, axis=0)
        keep = max(1, int(np.max(np.count_nonzero(stacked, axis=0), initial=1)))
        self._partials = [packed[i] for i in range(keep)]

    def merge(self, other: "ExactVectorSum") -> None:
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch in merge")
        for p in other._partials:
            self.add(p)

    def copy(self) -> "ExactVectorSum":
        out = ExactVectorSum(self.dimension)
        out._partials = list(self._partials)
        return out

    def value(self) -> np.ndarray:
        """The exact accumulated sum, rounded once per coordinate."""
        if not self._partials:
            return np.zeros(self.dimension)
        if len(self._partials) == 1:
            return self._partials[0].copy()
        stacked = np.stack(self._partials, axis=0)
        return np.array([math.fsum(stacked[:, j]) for j in range(self.dimension)])
