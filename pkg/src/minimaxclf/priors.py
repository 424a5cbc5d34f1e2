"""Points on the class-probability simplex and simplex geometry helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_ATOL = 1e-12


@dataclass(frozen=True)
class Prior:
    """A probability vector over the K classes.

    Coordinates must be nonnegative and sum to one within ``SIMPLEX_ATOL``.
    The wrapped array is copied and made read-only at construction.
    """

    probabilities: np.ndarray = field()

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=np.float64).copy()
        if p.ndim != 1 or p.size < 2:
            raise ValueError("prior must be a 1-d vector with at least 2 classes")
        if not np.all(np.isfinite(p)):
            raise ValueError("prior has non-finite entries")
        if np.any(p < 0):
            raise ValueError(f"prior has negative entries: {p[p < 0]}")
        if abs(float(p.sum()) - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"prior sums to {p.sum()!r}, expected 1 within {SIMPLEX_ATOL}")
        p.flags.writeable = False
        object.__setattr__(self, "probabilities", p)

    @property
    def class_count(self) -> int:
        return int(self.probabilities.size)

    @property
    def p(self) -> np.ndarray:
        return self.probabilities

    @staticmethod
    def uniform(class_count: int) -> "Prior":
        return Prior(np.full(class_count, 1.0 / class_count))

    @staticmethod
    def from_counts(counts: np.ndarray) -> "Prior":
        """Empirical prior from realized per-class sample counts."""
        c = np.asarray(counts, dtype=np.float64)
        total = c.sum()
        if total <= 0:
            raise ValueError("counts sum to zero, empirical prior undefined")
        return Prior(c / total)

    @staticmethod
    def from_vector(values) -> "Prior":
        """Normalize an arbitrary nonnegative vector onto the simplex."""
        v = np.asarray(values, dtype=np.float64)
        if np.any(v < 0):
            raise ValueError("cannot normalize a vector with negative entries")
        return Prior(v / v.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Prior):
            return NotImplemented
        return np.array_equal(self.probabilities, other.probabilities)

    def __hash__(self) -> int:
        return hash(self.probabilities.tobytes())


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Standard sort-and-threshold procedure: find the largest k such that
    the shifted top-k entries stay positive, clip the rest to zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    k = int(ks[cond][-1])
    tau = css[k - 1] / k
    return np.maximum(v - tau, 0.0)
