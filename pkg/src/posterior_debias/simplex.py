"""Discrete probability simplex: value types, count lattices, multinomial mass.

All probability-mass arithmetic is done in log space with log-gamma so that
lattice sizes up to the configured cap stay overflow-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import gammaln

from .errors import CapExceededError

DEFAULT_LATTICE_CAP = 5_000_000

# Stand-in for log(0): negative enough that exp() underflows to exactly 0.0
# even after scaling by any count, small enough never to overflow.
_LOG_ZERO = -1.0e9


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)  # copy, never alias caller storage
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProbVector:
    """Point on the probability simplex: entries >= 0 summing to 1 (tol 1e-12)."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen_array(self.probs, float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("probs must be finite")
        if np.any(p < 0):
            raise ValueError(f"negative probability entry: min={p.min()}")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def m(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


@dataclass(frozen=True)
class SignedProbVector:
    """Signed measure on m atoms whose entries sum to 1 (tol 1e-10).

    Entries may be negative; this is the natural output type of the debiasing
    combination applied to a probability vector.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _frozen_array(self.values, float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a nonempty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        total = float(v.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"signed entries sum to {total!r}, not 1")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class CountsVector:
    """Empirical counts over m categories; sum of entries is the sample size n."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("counts must be a nonempty 1-d vector")
        if not np.issubdtype(c.dtype, np.integer):
            rounded = np.rint(np.asarray(c, float))
            if not np.array_equal(rounded, np.asarray(c, float)):
                raise ValueError("counts must be integers")
            c = rounded
        c = _frozen_array(c, np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if c.sum() < 1:
            raise ValueError("counts must sum to at least 1")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def m(self) -> int:
        return self.counts.size

    def fractions(self) -> np.ndarray:
        """The empirical probability vector counts/n."""
        return self.counts / self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.counts, dtype=dtype)


def _lattice_points(n: int, m: int) -> np.ndarray:
    # Ascending lexicographic enumeration of {nu in N^m : sum nu = n}.
    if m == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for v in range(n + 1):
        tail = _lattice_points(n - v, m - 1)
        head = np.full((tail.shape[0], 1), v, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    return np.vstack(blocks)


@dataclass(frozen=True)
class SimplexLattice:
    """All count vectors of length m summing to n, with a fixed total order.

    Points are enumerated so that the first coordinate varies slowest; for
    m = 2 the index of (t, n-t) is simply t, matching binomial indexing.
    The enumeration is a bijection: ``index_of(points[i]) == i``.
    """

    n: int
    m: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        pts = _frozen_array(pts, np.int64)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def grid(self) -> np.ndarray:
        """Lattice points scaled into the simplex, shape (size, m)."""
        return self.points / self.n

    def point(self, index: int) -> CountsVector:
        return CountsVector(self.points[index])

    def index_of(self, counts) -> int:
        """Rank of a count vector in the enumeration (combinatorial, exact)."""
        c = np.asarray(counts, dtype=np.int64)
        if c.shape != (self.m,):
            raise ValueError(f"expected {self.m} categories, got shape {c.shape}")
        if np.any(c < 0) or int(c.sum()) != self.n:
            raise ValueError(f"{c.tolist()} is not on the (n={self.n}, m={self.m}) lattice")
        rank = 0
        remaining = self.n
        for i in range(self.m - 1):
            slots = self.m - i - 2
            for v in range(int(c[i])):
                rank += comb(remaining - v + slots, slots)
            remaining -= int(c[i])
        return rank


def lattice_size(n: int, m: int) -> int:
    """Number of count vectors of length m summing to n: C(n+m-1, m-1)."""
    return comb(n + m - 1, m - 1)


def enumerate_lattice(n: int, m: int, cap: int = DEFAULT_LATTICE_CAP) -> SimplexLattice:
    """Materialize the full count lattice for (n, m).

    Parameters
    ----------
    n : int
        Sample count, n >= 1.
    m : int
        Support size, m >= 1.
    cap : int
        Maximum admissible lattice size. Exceeding it raises
        :class:`CapExceededError`, which signals the caller to switch to the
        Monte Carlo path instead of attempting an exact computation.
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    size = lattice_size(n, m)
    if size > cap:
        raise CapExceededError(
            f"lattice for n={n}, m={m} has {size} points, over the cap of {cap}"
        )
    return SimplexLattice(n=n, m=m, points=_lattice_points(n, m))


def log_multinomial_pmf(nu, q) -> float:
    """Log of the multinomial pmf n!/(nu_1! ... nu_m!) * prod q_j^{nu_j}.

    Computed with log-gamma. The convention 0*log(0) = 0 applies when
    nu_j = 0 and q_j = 0; a positive count on a zero-probability category
    returns -inf (a sentinel, not an error). NaN probabilities are rejected.
    """
    c = np.asarray(nu.counts if isinstance(nu, CountsVector) else nu, dtype=np.int64)
    p = np.asarray(q.probs if isinstance(q, ProbVector) else q, dtype=float)
    if c.shape != p.shape:
        raise ValueError(f"shape mismatch: counts {c.shape} vs probs {p.shape}")
    if np.any(np.isnan(p)):
        raise ValueError("NaN in probability vector")
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    if np.any((p == 0) & (c > 0)):
        return float("-inf")
    n = int(c.sum())
    pos = c > 0
    return float(
        gammaln(n + 1) - gammaln(c + 1).sum() + (c[pos] * np.log(p[pos])).sum()
    )


def multinomial_pmf_vector(lattice: SimplexLattice, q, dtype=np.float64) -> np.ndarray:
    """Pmf of every lattice point under q, as one vectorized evaluation.

    Equivalent to exp(log_multinomial_pmf(nu, q)) over the whole lattice;
    categories with q_j = 0 get exact 0 mass through the log-zero sentinel.
    """
    p = np.asarray(q.probs if isinstance(q, ProbVector) else q, dtype=float)
    if p.shape != (lattice.m,):
        raise ValueError(f"expected {lattice.m} probabilities, got shape {p.shape}")
    if np.any(np.isnan(p)):
        raise ValueError("NaN in probability vector")
    pts = lattice.points
    log_coef = gammaln(lattice.n + 1) - gammaln(pts + 1).sum(axis=1)
    log_p = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), _LOG_ZERO)
    log_mass = pts @ log_p + log_coef
    return np.exp(log_mass.astype(dtype, copy=False))


def counts_from_samples(labels, m: int) -> CountsVector:
    """Tally integer support labels into a CountsVector over m categories."""
    arr = np.asarray(labels)
    if arr.size == 0:
        raise ValueError("empty sample list: n must be >= 1")
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = np.asarray(arr, np.int64)
        if not np.array_equal(as_int, arr):
            raise ValueError("labels must be integers")
        arr = as_int
    if arr.min() < 0 or arr.max() >= m:
        bad = arr[(arr < 0) | (arr >= m)][0]
        raise IndexError(f"label {bad} outside support range [0, {m})")
    return CountsVector(np.bincount(arr, minlength=m))
