"""Exact lattice realization of the resampling-expectation operator.

The operator maps g to q -> E[g(T/n)] with T ~ Multinomial(n, q); restricted
to lattice arguments it is a row-stochastic transfer matrix, so operator
powers are matrix-vector products (cost j*L^2 for lattice size L instead of
the L^j of naive nested sums). On top of it sit the alternating debiasing
combination, its exact mean over datasets, and exact bias/variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable

import numpy as np

from .errors import CapExceededError
from .simplex import (
    DEFAULT_LATTICE_CAP,
    CountsVector,
    ProbVector,
    SimplexLattice,
    enumerate_lattice,
    lattice_size,
    multinomial_pmf_vector,
)

MAX_ORDER = 20  # weights C(k, j+1) stay exactly representable; alternating
# cancellation is still mild at this order
DEFAULT_MATRIX_ENTRY_CAP = 50_000_000


@dataclass(frozen=True)
class DebiasWeights:
    """Coefficients of the order-k debiasing combination.

    weights[j] = C(k, j+1) * (-1)^j for j = 0..k-1; they sum to 1 exactly
    in integer arithmetic, so the combination preserves constants.
    """

    k: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.flags.writeable = False
        if w.shape != (self.k,):
            raise ValueError(f"expected {self.k} weights, got shape {w.shape}")
        if w.sum() != 1.0:  # integer-valued floats below 2^53: sum is exact
            raise ValueError(f"debias weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)


def debias_weights(k: int) -> DebiasWeights:
    """Alternating binomial weights for the order-k debiased estimator."""
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order k must be in [1, {MAX_ORDER}], got {k}")
    w = np.array([comb(k, j + 1) * (-1) ** j for j in range(k)], dtype=float)
    return DebiasWeights(k=k, weights=w)


def _mean_weights(k: int) -> np.ndarray:
    # Coefficients of the exact dataset-mean of the debiased estimator:
    # coefficient C(k, j)*(-1)^(j-1) on the j-th operator power, j = 1..k.
    return np.array([comb(k, j) * (-1) ** (j - 1) for j in range(1, k + 1)], dtype=float)


@dataclass(frozen=True)
class TransferMatrix:
    """Exact operator restricted to lattice arguments.

    rows[i] is the multinomial pmf over the whole lattice when the prior is
    points[i]/n, so rows are non-negative and sum to 1.
    """

    lattice: SimplexLattice
    rows: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=float)
        L = self.lattice.size
        if r.shape != (L, L):
            raise ValueError(f"expected {(L, L)} matrix, got {r.shape}")
        if np.any(r < 0):
            raise ValueError("transfer matrix entries must be non-negative")
        row_err = np.abs(r.sum(axis=1) - 1.0).max()
        if row_err > 1e-10:
            raise ValueError(f"transfer matrix rows sum to 1 +/- {row_err}")
        r = r.copy()
        r.flags.writeable = False
        object.__setattr__(self, "rows", r)


@dataclass(frozen=True)
class LatticeFunction:
    """Values of a function g at every lattice point nu/n."""

    lattice: SimplexLattice
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.flags.writeable = False
        if v.shape != (self.lattice.size,):
            raise ValueError(
                f"expected {self.lattice.size} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("lattice function values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, g: Callable, lattice: SimplexLattice) -> "LatticeFunction":
        grid = lattice.grid()
        vals = np.array([float(g(grid[i])) for i in range(lattice.size)])
        return cls(lattice=lattice, values=vals)


def transfer_matrix(
    n: int,
    m: int,
    lattice_cap: int = DEFAULT_LATTICE_CAP,
    entry_cap: int = DEFAULT_MATRIX_ENTRY_CAP,
) -> TransferMatrix:
    """Materialize the exact operator matrix for the (n, m) lattice."""
    size = lattice_size(n, m)
    if size * size > entry_cap:
        raise CapExceededError(
            f"transfer matrix for n={n}, m={m} needs {size * size} entries, "
            f"over the cap of {entry_cap}"
        )
    lat = enumerate_lattice(n, m, cap=lattice_cap)
    rows = np.empty((size, size))
    for i in range(size):
        rows[i] = multinomial_pmf_vector(lat, lat.points[i] / n)
    return TransferMatrix(lattice=lat, rows=rows)


def iterate_operator(g: LatticeFunction, M: TransferMatrix, j: int) -> LatticeFunction:
    """Apply the operator j times to a lattice function; j = 0 is the identity."""
    if j < 0:
        raise ValueError(f"iteration count must be >= 0, got {j}")
    if g.lattice.n != M.lattice.n or g.lattice.m != M.lattice.m:
        raise ValueError("lattice mismatch between function and transfer matrix")
    v = g.values
    for _ in range(j):
        v = M.rows @ v
    return LatticeFunction(lattice=M.lattice, values=v)


@lru_cache(maxsize=32)
def _cached_lattice(n: int, m: int) -> SimplexLattice:
    return enumerate_lattice(n, m)


@lru_cache(maxsize=8)
def _cached_matrix(n: int, m: int) -> TransferMatrix:
    return transfer_matrix(n, m)


@lru_cache(maxsize=256)
def _cached_values(g: Callable, n: int, m: int) -> np.ndarray:
    # g must be deterministic: it is sampled onto the lattice once per (n, m).
    return LatticeFunction.from_callable(g, _cached_lattice(n, m)).values


def _operator_iterates(g: Callable, n: int, m: int, j_max: int) -> list[np.ndarray]:
    # [g, Bg, B^2 g, ..., B^{j_max} g] as lattice value vectors.
    vals = _cached_values(g, n, m)
    out = [vals]
    if j_max > 0:
        M = _cached_matrix(n, m).rows
        for _ in range(j_max):
            out.append(M @ out[-1])
    return out


def bernstein_apply(g: Callable, q: ProbVector, n: int) -> float:
    """E[g(T/n)] with T ~ Multinomial(n, q), summed exactly over the lattice."""
    q = q if isinstance(q, ProbVector) else ProbVector(q)
    lat = _cached_lattice(n, q.m)
    mass = multinomial_pmf_vector(lat, q)
    return float(mass @ _cached_values(g, n, q.m))


def debiased_estimate(g: Callable, T: CountsVector, k: int) -> float:
    """Order-k debiased estimate of g at the empirical point T/n.

    Returns sum_j weights[j] * (B^j g)(T/n) with the alternating binomial
    weights; k = 1 reduces to the plug-in value g(T/n).
    """
    T = T if isinstance(T, CountsVector) else CountsVector(T)
    w = debias_weights(k).weights
    iters = _operator_iterates(g, T.n, T.m, k - 1)
    idx = _cached_lattice(T.n, T.m).index_of(T.counts)
    return float(sum(w[j] * iters[j][idx] for j in range(k)))


def debiased_estimate_mean(g: Callable, q: ProbVector, n: int, k: int) -> float:
    """Exact mean of the order-k debiased estimate over T ~ Multinomial(n, q).

    Equals sum_{j=1}^{k} C(k,j)(-1)^{j-1} (B^j g)(q): applying the operator
    once to the debiasing combination telescopes into this alternating sum.
    """
    q = q if isinstance(q, ProbVector) else ProbVector(q)
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order k must be in [1, {MAX_ORDER}], got {k}")
    lat = _cached_lattice(n, q.m)
    mass = multinomial_pmf_vector(lat, q)
    iters = _operator_iterates(g, n, q.m, k - 1)
    coef = _mean_weights(k)
    return float(sum(coef[j - 1] * (mass @ iters[j - 1]) for j in range(1, k + 1)))


def exact_bias(g: Callable, q: ProbVector, n: int, k: int) -> float:
    """Exact bias of the order-k debiased estimate at the true prior q."""
    q = q if isinstance(q, ProbVector) else ProbVector(q)
    return debiased_estimate_mean(g, q, n, k) - float(g(np.asarray(q)))


def exact_variance(g: Callable, q: ProbVector, n: int, k: int) -> float:
    """Exact variance of the order-k debiased estimate over T ~ Multinomial(n, q)."""
    q = q if isinstance(q, ProbVector) else ProbVector(q)
    w = debias_weights(k).weights
    lat = _cached_lattice(n, q.m)
    mass = multinomial_pmf_vector(lat, q)
    iters = _operator_iterates(g, n, q.m, k - 1)
    debiased = np.zeros(lat.size)
    for j in range(k):
        debiased += w[j] * iters[j]
    first = float(mass @ debiased)
    second = float(mass @ (debiased * debiased))
    return second - first * first


def central_moment(n: int, q: ProbVector, alpha) -> float:
    """Mixed central moment E[prod_j (T_j/n - q_j)^{alpha_j}], exact.

    The multi-index is capped at |alpha|_1 <= 8; higher orders are outside
    the validated range of the scaling diagnostics.
    """
    q = q if isinstance(q, ProbVector) else ProbVector(q)
    a = np.asarray(alpha, dtype=np.int64)
    if a.shape != (q.m,):
        raise ValueError(f"multi-index must have length {q.m}, got shape {a.shape}")
    if np.any(a < 0):
        raise ValueError("multi-index entries must be non-negative")
    if a.sum() > 8:
        raise ValueError(f"|alpha|_1 = {a.sum()} over the cap of 8")
    lat = _cached_lattice(n, q.m)
    mass = multinomial_pmf_vector(lat, q)
    dev = lat.grid() - np.asarray(q)[None, :]
    term = np.prod(dev ** a[None, :], axis=1)
    return float(mass @ term)


def contraction_norm(g: Callable, n: int, m: int, r: int) -> float:
    """Sup over lattice points of |((B - I)^r g)(mu/n)|.

    For g with 2r bounded derivatives this decays like n^{-r}; constants and
    linear functions are annihilated exactly.
    """
    if r < 1:
        raise ValueError(f"repetition count must be >= 1, got {r}")
    M = _cached_matrix(n, m).rows
    v = _cached_values(g, n, m)
    for _ in range(r):
        v = M @ v - v
    return float(np.abs(v).max())
