"""Recursive resampling chains and the outer Monte Carlo driver.

A chain starts at the observed data and repeatedly bootstraps itself; the
order-k debiased realization combines the plug-in functional across the first
k stages with the alternating binomial weights. The outer driver replicates
this over fresh datasets with per-replicate random streams, so results are
bit-identical for a fixed root seed no matter how many worker threads run.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import isnan, sqrt
from typing import Callable

import numpy as np

from .bayes import BoundedLikelihood, WeightedSampleSet, plugin_expectation
from .operators import MAX_ORDER, debias_weights
from .simplex import ProbVector, enumerate_lattice, multinomial_pmf_vector

_SEED_LIMIT = 2**64
_CHUNK = 4096  # replicates per work unit; fixed so the reduction order is too


def _check_seed(seed: int) -> int:
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


@dataclass(frozen=True)
class ResampleChain:
    """Stages of the recursive bootstrap; stage 1 is the data verbatim."""

    stages: tuple[WeightedSampleSet, ...]
    seed: int | None = None

    def __post_init__(self):
        if len(self.stages) < 1:
            raise ValueError("chain needs at least one stage")
        n = self.stages[0].n
        for stage in self.stages[1:]:
            if stage.n != n:
                raise ValueError("all chain stages must have the same size")

    @property
    def k(self) -> int:
        return len(self.stages)

    @property
    def n(self) -> int:
        return self.stages[0].n


def build_chain(data: WeightedSampleSet, k: int, seed: int) -> ResampleChain:
    """Grow a k-stage chain: each stage is n uniform-with-replacement draws
    from the previous one. Fully reproducible from (data, k, seed)."""
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order k must be in [1, {MAX_ORDER}], got {k}")
    seed = _check_seed(seed)
    stages = [data]
    if k > 1:
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        pts = data.points
        n = data.n
        for _ in range(k - 1):
            pts = pts[rng.integers(0, n, size=n)]
            stages.append(WeightedSampleSet(pts))
    return ResampleChain(stages=tuple(stages), seed=seed)


def debiased_realization(chain: ResampleChain, functional: Callable, k: int | None = None) -> float:
    """Signed combination sum_j weights[j] * functional(stage_{j+1})."""
    if k is None:
        k = chain.k
    if chain.k < k:
        raise ValueError(f"chain has {chain.k} stages, needs at least {k}")
    w = debias_weights(k).weights
    return float(sum(w[j] * float(functional(chain.stages[j])) for j in range(k)))


@dataclass(frozen=True)
class MCConfig:
    """Outer Monte Carlo plan: n draws per dataset, N replicate datasets."""

    n: int
    k: int
    n_reps: int
    root_seed: int
    inner_reps: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.k <= MAX_ORDER:
            raise ValueError(f"order k must be in [1, {MAX_ORDER}], got {self.k}")
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.inner_reps < 1:
            raise ValueError(f"inner_reps must be >= 1, got {self.inner_reps}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        _check_seed(self.root_seed)


@dataclass(frozen=True)
class MCResult:
    mean: float
    variance: float
    std_error: float
    n_reps: int
    wall_time: float


def _replicate_value(
    prior_sampler: Callable, functional: Callable, cfg: MCConfig, rep: int
) -> float:
    # One independent stream per replicate, keyed by (root_seed, rep).
    rng = np.random.default_rng(np.random.SeedSequence([cfg.root_seed, rep]))
    data = prior_sampler(cfg.n, rng)
    total = 0.0
    for _ in range(cfg.inner_reps):
        chain_seed = int(rng.integers(0, 2**63))
        chain = build_chain(data, cfg.k, chain_seed)
        total += debiased_realization(chain, functional, cfg.k)
    value = total / cfg.inner_reps
    if isnan(value):
        raise FloatingPointError(f"functional returned NaN at replicate {rep}")
    return value


def _run_span(args) -> tuple[int, float, float]:
    prior_sampler, functional, cfg, lo, hi = args
    count, mean, m2 = 0, 0.0, 0.0
    for rep in range(lo, hi):
        v = _replicate_value(prior_sampler, functional, cfg, rep)
        count += 1
        delta = v - mean
        mean += delta / count
        m2 += delta * (v - mean)
    return count, mean, m2


def _merge(a: tuple[int, float, float], b: tuple[int, float, float]):
    ca, ma, sa = a
    cb, mb, sb = b
    count = ca + cb
    delta = mb - ma
    mean = ma + delta * cb / count
    m2 = sa + sb + delta * delta * ca * cb / count
    return count, mean, m2


def outer_mc(prior_sampler: Callable, functional: Callable, cfg: MCConfig) -> MCResult:
    """Replicate the debiased realization over N fresh datasets.

    prior_sampler(n, rng) must return a WeightedSampleSet drawn with the
    given generator and nothing else; the functional must be pure. Partial
    failures abort the whole run. The chunked one-pass moment accumulation
    merges in a fixed order, so the result does not depend on thread count.
    """
    start = time.perf_counter()
    spans = [
        (prior_sampler, functional, cfg, lo, min(lo + _CHUNK, cfg.n_reps))
        for lo in range(0, cfg.n_reps, _CHUNK)
    ]
    if cfg.threads == 1 or len(spans) == 1:
        partials = map(_run_span, spans)
    else:
        pool = ThreadPoolExecutor(max_workers=cfg.threads)
        try:
            partials = list(pool.map(_run_span, spans))
        finally:
            pool.shutdown(wait=True)
    count, mean, m2 = 0, 0.0, 0.0
    for part in partials:
        count, mean, m2 = _merge((count, mean, m2), part)
    variance = m2 / (count - 1) if count > 1 else 0.0
    return MCResult(
        mean=mean,
        variance=variance,
        std_error=sqrt(variance / count),
        n_reps=count,
        wall_time=time.perf_counter() - start,
    )


def debiased_expectation(
    data: WeightedSampleSet,
    likelihood: BoundedLikelihood,
    h: Callable,
    k: int,
    seed: int,
) -> float:
    """Single-dataset debiased estimate of a posterior expectation.

    Combines plugin_expectation across chain stages with the signed weights;
    h identically 1 returns exactly 1 (the signed mixture is normalized).
    """
    chain = build_chain(data, k, seed)
    w = debias_weights(k).weights
    return float(
        sum(w[j] * plugin_expectation(chain.stages[j], likelihood, h) for j in range(k))
    )


def exhaustive_chain_expectation(
    functional: Callable,
    prior: ProbVector,
    n: int,
    k: int,
    support: np.ndarray | None = None,
    weight_override: np.ndarray | None = None,
) -> float:
    """Exact expectation of the debiased realization by full enumeration.

    Enumerates every data multiset and every chain outcome (no sampling):
    counts for stage 1 follow Multinomial(n, prior), and each later stage
    follows Multinomial(n, previous/n). Stages are expanded into literal
    sample sets so the realization goes through the same code path as the
    Monte Carlo driver. ``weight_override`` substitutes the combination
    weights, which is only useful as a negative control.
    """
    prior = prior if isinstance(prior, ProbVector) else ProbVector(prior)
    m = prior.m
    pts = np.arange(m, dtype=float) if support is None else np.asarray(support, float)
    if pts.shape != (m,):
        raise ValueError(f"support must provide {m} points")
    lat = enumerate_lattice(n, m)
    stage_sets = [
        WeightedSampleSet(np.repeat(pts, lat.points[i])) for i in range(lat.size)
    ]
    # conditional pmf of the next stage given counts index i
    step = [multinomial_pmf_vector(lat, lat.points[i] / n) for i in range(lat.size)]
    first = multinomial_pmf_vector(lat, prior)

    def realization(stage_indices: list[int]) -> float:
        chain = ResampleChain(stages=tuple(stage_sets[i] for i in stage_indices))
        if weight_override is None:
            return debiased_realization(chain, functional, k)
        w = np.asarray(weight_override, dtype=float)
        return float(
            sum(w[j] * float(functional(chain.stages[j])) for j in range(len(w)))
        )

    def recurse(prefix: list[int], prob: float) -> float:
        if prob == 0.0:
            return 0.0
        if len(prefix) == k:
            return prob * realization(prefix)
        cond = step[prefix[-1]]
        return sum(
            recurse(prefix + [j], prob * cond[j])
            for j in range(lat.size)
            if cond[j] > 0.0
        )

    return sum(
        recurse([i], float(first[i])) for i in range(lat.size) if first[i] > 0.0
    )
