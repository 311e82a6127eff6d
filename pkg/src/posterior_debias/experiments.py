"""Experiment runners: exact binary sweeps, mixture Monte Carlo, identity
checks, a rejection-sampling demo, and log-log slope fitting.

Runners return plain row dicts; CSV/JSON emission lives in the CLI layer so
every number is formatted once, with round-trip-exact precision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ._version import __version__
from .bayes import (
    DiscreteBayesMap,
    GaussianMixture,
    WeightedSampleSet,
    discrete_bayes,
    gaussian_likelihood,
    mixture_posterior_tail_prob,
    plugin_posterior_prob,
    BoundedLikelihood,
)
from .errors import CapExceededError, UnderpoweredRunError
from .operators import debiased_estimate, debiased_estimate_mean, exact_bias, exact_variance
from .rejection import expected_acceptance_rate, make_rejection_spec, rejection_sample_batch
from .resampling import MCConfig, exhaustive_chain_expectation, outer_mc
from .simplex import CountsVector, ProbVector

IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class SlopeFit:
    """OLS fit of log(value) against log(size)."""

    slope: float
    intercept: float
    r_squared: float
    points_used: int

    def __post_init__(self):
        if self.points_used < 2:
            raise ValueError("slope fit needs at least 2 points")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError(f"r_squared {self.r_squared} outside [0, 1]")


def fit_slope(sizes, values, drop_smallest: bool = False) -> SlopeFit:
    """Least-squares slope of log(value) on log(size).

    Values must be strictly positive (a zero bias cannot be slope-fit).
    ``drop_smallest`` removes the smallest size before fitting, for grids
    whose first point is still pre-asymptotic.
    """
    ns = np.asarray(sizes, dtype=float)
    vs = np.asarray(values, dtype=float)
    if ns.ndim != 1 or ns.shape != vs.shape:
        raise ValueError("sizes and values must be 1-d and the same length")
    if drop_smallest and ns.size > 2:
        keep = np.arange(ns.size) != int(np.argmin(ns))
        ns, vs = ns[keep], vs[keep]
    if ns.size < 2:
        raise ValueError("slope fit needs at least 2 points")
    if np.any(ns <= 0):
        raise ValueError("sizes must be positive")
    if np.any(vs <= 0):
        raise ValueError("slope fit needs positive values")
    x = np.log(ns)
    y = np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return SlopeFit(
        slope=float(slope), intercept=float(intercept), r_squared=r2, points_used=ns.size
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One declarative bundle for every subcommand; unused fields are ignored
    by runners that do not need them."""

    experiment: str
    n_grid: tuple[int, ...]
    k_values: tuple[int, ...]
    # discrete / binary setting
    q: float = 0.4
    # observation model
    y_obs: float = 2.0
    noise_var: float = 1.0
    threshold: float = 0.5
    # mixture prior
    mix_weights: tuple[float, ...] = (0.5, 0.5)
    mix_means: tuple[float, ...] = (0.0, 1.0)
    mix_variances: tuple[float, ...] = (1.0, 1.0)
    # Monte Carlo sizing; n_rule None picks n^3 for k=1 and n^4 otherwise
    n_rule: str | None = None
    n_fixed: int | None = None
    mc_cap: int = 10_000_000
    inner_reps: int = 1
    threads: int = 1
    # identity check
    m_values: tuple[int, ...] = (2, 3)
    corrupt_weights: tuple[float, ...] | None = None
    # rejection demo
    demo_n: int = 64
    demo_k: int = 2
    demo_draws: int = 100_000
    # fitting and bookkeeping
    drop_smallest: bool = False
    root_seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        known = {"binary_exact", "mixture_mc", "identity_check", "rejection_demo"}
        if self.experiment not in known:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 2:
            raise ValueError("n_grid needs at least 2 points")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if grid[0] < 1:
            raise ValueError("n_grid entries must be >= 1")
        object.__setattr__(self, "n_grid", grid)
        ks = tuple(int(k) for k in self.k_values)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("k_values must be non-empty positive integers")
        object.__setattr__(self, "k_values", ks)
        if self.n_rule not in (None, "n_pow3", "n_pow4", "fixed"):
            raise ValueError(f"unknown n_rule {self.n_rule!r}")
        if self.n_rule == "fixed" and (self.n_fixed is None or self.n_fixed < 1):
            raise ValueError("n_rule 'fixed' needs n_fixed >= 1")


def default_binary_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment="binary_exact",
        n_grid=(16, 32, 64, 128, 256, 512, 1024),
        k_values=(1, 2, 3, 4),
        q=0.4,
        y_obs=2.0,
        noise_var=1.0,
    )
    return replace(base, **overrides) if overrides else base


def default_mixture_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment="mixture_mc",
        n_grid=(8, 12, 16, 24, 32, 48, 64),
        k_values=(1, 2),
        y_obs=0.8,
        noise_var=1.0 / 16.0,
        threshold=0.5,
    )
    return replace(base, **overrides) if overrides else base


def default_identity_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment="identity_check",
        n_grid=(4, 6),
        k_values=(1, 2),
    )
    return replace(base, **overrides) if overrides else base


def default_rejection_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment="rejection_demo",
        n_grid=(16, 64),
        k_values=(2,),
        q=0.4,
        y_obs=2.0,
        noise_var=1.0,
    )
    return replace(base, **overrides) if overrides else base


def _binary_bayes_map(cfg: ExperimentConfig) -> DiscreteBayesMap:
    # Support {0, 1}; likelihood values of the observation at each atom.
    lik = gaussian_likelihood(cfg.y_obs, cfg.noise_var)
    return DiscreteBayesMap(np.exp(lik.log(np.array([0.0, 1.0]))))


def run_binary_exact(
    cfg: ExperimentConfig, g_override: Callable | None = None
) -> tuple[list[dict], dict]:
    """Exact |bias| and variance per (n, k) for the two-atom posterior map.

    No sampling is involved; output is invariant to the seed. Lattice-cap
    errors are re-raised naming the offending n.
    """
    bmap = _binary_bayes_map(cfg)
    g = bmap.component(1) if g_override is None else g_override
    prior = ProbVector(np.array([1.0 - cfg.q, cfg.q]))
    rows = []
    for n in cfg.n_grid:
        for k in cfg.k_values:
            try:
                bias = exact_bias(g, prior, n, k)
                variance = exact_variance(g, prior, n, k)
            except CapExceededError as exc:
                raise CapExceededError(f"n={n}: {exc}") from exc
            rows.append(
                {"n": n, "k": k, "abs_bias": abs(bias), "variance": variance}
            )
    fits = {}
    for k in cfg.k_values:
        sub = [r for r in rows if r["k"] == k]
        fits[k] = {}
        for col in ("abs_bias", "variance"):
            vals = [r[col] for r in sub]
            if all(v > 0 for v in vals):
                fits[k][col] = fit_slope(
                    [r["n"] for r in sub], vals, drop_smallest=cfg.drop_smallest
                )
            else:
                fits[k][col] = None  # zero column (e.g. linear map) has no slope
    return rows, fits


def _mc_reps(cfg: ExperimentConfig, n: int, k: int) -> int:
    rule = cfg.n_rule
    if rule is None:
        rule = "n_pow3" if k == 1 else "n_pow4"
    if rule == "n_pow3":
        return n**3
    if rule == "n_pow4":
        return n**4
    return int(cfg.n_fixed)


def _point_seed(root_seed: int, n: int, k: int) -> int:
    # Distinct deterministic stream key per grid point.
    return int(np.random.SeedSequence([root_seed, n, k]).generate_state(1, np.uint64)[0])


def run_mixture_mc(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """Monte Carlo bias/variance table for the Gaussian-mixture setting.

    Replication counts follow the configured rule, capped at ``mc_cap`` with
    every capping recorded. Aborts with UnderpoweredRunError when the
    standard error at a grid point exceeds a third of the estimated bias.
    """
    mix = GaussianMixture(
        np.array(cfg.mix_weights), np.array(cfg.mix_means), np.array(cfg.mix_variances)
    )
    lik = gaussian_likelihood(cfg.y_obs, cfg.noise_var)
    truth = mixture_posterior_tail_prob(mix, cfg.noise_var, cfg.y_obs, cfg.threshold)
    threshold = cfg.threshold

    def prior_sampler(n: int, rng: np.random.Generator) -> WeightedSampleSet:
        return WeightedSampleSet(mix.sample(n, rng))

    def functional(ws: WeightedSampleSet) -> float:
        return plugin_posterior_prob(ws, lik, lambda x: x >= threshold)

    rows = []
    capped = []
    for k in cfg.k_values:
        for n in cfg.n_grid:
            want = _mc_reps(cfg, n, k)
            n_reps = min(want, cfg.mc_cap)
            if n_reps < want:
                capped.append({"n": n, "k": k, "requested": want, "effective": n_reps})
            result = outer_mc(
                prior_sampler,
                functional,
                MCConfig(
                    n=n,
                    k=k,
                    n_reps=n_reps,
                    root_seed=_point_seed(cfg.root_seed, n, k),
                    inner_reps=cfg.inner_reps,
                    threads=cfg.threads,
                ),
            )
            est_bias = result.mean - truth
            if result.std_error > abs(est_bias) / 3:
                raise UnderpoweredRunError(
                    f"std_error {result.std_error:.4g} exceeds |bias|/3 = "
                    f"{abs(est_bias) / 3:.4g} at n={n}, k={k} (N={n_reps}); "
                    "the run cannot resolve the bias at this replication count"
                )
            rows.append(
                {
                    "n": n,
                    "k": k,
                    "N": n_reps,
                    "inner_reps": cfg.inner_reps,
                    "est_mean": result.mean,
                    "true_value": truth,
                    "est_bias": est_bias,
                    "est_variance": result.variance,
                    "std_error": result.std_error,
                }
            )
    fits = {}
    for k in cfg.k_values:
        sub = [r for r in rows if r["k"] == k]
        fits[k] = {
            "abs_bias": fit_slope(
                [r["n"] for r in sub],
                [abs(r["est_bias"]) for r in sub],
                drop_smallest=cfg.drop_smallest,
            ),
            "est_variance": fit_slope(
                [r["n"] for r in sub],
                [r["est_variance"] for r in sub],
                drop_smallest=cfg.drop_smallest,
            ),
        }
    return rows, {"fits": fits, "capped": capped, "true_value": truth}


def _lookup_likelihood(values: np.ndarray) -> BoundedLikelihood:
    # Discrete support encoded as points 0..m-1; likelihood by table lookup.
    log_table = np.log(values)

    def log_fn(x):
        return log_table[np.rint(np.asarray(x)).astype(int)]

    return BoundedLikelihood(log_fn=log_fn)


def run_identity_check(cfg: ExperimentConfig) -> dict:
    """Exhaustively enumerate datasets and chains; compare the enumerated
    expectation of the debiased realization with the exact operator mean.

    Passes iff the max discrepancy over all (m, n, k) cases is < 1e-10.
    ``corrupt_weights`` replaces the combination weights (fixing k to its
    length) and exists as a negative control.
    """
    k_values = cfg.k_values
    override = None
    if cfg.corrupt_weights is not None:
        override = np.asarray(cfg.corrupt_weights, dtype=float)
        k_values = (override.size,)
    cases = []
    for m in cfg.m_values:
        for n in cfg.n_grid:
            for k in k_values:
                rng = np.random.default_rng(
                    np.random.SeedSequence([cfg.root_seed, m, n, k])
                )
                raw = rng.dirichlet(np.ones(m))
                prior = ProbVector((raw + 0.1) / (1.0 + 0.1 * m))  # off the boundary
                ell = rng.uniform(0.5, 2.0, size=m)
                bmap = DiscreteBayesMap(ell)
                s = m - 1
                lik = _lookup_likelihood(ell)

                def functional(ws, lik=lik, s=s):
                    return plugin_posterior_prob(
                        ws, lik, lambda x: np.rint(x).astype(int) == s
                    )

                enumerated = exhaustive_chain_expectation(
                    functional, prior, n, k, weight_override=override
                )
                exact = debiased_estimate_mean(bmap.component(s), prior, n, k)
                cases.append(
                    {
                        "m": m,
                        "n": n,
                        "k": k,
                        "enumerated": enumerated,
                        "exact_mean": exact,
                        "discrepancy": abs(enumerated - exact),
                    }
                )
    max_disc = max(c["discrepancy"] for c in cases)
    return {
        "cases": cases,
        "max_discrepancy": max_disc,
        "tolerance": IDENTITY_TOL,
        "pass": bool(max_disc < IDENTITY_TOL),
        "corrupted": cfg.corrupt_weights is not None,
    }


def run_rejection_demo(cfg: ExperimentConfig) -> dict:
    """Sample from the debiased two-atom posterior at one seeded dataset.

    Reports the ratio bound, expected and observed acceptance rates, clamped
    mass, and empirical frequencies. Nothing here is asserted against ground
    truth; the output is diagnostic.
    """
    n, k = cfg.demo_n, cfg.demo_k
    bmap = _binary_bayes_map(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.root_seed, n, k]))
    counts = CountsVector(rng.multinomial(n, [1.0 - cfg.q, cfg.q]))
    proposal = discrete_bayes(bmap, ProbVector(counts.fractions()))
    target_values = np.array(
        [debiased_estimate(bmap.component(s), counts, k) for s in range(2)]
    )
    spec = make_rejection_spec(proposal, target_values)
    draw_seed = _point_seed(cfg.root_seed, n, k)
    indices, attempts = rejection_sample_batch(spec, cfg.demo_draws, seed=draw_seed)
    freq = np.bincount(indices, minlength=2) / cfg.demo_draws
    return {
        "n": n,
        "k": k,
        "counts": counts.counts.tolist(),
        "proposal": proposal.probs.tolist(),
        "debiased_target": target_values.tolist(),
        "clamped_target": spec.target.tolist(),
        "clamped_mass": spec.clamped_mass,
        "ratio_bound": spec.bound,
        "expected_acceptance_rate": expected_acceptance_rate(spec),
        "observed_acceptance_rate": cfg.demo_draws / attempts,
        "draws": cfg.demo_draws,
        "empirical_freq": freq.tolist(),
    }
