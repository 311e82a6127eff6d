from math import exp, sqrt

import numpy as np
import pytest
from scipy import integrate, stats

from posterior_debias.bayes import (
    BoundedLikelihood,
    DiscreteBayesMap,
    GaussianMixture,
    WeightedSampleSet,
    discrete_bayes,
    gaussian_likelihood,
    mixture_posterior_tail_prob,
    plugin_expectation,
    plugin_posterior_prob,
)
from posterior_debias.errors import DegenerateError
from posterior_debias.simplex import ProbVector

HALF = lambda x: x >= 0.5


def quadrature_tail_prob(mix, noise_var, y_obs, threshold):
    """Direct Bayes-integral oracle: ∫_A ell*prior / ∫ ell*prior by quadrature."""

    def prior_pdf(x):
        total = 0.0
        for w, mu, v in zip(mix.weights, mix.means, mix.variances):
            total += w * np.exp(-((x - mu) ** 2) / (2 * v)) / sqrt(2 * np.pi * v)
        return total

    def integrand(x):
        return prior_pdf(x) * np.exp(-((y_obs - x) ** 2) / (2 * noise_var))

    hi, _ = integrate.quad(integrand, threshold, np.inf, epsabs=1e-14, epsrel=1e-12, limit=300)
    lo, _ = integrate.quad(integrand, -np.inf, threshold, epsabs=1e-14, epsrel=1e-12, limit=300)
    return hi / (hi + lo)


class TestGaussianLikelihood:
    def test_matches_scipy_logpdf(self):
        lik = gaussian_likelihood(0.8, 1 / 16)
        xs = np.array([-1.0, 0.0, 0.5, 0.8, 3.0])
        expected = stats.norm.logpdf(0.8, loc=xs, scale=0.25)
        assert np.allclose(lik.log(xs), expected, rtol=1e-13)

    def test_rejects_bad_variance(self):
        with pytest.raises(ValueError):
            gaussian_likelihood(0.0, 0.0)

    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            BoundedLikelihood(log_fn=lambda x: x, bounds=(0.0, 1.0))
        with pytest.raises(ValueError):
            BoundedLikelihood(log_fn=lambda x: x, bounds=(2.0, 1.0))

    def test_bounds_checked_on_call(self):
        lik = BoundedLikelihood(log_fn=lambda x: np.full(np.shape(x), 1.0), bounds=(0.5, 2.0))
        with pytest.raises(ValueError):
            lik(np.array([0.0]))  # e^1 = 2.718 > upper bound


class TestDiscreteBayesMap:
    def test_posterior_hand_formula(self):
        bmap = DiscreteBayesMap([2.0, 1.0, 1.0])
        post = bmap.posterior(ProbVector([0.5, 0.25, 0.25]))
        denom = 2 * 0.5 + 0.25 + 0.25
        assert np.allclose(post.probs, [1.0 / denom, 0.25 / denom, 0.25 / denom])

    def test_binary_closed_form_setting_one(self):
        alpha = exp(1.5)
        bmap = DiscreteBayesMap([1.0, alpha])
        q = 0.4
        got = bmap.posterior(ProbVector([1 - q, q])).probs[1]
        assert got == pytest.approx(alpha * q / (alpha * q + 1 - q), rel=1e-14)

    def test_binary_closed_form_setting_two(self):
        alpha = exp(2.0)
        q = 3 / 11
        bmap = DiscreteBayesMap([1.0, alpha])
        got = bmap.posterior(ProbVector([1 - q, q])).probs[1]
        # alpha*q/(alpha*q + 1 - q) = 3e^2/(3e^2 + 8)
        assert got == pytest.approx(3 * exp(2) / (3 * exp(2) + 8), rel=1e-14)
        assert got == pytest.approx(0.7348110395614845, rel=1e-12)

    def test_rescaling_invariance(self):
        ell = np.array([0.7, 1.3, 0.4])
        q = ProbVector([0.2, 0.3, 0.5])
        a = DiscreteBayesMap(ell).posterior(q).probs
        b = DiscreteBayesMap(3.0 * ell).posterior(q).probs
        assert np.max(np.abs(a - b)) < 1e-14

    def test_posterior_sums_to_one(self):
        rng = np.random.default_rng(np.random.SeedSequence([11]))
        for _ in range(20):
            m = int(rng.integers(2, 6))
            ell = rng.uniform(0.1, 5.0, m)
            raw = rng.dirichlet(np.ones(m))
            post = DiscreteBayesMap(ell).posterior(ProbVector(raw))
            assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_component_matches_posterior(self):
        bmap = DiscreteBayesMap([0.5, 2.0])
        q = np.array([0.3, 0.7])
        for s in range(2):
            assert bmap.component(s)(q) == pytest.approx(
                bmap.posterior(ProbVector(q)).probs[s], rel=1e-14
            )

    def test_component_degenerate(self):
        g = DiscreteBayesMap([1.0, 1.0]).component(0)
        with pytest.raises(DegenerateError):
            g(np.array([0.0, 0.0]))

    def test_rejects_nonpositive_likelihood(self):
        with pytest.raises(ValueError):
            DiscreteBayesMap([1.0, 0.0])

    def test_discrete_bayes_wrapper(self):
        bmap = DiscreteBayesMap([1.0, 2.0])
        q = ProbVector([0.5, 0.5])
        assert np.array_equal(discrete_bayes(bmap, q).probs, bmap.posterior(q).probs)


class TestPluginFunctionals:
    def test_two_point_hand_value(self):
        # samples {0, 1}: weight ratio ell(1)/ell(0) = e^{8 (2*0.8 - 1)} = e^{4.8}
        samples = WeightedSampleSet(np.array([0.0, 1.0]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        ratio = exp(4.8)
        expected = ratio / (1 + ratio)
        assert plugin_posterior_prob(samples, lik, HALF) == pytest.approx(expected, rel=1e-13)

    def test_full_and_empty_event(self):
        samples = WeightedSampleSet(np.array([0.2, 0.9, 1.4]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        assert plugin_posterior_prob(samples, lik, lambda x: x == x) == 1.0
        assert plugin_posterior_prob(samples, lik, lambda x: x != x) == 0.0

    def test_constant_likelihood_counts_fraction(self):
        samples = WeightedSampleSet(np.array([0.0, 1.0, 1.0, 0.3, 0.9]))
        flat = BoundedLikelihood(log_fn=lambda x: np.zeros(np.shape(x)), bounds=(1.0, 1.0))
        assert plugin_posterior_prob(samples, flat, HALF) == 3 / 5

    def test_permutation_invariance(self):
        rng = np.random.default_rng(np.random.SeedSequence([5]))
        pts = rng.normal(0.5, 1.0, 40)
        lik = gaussian_likelihood(0.8, 1 / 16)
        a = plugin_posterior_prob(WeightedSampleSet(pts), lik, HALF)
        b = plugin_posterior_prob(WeightedSampleSet(pts[::-1].copy()), lik, HALF)
        assert a == pytest.approx(b, rel=1e-15)

    def test_rescale_invariance(self):
        pts = np.array([0.1, 0.6, 1.1])
        base = gaussian_likelihood(0.8, 1 / 16)
        scaled = BoundedLikelihood(log_fn=lambda x: base.log(x) + np.log(7.0))
        a = plugin_posterior_prob(WeightedSampleSet(pts), base, HALF)
        b = plugin_posterior_prob(WeightedSampleSet(pts), scaled, HALF)
        assert a == pytest.approx(b, rel=1e-14)

    def test_far_samples_do_not_underflow(self):
        # raw densities underflow to 0; the shifted computation must not
        samples = WeightedSampleSet(np.array([100.0, 101.0]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        got = plugin_posterior_prob(samples, lik, HALF)
        assert np.isfinite(got)
        assert got == 1.0  # both samples are >= 0.5

    def test_all_underflow_raises(self):
        neg_inf = BoundedLikelihood(log_fn=lambda x: np.full(np.shape(x), -np.inf))
        with pytest.raises(DegenerateError):
            plugin_posterior_prob(WeightedSampleSet(np.array([0.0, 1.0])), neg_inf, HALF)

    def test_bad_event_shape(self):
        samples = WeightedSampleSet(np.array([0.0, 1.0]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        with pytest.raises(ValueError):
            plugin_posterior_prob(samples, lik, lambda x: np.array([True]))

    def test_expectation_consistency_with_prob(self):
        samples = WeightedSampleSet(np.array([0.2, 0.7, 1.3, -0.4]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        prob = plugin_posterior_prob(samples, lik, HALF)
        expect = plugin_expectation(samples, lik, lambda x: (x >= 0.5).astype(float))
        assert prob == pytest.approx(expect, rel=1e-15)

    def test_expectation_constant_is_exact(self):
        samples = WeightedSampleSet(np.array([0.2, 0.7, 1.3]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        assert plugin_expectation(samples, lik, lambda x: np.full(np.shape(x), 1.0)) == 1.0

    def test_expectation_identity_map(self):
        samples = WeightedSampleSet(np.array([0.0, 1.0]))
        lik = gaussian_likelihood(0.8, 1 / 16)
        ratio = exp(4.8)
        assert plugin_expectation(samples, lik, lambda x: x) == pytest.approx(
            ratio / (1 + ratio), rel=1e-13
        )


class TestGaussianMixture:
    def test_validation(self):
        with pytest.raises(ValueError):
            GaussianMixture([0.5, 0.6], [0.0, 1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            GaussianMixture([0.5, 0.5], [0.0, 1.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            GaussianMixture([0.5, 0.5], [0.0], [1.0, 1.0])

    def test_sample_shape_and_moments(self):
        mix = GaussianMixture([0.5, 0.5], [0.0, 1.0], [1.0, 1.0])
        rng = np.random.default_rng(np.random.SeedSequence([7]))
        x = mix.sample(200_000, rng)
        assert x.shape == (200_000,)
        # mean 0.5, var = 1 + 0.25; allow 5 sigma
        assert abs(x.mean() - 0.5) < 5 * sqrt(1.25 / 200_000)


class TestMixtureTailOracle:
    MIX = GaussianMixture([0.5, 0.5], [0.0, 1.0], [1.0, 1.0])

    def test_reference_setting_value(self):
        got = mixture_posterior_tail_prob(self.MIX, 1 / 16, 0.8, 0.5)
        assert got == pytest.approx(0.8795404134930043, rel=1e-12)

    def test_reference_setting_against_quadrature(self):
        got = mixture_posterior_tail_prob(self.MIX, 1 / 16, 0.8, 0.5)
        oracle = quadrature_tail_prob(self.MIX, 1 / 16, 0.8, 0.5)
        assert got == pytest.approx(oracle, abs=1e-10)

    def test_no_information_limit(self):
        # enormous noise: posterior collapses to the prior
        from scipy.stats import norm

        prior_tail = 0.5 * norm.sf(0.5, 0, 1) + 0.5 * norm.sf(0.5, 1, 1)
        got = mixture_posterior_tail_prob(self.MIX, 1e8, 0.8, 0.5)
        assert got == pytest.approx(prior_tail, abs=1e-4)

    def test_symmetric_case(self):
        got = mixture_posterior_tail_prob(self.MIX, 1 / 4, 0.5, 0.5)
        assert got == pytest.approx(0.5, abs=1e-13)

    def test_quadrature_grid(self):
        pairs = [(y, t) for y in (-0.5, 0.2, 0.5, 0.8, 1.5) for t in (-0.3, 0.25, 0.5, 1.1)]
        assert len(pairs) == 20
        for y, t in pairs:
            got = mixture_posterior_tail_prob(self.MIX, 1 / 16, y, t)
            oracle = quadrature_tail_prob(self.MIX, 1 / 16, y, t)
            assert got == pytest.approx(oracle, abs=1e-7), (y, t)

    def test_single_component_conjugate(self):
        # one component: posterior N(y/2, 1/2) when prior N(0,1), noise 1
        single = GaussianMixture([1.0], [0.0], [1.0])
        got = mixture_posterior_tail_prob(single, 1.0, 0.0, 0.0)
        assert got == pytest.approx(0.5, abs=1e-14)

    def test_rejects_bad_noise(self):
        with pytest.raises(ValueError):
            mixture_posterior_tail_prob(self.MIX, 0.0, 0.8, 0.5)
