import math
import warnings

import numpy as np
import pytest
from scipy.special import logsumexp

from intercens.bayes import PosteriorDraws
from intercens.loo import (
    K_SENTINEL,
    LogLikMatrix,
    compare_models,
    fit_generalized_pareto,
    loo_elpd,
    pointwise_loglik,
    psis_smooth,
)
from intercens.model import Dataset, FamilyKind, Observation

from conftest import interval_dataset


def gpd_samples(rng, k, sigma, n):
    u = rng.random(n)
    if abs(k) < 1e-12:
        return -sigma * np.log1p(-u)
    return sigma * (np.power(1.0 - u, -k) - 1.0) / k


def constant_draws(theta, family=FamilyKind.WEIBULL, names=(), n=200):
    theta = np.asarray(theta, dtype=float)
    return PosteriorDraws(
        draws=np.tile(theta, (2, n, 1)),
        family=family,
        parameters=("mu", *(f"beta_{c}" for c in names), "log_shape"),
        covariate_names=tuple(names),
    )


class TestPointwiseLoglik:
    def test_uninformative_column_is_zero(self, rng):
        data = Dataset((Observation(0.0, math.inf), Observation(1.0, 4.0)))
        draws = PosteriorDraws(
            draws=rng.normal(1.0, 0.2, (2, 150, 2)),
            family=FamilyKind.WEIBULL,
            parameters=("mu", "log_shape"),
            covariate_names=(),
        )
        ll = pointwise_loglik(draws, data)
        np.testing.assert_allclose(ll.values[:, 0], 0.0, atol=1e-15)

    def test_single_draw_matches_terms(self, ovarian):
        from intercens.aft import aft_interval_loglik
        from intercens.model import AftParams

        params = AftParams(mu=7.4, beta=(-0.08, 0.6), log_shape=0.65)
        draws = constant_draws(params.as_vector(), names=("age", "rx2"), n=120)
        ll = pointwise_loglik(draws, ovarian)
        assert ll.values.shape == (240, 26)
        total = aft_interval_loglik(params, ovarian, "weibull")
        assert float(ll.values[0].sum()) == pytest.approx(total, rel=1e-12)

    def test_shrinking_interval_never_gains_mass(self, rng):
        draws = PosteriorDraws(
            draws=rng.normal(1.0, 0.3, (2, 100, 2)),
            family=FamilyKind.WEIBULL,
            parameters=("mu", "log_shape"),
            covariate_names=(),
        )
        wide = Dataset((Observation(1.0, 6.0),))
        narrow = Dataset((Observation(1.0, 4.0),))
        ll_wide = pointwise_loglik(draws, wide).values
        ll_narrow = pointwise_loglik(draws, narrow).values
        assert np.all(ll_narrow <= ll_wide + 1e-12)

    def test_impossible_observation_excluded(self):
        draws = constant_draws([200.0, 0.0], n=120)
        data = Dataset((Observation(1e-300, 2e-300), Observation(1.0, 5.0)))
        with pytest.warns(UserWarning):
            ll = pointwise_loglik(draws, data)
        assert not ll.kept_obs[0]
        assert ll.kept_obs[1]


class TestGpdFit:
    def test_recovers_heavy_tail_shape(self, rng):
        x = np.sort(gpd_samples(rng, 0.5, 1.0, 2000))
        k, sigma = fit_generalized_pareto(x)
        assert 0.4 <= k <= 0.6
        assert 0.8 <= sigma <= 1.2

    def test_recovers_exponential_shape(self, rng):
        x = np.sort(gpd_samples(rng, 0.0, 1.0, 2000))
        k, _ = fit_generalized_pareto(x)
        assert -0.1 <= k <= 0.1

    def test_degenerate_tail_sentinel(self):
        with pytest.warns(UserWarning):
            k, sigma = fit_generalized_pareto(np.full(10, 2.0))
        assert k == K_SENTINEL

    def test_two_distinct_values_low_confidence(self):
        tail = np.sort(np.array([1.0] * 5 + [2.0] * 5))
        with pytest.warns(UserWarning):
            k, sigma = fit_generalized_pareto(tail)
        assert math.isfinite(k)

    def test_needs_five_samples(self):
        with pytest.raises(ValueError):
            fit_generalized_pareto(np.array([1.0, 2.0, 3.0]))


class TestPsisSmooth:
    def test_constant_ratios_uniform_weights(self):
        log_weights, k = psis_smooth(np.zeros(200))
        np.testing.assert_allclose(np.exp(log_weights), 1.0 / 200)
        assert k == K_SENTINEL

    def test_normal_ratios_small_k(self, rng):
        log_weights, k = psis_smooth(rng.standard_normal(4000))
        assert k < 0.5

    def test_weights_normalized(self, rng):
        for _ in range(5):
            log_weights, _ = psis_smooth(rng.standard_normal(500))
            assert np.exp(logsumexp(log_weights)) == pytest.approx(1.0, abs=1e-12)

    def test_weights_capped_at_raw_maximum(self, rng):
        # Smoothed values are truncated at the raw maximum, and the non-tail
        # ratios are untouched, which bounds the largest normalized weight.
        lr = rng.standard_normal(1000)
        log_weights, _ = psis_smooth(lr)
        centered = lr - lr.max()
        n_tail = int(math.ceil(min(lr.size / 5.0, 3.0 * math.sqrt(lr.size))))
        non_tail = np.sort(centered)[:-n_tail]
        bound = 1.0 / np.exp(non_tail).sum()
        assert np.exp(log_weights).max() <= bound + 1e-12

    def test_requires_hundred_draws(self):
        with pytest.raises(ValueError):
            psis_smooth(np.zeros(50))


class TestLooElpd:
    def test_identical_draws_give_in_sample_loglik(self):
        values = np.tile(np.array([-1.3, -0.4, -2.2]), (150, 1))
        ll = LogLikMatrix(values=values, kept_obs=np.ones(3, bool), n_dropped_draws=0)
        result = loo_elpd(ll)
        np.testing.assert_allclose(result.pointwise, [-1.3, -0.4, -2.2], atol=1e-12)
        assert result.elpd == pytest.approx(-3.9, abs=1e-10)

    def test_loo_never_beats_in_sample(self, rng):
        values = rng.normal(-1.0, 0.7, (400, 12))
        ll = LogLikMatrix(values=values, kept_obs=np.ones(12, bool), n_dropped_draws=0)
        result = loo_elpd(ll)
        lppd = float(np.sum(logsumexp(values, axis=0) - math.log(values.shape[0])))
        assert result.elpd <= lppd + 1e-10

    def test_pointwise_sums_to_elpd(self, rng):
        values = rng.normal(-1.0, 0.5, (300, 8))
        result = loo_elpd(LogLikMatrix(values, np.ones(8, bool), 0))
        assert result.elpd == pytest.approx(float(np.nansum(result.pointwise)), rel=1e-12)

    def test_permutation_invariance(self, rng):
        values = rng.normal(-1.0, 0.5, (300, 8))
        perm = rng.permutation(8)
        a = loo_elpd(LogLikMatrix(values, np.ones(8, bool), 0))
        b = loo_elpd(LogLikMatrix(values[:, perm], np.ones(8, bool), 0))
        assert a.elpd == pytest.approx(b.elpd, rel=1e-12)
        np.testing.assert_allclose(a.pointwise[perm], b.pointwise, rtol=1e-12)


class TestCompare:
    def test_self_comparison_is_zero(self, rng):
        values = rng.normal(-1.0, 0.5, (200, 10))
        result = loo_elpd(LogLikMatrix(values, np.ones(10, bool), 0))
        diff, se = compare_models(result, result)
        assert diff == 0.0
        assert se == 0.0

    def test_antisymmetry(self, rng):
        a = loo_elpd(LogLikMatrix(rng.normal(-1, 0.5, (200, 10)), np.ones(10, bool), 0))
        b = loo_elpd(LogLikMatrix(rng.normal(-1.1, 0.5, (200, 10)), np.ones(10, bool), 0))
        d_ab, se_ab = compare_models(a, b)
        d_ba, se_ba = compare_models(b, a)
        assert d_ab == pytest.approx(-d_ba, rel=1e-12)
        assert se_ab == pytest.approx(se_ba, rel=1e-12)

    def test_length_mismatch_rejected(self, rng):
        a = loo_elpd(LogLikMatrix(rng.normal(-1, 0.5, (200, 10)), np.ones(10, bool), 0))
        b = loo_elpd(LogLikMatrix(rng.normal(-1, 0.5, (200, 9)), np.ones(9, bool), 0))
        with pytest.raises(ValueError):
            compare_models(a, b)


class TestConjugateExactLoo:
    def test_psis_matches_brute_force(self, rng):
        # Exponential likelihood with Gamma(a0, b0) prior: the posterior is
        # Gamma(a0 + n, b0 + sum t) and leave-one-out refits stay conjugate,
        # so exact LOO is available in closed form via the posterior
        # predictive (Lomax) density of each held-out point.
        a0, b0 = 2.0, 1.0
        times = rng.exponential(2.0, 30)
        n, total = times.size, times.sum()
        exact = 0.0
        for t in times:
            a_i = a0 + n - 1
            b_i = b0 + total - t
            exact += math.log(a_i) + a_i * math.log(b_i) - (a_i + 1) * math.log(b_i + t)
        rates = rng.gamma(a0 + n, 1.0 / (b0 + total), size=8000)
        # Draws enter the machinery as Weibull parameters with shape 1.
        thetas = np.column_stack([-np.log(rates), np.zeros(8000)])
        draws = PosteriorDraws(
            draws=thetas.reshape(2, 4000, 2),
            family=FamilyKind.WEIBULL,
            parameters=("mu", "log_shape"),
            covariate_names=(),
        )
        data = Dataset(tuple(Observation(t, t) for t in times))
        result = loo_elpd(pointwise_loglik(draws, data))
        assert abs(result.elpd - exact) < 2.0 * result.se
