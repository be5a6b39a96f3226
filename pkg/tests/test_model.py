import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intercens.model import (
    CensorKind,
    Dataset,
    InvalidIntervalError,
    MonotonicityError,
    Observation,
    StepSurvival,
    ZeroMassWarning,
    classify_observation,
    log_lik_contribution,
    lognormal_density,
    lognormal_survival,
    step_survival_eval,
    weibull_density,
    weibull_survival,
)


class TestClassify:
    def test_interval(self):
        assert classify_observation(3.0, 6.0) is CensorKind.INTERVAL

    def test_right_censored(self):
        assert classify_observation(12.0, math.inf) is CensorKind.RIGHT

    def test_exact(self):
        assert classify_observation(5.0, 5.0) is CensorKind.EXACT

    def test_left_censored(self):
        assert classify_observation(0.0, 4.0) is CensorKind.LEFT

    def test_whole_line_is_right_censored(self):
        assert classify_observation(0.0, math.inf) is CensorKind.RIGHT

    def test_reversed_endpoints_rejected(self):
        with pytest.raises(InvalidIntervalError):
            classify_observation(6.0, 3.0)

    def test_point_mass_at_zero_rejected(self):
        with pytest.raises(InvalidIntervalError):
            classify_observation(0.0, 0.0)

    def test_nan_rejected(self):
        with pytest.raises(InvalidIntervalError):
            classify_observation(math.nan, 1.0)


class TestObservation:
    def test_explicit_left_label_trusted(self):
        # Files may ship a left-censoring label with a positive stored left
        # endpoint; the label wins and the likelihood window is (0, right].
        obs = Observation(1.0, 3.0, (), CensorKind.LEFT)
        assert obs.kind is CensorKind.LEFT
        assert obs.effective_bounds() == (0.0, 3.0)

    def test_right_label_requires_infinite_endpoint(self):
        with pytest.raises(InvalidIntervalError):
            Observation(1.0, 3.0, (), CensorKind.RIGHT)

    def test_covariate_dimension_enforced(self):
        with pytest.raises(ValueError):
            Dataset((Observation(1, 2, (1.0,)), Observation(2, 3, ())), ("x",))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            Dataset((), ())


class TestWeibullSurvival:
    def test_at_zero(self):
        assert weibull_survival(0.0, 3.7, 2.2) == 1.0

    def test_median_identity(self):
        scale, shape = 4.0, 1.7
        t = scale * math.log(2.0) ** (1.0 / shape)
        assert weibull_survival(t, scale, shape) == pytest.approx(0.5, abs=1e-12)

    def test_exponential_special_case(self):
        assert weibull_survival(2.0, 1.0, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-12)

    def test_matches_exponential_for_shape_one(self, rng):
        t = rng.uniform(0.01, 50.0, 1000)
        scale = rng.uniform(0.1, 20.0, 1000)
        np.testing.assert_allclose(
            weibull_survival(t, scale, 1.0), np.exp(-t / scale), rtol=1e-12
        )

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            weibull_survival(math.inf, 1.0, 1.0)
        with pytest.raises(ValueError):
            weibull_survival(1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            weibull_survival(1.0, 1.0, 0.0)


class TestLognormalSurvival:
    def test_median(self):
        assert lognormal_survival(math.exp(1.3), 1.3, 0.7) == pytest.approx(0.5, abs=1e-12)

    def test_at_zero(self):
        assert lognormal_survival(0.0, 0.0, 1.0) == 1.0

    def test_one_sigma(self):
        value = lognormal_survival(math.exp(1.3 + 0.7), 1.3, 0.7)
        assert value == pytest.approx(0.15865525393145707, abs=1e-12)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            lognormal_survival(1.0, 0.0, 0.0)


class TestLogLikContribution:
    def surv(self, t):
        return math.exp(-t / 10.0)

    def dens(self, t):
        return math.exp(-t / 10.0) / 10.0

    def test_interval_case(self):
        obs = Observation(3.0, 6.0)
        expected = math.log(math.exp(-0.3) - math.exp(-0.6))
        assert log_lik_contribution(obs, self.surv) == pytest.approx(expected, rel=1e-12)

    def test_right_case(self):
        obs = Observation(12.0, math.inf)
        assert log_lik_contribution(obs, self.surv) == pytest.approx(-1.2, rel=1e-12)

    def test_exact_case(self):
        obs = Observation(5.0, 5.0)
        expected = math.log(0.1 * math.exp(-0.5))
        assert log_lik_contribution(obs, self.surv, self.dens) == pytest.approx(expected, rel=1e-12)

    def test_left_case(self):
        obs = Observation(0.0, 6.0)
        expected = math.log(1.0 - math.exp(-0.6))
        assert log_lik_contribution(obs, self.surv) == pytest.approx(expected, rel=1e-12)

    def test_zero_mass_warns_and_returns_minus_inf(self):
        obs = Observation(3.0, 6.0)
        with pytest.warns(ZeroMassWarning):
            value = log_lik_contribution(obs, lambda t: 1.0)
        assert value == -math.inf

    def test_monotonicity_violation_raises(self):
        obs = Observation(3.0, 6.0)
        with pytest.raises(MonotonicityError):
            log_lik_contribution(obs, lambda t: t / 10.0)

    def test_partition_masses_sum_to_one(self):
        cuts = [0.0, 1.0, 2.5, 4.0, 7.0, 11.0]
        obs = [Observation(a, b) for a, b in zip(cuts[:-1], cuts[1:])]
        obs.append(Observation(cuts[-1], math.inf))
        total = sum(math.exp(log_lik_contribution(o, self.surv)) for o in obs)
        assert total == pytest.approx(1.0, abs=1e-10)

    @given(
        lo=st.floats(0.0, 20.0),
        width=st.floats(1e-6, 20.0),
        scale=st.floats(0.1, 30.0),
        shape=st.floats(0.2, 4.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_contribution_is_a_probability(self, lo, width, scale, shape):
        import warnings

        obs = Observation(lo, lo + width)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroMassWarning)
            value = log_lik_contribution(obs, lambda t: weibull_survival(t, scale, shape))
        assert value <= 1e-12

    def test_interval_identity_f_vs_s(self):
        # F(R) - F(L) and S(L) - S(R) agree to floating precision.
        for lo, hi in [(0.5, 2.0), (3.0, 6.0), (1.0, 30.0)]:
            s = lambda t: weibull_survival(t, 7.0, 1.3)
            f = lambda t: 1.0 - s(t)
            assert (f(hi) - f(lo)) == pytest.approx(s(lo) - s(hi), abs=1e-12)


class TestStepSurvival:
    def test_below_first_knot(self):
        curve = StepSurvival([5.0], [0.0])
        assert step_survival_eval(curve, 4.9) == 1.0

    def test_right_continuity_at_knot(self):
        curve = StepSurvival([5.0], [0.0])
        assert step_survival_eval(curve, 5.0) == 0.0

    def test_between_knots(self):
        curve = StepSurvival([1.0, 2.0], [0.5, 0.0])
        assert step_survival_eval(curve, 1.5) == 0.5

    def test_vectorized(self):
        curve = StepSurvival([1.0, 2.0], [0.5, 0.25])
        np.testing.assert_allclose(curve.evaluate([0.0, 1.0, 3.0]), [1.0, 0.5, 0.25])

    def test_rejects_increasing_values(self):
        with pytest.raises(ValueError):
            StepSurvival([1.0, 2.0], [0.5, 0.9])

    def test_rejects_unsorted_knots(self):
        with pytest.raises(ValueError):
            StepSurvival([2.0, 1.0], [0.5, 0.4])


def test_densities_integrate_to_survival_drop():
    # Density integrates to S(L) - S(R) over an interval (quadrature check).
    from scipy.integrate import quad

    for dens, surv in (
        (lambda t: weibull_density(t, 5.0, 1.8), lambda t: weibull_survival(t, 5.0, 1.8)),
        (lambda t: lognormal_density(t, 1.2, 0.6), lambda t: lognormal_survival(t, 1.2, 0.6)),
    ):
        mass, _ = quad(dens, 2.0, 9.0)
        assert mass == pytest.approx(surv(2.0) - surv(9.0), abs=1e-9)
