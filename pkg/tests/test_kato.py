"""Concentration bounds: closed-form coefficients, conversions, pipeline."""

import math

import numpy as np
import pytest

from triqss import (
    EpsilonBudget,
    ParameterError,
    azuma_deviation,
    expected_to_observed,
    kato_coeffs_numeric,
    kato_failure_probability,
    kato_lower_coeffs,
    kato_upper_coeffs,
    key_length,
    key_length_raw,
    observed_to_expected,
    phase_error_upper_bound,
)

GRID_K = (1e3, 1e5, 1e7, 1e9)
GRID_FRAC = (0.001, 0.01, 0.1, 0.5, 0.9)
GRID_EPS = (1e-6, 1e-10)


def grid_points():
    for k in GRID_K:
        for frac in GRID_FRAC:
            for eps in GRID_EPS:
                yield k * frac, k, eps


class TestClosedFormCoefficients:
    def test_frozen_midpoint_values(self):
        up = kato_upper_coeffs(5e5, 1e6, 1e-10)
        assert up.a == pytest.approx(-0.015350253106502735, rel=1e-12)
        assert up.deviation == pytest.approx(3393.0354890388417, rel=1e-12)

    def test_midpoint_coefficient_is_not_zero(self):
        # the optimum is near zero at the midpoint but measurably below it
        up = kato_upper_coeffs(5e5, 1e6, 1e-10)
        assert up.a < -0.015

    @pytest.mark.parametrize("direction", ["upper", "lower"])
    def test_matches_brute_force_on_grid(self, direction):
        closed_fn = kato_upper_coeffs if direction == "upper" else kato_lower_coeffs
        for lam, k, eps in grid_points():
            closed = closed_fn(lam, k, eps)
            numeric = kato_coeffs_numeric(lam, k, eps, direction)
            assert closed.deviation == pytest.approx(numeric.deviation, rel=1e-6), (
                f"lam={lam} k={k} eps={eps} dir={direction}")

    @pytest.mark.parametrize("direction", ["upper", "lower"])
    def test_back_substituted_failure_probability(self, direction):
        closed_fn = kato_upper_coeffs if direction == "upper" else kato_lower_coeffs
        for lam, k, eps in grid_points():
            c = closed_fn(lam, k, eps)
            achieved = kato_failure_probability(c.a, c.b, k, direction)
            assert achieved == pytest.approx(eps, rel=1e-9), (
                f"lam={lam} k={k} eps={eps} dir={direction}")

    def test_lower_mirrors_upper(self):
        for lam, k, eps in grid_points():
            lo = kato_lower_coeffs(lam, k, eps)
            up_mirror = kato_upper_coeffs(k - lam, k, eps)
            assert lo.a == pytest.approx(-up_mirror.a, rel=1e-12, abs=1e-15)

    def test_b_dominates_a(self):
        for lam, k, eps in grid_points():
            for c in (kato_upper_coeffs(lam, k, eps), kato_lower_coeffs(lam, k, eps)):
                assert c.b >= abs(c.a)

    def test_deviation_ordering_against_simpler_bounds(self):
        for lam, k, eps in grid_points():
            optimized = kato_upper_coeffs(lam, k, eps).deviation
            fixed_coeff = math.sqrt(0.5 * k * math.log(1.0 / eps))
            azuma = azuma_deviation(k, eps)
            assert optimized <= fixed_coeff + 1e-9
            assert fixed_coeff <= azuma

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            kato_upper_coeffs(-1.0, 1e6, 1e-10)
        with pytest.raises(ParameterError):
            kato_upper_coeffs(2e6, 1e6, 1e-10)
        with pytest.raises(ParameterError):
            kato_upper_coeffs(100.0, 1e6, 2.0)


class TestConversions:
    def test_fixed_coefficient_deviation_value(self):
        # a = 0 conversion at k = 1e6, eps = 1e-10
        dev = expected_to_observed(0.0, 1e6, 1e-10, "upper")
        assert dev == pytest.approx(3393.070212207556, rel=1e-12)

    def test_azuma_reference_value(self):
        assert azuma_deviation(1e6, 1e-10) == pytest.approx(6786.140424415112, rel=1e-12)

    def test_azuma_is_twice_the_fixed_coefficient(self):
        for k in GRID_K:
            for eps in GRID_EPS:
                assert azuma_deviation(k, eps) == pytest.approx(
                    2.0 * math.sqrt(0.5 * k * math.log(1.0 / eps)), rel=1e-14)

    def test_quadrupling_k_doubles_the_fixed_deviation(self):
        for k in (1e4, 1e6):
            d1 = expected_to_observed(0.0, k, 1e-10, "upper")
            d4 = expected_to_observed(0.0, 4 * k, 1e-10, "upper")
            assert d4 == 2.0 * d1

    def test_observed_to_expected_brackets_observation(self):
        for lam, k, eps in grid_points():
            hi = observed_to_expected(lam, k, eps, "upper")
            lo = observed_to_expected(lam, k, eps, "lower")
            assert lo <= lam <= hi
            assert lo >= 0.0

    def test_lower_bound_clamps_at_zero(self):
        assert observed_to_expected(1.0, 1e6, 1e-10, "lower") == 0.0

    def test_bernoulli_coverage(self):
        # true mean k*p must fall inside [lower, upper] in >= 1 - 2 eps of
        # trials; at eps = 1e-10 every one of the 1e4 draws must be covered
        rng = np.random.default_rng(1905)
        k, eps, trials = 10 ** 5, 1e-10, 10 ** 4
        for p in (0.01, 0.1, 0.5):
            lams = rng.binomial(k, p, size=trials)
            misses = 0
            for lam in np.unique(lams):
                hi = observed_to_expected(float(lam), k, eps, "upper")
                lo = observed_to_expected(float(lam), k, eps, "lower")
                if not lo <= k * p <= hi:
                    misses += int(np.sum(lams == lam))
            assert misses == 0, f"p={p}: {misses}/{trials} trials not covered"


class TestPhaseErrorPipeline:
    N_X, N_Y, MU, GAIN = 787407, 9553, 9e-4, 2.1565274431057558e-05

    def test_reference_table_row(self, budget):
        bound = phase_error_upper_bound(self.N_X, self.N_Y, 111, self.MU, self.GAIN, budget)
        assert bound.ep_bar == pytest.approx(0.16973920492264538, rel=1e-12)
        assert bound.m_y_expected == pytest.approx(198.5248386217448, rel=1e-12)
        assert bound.delta == pytest.approx(0.018768926680927285, rel=1e-12)
        assert not bound.ep_clamped and not bound.epbar_clamped

    def test_monotone_in_observed_errors(self, budget):
        bounds = [
            phase_error_upper_bound(self.N_X, self.N_Y, m, self.MU, self.GAIN, budget).ep_bar
            for m in (0, 30, 111, 300, 1000)
        ]
        assert all(b >= a for a, b in zip(bounds, bounds[1:]))

    def test_monotone_in_intensity(self, budget):
        bounds = [
            phase_error_upper_bound(self.N_X, self.N_Y, 111, mu, self.GAIN, budget).ep_bar
            for mu in (1e-4, 5e-4, 9e-4, 1.2e-3)
        ]
        assert all(b >= a for a, b in zip(bounds, bounds[1:]))

    def test_each_stage_only_enlarges(self, budget):
        bound = phase_error_upper_bound(self.N_X, self.N_Y, 111, self.MU, self.GAIN, budget)
        assert bound.ep_bar >= bound.ep_expected >= bound.eb_y_expected >= 111 / self.N_Y

    def test_vanishing_failure_budget_limit(self):
        # with eps -> 1 both concentration corrections vanish; with no
        # observed errors and negligible imbalance the bound goes to zero
        loose = EpsilonBudget(eps_c=0.5, eps_pa=0.5,
                              eps_a=1 - 1e-12, eps_b=1 - 1e-12)
        bound = phase_error_upper_bound(self.N_X, self.N_Y, 0, 1e-8, self.GAIN, loose)
        assert bound.ep_bar < 1e-4

    def test_saturated_errors_clamp(self, budget):
        bound = phase_error_upper_bound(1000, 50, 50, self.MU, self.GAIN, budget)
        assert bound.ep_bar == 1.0
        assert bound.epbar_clamped or bound.ep_clamped or bound.eby_clamped


class TestKeyLength:
    def test_half_phase_error_gives_zero(self, budget):
        assert key_length(10 ** 6, 0.5, 0.01, 1.16, budget) == 0

    def test_beyond_half_stays_zero(self, budget):
        # the entropy dip above one half must not resurrect the key
        assert key_length(10 ** 6, 0.95, 0.01, 1.16, budget) == 0

    def test_reference_row_magnitude(self, budget):
        # counts and rates of the bundled reference table's first row; the
        # published per-pulse rate for it is 4.32e-6 with a +-25% window
        ell = key_length(787407, 0.1566, 0.0095, 1.16, budget)
        assert ell == 223551
        assert ell / 5e10 == pytest.approx(4.32e-6, rel=0.25)

    def test_monotone_in_each_argument(self, budget):
        base = key_length_raw(10 ** 6, 0.1, 0.01, 1.16, budget)
        assert key_length_raw(10 ** 6, 0.12, 0.01, 1.16, budget) < base
        assert key_length_raw(10 ** 6, 0.1, 0.013, 1.16, budget) < base
        assert key_length_raw(10 ** 6, 0.1, 0.01, 1.3, budget) < base

    def test_floor_and_clamp(self, budget):
        assert key_length(100, 0.45, 0.2, 1.5, budget) == 0
        raw = key_length_raw(10 ** 6, 0.1, 0.01, 1.16, budget)
        assert key_length(10 ** 6, 0.1, 0.01, 1.16, budget) == math.floor(raw)

    def test_rejects_inefficient_correction(self, budget):
        with pytest.raises(ParameterError):
            key_length(10 ** 6, 0.1, 0.01, 0.9, budget)


class TestEpsilonBudget:
    def test_defaults(self, budget):
        assert budget.eps_c == budget.eps_pa == budget.eps_a == budget.eps_b == 1e-10
        assert budget.eps_phase == pytest.approx(2e-10)
        assert budget.eps_secrecy == pytest.approx(math.sqrt(2e-10) + 1e-10)

    @pytest.mark.parametrize("value", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_out_of_range(self, value):
        with pytest.raises(ParameterError):
            EpsilonBudget(eps_a=value)
