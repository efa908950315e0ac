"""Tests for the Malliavin derivative profiles and the exponential form."""

import math

import numpy as np
import pytest

from fcir import (
    CirParams,
    DomainError,
    ExperimentConfig,
    FbmPath,
    GridSpec,
    HurstParameter,
    UnsupportedRegimeError,
    drift_derivative,
    malliavin_exponential_form,
    malliavin_gap_study,
    malliavin_interpolated,
    malliavin_profile,
    sample_fbm_circulant,
    simulate_path,
)


@pytest.fixture
def path(bench_params):
    noise = sample_fbm_circulant(GridSpec(1.0, 32), 0.7, 77)
    return simulate_path(noise, bench_params)


@pytest.fixture
def fixed_point_path():
    params = CirParams(kappa=2.0, theta=0.5, sigma=0.5, r0=0.5)
    noise = FbmPath(grid=GridSpec(1.0, 32), hurst=HurstParameter(0.7), values=np.zeros(33))
    return simulate_path(noise, params)


class TestProfile:
    def test_last_interval_single_factor(self, path, bench_params):
        n = 20
        profile = malliavin_profile(path, n)
        h = path.grid.step
        expected = (
            0.5
            * bench_params.sigma
            / (1.0 - drift_derivative(path.x[n], bench_params) * h)
        )
        assert profile.values[-1] == pytest.approx(expected, rel=1e-14)

    def test_bounded_and_nondecreasing(self, path, bench_params):
        # each factor lies in (0, 1) for kappa > 0, so suffix products grow
        # as factors drop off and everything stays within (0, sigma/2]
        for n in (1, 7, 32):
            values = malliavin_profile(path, n).values
            assert values.shape == (n,)
            assert np.all(values > 0.0)
            assert np.all(values <= 0.5 * bench_params.sigma)
            assert np.all(np.diff(values) >= 0.0)

    def test_fixed_point_closed_form(self, fixed_point_path):
        # X_j == sqrt(theta) makes f'(X_j) = -kappa, so the value on interval i
        # is (sigma/2) * (1 + kappa*h)^-(n-i+1)
        params = fixed_point_path.params
        h = fixed_point_path.grid.step
        n = 12
        values = malliavin_profile(fixed_point_path, n).values
        exponents = n - np.arange(1, n + 1) + 1
        closed = 0.5 * params.sigma * (1.0 + params.kappa * h) ** -exponents
        assert np.allclose(values, closed, rtol=1e-12)

    def test_regime_and_domain(self, path):
        negative = CirParams(kappa=-1.0, theta=-0.5, sigma=0.5, r0=1.0)
        noise = FbmPath(
            grid=GridSpec(1.0, 8), hurst=HurstParameter(0.7), values=np.zeros(9)
        )
        neg_path = simulate_path(noise, negative)
        with pytest.raises(UnsupportedRegimeError):
            malliavin_profile(neg_path, 4)
        with pytest.raises(DomainError):
            malliavin_profile(path, 0)
        with pytest.raises(DomainError):
            malliavin_profile(path, 33)

    def test_value_at_lookup(self, path):
        n = 10
        profile = malliavin_profile(path, n)
        h = path.grid.step
        # s in (t_{i-1}, t_i] selects interval i; beyond t_n the value is 0
        assert profile.value_at(0.5 * h) == profile.values[0]
        assert profile.value_at(h) == profile.values[0]
        assert profile.value_at(1.5 * h) == profile.values[1]
        assert profile.value_at(n * h) == profile.values[n - 1]
        assert profile.value_at(n * h + 0.25 * h) == 0.0
        assert profile.value_at(0.0) == profile.values[0]


class TestInterpolatedDerivative:
    def test_weight_collapse_at_nodes(self, path):
        n = 14
        t = path.grid.node(n)
        s = path.grid.node(3)
        expected = malliavin_profile(path, n).value_at(s)
        assert malliavin_interpolated(path, t, s) == pytest.approx(expected, rel=1e-14)

    def test_zero_beyond_support(self, path):
        assert malliavin_interpolated(path, 0.3, 0.9) == 0.0
        assert malliavin_interpolated(path, 0.0, 0.0) == 0.0

    def test_half_weight_midpanel(self, path):
        # for t mid-panel and s inside (t_n, t_{n+1}], only the G_{n+1} term
        # survives and carries weight 1/2
        n = 6
        h = path.grid.step
        t = path.grid.node(n) + 0.5 * h
        s = path.grid.node(n) + 0.7 * h
        expected = 0.5 * malliavin_profile(path, n + 1).value_at(s)
        assert malliavin_interpolated(path, t, s) == pytest.approx(expected, rel=1e-14)

    def test_domain(self, path):
        with pytest.raises(DomainError):
            malliavin_interpolated(path, 1.2, 0.0)
        with pytest.raises(DomainError):
            malliavin_interpolated(path, 0.5, -0.1)


class TestExponentialForm:
    def test_point_mass(self, path, bench_params):
        value = malliavin_exponential_form(path.x, path.grid, 0.25, 0.25, bench_params)
        assert value == 0.5 * bench_params.sigma

    def test_zero_above_diagonal(self, path, bench_params):
        assert malliavin_exponential_form(path.x, path.grid, 0.5, 0.25, bench_params) == 0.0

    def test_constant_levels_closed_form(self):
        params = CirParams(kappa=2.0, theta=0.5, sigma=0.5, r0=0.5)
        grid = GridSpec(1.0, 64)
        levels = np.full(65, math.sqrt(0.5))
        for s, t in ((0.0, 1.0), (0.25, 0.75), (0.1234, 0.9)):
            closed = 0.5 * params.sigma * math.exp(-params.kappa * (t - s))
            value = malliavin_exponential_form(levels, grid, s, t, params)
            assert value == pytest.approx(closed, rel=1e-12)

    def test_domain(self, path, bench_params):
        with pytest.raises(DomainError):
            malliavin_exponential_form(
                np.zeros(path.grid.steps + 1), path.grid, 0.0, 0.5, bench_params
            )
        with pytest.raises(DomainError):
            malliavin_exponential_form(path.x, path.grid, 0.0, 1.5, bench_params)


class TestGapStudy:
    def test_order_one_consistency(self, bench_params, hurst07):
        config = ExperimentConfig(
            params=bench_params,
            hurst=hurst07,
            horizon=1.0,
            reference_exponent=7,
            coarse_exponents=(6, 7),
            samples=30,
            base_seed=42,
        )
        report = malliavin_gap_study(config)
        assert math.isnan(report.ratios[0])
        print(f"gap ratio at h={report.step_sizes[0]}: {report.ratios[1]:.3f}")
        assert 1.6 <= report.ratios[1] <= 2.4
        assert min(report.profile_min) > 0.0
        assert max(report.profile_max) <= 0.5 * bench_params.sigma

    def test_profile_matches_module_formula(self, bench_params, hurst07):
        # the study's internal product must agree with malliavin_profile
        config = ExperimentConfig(
            params=bench_params,
            hurst=hurst07,
            horizon=1.0,
            reference_exponent=6,
            coarse_exponents=(6,),
            samples=1,
            base_seed=9,
        )
        report = malliavin_gap_study(config)
        noise = sample_fbm_circulant(GridSpec(1.0, 64), hurst07, 9)
        profile = malliavin_profile(simulate_path(noise, bench_params), 64)
        assert report.profile_min[0] == pytest.approx(profile.values.min(), rel=1e-14)
        assert report.profile_max[0] == pytest.approx(profile.values.max(), rel=1e-14)

    def test_requires_positive_kappa(self, hurst07):
        negative = CirParams(kappa=-1.0, theta=-0.5, sigma=0.5, r0=1.0)
        config = ExperimentConfig(
            params=negative,
            hurst=hurst07,
            horizon=0.5,
            reference_exponent=5,
            coarse_exponents=(4,),
            samples=2,
            base_seed=1,
        )
        with pytest.raises(UnsupportedRegimeError):
            malliavin_gap_study(config)
