"""Tests for the fBm types, covariance functions, and exact samplers."""

import time

import numpy as np
import pytest
from scipy import stats

from fcir import (
    DomainError,
    EmbeddingFallbackWarning,
    FbmPath,
    GridSpec,
    HurstParameter,
    NumericalError,
    SingularityError,
    coarsen_path,
    covariance_density,
    fbm_covariance,
    fgn_autocovariance,
    holder_statistic,
    sample_fbm_cholesky,
    sample_fbm_circulant,
)
from fcir.fbm import _cholesky_factor, _embedding_coefficients


class TestTypes:
    def test_hurst_domain(self):
        assert HurstParameter(0.7).value == 0.7
        assert HurstParameter(0.75).alpha == pytest.approx(0.75 * 0.5)
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(DomainError):
                HurstParameter(bad)

    def test_grid_spec(self):
        grid = GridSpec(2.0, 8)
        assert grid.step == 0.25
        assert grid.node(3) == 3 * 0.25
        assert np.array_equal(grid.nodes(), 0.25 * np.arange(9))
        with pytest.raises(DomainError):
            GridSpec(0.0, 8)
        with pytest.raises(DomainError):
            GridSpec(1.0, 0)
        with pytest.raises(DomainError):
            grid.node(9)

    def test_fbm_path_starts_at_zero(self):
        grid = GridSpec(1.0, 4)
        with pytest.raises(DomainError):
            FbmPath(grid=grid, hurst=HurstParameter(0.7), values=np.ones(5))
        with pytest.raises(DomainError):
            FbmPath(grid=grid, hurst=HurstParameter(0.7), values=np.zeros(4))


class TestCovarianceFunctions:
    def test_fbm_covariance_values(self):
        assert fbm_covariance(1.0, 1.0, 0.75) == pytest.approx(1.0)
        assert fbm_covariance(3.7, 0.0, 0.6) == 0.0
        # H = 1/2 reduces to min(s, t)
        assert fbm_covariance(2.0, 1.0, 0.5) == pytest.approx(1.0)
        assert fbm_covariance(1.3, 0.4, 0.7) == fbm_covariance(0.4, 1.3, 0.7)
        with pytest.raises(DomainError):
            fbm_covariance(-1.0, 1.0, 0.7)

    @pytest.mark.parametrize("H", [0.55, 0.7, 0.9])
    def test_diagonal_is_power_law(self, H):
        t = np.linspace(0.1, 3.0, 13)
        assert np.allclose(fbm_covariance(t, t, H), t ** (2 * H), rtol=1e-14)

    def test_fgn_autocovariance_values(self):
        assert fgn_autocovariance(0, 1.0, 0.7) == pytest.approx(1.0)
        assert fgn_autocovariance(0, 0.5, 0.5) == pytest.approx(0.5)
        assert fgn_autocovariance(1, 1.0, 0.5) == pytest.approx(0.0)
        with pytest.raises(DomainError):
            fgn_autocovariance(0, 0.0, 0.7)

    def test_increment_sums_reproduce_variance(self):
        # Var(B(t_n)) assembled from increment covariances must match the
        # closed form at every node.
        grid = GridSpec(1.7, 64)
        H = 0.65
        lags = np.arange(64)
        gamma = fgn_autocovariance(lags, grid.step, H)
        cov = gamma[np.abs(lags[:, None] - lags[None, :])]
        for n in range(1, 65):
            var_n = cov[:n, :n].sum()
            exact = fbm_covariance(grid.node(n), grid.node(n), H)
            assert abs(var_n - exact) <= 1e-10 * exact

    def test_covariance_density(self):
        assert covariance_density(0.0, 1.0, 0.75) == pytest.approx(0.375)
        assert covariance_density(1.0, 0.0, 0.75) == pytest.approx(0.375)
        assert covariance_density(0.0, 2.0, 0.75) == pytest.approx(0.375 * 2**-0.5)
        with pytest.raises(SingularityError):
            covariance_density(1.0, 1.0, 0.75)
        with pytest.raises(DomainError):
            covariance_density(0.0, 1.0, 0.5)


@pytest.mark.parametrize("sampler", [sample_fbm_cholesky, sample_fbm_circulant])
class TestSamplerContracts:
    def test_same_seed_bit_identical(self, sampler):
        grid = GridSpec(1.0, 128)
        a = sampler(grid, 0.7, 12345)
        b = sampler(grid, 0.7, 12345)
        assert np.array_equal(a.values, b.values)
        assert a.values[0] == 0.0
        assert a.seed == 12345

    def test_seed_wraps_at_64_bits(self, sampler):
        grid = GridSpec(1.0, 8)
        wrapped = sampler(grid, 0.7, -1)
        assert np.array_equal(wrapped.values, sampler(grid, 0.7, 2**64 - 1).values)

    def test_unit_time_marginal_variance(self, sampler):
        # B(1) is standard normal when T = 1: sample variance over 1e5 seeds
        # within 3 standard errors of 1.
        grid = GridSpec(1.0, 1)
        draws = np.array([sampler(grid, 0.7, s).values[1] for s in range(100_000)])
        se = np.sqrt(2.0 / draws.size)
        print(f"{sampler.__name__}: var={draws.var():.5f} (3se={3 * se:.5f})")
        assert abs(draws.var() - 1.0) <= 3.0 * se


class TestCholeskySampler:
    def test_empirical_covariance_matches_closed_form(self):
        grid = GridSpec(1.0, 32)
        H = 0.7
        m = 2000
        batch = np.stack(
            [sample_fbm_cholesky(grid, H, 700 + i).values for i in range(m)]
        )
        nodes = grid.nodes()
        exact = fbm_covariance(nodes[:, None], nodes[None, :], H)
        empirical = batch.T @ batch / m
        spread = np.sqrt((np.outer(np.diag(exact), np.diag(exact)) + exact**2) / m)
        worst = np.abs(empirical - exact) - 5.0 * spread
        assert worst.max() <= 0.0, f"covariance entry off by {worst.max():.3g} beyond 5 se"


class TestCirculantSampler:
    def test_matches_cholesky_distribution(self):
        # Two-sample KS on B(T) at 1%; independent seed ranges.
        grid = GridSpec(1.0, 2**10)
        m = 5000
        chol = np.array(
            [sample_fbm_cholesky(grid, 0.6, 10_000 + i).values[-1] for i in range(m)]
        )
        circ = np.array(
            [sample_fbm_circulant(grid, 0.6, 20_000 + i).values[-1] for i in range(m)]
        )
        result = stats.ks_2samp(chol, circ)
        print(f"cross-sampler KS p-value: {result.pvalue:.4f}")
        assert result.pvalue >= 0.01

    def test_faster_than_cholesky_at_large_n(self):
        _cholesky_factor.cache_clear()
        _embedding_coefficients.cache_clear()
        grid = GridSpec(1.0, 2**12)
        start = time.perf_counter()
        sample_fbm_cholesky(grid, 0.8, 1)
        elapsed_cholesky = time.perf_counter() - start
        start = time.perf_counter()
        sample_fbm_circulant(grid, 0.8, 1)
        elapsed_circulant = time.perf_counter() - start
        print(f"N=4096: cholesky {elapsed_cholesky:.3f}s circulant {elapsed_circulant:.5f}s")
        assert elapsed_circulant < elapsed_cholesky

    @pytest.mark.parametrize("H", [0.55, 0.6, 0.7, 0.8, 0.9])
    def test_embedding_valid_for_long_memory(self, H):
        coeffs = _embedding_coefficients(256, 1.0 / 256, H)
        assert coeffs is not None

    def test_fallback_to_cholesky_warns(self, monkeypatch):
        import fcir.fbm as fbm_module

        monkeypatch.setattr(fbm_module, "_embedding_coefficients", lambda *args: None)
        grid = GridSpec(1.0, 16)
        with pytest.warns(EmbeddingFallbackWarning):
            path = sample_fbm_circulant(grid, 0.7, 3)
        assert np.array_equal(path.values, sample_fbm_cholesky(grid, 0.7, 3).values)

    def test_factorization_failure_diagnostic(self, monkeypatch):
        def explode(matrix):
            raise np.linalg.LinAlgError("matrix is not positive definite")

        _cholesky_factor.cache_clear()
        monkeypatch.setattr(np.linalg, "cholesky", explode)
        with pytest.raises(NumericalError, match="factorization failed"):
            sample_fbm_cholesky(GridSpec(1.0, 8), 0.7, 1)
        _cholesky_factor.cache_clear()


class TestCoarsen:
    def test_identity_and_telescoping(self):
        grid = GridSpec(1.0, 8)
        path = sample_fbm_circulant(grid, 0.7, 3)
        same = coarsen_path(path, 1)
        assert np.array_equal(same.values, path.values)
        two_nodes = coarsen_path(path, 8)
        assert two_nodes.grid.steps == 1
        assert np.array_equal(two_nodes.values, [0.0, path.values[-1]])

    def test_node_retention(self):
        path = sample_fbm_circulant(GridSpec(1.0, 8), 0.7, 4)
        coarse = coarsen_path(path, 2)
        assert np.array_equal(coarse.values, path.values[::2])
        assert coarse.grid.step == pytest.approx(0.25)
        # coarse increments are block sums of fine increments
        fine_inc = path.increments()
        expected = fine_inc.reshape(4, 2).sum(axis=1)
        assert np.allclose(coarse.increments(), expected, atol=1e-12)

    def test_bad_factor(self):
        path = sample_fbm_circulant(GridSpec(1.0, 8), 0.7, 5)
        with pytest.raises(DomainError):
            coarsen_path(path, 3)
        with pytest.raises(DomainError):
            coarsen_path(path, 0)


class TestHolderRegularity:
    def test_p99_stable_under_refinement(self):
        # Trajectories are (H - eps)-Hoelder, so the empirical quotient's
        # 99th percentile stays within a factor 2 when the grid doubles.
        quantiles = []
        for exponent in (12, 13):
            grid = GridSpec(1.0, 2**exponent)
            statistics = [
                holder_statistic(sample_fbm_circulant(grid, 0.7, 500 + i))
                for i in range(200)
            ]
            assert np.all(np.isfinite(statistics))
            quantiles.append(np.percentile(statistics, 99))
        ratio = max(quantiles) / min(quantiles)
        print(f"holder p99 at 2^12 vs 2^13: {quantiles} ratio={ratio:.3f}")
        assert ratio <= 2.0
