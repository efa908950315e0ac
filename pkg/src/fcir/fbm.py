"""Exact sampling of fractional Brownian motion (fBm) on uniform grids.

Two exact samplers are provided: a Cholesky factorization of the
fractional-Gaussian-noise (fGn) covariance, O(N^3) once per grid, and a
circulant-embedding sampler diagonalized by the FFT, O(N log N).  Both
sample the increment process rather than the levels -- the increment
covariance is Toeplitz and far better conditioned -- and recover levels
by prefix sums.

Randomness is frozen to NumPy's PCG64 bit generator with its ziggurat
``standard_normal``.  A given (grid, H, seed) triple therefore reproduces
the same path bit-for-bit on a given platform, which the Monte Carlo
harness relies on for matched-path experiments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DomainError,
    EmbeddingFallbackWarning,
    NumericalError,
    SingularityError,
)

__all__ = [
    "HurstParameter",
    "GridSpec",
    "FbmPath",
    "fbm_covariance",
    "fgn_autocovariance",
    "covariance_density",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
    "coarsen_path",
    "holder_statistic",
]

# Largest N for which Cholesky factors are kept in the process-level cache.
_CHOLESKY_CACHE_MAX_N = 2048
# Relative tolerance on negative embedding eigenvalues: anything in
# [-EMBEDDING_EIG_TOL * lambda_max, 0) is rounding noise and is clamped.
EMBEDDING_EIG_TOL = 1e-8


@dataclass(frozen=True)
class HurstParameter:
    """Hurst index H of the driving noise, constrained to (0, 1)."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 < float(self.value) < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0, 1), got {self.value}")
        object.__setattr__(self, "value", float(self.value))

    @property
    def alpha(self) -> float:
        """H(2H - 1), the prefactor of the covariance density; positive iff H > 1/2."""
        return self.value * (2.0 * self.value - 1.0)

    @property
    def long_memory(self) -> bool:
        return self.value > 0.5


def _as_hurst(hurst: HurstParameter | float) -> HurstParameter:
    if isinstance(hurst, HurstParameter):
        return hurst
    return HurstParameter(float(hurst))


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid t_n = n * step on [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int

    def __post_init__(self) -> None:
        if not float(self.horizon) > 0.0 or not np.isfinite(self.horizon):
            raise DomainError(f"horizon must be positive and finite, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def step(self) -> float:
        return self.horizon / self.steps

    def node(self, n: int) -> float:
        if not 0 <= n <= self.steps:
            raise DomainError(f"node index {n} outside 0..{self.steps}")
        return n * self.step

    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.steps + 1)


@dataclass(frozen=True, eq=False)
class FbmPath:
    """A sampled fBm trajectory on a grid; values[0] is pinned to 0."""

    grid: GridSpec
    hurst: HurstParameter
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.steps + 1:
            raise DomainError(
                f"path must hold {self.grid.steps + 1} node values, got shape {values.shape}"
            )
        if values[0] != 0.0:
            raise DomainError("fBm paths start at 0")
        object.__setattr__(self, "values", values)

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def fbm_covariance(t, s, hurst: HurstParameter | float):
    """Covariance of fBm at times (t, s): (t^2H + s^2H - |t-s|^2H) / 2.

    Accepts scalars or broadcastable arrays; symmetric in (t, s).
    """
    H2 = 2.0 * _as_hurst(hurst).value
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0.0) or np.any(s < 0.0):
        raise DomainError("fbm_covariance requires nonnegative times")
    out = 0.5 * (t**H2 + s**H2 - np.abs(t - s) ** H2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(lag, step: float, hurst: HurstParameter | float):
    """Autocovariance of unit-grid fBm increments at the given lag(s).

    Equals (step^2H / 2) * (|k+1|^2H - 2|k|^2H + |k-1|^2H), the covariance of
    increments over [n*step, (n+1)*step] and [(n+k)*step, (n+k+1)*step].
    """
    if step <= 0.0:
        raise DomainError(f"step must be positive, got {step}")
    H2 = 2.0 * _as_hurst(hurst).value
    k = np.asarray(lag, dtype=float)
    if np.any(k < 0):
        raise DomainError("lag must be nonnegative")
    out = 0.5 * step**H2 * ((k + 1.0) ** H2 - 2.0 * k**H2 + np.abs(k - 1.0) ** H2)
    return float(out) if out.ndim == 0 else out


def covariance_density(tau: float, u: float, hurst: HurstParameter | float) -> float:
    """Mixed-derivative density of the fBm covariance: H(2H-1)|u - tau|^(2H-2).

    Only defined for H > 1/2, where the density is positive and integrable;
    it blows up on the diagonal, so tau == u is rejected and callers must
    integrate around that point.
    """
    hurst = _as_hurst(hurst)
    if not hurst.long_memory:
        raise DomainError(f"covariance density requires H > 1/2, got {hurst.value}")
    if tau == u:
        raise SingularityError("covariance density is singular at tau == u")
    return hurst.alpha * abs(u - tau) ** (2.0 * hurst.value - 2.0)


def _rng(seed: int) -> np.random.Generator:
    # Frozen variate source: PCG64 + ziggurat standard_normal. Changing this
    # silently changes every seeded path, so treat it as part of the contract.
    # Seeds wrap at 64 bits, matching the batch seed-derivation rule.
    return np.random.Generator(np.random.PCG64(int(seed) % 2**64))


@lru_cache(maxsize=8)
def _cholesky_factor(steps: int, step: float, hvalue: float) -> np.ndarray:
    lags = np.arange(steps)
    gamma = fgn_autocovariance(lags, step, hvalue)
    cov = gamma[np.abs(lags[:, None] - lags[None, :])]
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"fGn covariance factorization failed (N={steps}, H={hvalue}): {exc}; "
            "the matrix is positive definite in exact arithmetic, so this points "
            "at severe rounding for these grid parameters"
        ) from exc
    factor.setflags(write=False)
    return factor


def sample_fbm_cholesky(
    grid: GridSpec, hurst: HurstParameter | float, seed: int
) -> FbmPath:
    """Exact fBm sample via Cholesky factorization of the fGn covariance.

    Deterministic for a fixed seed. O(N^3) for the factorization (cached for
    small N) plus O(N^2) per draw.
    """
    hurst = _as_hurst(hurst)
    if grid.steps <= _CHOLESKY_CACHE_MAX_N:
        factor = _cholesky_factor(grid.steps, grid.step, hurst.value)
    else:
        factor = _cholesky_factor.__wrapped__(grid.steps, grid.step, hurst.value)
    z = _rng(seed).standard_normal(grid.steps)
    increments = factor @ z
    values = np.empty(grid.steps + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return FbmPath(grid=grid, hurst=hurst, values=values, seed=seed)


@lru_cache(maxsize=32)
def _embedding_coefficients(steps: int, step: float, hvalue: float) -> np.ndarray | None:
    """sqrt(eigenvalues / 2N) of the 2N circulant embedding, or None if invalid."""
    gamma = fgn_autocovariance(np.arange(steps + 1), step, hvalue)
    row = np.concatenate([gamma[:-1], gamma[-1:], gamma[1:-1][::-1]])
    eigenvalues = np.fft.fft(row).real
    lam_max = eigenvalues.max()
    if eigenvalues.min() < -EMBEDDING_EIG_TOL * lam_max:
        return None
    coefficients = np.sqrt(np.clip(eigenvalues, 0.0, None) / (2.0 * steps))
    coefficients.setflags(write=False)
    return coefficients


def sample_fbm_circulant(
    grid: GridSpec, hurst: HurstParameter | float, seed: int
) -> FbmPath:
    """Exact fBm sample via circulant embedding of the fGn covariance.

    Same law as `sample_fbm_cholesky` but O(N log N).  fGn embeddings are
    nonnegative definite in exact arithmetic; eigenvalues that dip below zero
    by at most EMBEDDING_EIG_TOL * lambda_max are clamped, anything worse
    triggers a warning and a fallback to the Cholesky sampler.
    """
    hurst = _as_hurst(hurst)
    n = grid.steps
    coefficients = _embedding_coefficients(n, grid.step, hurst.value)
    if coefficients is None:
        warnings.warn(
            f"circulant embedding for N={n}, H={hurst.value} has eigenvalues below "
            f"-{EMBEDDING_EIG_TOL:g}*max; falling back to the Cholesky sampler",
            EmbeddingFallbackWarning,
            stacklevel=2,
        )
        return sample_fbm_cholesky(grid, hurst, seed)

    z = _rng(seed).standard_normal(2 * n)
    # Hermitian-symmetric complex Gaussian spectrum with a frozen layout:
    # z[0] -> DC, z[1] -> Nyquist, then all real parts, then all imaginary parts.
    spectrum = np.empty(2 * n, dtype=complex)
    spectrum[0] = z[0]
    spectrum[n] = z[1]
    if n > 1:
        re = z[2 : n + 1]
        im = z[n + 1 :]
        spectrum[1:n] = (re + 1j * im) / np.sqrt(2.0)
        spectrum[n + 1 :] = np.conj(spectrum[1:n][::-1])
    increments = np.fft.fft(coefficients * spectrum).real[:n]
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return FbmPath(grid=grid, hurst=hurst, values=values, seed=seed)


def coarsen_path(path: FbmPath, factor: int) -> FbmPath:
    """Restrict a path to every `factor`-th node; retained values are unchanged.

    Coarse increments are therefore exactly the block sums of fine increments,
    which is what matched-path convergence studies require.
    """
    if int(factor) != factor or factor < 1:
        raise DomainError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if path.grid.steps % factor != 0:
        raise DomainError(
            f"factor {factor} does not divide the step count {path.grid.steps}"
        )
    coarse_grid = GridSpec(path.grid.horizon, path.grid.steps // factor)
    return FbmPath(
        grid=coarse_grid,
        hurst=path.hurst,
        values=path.values[::factor].copy(),
        seed=path.seed,
    )


def holder_statistic(path: FbmPath, epsilon: float = 0.1) -> float:
    """Empirical (H - epsilon)-Hoelder quotient over dyadic lags.

    max over lags k in {1, 2, 4, ...} and nodes n of
    |B(t_{n+k}) - B(t_n)| / (k h)^(H - epsilon).  Finite per path; its
    distribution stabilizes as the grid is refined because the trajectories
    are (H - epsilon)-Hoelder continuous.
    """
    if not 0.0 < epsilon < path.hurst.value:
        raise DomainError("epsilon must lie in (0, H)")
    exponent = path.hurst.value - epsilon
    h = path.grid.step
    values = path.values
    best = 0.0
    k = 1
    while k <= path.grid.steps:
        gap = np.abs(values[k:] - values[:-k]).max()
        best = max(best, gap / (k * h) ** exponent)
        k *= 2
    return best
