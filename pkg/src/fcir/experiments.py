"""Monte Carlo harness: matched-path convergence studies and moment curves.

All experiments share a common design: path i of a batch is driven by seed
base_seed + i (wrapping at 64 bits), the "exact" solution is the same scheme
run at a fine reference resolution, and coarse solutions are driven by the
same noise restricted to coarser grids.  Per-path results are always reduced
in ascending path index, so reports are bit-identical regardless of how the
paths were chunked across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import DomainError, UnsupportedRegimeError
from .fbm import GridSpec, HurstParameter, sample_fbm_circulant
from .model import (
    CirParams,
    ConditionReport,
    check_moment_condition,
    drift_derivative,
    max_stable_step,
)
from .scheme import simulate_batch

__all__ = [
    "ExperimentConfig",
    "ConvergenceReport",
    "InverseMomentCurve",
    "MalliavinGapReport",
    "path_seed",
    "run_convergence_grid",
    "run_convergence_uniform",
    "estimate_inverse_moments",
    "malliavin_gap_study",
    "regress_order",
]

_SEED_MODULUS = 2**64


def path_seed(base_seed: int, index: int) -> int:
    """Seed for path `index` of a batch: base + index with 64-bit wraparound."""
    return (base_seed + index) % _SEED_MODULUS


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared knobs of the Monte Carlo experiments.

    The reference grid has 2^reference_exponent steps over the horizon; each
    coarse grid has 2^e steps and must embed in the reference grid (e <=
    reference_exponent; equality is the degenerate identical-grid case).
    """

    params: CirParams
    hurst: HurstParameter
    horizon: float
    reference_exponent: int
    coarse_exponents: tuple[int, ...]
    samples: int
    base_seed: int
    xi: float = 0.5
    p: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "coarse_exponents", tuple(self.coarse_exponents))
        if not self.hurst.long_memory:
            raise UnsupportedRegimeError(
                f"experiments drive the solver, which requires H > 1/2; got H={self.hurst.value}"
            )
        if self.horizon <= 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.reference_exponent < 0:
            raise DomainError("reference_exponent must be nonnegative")
        if any(e < 0 or e > self.reference_exponent for e in self.coarse_exponents):
            raise DomainError(
                "coarse exponents must lie in [0, reference_exponent] so the "
                "coarse grids embed in the reference grid"
            )
        if self.samples < 1:
            raise DomainError(f"samples must be >= 1, got {self.samples}")
        if not 0.0 < self.xi < 1.0:
            raise DomainError(f"xi must lie in (0, 1), got {self.xi}")
        if self.p < 1:
            raise DomainError(f"moment order p must be >= 1, got {self.p}")
        limit = max_stable_step(self.params, self.xi)
        coarsest = max(self.step_sizes(), default=self.reference_grid.step)
        if coarsest >= limit:
            raise DomainError(
                f"largest step {coarsest} violates h*max(0, -kappa/2) < 1 - xi "
                f"(limit {limit} for kappa={self.params.kappa}, xi={self.xi})"
            )

    @property
    def reference_grid(self) -> GridSpec:
        return GridSpec(self.horizon, 2**self.reference_exponent)

    def coarse_grid(self, exponent: int) -> GridSpec:
        return GridSpec(self.horizon, 2**exponent)

    def step_sizes(self) -> tuple[float, ...]:
        return tuple(self.coarse_grid(e).step for e in self.coarse_exponents)


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-step-size errors of a matched-path study plus the fitted order.

    Four error families are recorded: sup over shared grid nodes and sup over
    all reference nodes (through the interpolant), each for the level process
    x and for the rate process r = x^2.  `slope`/`intercept` are the log2-log2
    fit on the family named by `fitted_on`.
    """

    step_sizes: tuple[float, ...]
    rms_level_grid: tuple[float, ...]
    rms_level_uniform: tuple[float, ...]
    rms_rate_grid: tuple[float, ...]
    rms_rate_uniform: tuple[float, ...]
    slope: float | None
    intercept: float | None
    fitted_on: str
    samples: int
    base_seed: int
    condition_checks: tuple[ConditionReport, ...]
    warnings: tuple[str, ...]

    def errors(self, family: str) -> tuple[float, ...]:
        return getattr(self, f"rms_{family}")


@dataclass(frozen=True, eq=False)
class InverseMomentCurve:
    """Estimates of E[x_n^(-p)]^(1/p) at every node of one grid."""

    times: np.ndarray
    values: np.ndarray
    p: int
    samples: int
    base_seed: int


@dataclass(frozen=True, eq=False)
class MalliavinGapReport:
    """Mean absolute gap between the product and exponential derivative forms.

    One entry per step size; ratios[j] = mean_abs_gaps[j-1] / mean_abs_gaps[j]
    (nan for the first row).  profile_min/profile_max track the range of the
    product-form values across all paths and intervals at each step size.
    """

    step_sizes: tuple[float, ...]
    mean_abs_gaps: tuple[float, ...]
    ratios: tuple[float, ...]
    profile_min: tuple[float, ...]
    profile_max: tuple[float, ...]
    samples: int
    base_seed: int


def regress_order(step_sizes, errors) -> tuple[float, float]:
    """Least-squares fit of log2(error) against log2(step size)."""
    step_sizes = np.asarray(step_sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if step_sizes.shape != errors.shape or step_sizes.ndim != 1:
        raise DomainError("step sizes and errors must be 1-d arrays of equal length")
    if step_sizes.size < 2:
        raise DomainError("order regression needs at least two step sizes")
    if np.any(step_sizes <= 0.0) or np.any(errors <= 0.0):
        raise DomainError("order regression needs strictly positive inputs")
    slope, intercept = np.polyfit(np.log2(step_sizes), np.log2(errors), 1)
    return float(slope), float(intercept)


def _chunk_bounds(total: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), total))
    base, extra = divmod(total, workers)
    bounds = []
    start = 0
    for w in range(workers):
        stop = start + base + (1 if w < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def _run_chunks(chunk_fn, config: ExperimentConfig, workers: int) -> list:
    """Evaluate chunk_fn(config, start, stop) over all paths, in index order."""
    bounds = _chunk_bounds(config.samples, workers)
    if len(bounds) == 1:
        return [chunk_fn(config, *bounds[0])]
    task = partial(chunk_fn, config)
    with ProcessPoolExecutor(max_workers=len(bounds)) as pool:
        return list(pool.map(task, *zip(*bounds)))


def _reference_levels(config: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    """Driving noise levels for paths start..stop-1 on the reference grid."""
    grid = config.reference_grid
    noise = np.empty((stop - start, grid.steps + 1))
    for row, index in enumerate(range(start, stop)):
        path = sample_fbm_circulant(grid, config.hurst, path_seed(config.base_seed, index))
        noise[row] = path.values
    return noise


_ERROR_FAMILIES = ("level_grid", "level_uniform", "rate_grid", "rate_uniform")


def _convergence_chunk(config: ExperimentConfig, start: int, stop: int) -> dict:
    ref_grid = config.reference_grid
    noise = _reference_levels(config, start, stop)
    x_ref = simulate_batch(np.diff(noise, axis=1), ref_grid.step, config.params)
    r_ref = x_ref**2
    ref_nodes = ref_grid.nodes()

    m = stop - start
    errors = {name: np.empty((m, len(config.coarse_exponents))) for name in _ERROR_FAMILIES}
    for j, exponent in enumerate(config.coarse_exponents):
        grid = config.coarse_grid(exponent)
        factor = 2 ** (config.reference_exponent - exponent)
        x = simulate_batch(np.diff(noise[:, ::factor], axis=1), grid.step, config.params)
        shared_ref = x_ref[:, ::factor]
        errors["level_grid"][:, j] = np.abs(shared_ref[:, 1:] - x[:, 1:]).max(axis=1)
        errors["rate_grid"][:, j] = np.abs(shared_ref[:, 1:] ** 2 - x[:, 1:] ** 2).max(axis=1)
        coarse_nodes = grid.nodes()
        for row in range(m):
            interpolated = np.interp(ref_nodes, coarse_nodes, x[row])
            errors["level_uniform"][row, j] = np.abs(x_ref[row, 1:] - interpolated[1:]).max()
            errors["rate_uniform"][row, j] = np.abs(
                r_ref[row, 1:] - interpolated[1:] ** 2
            ).max()
    return errors


def _aggregate_moment(per_path: np.ndarray, p: int) -> np.ndarray:
    """(E[sup-error^p])^(1/p) along axis 0, reduced in path-index order."""
    return np.mean(per_path**p, axis=0) ** (1.0 / p)


def _run_convergence(config: ExperimentConfig, fitted_on: str, workers: int) -> ConvergenceReport:
    if not config.coarse_exponents:
        raise DomainError("a convergence study needs at least one coarse exponent")
    chunks = _run_chunks(_convergence_chunk, config, workers)
    per_path = {
        name: np.concatenate([chunk[name] for chunk in chunks], axis=0)
        for name in _ERROR_FAMILIES
    }
    rms = {name: _aggregate_moment(per_path[name], config.p) for name in _ERROR_FAMILIES}

    notes = []
    checks = []
    for multiplier in (config.p + 1, 3 * config.p + 1):
        report = check_moment_condition(
            config.p, multiplier, config.params, config.hurst, config.horizon
        )
        checks.append(report)
        if not report.holds:
            notes.append(
                f"inverse-moment condition with multiplier {multiplier} fails "
                f"(worst margin {report.worst_margin:.3g} at s={report.worst_s:.3g}); "
                "the scheme still runs, but the order guarantee is not covered"
            )

    step_sizes = np.asarray(config.step_sizes())
    fitted = rms[fitted_on]
    if step_sizes.size >= 2 and np.all(fitted > 0.0):
        slope, intercept = regress_order(step_sizes, fitted)
    else:
        slope, intercept = None, None
        notes.append("order fit skipped: need >= 2 step sizes with positive errors")

    return ConvergenceReport(
        step_sizes=tuple(float(h) for h in step_sizes),
        rms_level_grid=tuple(map(float, rms["level_grid"])),
        rms_level_uniform=tuple(map(float, rms["level_uniform"])),
        rms_rate_grid=tuple(map(float, rms["rate_grid"])),
        rms_rate_uniform=tuple(map(float, rms["rate_uniform"])),
        slope=slope,
        intercept=intercept,
        fitted_on=fitted_on,
        samples=config.samples,
        base_seed=config.base_seed,
        condition_checks=tuple(checks),
        warnings=tuple(notes),
    )


def run_convergence_grid(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Matched-path strong errors at shared grid nodes; order fit on the level.

    Per sample: one reference noise path, the reference solution, and for each
    coarse step size the solution driven by the restricted noise; the error is
    the sup over coarse nodes n >= 1 of |x_ref(t_n) - x_n|.  The report
    aggregates (E[sup^p])^(1/p) per step size.
    """
    return _run_convergence(config, "level_grid", workers)


def run_convergence_uniform(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Matched-path strong errors in the uniform norm via interpolation.

    Same design as `run_convergence_grid`, but the per-sample error is the sup
    over all reference nodes of |x_ref(t) - x^h(t)| with x^h the piecewise
    linear interpolant of the coarse solution.
    """
    return _run_convergence(config, "level_uniform", workers)


def _inverse_moment_chunk(config: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    grid = config.reference_grid
    noise = _reference_levels(config, start, stop)
    x = simulate_batch(np.diff(noise, axis=1), grid.step, config.params)
    return x ** (-float(config.p))


def estimate_inverse_moments(config: ExperimentConfig, workers: int = 1) -> InverseMomentCurve:
    """Sample estimate of E[x_n^(-p)]^(1/p) at every reference-grid node."""
    chunks = _run_chunks(_inverse_moment_chunk, config, workers)
    powers = np.concatenate(chunks, axis=0)
    values = np.mean(powers, axis=0) ** (1.0 / config.p)
    return InverseMomentCurve(
        times=config.reference_grid.nodes(),
        values=values,
        p=config.p,
        samples=config.samples,
        base_seed=config.base_seed,
    )


def _malliavin_chunk(config: ExperimentConfig, start: int, stop: int) -> dict:
    """Per-path mean |product form - exponential form| at the final node.

    For each coarse resolution the derivative of the terminal value is
    evaluated both as the backward product over (1 - f' h)^{-1} factors and as
    the exponential of a trapezoid integral of f' along the same path, at the
    matched perturbation times s = t_i.  Both forms use the same numerical
    levels, so the gap isolates the formula difference, which is O(h).
    """
    params = config.params
    noise = _reference_levels(config, start, stop)
    m = stop - start
    n_levels = len(config.coarse_exponents)
    gaps = np.empty((m, n_levels))
    lows = np.empty((m, n_levels))
    highs = np.empty((m, n_levels))
    for row in range(m):
        for j, exponent in enumerate(config.coarse_exponents):
            grid = config.coarse_grid(exponent)
            factor = 2 ** (config.reference_exponent - exponent)
            levels = simulate_batch(
                np.diff(noise[row, ::factor]), grid.step, params
            )
            slopes = drift_derivative(levels, params)
            product = 0.5 * params.sigma * np.cumprod(
                (1.0 / (1.0 - slopes[1:] * grid.step))[::-1]
            )[::-1]
            # trapezoid of f' over [t_i, T] for i = 1..N, via a reversed cumsum
            tail_sums = np.cumsum(slopes[::-1])[::-1]
            trapezoids = grid.step * (tail_sums[1:] - 0.5 * (slopes[1:] + slopes[-1]))
            exponential = 0.5 * params.sigma * np.exp(trapezoids)
            gaps[row, j] = np.abs(product - exponential).mean()
            lows[row, j] = product.min()
            highs[row, j] = product.max()
    return {"gaps": gaps, "lows": lows, "highs": highs}


def malliavin_gap_study(config: ExperimentConfig, workers: int = 1) -> MalliavinGapReport:
    """Compare the two Malliavin derivative forms across step sizes.

    Noise is generated once per sample on the reference grid and restricted to
    each coarse grid, so successive rows are shared-noise pairs and the gap
    ratio between a step size and its half is close to 2.
    """
    if not config.coarse_exponents:
        raise DomainError("a gap study needs at least one coarse exponent")
    if config.params.kappa <= 0.0:
        raise UnsupportedRegimeError(
            "the derivative comparison is defined only for kappa > 0"
        )
    chunks = _run_chunks(_malliavin_chunk, config, workers)
    gaps = np.concatenate([c["gaps"] for c in chunks], axis=0).mean(axis=0)
    lows = np.concatenate([c["lows"] for c in chunks], axis=0).min(axis=0)
    highs = np.concatenate([c["highs"] for c in chunks], axis=0).max(axis=0)
    ratios = np.full_like(gaps, np.nan)
    ratios[1:] = gaps[:-1] / gaps[1:]
    return MalliavinGapReport(
        step_sizes=config.step_sizes(),
        mean_abs_gaps=tuple(map(float, gaps)),
        ratios=tuple(map(float, ratios)),
        profile_min=tuple(map(float, lows)),
        profile_max=tuple(map(float, highs)),
        samples=config.samples,
        base_seed=config.base_seed,
    )
