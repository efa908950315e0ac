"""Malliavin derivatives of the numerical solution and their continuous analogue.

For kappa > 0 the derivative of the node value X_n with respect to the
driving noise is piecewise constant in the perturbation time s: on
(t_{i-1}, t_i] it equals (sigma/2) * prod_{j=i..n} (1 - f'(X_j) h)^{-1}.
The continuous counterpart is (sigma/2) * exp(integral of f'(X) from s to t),
evaluated here by trapezoid quadrature along supplied path levels.  Since
each product factor is exp(f' h) to first order, the two forms agree to
O(h), which the harness verifies empirically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, UnsupportedRegimeError
from .fbm import GridSpec
from .model import CirParams, drift_derivative
from .scheme import SolutionPath

__all__ = [
    "MalliavinProfile",
    "malliavin_profile",
    "malliavin_interpolated",
    "malliavin_exponential_form",
]


def _require_positive_kappa(params: CirParams) -> None:
    # The product formula is established only for kappa > 0, where every
    # factor 1 - f'(X_j) h exceeds 1; no claim is made for kappa < 0.
    if params.kappa <= 0.0:
        raise UnsupportedRegimeError(
            f"Malliavin derivative formulas require kappa > 0, got {params.kappa}"
        )


@dataclass(frozen=True, eq=False)
class MalliavinProfile:
    """Derivative of node value X_n in the perturbation time s.

    values[i-1] applies on the interval (t_{i-1}, t_i], i = 1..n; the
    derivative vanishes for s > t_n.  For kappa > 0 every value lies in
    (0, sigma/2] and the sequence is nondecreasing in i.
    """

    path: SolutionPath
    node: int
    values: np.ndarray

    def value_at(self, s: float) -> float:
        grid = self.path.grid
        if s < 0.0 or s > grid.horizon:
            raise DomainError(f"s must lie in [0, {grid.horizon}]")
        if s > grid.node(self.node):
            return 0.0
        if s == 0.0:
            return float(self.values[0])
        interval = int(np.searchsorted(grid.nodes(), s, side="left"))
        return float(self.values[interval - 1])


def malliavin_profile(path: SolutionPath, node: int) -> MalliavinProfile:
    """Piecewise-constant derivative profile of X_n, by one backward sweep."""
    _require_positive_kappa(path.params)
    if not 1 <= node <= path.grid.steps:
        raise DomainError(f"node must lie in 1..{path.grid.steps}, got {node}")
    h = path.grid.step
    factors = 1.0 / (1.0 - drift_derivative(path.x[1 : node + 1], path.params) * h)
    suffix_products = np.cumprod(factors[::-1])[::-1]
    return MalliavinProfile(
        path=path, node=node, values=0.5 * path.params.sigma * suffix_products
    )


def malliavin_interpolated(path: SolutionPath, t: float, s: float) -> float:
    """Derivative of the interpolated solution at time t in direction s.

    Convex combination of the profiles at the two panel endpoints:
    (t_{n+1} - t)/h * G_n(s) on [0, t_n] plus (t - t_n)/h * G_{n+1}(s) on
    [0, t_{n+1}], zero beyond.
    """
    _require_positive_kappa(path.params)
    grid = path.grid
    if t < 0.0 or t > grid.horizon:
        raise DomainError(f"t must lie in [0, {grid.horizon}]")
    if s < 0.0 or s > grid.horizon:
        raise DomainError(f"s must lie in [0, {grid.horizon}]")
    if t == 0.0:
        return 0.0
    nodes = grid.nodes()
    n = int(np.searchsorted(nodes, t, side="left")) - 1
    h = grid.step
    weight_next = (t - nodes[n]) / h
    weight_prev = (nodes[n + 1] - t) / h
    # X_0 is deterministic, so the n = 0 profile is identically zero.
    prev = malliavin_profile(path, n).value_at(s) if n >= 1 else 0.0
    nxt = malliavin_profile(path, n + 1).value_at(s)
    return weight_prev * prev + weight_next * nxt


def malliavin_exponential_form(
    levels: np.ndarray,
    grid: GridSpec,
    s: float,
    t: float,
    params: CirParams,
) -> float:
    """(sigma/2) * exp(integral of f'(level) from s to t), trapezoid rule.

    `levels` are strictly positive values on the grid nodes; levels at s and
    t themselves are filled in by linear interpolation.  Returns 0 for s > t
    and sigma/2 for s == t.  For kappa > 0 the result lies in (0, sigma/2].
    """
    if s > t:
        return 0.0
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.shape[0] != grid.steps + 1:
        raise DomainError(
            f"levels must hold {grid.steps + 1} node values, got shape {levels.shape}"
        )
    if np.any(levels <= 0.0):
        raise DomainError("levels must be strictly positive")
    for name, value in (("s", s), ("t", t)):
        if value < 0.0 or value > grid.horizon:
            raise DomainError(f"{name} must lie in [0, {grid.horizon}]")
    if s == t:
        return 0.5 * params.sigma

    nodes = grid.nodes()
    inside = nodes[(nodes > s) & (nodes < t)]
    times = np.concatenate([[s], inside, [t]])
    values = np.interp(times, nodes, levels)
    integral = trapezoid(drift_derivative(values, params), times)
    return 0.5 * params.sigma * float(np.exp(integral))
