"""CSV and manifest writers for every externally visible data format.

All floating-point output uses 17 significant digits, which round-trips
double precision losslessly, and a fixed "\n" line ending so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .experiments import ConvergenceReport, InverseMomentCurve, MalliavinGapReport
from .fbm import FbmPath
from .model import ConditionReport
from .scheme import SolutionPath, rate_path

__all__ = [
    "format_float",
    "condition_record",
    "write_fbm_path",
    "write_solution_path",
    "write_condition_reports",
    "write_convergence",
    "write_inverse_moments",
    "write_malliavin_gaps",
    "write_key_values",
]


def format_float(value: float) -> str:
    return f"{value:.17g}"


def _write_lines(target: Path, lines: Iterable[str]) -> None:
    with open(target, "w", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")


def write_fbm_path(target: Path, path: FbmPath) -> None:
    """Noise path as `t,B`, one row per node."""
    nodes = path.grid.nodes()
    lines = ["t,B"]
    lines += [
        f"{format_float(t)},{format_float(b)}" for t, b in zip(nodes, path.values)
    ]
    _write_lines(target, lines)


def write_solution_path(target: Path, path: SolutionPath) -> None:
    """Solution path as `t,X,r`, one row per node."""
    nodes = path.nodes()
    rates = rate_path(path)
    lines = ["t,X,r"]
    lines += [
        f"{format_float(t)},{format_float(x)},{format_float(r)}"
        for t, x, r in zip(nodes, path.x, rates)
    ]
    _write_lines(target, lines)


def condition_record(report: ConditionReport) -> str:
    """One-line CSV record: holds,worst_margin,worst_s,multiplier,method."""
    return ",".join(
        [
            str(report.holds).lower(),
            format_float(report.worst_margin),
            format_float(report.worst_s),
            str(report.multiplier),
            report.method,
        ]
    )


def write_condition_reports(target: Path, reports: Iterable[ConditionReport]) -> None:
    lines = ["holds,worst_margin,worst_s,multiplier,method"]
    lines += [condition_record(report) for report in reports]
    _write_lines(target, lines)


def write_convergence(target: Path, report: ConvergenceReport) -> None:
    """Errors as `h,rms_sup_error_grid,rms_sup_error_uniform,samples`."""
    lines = ["h,rms_sup_error_grid,rms_sup_error_uniform,samples"]
    for h, grid_error, uniform_error in zip(
        report.step_sizes, report.rms_level_grid, report.rms_level_uniform
    ):
        lines.append(
            f"{format_float(h)},{format_float(grid_error)},"
            f"{format_float(uniform_error)},{report.samples}"
        )
    _write_lines(target, lines)


def write_inverse_moments(target: Path, curve: InverseMomentCurve) -> None:
    """Inverse-moment curve as `t,inv_moment`, one row per node."""
    lines = ["t,inv_moment"]
    lines += [
        f"{format_float(t)},{format_float(v)}"
        for t, v in zip(curve.times, curve.values)
    ]
    _write_lines(target, lines)


def write_malliavin_gaps(target: Path, report: MalliavinGapReport) -> None:
    """Gap study as `h,mean_abs_gap,ratio_vs_prev` (nan ratio on the first row)."""
    lines = ["h,mean_abs_gap,ratio_vs_prev"]
    for h, gap, ratio in zip(report.step_sizes, report.mean_abs_gaps, report.ratios):
        lines.append(f"{format_float(h)},{format_float(gap)},{format_float(ratio)}")
    _write_lines(target, lines)


def write_key_values(target: Path, entries: dict) -> None:
    """Plain `key = value` sidecar, one entry per line."""
    _write_lines(target, [f"{key} = {value}" for key, value in entries.items()])
