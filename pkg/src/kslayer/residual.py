"""Residual R(u) = -u'' - (N-1)/r u' + u - lambda e^u on a graded grid, its
L1 norm in dr, and the eps-scaling fit of that norm."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GridFunction, RadialGrid, build_graded_grid, radial_operator
from .errors import DomainError, ParameterError
from .matching import ApproxSolution, Construction, assemble_ubar
from .outer import ProblemParams

REGIONS = ("layer", "interface", "outer")


def residual(u: GridFunction, log_lam: float, params: ProblemParams) -> GridFunction:
    """Second-order finite-difference residual; the r=0 row uses -N u''(0)."""
    op = radial_operator(u.grid, params.N)
    vals = op.matvec(u.values) + u.values - np.exp(log_lam + u.values)
    return GridFunction(u.grid, vals)


def l1_norm(f: GridFunction) -> float:
    a = np.abs(f.values)
    return float(np.sum(0.5 * (a[1:] + a[:-1]) * np.diff(f.r)))


def l1_by_region(f: GridFunction, r0: float, delta: float) -> dict[str, float]:
    """Trapezoid contributions assigned by interval midpoint, so the three
    parts add up to ``l1_norm(f)``."""
    a = np.abs(f.values)
    r = f.r
    pieces = 0.5 * (a[1:] + a[:-1]) * np.diff(r)
    mid = 0.5 * (r[1:] + r[:-1])
    layer = mid > r0 - delta
    outer = mid < r0 - 2 * delta
    inter = ~layer & ~outer
    return {
        "layer": float(pieces[layer].sum()),
        "interface": float(pieces[inter].sum()),
        "outer": float(pieces[outer].sum()),
    }


@dataclass(frozen=True)
class ResidualReport:
    eps: float
    log_lam: float
    l1_total: float
    l1_layer: float
    l1_interface: float
    l1_outer: float
    grid_size: int
    sigma_fit: float | None = None

    @property
    def lam(self) -> float:
        return math.exp(self.log_lam)

    @property
    def l1_by_region(self) -> tuple[float, float, float]:
        return (self.l1_layer, self.l1_interface, self.l1_outer)


def residual_report(approx: ApproxSolution, grid: RadialGrid) -> ResidualReport:
    ubar = assemble_ubar(grid, approx)
    res = residual(ubar, approx.log_lam, approx.params)
    parts = l1_by_region(res, approx.params.r0, approx.delta)
    return ResidualReport(approx.eps, approx.log_lam, l1_norm(res), parts["layer"],
                          parts["interface"], parts["outer"], grid.size)


def scaling_fit(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(l1) against log(eps), minus one."""
    if len(points) < 4:
        raise ParameterError("scaling fit needs at least 4 points")
    eps = np.array([p[0] for p in points], dtype=float)
    l1 = np.array([p[1] for p in points], dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ParameterError("eps values must be strictly decreasing")
    if np.any(l1 <= 0) or np.any(eps <= 0):
        raise DomainError("scaling fit needs positive eps and norms")
    slope = np.polyfit(np.log(eps), np.log(l1), 1)[0]
    return float(slope - 1.0)


def default_grid(params: ProblemParams, eps: float, per_layer: int = 200, n_outer: int = 2000) -> RadialGrid:
    return build_graded_grid(params.r0, eps, n_outer=n_outer, per_layer=per_layer)


def residual_sweep(construction: Construction, eps_values: Iterable[float], *, per_layer: int = 200,
                   n_outer: int = 2000) -> tuple[list[ResidualReport], float]:
    eps_values = sorted((float(e) for e in eps_values), reverse=True)
    reports = []
    for eps in eps_values:
        approx = construction.approx(eps)
        grid = default_grid(construction.params, eps, per_layer, n_outer)
        reports.append(residual_report(approx, grid))
    sigma = scaling_fit([(r.eps, r.l1_total) for r in reports])
    return [ResidualReport(**{**r.__dict__, "sigma_fit": sigma}) for r in reports], sigma


def truncation_floor(approx: ApproxSolution, grid: RadialGrid) -> float:
    """Richardson estimate of the discretisation part of ||R||_1: the
    second-order difference between the residual on ``grid`` and on its
    bisection, extrapolated."""
    coarse = residual_report(approx, grid).l1_total
    fine = residual_report(approx, grid.refined()).l1_total
    return abs(coarse - fine) * 4.0 / 3.0
