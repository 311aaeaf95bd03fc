"""Outer profile: regular radial solution of -U'' - (N-1)/r U' + U = 0 with
U'(0) = 0, normalised to U(r0) = 1."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Tolerances, Trajectory, integrate_ivp
from .errors import ParameterError

R_SERIES = 1e-2


@dataclass(frozen=True)
class ProblemParams:
    N: int
    r0: float

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"dimension N must be an integer >= 2, got {self.N!r}")
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise ParameterError(f"r0 must be positive, got {self.r0!r}")


def _series(r: np.ndarray, N: int, terms: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalised regular solution 1 + r^2/(2N) + r^4/(8N(N+2)) + ... and its derivative."""
    r = np.asarray(r, dtype=float)
    val = np.ones_like(r)
    der = np.zeros_like(r)
    coef = 1.0
    for k in range(1, terms):
        coef /= 2 * k * (2 * k + N - 2)
        val = val + coef * r ** (2 * k)
        der = der + 2 * k * coef * r ** (2 * k - 1)
    return val, der


@dataclass(frozen=True, eq=False)
class OuterSolution:
    params: ProblemParams
    scale: float
    trajectory: Trajectory = field(repr=False)
    uprime_r0: float

    def profile(self, r):
        return eval_outer(self, r)[0]

    def derivative(self, r):
        return eval_outer(self, r)[1]


def solve_outer(params: ProblemParams, tol: Tolerances | None = None) -> OuterSolution:
    tol = tol or Tolerances()
    N, r0 = params.N, params.r0
    r_start = min(R_SERIES, 0.5 * r0)
    u_s, du_s = _series(np.array(r_start), N)

    def rhs(r, y):
        return [y[1], y[0] - (N - 1) / r * y[1]]

    # tighter than the nominal tolerance: the profile feeds every matching constant
    traj = integrate_ivp(rhs, [float(u_s), float(du_s)], (r_start, r0), tol=min(tol.ivp_tol, 1e-12))
    end = traj.final
    scale = 1.0 / end[0]
    out = OuterSolution(params, scale, traj, float(end[1] * scale))
    if not out.uprime_r0 > 0:
        raise ParameterError("outer profile has non-positive boundary slope")
    return out


def eval_outer(sol: OuterSolution, r):
    """(U(r), U'(r)) from the series on [0, r_series] and dense IVP output beyond."""
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r0 = sol.params.r0
    if np.any(r < 0) or np.any(r > r0 * (1 + 1e-12)):
        raise ParameterError("outer profile evaluated outside [0, r0]")
    val = np.empty_like(r)
    der = np.empty_like(r)
    r_start = sol.trajectory.span[0]
    near = r <= r_start
    if np.any(near):
        v, d = _series(r[near], sol.params.N)
        val[near], der[near] = v, d
    if np.any(~near):
        y = sol.trajectory(np.minimum(r[~near], r0))
        val[~near], der[~near] = y[0], y[1]
    val *= sol.scale
    der *= sol.scale
    at_r0 = r >= r0
    val[at_r0] = 1.0
    der[at_r0] = sol.uprime_r0
    if scalar:
        return float(val[0]), float(der[0])
    return val, der
