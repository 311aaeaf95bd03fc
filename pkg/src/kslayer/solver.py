"""Correction of ubar to a discrete solution, an independent shooting
oracle, and the limit diagnostics (mass, layer profile, outer profile)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize
from scipy.interpolate import CubicSpline

from .core import (
    GridFunction,
    RadialGrid,
    Tolerances,
    Tridiagonal,
    central_second_derivative,
    radial_operator,
    solve_banded,
)
from .errors import BracketError, ConvergenceError, ParameterError, TrajectoryError
from .layer import SQRT2, eval_w
from .outer import OuterSolution, ProblemParams, eval_outer
from .residual import l1_norm, residual

DEFAULT_WINDOW = (0.1, 0.8)


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Tridiagonal discretisation of -phi'' - (N-1)/r phi' + phi - lambda e^ubar phi."""

    grid: RadialGrid
    matrix: Tridiagonal
    potential: np.ndarray  # lambda e^ubar at the nodes

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix.matvec(np.asarray(phi, dtype=float))


def build_linearized(ubar: GridFunction, log_lam: float, params: ProblemParams) -> LinearizedOperator:
    base = radial_operator(ubar.grid, params.N)
    pot = np.exp(log_lam + ubar.values)
    mat = Tridiagonal(base.lower.copy(), base.diag + 1.0 - pot, base.upper.copy())
    return LinearizedOperator(ubar.grid, mat, pot)


def solve_linearized(op: LinearizedOperator, h: GridFunction | np.ndarray) -> GridFunction:
    rhs = h.values if isinstance(h, GridFunction) else np.asarray(h, dtype=float)
    return GridFunction(op.grid, solve_banded(op.matrix, rhs))


def nonlinear_remainder(potential: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """lambda e^ubar (e^phi - 1 - phi), written to keep precision for small phi."""
    return potential * (np.expm1(phi) - phi)


# -- diagnostics -------------------------------------------------------------

def _sphere_area(N: int) -> float:
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


def _log_trapezoid_exp(u: np.ndarray, weight: np.ndarray, r: np.ndarray) -> float:
    """log of trapezoid(weight * e^u) with the max of u factored out."""
    umax = float(np.max(u))
    f = weight * np.exp(u - umax)
    return umax + math.log(float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(r))))


def mass(u: GridFunction, log_lam: float, eps: float, params: ProblemParams) -> tuple[float, float]:
    """(lambda eps int e^u dr, lambda |S^{N-1}| int e^u r^{N-1} dr)."""
    r = u.r
    scaled = math.exp(log_lam + math.log(eps) + _log_trapezoid_exp(u.values, np.ones_like(r), r))
    full = _sphere_area(params.N) * math.exp(log_lam + _log_trapezoid_exp(u.values, r ** (params.N - 1), r))
    return scaled, full


def layer_convergence_check(u: GridFunction, eps: float, log_lam: float, s_range=(-10.0, 0.0),
                            n_samples: int = 2001) -> float:
    """sup over s of |lambda eps^2 e^{u(eps s + r0)} - e^{w(s)}|."""
    r0 = u.grid.r0
    s = np.linspace(s_range[0], s_range[1], n_samples)
    r = r0 + eps * s
    if r[0] < 0:
        raise ParameterError("layer window reaches past the origin")
    spline = CubicSpline(u.r, u.values)
    scaled = np.exp(log_lam + 2 * math.log(eps) + spline(r))
    return float(np.max(np.abs(scaled - eval_w(s)[2])))


def outer_convergence_check(u: GridFunction, eps: float, outer: OuterSolution,
                            window=DEFAULT_WINDOW) -> float:
    """sup over [rho1 r0, rho2 r0] of |eps u - sqrt2/U'(r0) U|."""
    rho1, rho2 = window
    if not (0 < rho1 < rho2 <= 1):
        raise ParameterError("window must satisfy 0 < rho1 < rho2 <= 1")
    r0 = u.grid.r0
    mask = (u.r >= rho1 * r0) & (u.r <= rho2 * r0)
    r = u.r[mask]
    limit = SQRT2 / outer.uprime_r0 * eval_outer(outer, r)[0]
    return float(np.max(np.abs(eps * u.values[mask] - limit)))


# -- nonlinear solves ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SolveResult:
    method: str
    eps: float
    log_lam: float
    u: GridFunction = field(repr=False)
    phi: GridFunction = field(repr=False)
    phi_sup: float
    iterations: int
    final_residual_l1: float
    mass_scaled: float
    mass_full: float
    outer_dev: float
    layer_dev: float
    history: tuple[float, ...] = ()
    contraction_ratios: tuple[float, ...] = ()

    @property
    def contraction_ratio(self) -> float:
        """Largest step-to-step ratio before the iteration reached roundoff."""
        return max(self.contraction_ratios) if self.contraction_ratios else float("nan")


def _finish(method, ubar, phi, eps, log_lam, params, outer, its, history, ratios) -> SolveResult:
    u = GridFunction(ubar.grid, ubar.values + phi)
    res = l1_norm(residual(u, log_lam, params))
    ms, mf = mass(u, log_lam, eps, params)
    return SolveResult(method, eps, log_lam, u, GridFunction(ubar.grid, phi), float(np.max(np.abs(phi))),
                       its, res, ms, mf, outer_convergence_check(u, eps, outer),
                       layer_convergence_check(u, eps, log_lam), tuple(history), tuple(ratios))


def fixed_point_solve(ubar: GridFunction, log_lam: float, eps: float, params: ProblemParams,
                      outer: OuterSolution, tol: Tolerances | None = None, max_iter: int = 200) -> SolveResult:
    """Picard iteration phi <- L^{-1}[N(phi) - R(ubar)] from phi = 0.

    The residual of ubar is formed once; each step only needs the small
    quantities phi and N(phi), which keeps the iterates free of the roundoff
    in the O(1/eps) values of ubar."""
    tol = tol or Tolerances()
    op = build_linearized(ubar, log_lam, params)
    r_bar = residual(ubar, log_lam, params).values
    phi = np.zeros_like(r_bar)
    history: list[float] = []
    ratios: list[float] = []
    for k in range(1, max_iter + 1):
        new = solve_banded(op.matrix, nonlinear_remainder(op.potential, phi) - r_bar)
        step = float(np.max(np.abs(new - phi)))
        phi = new
        if history and history[-1] > 1e3 * tol.newton_tol:
            ratios.append(step / history[-1])
        history.append(step)
        if not math.isfinite(step) or (len(history) > 3 and step > 10 * history[0]):
            raise ConvergenceError("Picard iterates are growing", history)
        if step <= tol.newton_tol:
            return _finish("picard", ubar, phi, eps, log_lam, params, outer, k, history, ratios)
    raise ConvergenceError(f"Picard did not converge in {max_iter} iterations", history)


def newton_solve(ubar: GridFunction, log_lam: float, eps: float, params: ProblemParams,
                 outer: OuterSolution, tol: Tolerances | None = None) -> SolveResult:
    """Damped Newton on F(phi) = R(ubar) + L phi - N(phi) with backtracking on ||F||_inf."""
    tol = tol or Tolerances()
    op = build_linearized(ubar, log_lam, params)
    r_bar = residual(ubar, log_lam, params).values
    base = radial_operator(ubar.grid, params.N)

    def F(phi):
        return r_bar + op.apply(phi) - nonlinear_remainder(op.potential, phi)

    phi = np.zeros_like(r_bar)
    f = F(phi)
    fnorm = float(np.max(np.abs(f)))
    history: list[float] = []
    for k in range(1, tol.max_newton_iters + 1):
        jac_pot = op.potential * np.exp(phi)
        jac = Tridiagonal(base.lower, base.diag + 1.0 - jac_pot, base.upper)
        delta = solve_banded(jac, -f)
        t = 1.0
        while True:
            trial = phi + t * delta
            f_trial = F(trial)
            n_trial = float(np.max(np.abs(f_trial)))
            if n_trial <= (1 - 1e-4 * t) * fnorm or t == 1.0 and float(np.max(np.abs(delta))) <= tol.newton_tol:
                break
            t *= 0.5
            if t < 1e-6:
                raise ConvergenceError("line search failed", history)
        step = t * float(np.max(np.abs(delta)))
        phi, f, fnorm = trial, f_trial, n_trial
        history.append(step)
        if step <= tol.newton_tol:
            return _finish("newton", ubar, phi, eps, log_lam, params, outer, k, history, ())
    raise ConvergenceError(f"Newton did not converge in {tol.max_newton_iters} iterations", history)


# -- shooting oracle -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ShotResult:
    c: float
    u: GridFunction = field(repr=False)
    slope_at_r0: float


def _shoot(c: float, log_lam: float, params: ProblemParams, r_eval=None, rtol: float = 1e-13,
           u_cap: float = 700.0):
    """Integrate -u'' - (N-1)/r u' + u = lambda e^u from u(0) = c, u'(0) = 0."""
    N, r0 = params.N, params.r0
    f0 = math.exp(log_lam + c) - c  # -Delta u = f(u), f = lambda e^u - u
    r_s = min(1e-6, 1e-3 * r0)
    fp = math.exp(log_lam + c) - 1.0
    # u = c - f0 r^2/(2N) + f0 fp r^4 / (8N(N+2)) + ...
    u_s = c - f0 * r_s ** 2 / (2 * N) + f0 * fp * r_s ** 4 / (8 * N * (N + 2))
    du_s = -f0 * r_s / N + f0 * fp * r_s ** 3 / (2 * N * (N + 2))

    def rhs(r, y):
        return [y[1], y[0] - math.exp(min(log_lam + y[0], 700.0)) - (N - 1) / r * y[1]]

    def blow(r, y):
        return u_cap - abs(y[0])
    blow.terminal = True

    sol = scipy.integrate.solve_ivp(rhs, (r_s, r0), [u_s, du_s], method="DOP853", rtol=rtol,
                                    atol=rtol * 1e-2, dense_output=r_eval is not None, events=blow)
    if sol.status == 1:
        raise TrajectoryError("trajectory blew up before r0", radius=float(sol.t_events[0][0]))
    if sol.status != 0:
        raise TrajectoryError(f"integration failed: {sol.message}", radius=float(sol.t[-1]))
    return sol


def shot_slope(c: float, log_lam: float, params: ProblemParams) -> float:
    """u'(r0) of the trajectory started at u(0) = c."""
    return float(_shoot(c, log_lam, params).y[1, -1])


def shooting_oracle(log_lam: float, params: ProblemParams, bracket: tuple[float, float],
                    grid: RadialGrid, xtol: float = 1e-13) -> ShotResult:
    c_lo, c_hi = bracket
    g_lo, g_hi = shot_slope(c_lo, log_lam, params), shot_slope(c_hi, log_lam, params)
    if g_lo == 0:
        c = c_lo
    elif g_hi == 0:
        c = c_hi
    else:
        if g_lo * g_hi > 0:
            raise BracketError(f"u'(r0) has the same sign at c={c_lo!r} and c={c_hi!r}")
        c = scipy.optimize.brentq(shot_slope, c_lo, c_hi, args=(log_lam, params), xtol=xtol, rtol=1e-15)
    sol = _shoot(c, log_lam, params, r_eval=True)
    r = grid.nodes
    vals = np.empty_like(r)
    near = r < sol.t[0]
    vals[~near] = sol.sol(r[~near])[0]
    f0 = math.exp(log_lam + c) - c
    vals[near] = c - f0 * r[near] ** 2 / (2 * params.N)
    return ShotResult(c, GridFunction(grid, vals), float(sol.y[1, -1]))


def bracket_for(center: float, params: ProblemParams, log_lam: float, width: float = 0.5,
                n_scan: int = 41) -> tuple[float, float]:
    """Scan [center - width, center + width] for a sign change of u'(r0);
    trajectories that blow up count as positive slope."""
    cs = np.linspace(center - width, center + width, n_scan)
    prev_c, prev_g = None, None
    for c in cs:
        try:
            g = shot_slope(float(c), log_lam, params)
        except TrajectoryError:
            g = math.inf
        if prev_g is not None and np.sign(g) != np.sign(prev_g):
            return float(prev_c), float(c)
        prev_c, prev_g = c, g
    raise BracketError(f"no sign change of u'(r0) within {center:.6g} +/- {width:.3g}")


# -- a-priori bound probes ------------------------------------------------------

def kernel_functions():
    """The two bounded/unbounded homogeneous solutions of -psi'' - e^w psi = 0."""
    def psi_a(s):
        return np.tanh(np.asarray(s, dtype=float) / SQRT2)

    def psi_b(s):
        s = np.asarray(s, dtype=float)
        return -2 + SQRT2 * s * np.tanh(s / SQRT2)

    return psi_a, psi_b


@dataclass(frozen=True)
class KernelReport:
    residual_a: float
    residual_b: float
    psi_a_at_0: float
    dpsi_a_at_0: float
    psi_b_at_0: float
    samples: tuple[float, ...]

    @property
    def ok(self) -> bool:
        return max(self.residual_a, self.residual_b) <= 1e-8 and self.psi_a_at_0 == 0.0 and self.dpsi_a_at_0 != 0


def kernel_check(samples=(-8.0, -3.0, -1.0, -0.1), h: float = 2e-3) -> KernelReport:
    psi_a, psi_b = kernel_functions()
    s = np.asarray(samples, dtype=float)
    ew = eval_w(s)[2]
    ra = float(np.max(np.abs(-central_second_derivative(psi_a, s, h) - ew * psi_a(s))))
    rb = float(np.max(np.abs(-central_second_derivative(psi_b, s, h) - ew * psi_b(s))))
    dpsi0 = float((psi_a(h) - psi_a(-h)) / (2 * h))
    return KernelReport(ra, rb, float(psi_a(0.0)), dpsi0, float(psi_b(0.0)), tuple(samples))


def random_smooth_forcing(grid: RadialGrid, rng: np.random.Generator, modes: int = 8) -> GridFunction:
    """Random cosine series on [0, r0] with unit L1 norm."""
    k = np.arange(modes)
    coef = rng.standard_normal(modes) / (1 + k)
    vals = np.cos(np.outer(grid.nodes / grid.r0, k) * math.pi) @ coef
    f = GridFunction(grid, vals)
    return GridFunction(grid, vals / l1_norm(f))


def inverse_bound_probe(op: LinearizedOperator, seed: int = 0, samples: int = 20) -> float:
    """max ||L^{-1} h||_inf over seeded random smooth h with ||h||_1 = 1."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        h = random_smooth_forcing(op.grid, rng)
        worst = max(worst, solve_linearized(op, h).sup())
    return worst
