"""Matching constants, the eps <-> lambda relation, the cutoff and the
three-piece approximate solution ubar."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ChebPanels, GridFunction, RadialGrid, Tolerances
from .errors import DomainError, InvalidOuterError, ParameterError
from .layer import (
    LN4,
    SQRT2,
    CorrectionSet,
    alpha_eps_panels,
    beta_eps_panels,
    build_corrections,
    eval_w,
)
from .outer import OuterSolution, ProblemParams, eval_outer, solve_outer

DEFAULT_ETA = 0.8


@dataclass(frozen=True)
class MatchingConstants:
    a1: float
    a2: float
    a3: float
    A1: float
    A2: float
    A3: float
    eta: float
    uprime_r0: float

    def __post_init__(self) -> None:
        if not (2.0 / 3.0 < self.eta < 1.0):
            raise ParameterError(f"eta must lie in (2/3, 1), got {self.eta!r}")


def leading_constants(params: ProblemParams, uprime_r0: float) -> tuple[float, float]:
    """(a1, a2); both are needed before the layer corrections can be built."""
    if not uprime_r0 > 0:
        raise InvalidOuterError(f"outer boundary slope must be positive, got {uprime_r0!r}")
    a1 = SQRT2 / uprime_r0
    a2 = (LN4 / uprime_r0 - 2 * (params.N - 1) / params.r0) / uprime_r0
    return a1, a2


def compute_constants(params: ProblemParams, outer: OuterSolution, corrections: CorrectionSet,
                      eta: float = DEFAULT_ETA) -> MatchingConstants:
    a1, a2 = leading_constants(params, outer.uprime_r0)
    A3 = corrections.zeta1 / outer.uprime_r0
    return MatchingConstants(a1, a2, A3 - corrections.nu2, a1, a2, A3, eta, outer.uprime_r0)


def log_lambda_of_eps(eps: float, consts: MatchingConstants) -> float:
    if not eps > 0:
        raise ParameterError("eps must be positive")
    return math.log(4.0 / eps ** 2) - (consts.a1 / eps + consts.a2 + consts.a3 * eps)


def lambda_of_eps(eps: float, consts: MatchingConstants) -> float:
    """lambda = 4/eps^2 exp(-(a1/eps + a2 + a3 eps)); underflows to 0 below eps ~ 0.01."""
    return math.exp(log_lambda_of_eps(eps, consts))


def _eps_peak(consts: MatchingConstants) -> float:
    """Largest eps in (0, 1] on the increasing branch of log_lambda_of_eps."""
    a1, a3 = consts.a1, consts.a3
    # g'(eps) = (a1 - 2 eps - a3 eps^2)/eps^2
    if abs(a3) < 1e-14:
        peak = a1 / 2
    else:
        disc = 4 + 4 * a3 * a1
        if disc < 0:
            return 1.0
        roots = [(-2 + math.sqrt(disc)) / (2 * a3), (-2 - math.sqrt(disc)) / (2 * a3)]
        pos = [x for x in roots if x > 0]
        peak = min(pos) if pos else 1.0
    return min(peak, 1.0)


def eps_of_lambda(lam: float | None = None, consts: MatchingConstants | None = None, *,
                  log_lam: float | None = None, tol: float = 1e-12) -> float:
    """Invert the eps-lambda relation by safeguarded Newton on
    g(eps) = ln(4/eps^2) - ln(lambda) - a1/eps - a2 - a3 eps."""
    if consts is None:
        raise ParameterError("matching constants required")
    if log_lam is None:
        if lam is None or not lam > 0:
            raise ParameterError("lambda must be positive")
        log_lam = math.log(lam)

    def g(e):
        return math.log(4 / e ** 2) - log_lam - consts.a1 / e - consts.a2 - consts.a3 * e

    def dg(e):
        return -2 / e + consts.a1 / e ** 2 - consts.a3

    hi = _eps_peak(consts)
    if g(hi) < 0:
        raise DomainError(f"no eps in (0, 1) for log(lambda)={log_lam:.6g}; lambda too large")
    lo = min(hi / 2, consts.a1 / max(-log_lam, 1.0))
    while g(lo) > 0:
        lo /= 2
        if lo < 1e-300:
            raise DomainError("eps bracket collapsed")
    e = min(max(consts.a1 / max(-log_lam, 1e-300), lo), hi)
    for _ in range(200):
        val = g(e)
        if abs(val) <= tol:
            return e
        if val > 0:
            hi = e
        else:
            lo = e
        step = e - val / dg(e)
        e = step if lo < step < hi else 0.5 * (lo + hi)
    if abs(g(e)) <= 10 * tol:
        return e
    raise DomainError(f"eps_of_lambda did not converge (|g|={abs(g(e)):.2e})")


def cutoff_chi(r, r0: float, delta: float):
    """Quintic smoothstep: 0 on [0, r0-2delta], 1 on [r0-delta, r0]; C^2."""
    if not delta > 0:
        raise ParameterError("delta must be positive")
    r = np.asarray(r, dtype=float)
    t = np.clip((r - (r0 - 2 * delta)) / delta, 0.0, 1.0)
    chi = t ** 3 * (10 - 15 * t + 6 * t * t)
    d1 = 30 * t * t * (1 - t) ** 2 / delta
    d2 = 60 * t * (1 - t) * (1 - 2 * t) / delta ** 2
    if chi.ndim == 0:
        return float(chi), float(d1), float(d2)
    return chi, d1, d2


@dataclass(frozen=True, eq=False)
class Construction:
    """Everything that does not depend on eps: outer profile, layer
    corrections and matching constants for one (N, r0, eta)."""

    params: ProblemParams
    outer: OuterSolution = field(repr=False)
    corrections: CorrectionSet = field(repr=False)
    constants: MatchingConstants

    def approx(self, eps: float) -> "ApproxSolution":
        return build_approx(self, eps)


def build_construction(params: ProblemParams, eta: float = DEFAULT_ETA, tol: Tolerances | None = None,
                       override_a2: float | None = None) -> Construction:
    """``override_a2`` replaces a2 in the eps-lambda relation only (negative
    control); A2 and the layer corrections keep the matched value."""
    outer = solve_outer(params, tol)
    a1, a2 = leading_constants(params, outer.uprime_r0)
    corrections = build_corrections(params, a1, a2)
    consts = compute_constants(params, outer, corrections, eta)
    if override_a2 is not None:
        consts = replace(consts, a2=float(override_a2))
    return Construction(params, outer, corrections, consts)


@dataclass(frozen=True, eq=False)
class ApproxSolution:
    eps: float
    log_lam: float
    delta: float
    constants: MatchingConstants
    corrections: CorrectionSet = field(repr=False)
    outer: OuterSolution = field(repr=False)
    alpha_eps: ChebPanels = field(repr=False)
    beta_eps: ChebPanels = field(repr=False)

    @property
    def params(self) -> ProblemParams:
        return self.outer.params

    @property
    def lam(self) -> float:
        return math.exp(self.log_lam)

    @property
    def amplitude(self) -> float:
        c = self.constants
        return c.A1 / self.eps + c.A2 + c.A3 * self.eps

    @property
    def s_min(self) -> float:
        return self.alpha_eps.domain[0]

    def _s(self, r):
        return (np.asarray(r, dtype=float) - self.params.r0) / self.eps

    def u1(self, r):
        """w_eps - ln lam + alpha_eps + v_eps + beta_eps + z_eps."""
        s = self._s(r)
        if np.any(s < self.s_min - 1e-9):
            raise ParameterError("u1 requested outside its construction range")
        eps = self.eps
        c = self.corrections
        w, _, _ = eval_w(s)
        return (-2 * math.log(eps) + w - self.log_lam
                + self.alpha_eps(s) + eps * c.v(s) + self.beta_eps(s) + eps ** 2 * c.z(s))

    def du1(self, r):
        s = self._s(r)
        eps = self.eps
        c = self.corrections
        _, wp, _ = eval_w(s)
        return (wp / eps + self.alpha_eps.derivative()(s) / eps + c.v.derivative()(s)
                + self.beta_eps.derivative()(s) / eps + eps * c.z.derivative()(s))

    def u3(self, r):
        return self.amplitude * eval_outer(self.outer, r)[0]

    def du3(self, r):
        return self.amplitude * eval_outer(self.outer, r)[1]

    def u2(self, r):
        """chi u1 + (1 - chi) u3; only meaningful on the interface."""
        chi = cutoff_chi(r, self.params.r0, self.delta)[0]
        return chi * self.u1(r) + (1 - chi) * self.u3(r)

    def ubar(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        r0, d = self.params.r0, self.delta
        out = np.empty_like(r)
        inner = r > r0 - d
        blend = (r >= r0 - 2 * d) & ~inner
        far = r < r0 - 2 * d
        if np.any(inner):
            out[inner] = self.u1(r[inner])
        if np.any(blend):
            chi = cutoff_chi(r[blend], r0, d)[0]
            out[blend] = chi * self.u1(r[blend]) + (1 - chi) * self.u3(r[blend])
        if np.any(far):
            out[far] = self.u3(r[far])
        return out


def build_approx(construction: Construction, eps: float) -> ApproxSolution:
    params = construction.params
    r0 = params.r0
    consts = construction.constants
    if not (0 < eps <= r0 / 10):
        raise ParameterError(f"need 0 < eps <= r0/10, got {eps!r}")
    delta = eps ** consts.eta
    if 2 * delta >= r0:
        raise ParameterError("interface does not fit inside the ball")
    log_lam = log_lambda_of_eps(eps, consts)
    # cover the interface with margin; stay clear of the origin
    s_min = -min(2.5 * delta, 0.9 * r0) / eps
    alpha = alpha_eps_panels(eps, log_lam, params, s_min)
    beta = beta_eps_panels(eps, params, construction.corrections.v, s_min)
    return ApproxSolution(eps, log_lam, delta, consts, construction.corrections,
                          construction.outer, alpha, beta)


def assemble_u1(r, approx: ApproxSolution):
    return approx.u1(r)


def assemble_u3(r, approx: ApproxSolution):
    return approx.u3(r)


def assemble_ubar(grid: RadialGrid, approx: ApproxSolution) -> GridFunction:
    if abs(grid.r0 - approx.params.r0) > 1e-14:
        raise ParameterError("grid radius differs from problem radius")
    return GridFunction(grid, approx.ubar(grid.nodes))


PROFILE_COLUMNS = ("r", "u1", "u2", "u3", "ubar", "chi")


def profile_table(grid: RadialGrid, approx: ApproxSolution) -> np.ndarray:
    """Columns r, u1, u2, u3, ubar, chi; u1 and u2 are NaN where u1 is not built."""
    r = grid.nodes
    out = np.full((r.size, len(PROFILE_COLUMNS)), np.nan)
    out[:, 0] = r
    ok = (r - approx.params.r0) / approx.eps >= approx.s_min
    out[ok, 1] = approx.u1(r[ok])
    out[ok, 2] = approx.u2(r[ok])
    out[:, 3] = approx.u3(r)
    out[:, 4] = approx.ubar(r)
    out[:, 5] = cutoff_chi(r, approx.params.r0, approx.delta)[0]
    return out


def gluing_mismatch(approx: ApproxSolution, n_samples: int = 400) -> tuple[float, float]:
    """(sup|u1 - u3|, sup|u1' - u3'|) over [r0 - 2 delta, r0 - delta]."""
    r0, d = approx.params.r0, approx.delta
    r = np.linspace(r0 - 2 * d, r0 - d, max(n_samples, 200))
    return (float(np.max(np.abs(approx.u1(r) - approx.u3(r)))),
            float(np.max(np.abs(approx.du1(r) - approx.du3(r)))))
