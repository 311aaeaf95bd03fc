"""Boundary-layer profile w, the linear layer problem -Y'' - e^w Y = h e^w,
and the correction functions alpha1, alpha2, v, beta1, z built from them.

All layer functions live on s in [-S_MAX, 0] (s = (r - r0)/eps) and are
stored as piecewise Chebyshev interpolants so that the nested integrals can
be taken exactly at the interpolation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ChebPanels, integrate_adaptive, panel_breaks
from .errors import ConsistencyError, ParameterError
from .outer import ProblemParams

SQRT2 = math.sqrt(2.0)
LN4 = math.log(4.0)
S_MAX = 40.0
DEGREE = 20
LAYER_BREAKS = panel_breaks(-S_MAX, 0.0, 1.0)
TAYLOR_RADIUS = 1e-3


def eval_w(s):
    """(w, w', e^w) for w(s) = ln(4 e^{sqrt2 s} / (1 + e^{sqrt2 s})^2)."""
    s = np.asarray(s, dtype=float)
    x = -SQRT2 * np.abs(s)  # w is even; work with the decaying exponential
    q = np.exp(x)
    w = LN4 + x - 2.0 * np.log1p(q)
    ew = 4.0 * q / (1.0 + q) ** 2
    wp = -SQRT2 * np.tanh(s / SQRT2)
    if w.ndim == 0:
        return float(w), float(wp), float(ew)
    return w, wp, ew


def _w(s):
    return eval_w(s)[0]


def _wp(s):
    return eval_w(s)[1]


def _ew(s):
    return eval_w(s)[2]


@dataclass(frozen=True, eq=False)
class CorrectionFunction:
    """Layer function with its far-field asymptote slope*s + intercept."""

    func: ChebPanels = field(repr=False)
    slope: float
    intercept: float

    def __call__(self, s):
        return self.func(s)

    def derivative(self) -> ChebPanels:
        return self.func.derivative()

    def asymptote(self, s):
        return self.slope * np.asarray(s, dtype=float) + self.intercept


@dataclass(frozen=True, eq=False)
class CorrectionSet:
    params: ProblemParams
    a1: float
    a2: float
    alpha1: ChebPanels = field(repr=False)
    alpha2: ChebPanels = field(repr=False)
    v: CorrectionFunction = field(repr=False)
    beta1: ChebPanels = field(repr=False)
    z: CorrectionFunction = field(repr=False)

    @property
    def nu1(self) -> float:
        return self.v.slope

    @property
    def nu2(self) -> float:
        return self.v.intercept

    @property
    def zeta1(self) -> float:
        return self.z.slope

    @property
    def zeta2(self) -> float:
        return self.z.intercept


def _panels(f: Callable, breaks=LAYER_BREAKS) -> ChebPanels:
    return ChebPanels.from_function(f, breaks, DEGREE)


def _check_s(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s > 0) or np.any(s < -S_MAX):
        raise ParameterError(f"layer variable must lie in [-{S_MAX}, 0]")
    return s


_W_INT = _panels(_w).antiderivative(0.0)


def w_integral(s):
    """int_0^s w(sigma) dsigma."""
    return _W_INT(_check_s(s))


def eval_alpha1(s: float, params: ProblemParams, a1: float, tol: float = 1e-12) -> float:
    """alpha1(s) = -(N-1)/r0 int_0^s w + a1 s^2/2, the log1p part by adaptive quadrature."""
    s = float(s)
    tail = integrate_adaptive(lambda x: math.log1p(math.exp(SQRT2 * x)), 0.0, s, tol)
    w_int = LN4 * s + s * s / SQRT2 - 2.0 * tail
    return -(params.N - 1) / params.r0 * w_int + 0.5 * a1 * s * s


def alpha1_panels(params: ProblemParams, a1: float) -> ChebPanels:
    k = (params.N - 1) / params.r0
    return _panels(lambda s: -k * _W_INT(s) + 0.5 * a1 * s * s)


def alpha2_panels(params: ProblemParams, a1: float, a2: float) -> ChebPanels:
    N, r0 = params.N, params.r0
    dd_w_shift = _panels(lambda s: _w(s) - LN4).antiderivative(0.0).antiderivative(0.0)
    dd_w = _W_INT.antiderivative(0.0)
    s_w = _panels(lambda s: s * _w(s)).antiderivative(0.0)

    def f(s):
        return (dd_w_shift(s)
                + (N - 1) * (N - 2) / r0 ** 2 * dd_w(s)
                + (N - 1) / r0 ** 2 * s_w(s)
                - (N - 1) / (6 * r0) * a1 * s ** 3
                + 0.5 * a2 * s ** 2)

    return _panels(f)


def eval_alpha2(s, params: ProblemParams, a1: float, a2: float):
    return alpha2_panels(params, a1, a2)(_check_s(s))


def _kernel_weight(s):
    """2 e^{sqrt2 s}/(1 - e^{sqrt2 s}) + s/sqrt2 (far-field intercept weight)."""
    q = math.exp(SQRT2 * s)
    return 2.0 * q / -math.expm1(SQRT2 * s) + s / SQRT2


def layer_slope(h: Callable, tol: float = 1e-12) -> float:
    """(1/sqrt2) int_{-inf}^0 h w' e^w."""
    return integrate_adaptive(lambda s: float(h(s)) * _wp(s) * _ew(s), -S_MAX, 0.0, tol) / SQRT2


def layer_intercept(h: Callable, tol: float = 1e-12) -> float:
    """Constant of the far-field asymptote of Y.

    The weight 2q/(1-q) (q = e^{sqrt2 s}) makes Y(s) - slope*s - intercept
    decay; near s = 0 the product with w'(s) ~ -s is replaced by its limit.
    """
    h0 = float(h(0.0))

    def integrand(s):
        if s > -1e-8:
            return SQRT2 * h0
        _, wp, ew = eval_w(s)
        return _kernel_weight(s) * float(h(s)) * wp * ew

    return -integrate_adaptive(integrand, -S_MAX, 0.0, tol)


def solve_layer_linear(h: Callable, tol: float = 1e-12) -> CorrectionFunction:
    """Y(t) = w'(t) int_0^t w'(s)^{-2} int_s^0 h w' e^w dz ds, solving
    -Y'' - e^w Y = h e^w with Y(0) = Y'(0) = 0."""
    hp = h if isinstance(h, ChebPanels) else _panels(h)
    g_int = _panels(lambda s: hp(s) * _wp(s) * _ew(s)).antiderivative(0.0)
    dh = hp.derivative()
    h0, h1, h2 = hp(0.0), dh(0.0), dh.derivative()(0.0)

    def ratio(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        small = np.abs(s) < TAYLOR_RADIUS
        big = ~small
        wp = _wp(s[big])
        out[big] = -g_int(s[big]) / (wp * wp)
        ss = s[small]
        out[small] = 0.5 * h0 + h1 * ss / 3.0 + h2 * ss * ss / 8.0
        return out

    j = _panels(ratio).antiderivative(0.0)
    y = _panels(lambda s: _wp(s) * j(s))
    return CorrectionFunction(y, layer_slope(hp, tol), layer_intercept(hp, tol))


def nu1_closed_form(params: ProblemParams, a1: float) -> float:
    return -2 * (params.N - 1) / params.r0 * (1 - math.log(2)) + a1 * SQRT2 * math.log(2)


def build_v(params: ProblemParams, a1: float, alpha1: ChebPanels | None = None) -> CorrectionFunction:
    alpha1 = alpha1 if alpha1 is not None else alpha1_panels(params, a1)
    v = solve_layer_linear(alpha1)
    closed = nu1_closed_form(params, a1)
    if abs(v.slope - closed) > 1e-4 * (1 + abs(closed)):
        raise ConsistencyError(f"nu1 quadrature {v.slope!r} != closed form {closed!r}")
    return v


def build_beta1(v: CorrectionFunction, params: ProblemParams) -> ChebPanels:
    """beta1(s) = -(N-1)/r0 int_0^s (v(sigma) - v(0)) dsigma."""
    v0 = float(v(0.0))
    inner = _panels(lambda s: v(s) - v0).antiderivative(0.0)
    k = (params.N - 1) / params.r0
    return _panels(lambda s: -k * inner(s))


def z_forcing(alpha1, alpha2, beta1, v) -> ChebPanels:
    return _panels(lambda s: alpha2(s) + beta1(s) + 0.5 * (alpha1(s) + v(s)) ** 2)


def build_z(alpha1, alpha2, beta1, v) -> CorrectionFunction:
    return solve_layer_linear(z_forcing(alpha1, alpha2, beta1, v))


def build_corrections(params: ProblemParams, a1: float, a2: float) -> CorrectionSet:
    alpha1 = alpha1_panels(params, a1)
    alpha2 = alpha2_panels(params, a1, a2)
    v = build_v(params, a1, alpha1)
    beta1 = build_beta1(v, params)
    z = build_z(alpha1, alpha2, beta1, v)
    return CorrectionSet(params, a1, a2, alpha1, alpha2, v, beta1, z)


# -- exact projections alpha_eps, beta_eps ----------------------------------

def alpha_eps_panels(eps: float, log_lam: float, params: ProblemParams, s_min: float) -> ChebPanels:
    """alpha_eps(r0 + eps s) on [s_min, 0] from the nested integral

        -int_{r0}^r t^{1-N} int_{r0}^t tau^{N-1} [(N-1)/tau w_eps' - w_eps + ln lam] dtau dt.
    """
    N, r0 = params.N, params.r0
    if not (s_min < 0 and r0 + eps * s_min > 0):
        raise ParameterError("alpha_eps needs 0 < r0 + eps*s_min < r0")
    breaks = panel_breaks(s_min, 0.0, 1.0)
    # -w_eps + ln lam = -w(rho) + (ln lam + 2 ln eps)
    shift = log_lam + 2.0 * math.log(eps)

    def inner_integrand(rho):
        tau = r0 + eps * rho
        w, wp, _ = eval_w(rho)
        return tau ** (N - 1) * ((N - 1) / tau * wp / eps - w + shift)

    inner = ChebPanels.from_function(inner_integrand, breaks, DEGREE).antiderivative(0.0)
    outer = ChebPanels.from_function(
        lambda sig: (r0 + eps * sig) ** (1 - N) * inner(sig), breaks, DEGREE
    ).antiderivative(0.0)
    return ChebPanels(breaks, -eps * eps * outer.coeffs)


def beta_eps_panels(eps: float, params: ProblemParams, v: CorrectionFunction, s_min: float) -> ChebPanels:
    """beta_eps(r0 + eps s) = -(N-1) int_r^{r0} t^{1-N} int_t^{r0} tau^{N-2} v'((tau-r0)/eps) dtau dt."""
    N, r0 = params.N, params.r0
    if not (s_min < 0 and r0 + eps * s_min > 0):
        raise ParameterError("beta_eps needs 0 < r0 + eps*s_min < r0")
    breaks = panel_breaks(s_min, 0.0, 1.0)
    dv = v.derivative()
    inner = ChebPanels.from_function(
        lambda rho: (r0 + eps * rho) ** (N - 2) * dv(rho), breaks, DEGREE
    ).antiderivative(0.0)
    # int_t^{r0} ... dtau = -eps * inner(sigma); int_r^{r0} ... dt = -eps * int_0^s ... dsigma
    outer = ChebPanels.from_function(
        lambda sig: (r0 + eps * sig) ** (1 - N) * inner(sig), breaks, DEGREE
    ).antiderivative(0.0)
    return ChebPanels(breaks, -(N - 1) * eps * eps * outer.coeffs)


def _s_of_r(r, eps, r0):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > r0 * (1 + 1e-14)):
        raise ParameterError("need 0 < r <= r0")
    return np.minimum((r - r0) / eps, 0.0)


def eval_alpha_eps_exact(r, eps: float, log_lam: float, params: ProblemParams):
    s = _s_of_r(r, eps, params.r0)
    s_min = min(float(np.min(s)), -1e-3)
    out = alpha_eps_panels(eps, log_lam, params, s_min)(s)
    return out


def eval_beta_eps_exact(r, eps: float, params: ProblemParams, v: CorrectionFunction):
    s = _s_of_r(r, eps, params.r0)
    s_min = min(float(np.min(s)), -1e-3)
    return beta_eps_panels(eps, params, v, s_min)(s)
