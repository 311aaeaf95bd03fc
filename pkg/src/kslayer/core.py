"""Numeric substrate: graded radial grids, quadrature, IVP integration,
tridiagonal solves and piecewise Chebyshev function representations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
from numpy.polynomial import chebyshev as cheb

from .errors import ParameterError, QuadratureError, SingularityError, StiffnessError

MAX_GRADING_RATIO = 1.2
_GROWTH = 1.1


@dataclass(frozen=True)
class Tolerances:
    quad_tol: float = 1e-10
    ivp_tol: float = 1e-10
    newton_tol: float = 1e-11
    max_newton_iters: int = 30

    def __post_init__(self) -> None:
        for name in ("quad_tol", "ivp_tol", "newton_tol"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ParameterError(f"{name} must be positive, got {val!r}")
        if int(self.max_newton_iters) < 1:
            raise ParameterError("max_newton_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    r0: float
    layer_width: float

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ParameterError("grid needs at least 3 nodes")
        if nodes[0] != 0.0 or nodes[-1] != self.r0:
            raise ParameterError("grid must span [0, r0] exactly")
        if np.any(np.diff(nodes) <= 0):
            raise ParameterError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def refined(self) -> "RadialGrid":
        """Grid with every interval bisected (keeps the original nodes)."""
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        nodes = np.empty(2 * self.size - 1)
        nodes[0::2] = self.nodes
        nodes[1::2] = mid
        return RadialGrid(nodes, self.r0, self.layer_width)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ParameterError("values must match grid nodes")
        if not np.all(np.isfinite(values)):
            raise ParameterError("grid function has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def build_graded_grid(r0: float, eps: float, n_outer: int = 200, per_layer: int = 20) -> RadialGrid:
    """Uniform fine spacing eps/per_layer on [r0 - 10 eps, r0], geometric
    growth (ratio 1.1) inward, then uniform spacing r0/n_outer down to 0."""
    if not (r0 > 0 and math.isfinite(r0)):
        raise ParameterError(f"r0 must be positive, got {r0!r}")
    if not (0 < eps <= r0 / 10):
        raise ParameterError(f"need 0 < eps <= r0/10, got eps={eps!r}, r0={r0!r}")
    if n_outer < 2 or per_layer < 8:
        raise ParameterError("need n_outer >= 2 and per_layer >= 8")

    layer = 10.0 * eps
    n_fine = math.ceil(per_layer * layer / eps - 1e-9)
    h_fine = layer / n_fine
    h_out = max(r0 / n_outer, h_fine)
    rest = r0 - layer

    coarse = _coarse_spacings(rest, h_fine, h_out)
    if coarse is None:
        n = math.ceil(r0 / h_fine - 1e-9)
        nodes = np.linspace(0.0, r0, n + 1)
    else:
        steps = np.concatenate([np.full(n_fine, h_fine), coarse])
        # steps run inward from r0
        nodes = r0 - np.concatenate([[0.0], np.cumsum(steps)])
        nodes = nodes[::-1].copy()
        nodes[0] = 0.0
        nodes[-1] = r0
    return RadialGrid(nodes, float(r0), float(eps))


def _coarse_spacings(length: float, h_fine: float, h_out: float) -> np.ndarray | None:
    if length <= 3 * h_fine:
        return None
    steps = []
    h = h_fine
    total = 0.0
    while total < length:
        h = min(h * _GROWTH, h_out)
        steps.append(h)
        total += h
    steps = np.array(steps)
    for candidate in (steps, steps[:-1]):
        if candidate.size == 0:
            continue
        scaled = candidate * (length / candidate.sum())
        seq = np.concatenate([[h_fine], scaled])
        ratios = seq[1:] / seq[:-1]
        if np.all(ratios <= MAX_GRADING_RATIO) and np.all(ratios >= 1 / MAX_GRADING_RATIO):
            return scaled
    return None


def integrate_adaptive(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    """Adaptive Gauss-Kronrod quadrature (QUADPACK) to absolute and relative tol."""
    if a == b:
        return 0.0
    val, err, info = scipy.integrate.quad(
        f, a, b, epsabs=tol, epsrel=tol, limit=1000, full_output=1
    )[:3]
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{a}, {b}]", val, err)
    if err > tol * (1 + abs(val)):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] stalled at error {err:.3e} (tol {tol:.1e})", val, err
        )
    return float(val)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    span: tuple[float, float] = (0.0, 0.0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.span
        if np.any(r < lo - 1e-12 * (1 + abs(lo))) or np.any(r > hi + 1e-12 * (1 + abs(hi))):
            raise ParameterError("evaluation point outside integrated span")
        return self.dense(np.clip(r, lo, hi))

    @property
    def final(self) -> np.ndarray:
        return self.y[:, -1]


def integrate_ivp(rhs, state0: Sequence[float], span: tuple[float, float], tol: float = 1e-10,
                  events=None) -> Trajectory:
    """Explicit Runge-Kutta (DOP853) integration with dense output."""
    a, b = float(span[0]), float(span[1])
    if not b > a:
        raise ParameterError(f"integration span must be increasing, got {span!r}")
    sol = scipy.integrate.solve_ivp(
        rhs, (a, b), np.asarray(state0, dtype=float), method="DOP853",
        rtol=tol, atol=tol * 1e-2, dense_output=True, events=events,
    )
    if sol.status == -1:
        raise StiffnessError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return Trajectory(sol.t, sol.y, sol.sol, (a, float(sol.t[-1])))


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Rows i: lower[i-1]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1]."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.diag)
        if len(self.lower) != n - 1 or len(self.upper) != n - 1:
            raise ParameterError("off-diagonals must have length n-1")

    @property
    def n(self) -> int:
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        out[:-1] += self.upper * x[1:]
        out[1:] += self.lower * x[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def norm_inf(self) -> float:
        rows = np.abs(self.diag).copy()
        rows[:-1] += np.abs(self.upper)
        rows[1:] += np.abs(self.lower)
        return float(rows.max())


def solve_banded(matrix: Tridiagonal, rhs: np.ndarray) -> np.ndarray:
    """LU solve with partial pivoting; raises SingularityError on a
    zero row or when the solve indicates numerical singularity."""
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.n
    row_mass = np.abs(matrix.diag).copy()
    row_mass[:-1] += np.abs(matrix.upper)
    row_mass[1:] += np.abs(matrix.lower)
    if np.any(row_mass == 0):
        raise SingularityError("matrix has a zero row")
    ab = np.zeros((3, n))
    ab[0, 1:] = matrix.upper
    ab[1, :] = matrix.diag
    ab[2, :-1] = matrix.lower
    try:
        x = scipy.linalg.solve_banded((1, 1), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularityError("solution is not finite")
    bnorm = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if bnorm > 0:
        growth = matrix.norm_inf() * float(np.max(np.abs(x))) / bnorm
        if growth > 1e13:
            raise SingularityError(f"near-singular system (condition lower bound {growth:.2e})")
    return x


# -- piecewise Chebyshev representations ------------------------------------

@lru_cache(maxsize=8)
def _cheb_nodes(degree: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(degree + 1)
    x = np.cos(np.pi * (k + 0.5) / (degree + 1))[::-1]
    inv = np.linalg.inv(cheb.chebvander(x, degree))
    return x, inv


class ChebPanels:
    """Piecewise Chebyshev interpolant on fixed breakpoints.

    Supports vectorised evaluation, differentiation and exact cumulative
    integration, which is what the nested integrals of the layer
    construction need.
    """

    def __init__(self, breaks: np.ndarray, coeffs: np.ndarray):
        self.breaks = np.asarray(breaks, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape[0] != self.breaks.size - 1:
            raise ParameterError("one coefficient row per panel required")

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], breaks, degree: int = 20) -> "ChebPanels":
        breaks = np.asarray(breaks, dtype=float)
        x, inv = _cheb_nodes(degree)
        mid = 0.5 * (breaks[1:] + breaks[:-1])
        half = 0.5 * (breaks[1:] - breaks[:-1])
        pts = mid[:, None] + half[:, None] * x[None, :]
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        return cls(breaks, vals @ inv.T)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    @property
    def _half(self) -> np.ndarray:
        return 0.5 * (self.breaks[1:] - self.breaks[:-1])

    def __call__(self, s):
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lo, hi = self.domain
        tol = 1e-9 * (1 + max(abs(lo), abs(hi)))
        if np.any(s < lo - tol) or np.any(s > hi + tol):
            raise ParameterError(f"evaluation outside [{lo}, {hi}]")
        s = np.clip(s, lo, hi)
        idx = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, self.coeffs.shape[0] - 1)
        a, b = self.breaks[idx], self.breaks[idx + 1]
        x = (2 * s - a - b) / (b - a)
        c = self.coeffs[idx]
        # Clenshaw recurrence, vectorised over points
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for k in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2 * x * b1 - b2 + c[:, k], b1
        out = x * b1 - b2 + c[:, 0]
        return float(out[0]) if scalar else out

    def derivative(self) -> "ChebPanels":
        d = cheb.chebder(self.coeffs, axis=1) / self._half[:, None]
        return ChebPanels(self.breaks, d)

    def antiderivative(self, anchor: float = 0.0) -> "ChebPanels":
        """Antiderivative vanishing at ``anchor``."""
        c = cheb.chebint(self.coeffs, lbnd=-1, axis=1) * self._half[:, None]
        right = cheb.chebval(1.0, c.T)
        offsets = np.concatenate([[0.0], np.cumsum(right[:-1])])
        c[:, 0] += offsets
        out = ChebPanels(self.breaks, c)
        out.coeffs[:, 0] -= out(anchor)
        return out

    def integral(self) -> float:
        c = cheb.chebint(self.coeffs, lbnd=-1, axis=1) * self._half[:, None]
        return float(np.sum(cheb.chebval(1.0, c.T)))


def panel_breaks(a: float, b: float, width: float = 1.0) -> np.ndarray:
    n = max(1, math.ceil((b - a) / width - 1e-9))
    return np.linspace(a, b, n + 1)


# -- finite differences on nonuniform grids ----------------------------------

def radial_operator(grid: RadialGrid, dim: int) -> Tridiagonal:
    """Three-point discretisation of -u'' - (dim-1)/r u' with the Neumann
    ghost-node relation at r0 and the regularised row -dim*u''(0) at r=0."""
    r = grid.nodes
    h = np.diff(r)
    n = r.size
    lower = np.zeros(n - 1)
    diag = np.zeros(n)
    upper = np.zeros(n - 1)

    hm, hp = h[:-1], h[1:]
    ri = r[1:-1]
    denom = hm * hp * (hm + hp)
    # u'' weights
    d2m, d2c, d2p = 2 * hp / denom, -2 * (hm + hp) / denom, 2 * hm / denom
    # u' weights
    d1m = -hp / (hm * (hm + hp))
    d1c = (hp - hm) / (hm * hp)
    d1p = hm / (hp * (hm + hp))
    k = (dim - 1) / ri
    lower[:-1] = -(d2m + k * d1m)
    diag[1:-1] = -(d2c + k * d1c)
    upper[1:] = -(d2p + k * d1p)

    # r = 0: u'(0) = 0 ghost, -dim * 2 (u1 - u0)/h0^2
    diag[0] = 2 * dim / h[0] ** 2
    upper[0] = -2 * dim / h[0] ** 2
    # r = r0: mirror ghost, -2 (u_{n-2} - u_{n-1})/h^2
    diag[-1] = 2 / h[-1] ** 2
    lower[-1] = -2 / h[-1] ** 2
    return Tridiagonal(lower, diag, upper)


def central_second_derivative(f: Callable, s, h: float = 1e-2) -> np.ndarray:
    """Fourth-order five-point central difference for f''."""
    s = np.asarray(s, dtype=float)
    return (-f(s + 2 * h) + 16 * f(s + h) - 30 * f(s) + 16 * f(s - h) - f(s - 2 * h)) / (12 * h * h)


def trapezoid(values: np.ndarray, r: np.ndarray) -> float:
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(r)))
