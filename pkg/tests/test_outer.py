from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kslayer.errors import ParameterError
from kslayer.outer import ProblemParams, eval_outer, solve_outer


def bessel_ratio_series(x: float, terms: int = 40) -> float:
    """I1(x)/I0(x) from the power series, summed to 1e-14."""
    q = x * x / 4
    i0 = sum(q ** k / math.factorial(k) ** 2 for k in range(terms))
    i1 = (x / 2) * sum(q ** k / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))
    return i1 / i0


@pytest.fixture(scope="module")
def sol3():
    return solve_outer(ProblemParams(3, 1.0))


@pytest.fixture(scope="module")
def sol2():
    return solve_outer(ProblemParams(2, 1.0))


def test_params_validation():
    with pytest.raises(ParameterError):
        ProblemParams(1, 1.0)
    with pytest.raises(ParameterError):
        ProblemParams(2, 0.0)


def test_n3_boundary_slope(sol3):
    assert sol3.uprime_r0 == pytest.approx(1 / math.tanh(1.0) - 1.0, abs=1e-10)


def test_n2_boundary_slope(sol2):
    assert sol2.uprime_r0 == pytest.approx(bessel_ratio_series(1.0), abs=1e-10)


def test_n3_value_at_origin(sol3):
    assert eval_outer(sol3, 0.0)[0] == pytest.approx(1 / math.sinh(1.0), abs=1e-10)


def test_n3_value_at_half(sol3):
    assert eval_outer(sol3, 0.5)[0] == pytest.approx(math.sinh(0.5) / 0.5 / math.sinh(1.0), abs=1e-10)


def test_endpoints(sol2):
    assert eval_outer(sol2, 1.0) == (1.0, sol2.uprime_r0)
    assert eval_outer(sol2, 0.0)[1] == 0.0


def test_out_of_domain(sol2):
    with pytest.raises(ParameterError):
        eval_outer(sol2, 1.5)
    with pytest.raises(ParameterError):
        eval_outer(sol2, -0.1)


def test_n3_closed_form_sup_norm(sol3):
    r = np.linspace(1e-6, 1.0, 2001)
    closed = np.sinh(r) / r / math.sinh(1.0)
    assert np.max(np.abs(eval_outer(sol3, r)[0] - closed)) < 1e-9


def test_monotone_and_bounded(sol2, sol3):
    r = np.linspace(1e-3, 1.0, 1000)
    for sol in (sol2, sol3):
        u, du = eval_outer(sol, r)
        assert np.all(du > 0)
        assert np.all((u >= 0) & (u <= 1 + 1e-14))


def _integral_identity_gap(sol, N):
    # r^{N-1} U'(r) = int_0^r t^{N-1} U(t) dt
    worst = 0.0
    for r in np.linspace(0.1, sol.params.r0, 10):
        t = np.linspace(0.0, r, 20001)
        f = t ** (N - 1) * eval_outer(sol, t)[0]
        rhs = np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
        worst = max(worst, abs(r ** (N - 1) * eval_outer(sol, r)[1] - rhs))
    return worst


def test_integral_identity(sol2, sol3):
    assert _integral_identity_gap(sol2, 2) < 1e-8
    assert _integral_identity_gap(sol3, 3) < 1e-8


@given(N=st.integers(2, 6), r0=st.floats(0.3, 3.0))
@settings(max_examples=20, deadline=None)
def test_ode_residual(N, r0):
    sol = solve_outer(ProblemParams(N, r0))
    r = np.linspace(0.05 * r0, r0 * 0.99, 50)
    h = 1e-3 * r0
    d = lambda x: eval_outer(sol, x)[1]
    # U'' by a fourth-order difference of the integrated derivative
    upp = (-d(r + 2 * h) + 8 * d(r + h) - 8 * d(r - h) + d(r - 2 * h)) / (12 * h)
    u, du = eval_outer(sol, r)
    assert np.max(np.abs(-upp - (N - 1) / r * du + u)) < 1e-8 * max(1.0, 1 / r0 ** 2)
    assert eval_outer(sol, r0)[0] == 1.0
    assert sol.uprime_r0 > 0
