from __future__ import annotations

import math

import numpy as np
import pytest

from kslayer.core import GridFunction, RadialGrid, Tolerances, build_graded_grid
from kslayer.errors import BracketError, ConvergenceError, TrajectoryError
from kslayer.layer import SQRT2
from kslayer.matching import assemble_ubar
from kslayer.outer import ProblemParams, eval_outer
from kslayer.residual import default_grid, residual, truncation_floor
from kslayer.solver import (
    build_linearized,
    fixed_point_solve,
    inverse_bound_probe,
    kernel_check,
    kernel_functions,
    layer_convergence_check,
    mass,
    newton_solve,
    outer_convergence_check,
    random_smooth_forcing,
    shooting_oracle,
    shot_slope,
    solve_linearized,
)


@pytest.fixture(scope="module")
def setup(con2, params2):
    out = {}
    for eps in (0.08, 0.05, 0.04, 0.025, 0.02):
        ap = con2.approx(eps)
        g = default_grid(params2, eps)
        out[eps] = (ap, assemble_ubar(g, ap))
    return out


@pytest.fixture(scope="module")
def solves(setup, con2, params2):
    res = {}
    for eps, (ap, ub) in setup.items():
        res[eps] = (fixed_point_solve(ub, ap.log_lam, eps, params2, con2.outer),
                    newton_solve(ub, ap.log_lam, eps, params2, con2.outer))
    return res


def _zero_potential_op(grid, N):
    ub = GridFunction(grid, np.full(grid.size, -800.0))
    return build_linearized(ub, 0.0, ProblemParams(N, grid.r0))


def test_operator_identity_on_constants():
    g = build_graded_grid(1.0, 0.05, n_outer=200, per_layer=20)
    op = _zero_potential_op(g, 2)
    assert np.max(np.abs(op.apply(np.ones(g.size)) - 1.0)) < 1e-6


def test_operator_annihilates_outer_profile(con2):
    g = build_graded_grid(1.0, 0.05, n_outer=2000, per_layer=20)
    op = _zero_potential_op(g, 2)
    u = eval_outer(con2.outer, g.nodes)[0]
    interior = op.apply(u)[1:-1]
    assert np.max(np.abs(interior)) < 1e-5


def test_operator_row_sums(setup, params2):
    ap, ub = setup[0.05]
    op = build_linearized(ub, ap.log_lam, params2)
    m = op.matrix
    rows = m.diag[1:-1] + m.lower[:-1] + m.upper[1:]
    assert np.allclose(rows, 1 - op.potential[1:-1], rtol=0, atol=1e-6 * np.max(np.abs(m.diag)))


def test_operator_potential_at_r0_is_eps_minus_2(setup, params2):
    for eps, (ap, ub) in setup.items():
        op = build_linearized(ub, ap.log_lam, params2)
        # lambda e^{u1(r0)} = e^{w(0)}/eps^2
        assert op.potential[-1] == pytest.approx(1 / eps ** 2, rel=1e-10)


def test_zero_forcing_gives_zero(setup, params2):
    ap, ub = setup[0.05]
    op = build_linearized(ub, ap.log_lam, params2)
    assert solve_linearized(op, np.zeros(ub.grid.size)).sup() == 0.0


def test_correction_of_residual_is_small(setup, params2):
    ap, ub = setup[0.05]
    op = build_linearized(ub, ap.log_lam, params2)
    phi = solve_linearized(op, residual(ub, ap.log_lam, params2))
    assert 0 < phi.sup() < 0.2


def test_picard_at_005(solves):
    pic, _ = solves[0.05]
    assert pic.iterations <= 15
    assert pic.contraction_ratio < 0.5


def test_picard_ratio_shrinks(solves):
    assert solves[0.025][0].contraction_ratio < solves[0.05][0].contraction_ratio


def test_newton_iterations_and_agreement(solves):
    for eps, (pic, new) in solves.items():
        assert new.iterations <= 8
        assert np.max(np.abs(pic.u.values - new.u.values)) <= 1e-9


def test_final_residual_below_truncation_floor(setup, solves, params2):
    ap, ub = setup[0.05]
    floor = truncation_floor(ap, ub.grid)
    for res in solves[0.05]:
        assert res.final_residual_l1 <= 10 * floor


def test_positivity_and_mass_growth(solves):
    eps = sorted(solves, reverse=True)
    full = [solves[e][1].mass_full for e in eps]
    assert all(a < b for a, b in zip(full, full[1:]))
    for e in eps:
        assert np.all(solves[e][1].u.values > 0)


def test_mass_full_doubles_when_eps_halves(solves):
    for a, b in ((0.08, 0.04), (0.04, 0.02)):
        ratio = solves[b][1].mass_full / solves[a][1].mass_full
        assert ratio == pytest.approx(2.0, rel=0.1)


def test_mass_trivial():
    g = build_graded_grid(1.0, 0.05, n_outer=100, per_layer=10)
    u = GridFunction(g, np.zeros(g.size))
    scaled, full = mass(u, 0.0, 0.05, ProblemParams(2, 1.0))
    assert scaled == pytest.approx(0.05, rel=1e-14)
    # lambda |S^1| int r dr = 2 pi / 2
    assert full == pytest.approx(math.pi, rel=1e-4)


def test_mass_overflow_safe():
    g = build_graded_grid(1.0, 0.02, n_outer=100, per_layer=10)
    u = GridFunction(g, np.full(g.size, 900.0))
    scaled, _ = mass(u, -900.0, 0.02, ProblemParams(2, 1.0))
    assert scaled == pytest.approx(0.02, rel=1e-12)


def test_scaled_mass_tends_to_half_line_integral(solves):
    # lambda eps int_0^r0 e^u dr only sees the layer on (-inf, 0], whose mass is sqrt2
    eps = sorted(solves, reverse=True)
    gaps = [abs(solves[e][1].mass_scaled - SQRT2) for e in eps]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05 * SQRT2


def test_layer_deviation(solves):
    devs = [solves[e][1].layer_dev for e in (0.08, 0.04, 0.02)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] <= 0.05


def test_layer_value_at_boundary(solves):
    for eps, (_, new) in solves.items():
        val = math.exp(new.log_lam + 2 * math.log(eps) + new.u.values[-1])
        assert val == pytest.approx(1.0, abs=2 * eps)


def test_outer_deviation_decreases(solves):
    devs = [solves[e][1].outer_dev for e in (0.08, 0.04, 0.02)]
    assert devs[0] > devs[1] > devs[2]


def test_outer_check_synthetic(con2):
    eps = 0.02
    g = build_graded_grid(1.0, eps, n_outer=400, per_layer=10)
    u = GridFunction(g, SQRT2 / (eps * con2.outer.uprime_r0) * eval_outer(con2.outer, g.nodes)[0])
    assert outer_convergence_check(u, eps, con2.outer) < 1e-12


def test_outer_check_window_touching_boundary(solves, con2):
    # eps*u stays within O(eps) of a1*U even inside the layer, so reaching r0
    # adds only a small amount and the deviation still shrinks with eps
    devs = []
    for eps in (0.08, 0.04, 0.02):
        new = solves[eps][1]
        full = outer_convergence_check(new.u, eps, con2.outer, window=(0.1, 1.0))
        assert new.outer_dev <= full <= new.outer_dev + 2 * eps
        devs.append(full)
    assert devs[0] > devs[1] > devs[2]


def test_layer_check_on_exact_profile():
    eps, r0 = 0.02, 1.0
    g = build_graded_grid(r0, eps, n_outer=400, per_layer=200)
    s = (g.nodes - r0) / eps
    q = np.exp(SQRT2 * s)
    # u with lambda eps^2 e^u = e^w exactly, lambda = 1
    u = GridFunction(g, np.log(4 * q / (1 + q) ** 2) - 2 * math.log(eps))
    assert layer_convergence_check(u, eps, 0.0) < 1e-6


def test_shooting_constant_branch():
    c = 0.5
    log_lam = math.log(c) - c
    assert abs(shot_slope(c, log_lam, ProblemParams(2, 1.0))) < 1e-12


def test_shooting_bracket_error(setup, params2):
    ap, _ = setup[0.08]
    g = build_graded_grid(1.0, 0.08, n_outer=200, per_layer=20)
    with pytest.raises(BracketError):
        shooting_oracle(ap.log_lam, params2, (1.0, 2.0), g)


def test_shooting_blowup_reports_radius(params2):
    # u'' ~ u for very negative u, so |u| passes the overflow guard before r0
    with pytest.raises(TrajectoryError) as info:
        shot_slope(-600.0, -50.0, params2)
    assert 0 < info.value.radius < 1.0


def test_picard_reports_divergence(params2, con2):
    # far outside the perturbative regime the Picard map expands
    g = build_graded_grid(1.0, 0.1, n_outer=200, per_layer=20)
    ub = GridFunction(g, np.zeros(g.size))
    with pytest.raises(ConvergenceError) as info:
        fixed_point_solve(ub, 2.0, 0.1, params2, con2.outer, Tolerances(), max_iter=30)
    assert len(info.value.history) >= 2


def test_kernel_check():
    rep = kernel_check()
    assert rep.ok
    assert rep.psi_a_at_0 == 0.0
    assert rep.dpsi_a_at_0 == pytest.approx(1 / SQRT2, abs=1e-6)
    psi_a, psi_b = kernel_functions()
    s = np.array([-50.0, -100.0])
    assert np.all(np.abs(psi_b(s)) > SQRT2 * np.abs(s) - 3)
    assert abs(kernel_check(samples=(-2.0,)).residual_a) < 1e-8


def test_random_forcing_unit_l1():
    from kslayer.residual import l1_norm

    g = build_graded_grid(1.0, 0.05, n_outer=200, per_layer=20)
    h = random_smooth_forcing(g, np.random.default_rng(3))
    assert l1_norm(h) == pytest.approx(1.0, rel=1e-14)


def test_inverse_bound_probe_uniform(setup, params2):
    vals = []
    for eps in (0.08, 0.04, 0.02):
        ap, ub = setup[eps]
        vals.append(inverse_bound_probe(build_linearized(ub, ap.log_lam, params2), seed=0))
    assert max(vals) / min(vals) < 3


@pytest.mark.xfail(strict=True, reason="phi carries the O(eps) gluing offset, so phi/eps does not decay "
                                       "at desk scale")
def test_phi_over_eps_decreases(solves):
    ratios = [solves[e][1].phi_sup / e for e in (0.08, 0.04, 0.02)]
    assert ratios[0] > ratios[1] > ratios[2]
