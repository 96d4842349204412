import json
import math

import numpy as np
import pytest

from parabolic_dirac.field import (
    MINUS,
    AlgebraField,
    SpaceTimeGrid,
    apply_parabolic_dirac,
    inner_product,
    l2_norm,
    sample_array,
)
from parabolic_dirac.solver import (
    CONVERGED,
    GATE_FAILED,
    ConvergenceError,
    _dirichlet_solve_adjoint,
    ball_radius,
    contraction_K,
    dirichlet_residual,
    dirichlet_solve,
    estimate_C1,
    fixed_point_map,
    lipschitz_constant,
    nonlinear_solve,
    operator_norm,
    projector_P,
    projector_Q,
    projector_Q_adjoint,
    smallness_gate,
    solution_operator,
    solution_operator_adjoint,
    solve_linear,
)


def random_field(g, rng, scale=1.0):
    return AlgebraField(g, scale * (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)))


def small_grid(m=2, n=7):
    return SpaceTimeGrid.box(m, n, n, -0.5, 0.5, 0.2)


def sine_solution(n):
    """``u* = sin(pi x1) sin(pi x2) sin(pi t / T)`` on ``[0,1]^2 x [0,T]`` and its data."""
    T = 0.2
    g = SpaceTimeGrid.box(2, n, n, 0.0, 1.0, T)
    s = lambda X, t: np.sin(np.pi * X[0]) * np.sin(np.pi * X[1])
    u = sample_array(g, lambda X, t: s(X, t) * np.sin(np.pi * t / T))
    f = sample_array(g, lambda X, t: s(X, t) * (2 * np.pi ** 2 * np.sin(np.pi * t / T)
                                                 - 1j * np.pi / T * np.cos(np.pi * t / T)))
    return u, f


def test_dirichlet_manufactured_second_order():
    err = []
    for n in (9, 17):
        u, f = sine_solution(n)
        sol = dirichlet_solve(f)
        assert dirichlet_residual(sol, f) <= 1e-10
        assert l2_norm(sol, sol.grid.boundary_mask()) == 0.0
        err.append(l2_norm(sol - u) / l2_norm(u))
    assert err[1] < 0.05
    assert 3.2 <= err[0] / err[1] <= 4.8


def test_dirichlet_adjoint():
    g = small_grid()
    rng = np.random.default_rng(0)
    u, v = random_field(g, rng), random_field(g, rng)
    lhs = inner_product(v, dirichlet_solve(u))
    rhs = inner_product(_dirichlet_solve_adjoint(v), u)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_projectors():
    g = small_grid()
    rng = np.random.default_rng(1)
    u = random_field(g, rng)
    qu = projector_Q(u)
    assert l2_norm(projector_Q(qu) - qu) <= 1e-8 * l2_norm(qu)
    assert l2_norm(projector_P(u) + qu - u) <= 1e-13 * l2_norm(u)
    # P u is a discrete null solution away from the boundary
    dpu = apply_parabolic_dirac(projector_P(u), MINUS)
    assert l2_norm(dpu, g.interior_mask(1)) <= 1e-8 * l2_norm(u)


def test_projector_and_solution_adjoints():
    g = small_grid()
    rng = np.random.default_rng(2)
    u, v = random_field(g, rng), random_field(g, rng)
    for A, As in ((projector_Q, projector_Q_adjoint), (solution_operator, solution_operator_adjoint)):
        lhs = inner_product(v, A(u))
        rhs = inner_product(As(v), u)
        assert abs(lhs - rhs) <= 1e-9 * abs(lhs)


def test_solve_linear_report():
    _, f = sine_solution(9)
    u, rep = solve_linear(f, cross_check=True)
    assert u.grid == f.grid
    assert math.isfinite(rep.boundary_norm)
    assert rep.dirichlet_discrepancy is not None and math.isfinite(rep.dirichlet_discrepancy)
    assert math.isfinite(rep.pde_residual)


def test_operator_norm_known():
    g = small_grid(1)
    rng = np.random.default_rng(3)
    est = operator_norm(lambda x: x * 3.0, lambda y: y * 3.0, g, rng)
    assert est.converged and abs(est.value - 3.0) <= 1e-12
    zero = operator_norm(lambda x: x * 0.0, lambda y: y * 0.0, g, rng)
    assert zero.value == 0.0


def test_operator_norm_nonconvergence():
    g = small_grid(1)
    rng = np.random.default_rng(4)
    # two singular values 1 and 0.999 split over halves of the grid: slow power iteration
    mask = np.zeros(g.node_shape)
    mask[..., : g.n_t // 2] = 1.0
    scale = 1.0 * mask + 0.999 * (1 - mask)
    A = lambda x: x._wrap(x.values * scale)
    with pytest.raises(ConvergenceError):
        operator_norm(A, A, g, rng, tol=1e-15, max_iter=3)


def test_gate_constants_m3():
    g = small_grid(3, 5)
    gate = smallness_gate(AlgebraField.zeros(g))
    assert gate.passes
    assert math.isclose(gate.bound, 1 / 576)
    assert math.isclose(gate.W, 1 / 96)
    assert math.isclose(gate.R, 1 / 48)
    assert math.isclose(ball_radius(3, gate.W), 1 / 96 + 1 / 96)


def test_gate_boundary_and_failure():
    g = small_grid(2, 5)
    one = sample_array(g, lambda X, t: np.ones_like(t))
    f = one * (smallness_gate(one).bound / l2_norm(one))
    gate = smallness_gate(f)
    assert math.isclose(gate.bound, 1 / 288)
    assert gate.passes and gate.W == pytest.approx(0.0, abs=1e-9)
    bad = smallness_gate(f * 1.01)
    assert not bad.passes and bad.W is None


def test_contraction_K_formula():
    g = small_grid(2, 5)
    one = sample_array(g, lambda X, t: np.ones_like(t))
    a = one * (0.01 / l2_norm(one))
    b = one * (0.02 / l2_norm(one))
    assert math.isclose(contraction_K(a, b), 8 * (0.01 ** 2 + 0.02 * 0.01))
    assert contraction_K(a, a) == pytest.approx(8 * 0.01 ** 2)


def test_contraction_K_at_ball_edge():
    # ||u_{n-1}|| = ||u_{n-2}|| = a and ||u_{n-1} - u_{n-2}|| = 2a with a = 1/(6 2^(m+1)) - W;
    # the closed form 3 2^(m+1) a^2 meets 1/2 - 3 2^(m+1) W at f = 0 and stays below it otherwise
    m = 3
    g = small_grid(m, 5)
    one = sample_array(g, lambda X, t: np.ones_like(t))
    s = 2.0 ** (m + 1)
    for fnorm in (0.0, 1e-4, 1e-3, 1 / 576):
        W = smallness_gate(one * (fnorm / l2_norm(one))).W
        a = 1 / (6 * s) - W
        u1 = one * (a / l2_norm(one))
        K = contraction_K(u1, u1 * -1.0)
        assert math.isclose(K, 3 * s * a * a, rel_tol=1e-12, abs_tol=1e-15)
        assert K <= 0.5 - 3 * s * W + 1e-15
        if fnorm == 0.0:
            assert K == pytest.approx(0.5 - 3 * s * W, abs=1e-15)


def test_lipschitz_measured():
    g = small_grid(2, 5)
    rng = np.random.default_rng(5)
    u, v = random_field(g, rng, 0.01), random_field(g, rng, 0.01)
    L = lipschitz_constant(u, v)
    assert 0 < L < math.inf
    assert lipschitz_constant(u, u) == 0.0


def test_C1_two_starts_agree():
    g = SpaceTimeGrid.box(1, 7, 7, -0.5, 0.5, 0.2)
    a, b = estimate_C1(g, seed=0), estimate_C1(g, seed=1)
    assert abs(a.c1 - b.c1) <= 0.01 * a.c1
    assert a.t_norm_sq > 0 and a.exceeds_three == (a.c1 > 3)


def test_nonlinear_zero_data():
    g = small_grid(2, 5)
    u, rep = nonlinear_solve(AlgebraField.zeros(g))
    assert l2_norm(u) == 0.0 and rep.converged and len(rep.rows) == 1


def nonlinear_source(g, fraction=0.9):
    f = sample_array(g, lambda X, t: np.exp(-(X ** 2).sum(0) / 0.05) * np.sin(np.pi * t / g.T) ** 2)
    return f * (fraction * smallness_gate(f).bound / l2_norm(f))


def test_nonlinear_m2_contracts():
    g = SpaceTimeGrid.box(2, 9, 9, -0.5, 0.5, 0.2)
    f = nonlinear_source(g)
    u, rep = nonlinear_solve(f)
    assert rep.outcome == CONVERGED and rep.converged
    assert all(r < 0.5 for r in rep.ratios)
    assert rep.fixed_point_residual <= 1e-8
    assert not rep.anomalies
    assert all(r.norm <= ball_radius(2, rep.W) for r in rep.rows)
    rng = np.random.default_rng(6)
    u0 = random_field(g, rng)
    u0 = u0 * (ball_radius(2, rep.W) / l2_norm(u0))
    u2, rep2 = nonlinear_solve(f, u0=u0)
    assert rep2.converged
    assert l2_norm(u - u2) <= 1e-6 * l2_norm(u)
    assert l2_norm(fixed_point_map(u, f) - u) <= 1e-8


def test_nonlinear_report_serialization():
    g = SpaceTimeGrid.box(2, 7, 7, -0.5, 0.5, 0.2)
    f = nonlinear_source(g)
    _, rep = nonlinear_solve(f, C1=1.0)
    d = json.loads(rep.to_json())
    assert d["outcome"] == CONVERGED and d["guarantees_void"] is False
    assert rep.to_csv().splitlines()[0] == "n,norm,diff,ratio,K_n"
    assert all(r.growth_bound is not None for r in rep.rows)
    _, again = nonlinear_solve(f, C1=1.0)
    assert again.to_json() == rep.to_json()


def test_nonlinear_gate_failed_still_runs():
    g = SpaceTimeGrid.box(2, 7, 7, -0.5, 0.5, 0.2)
    f = nonlinear_source(g, fraction=3.0)
    _, rep = nonlinear_solve(f, max_iter=5)
    assert rep.outcome == GATE_FAILED and rep.guarantees_void
    assert len(rep.rows) >= 1
