from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epfield import connection, ep, lie, solver
from epfield.errors import LineSearchStalled, PreconditionError
from epfield.jets import Grid


def spline(alg, n=1, kappa=1.0, tau=0.0):
    return ep.spline_lagrangian(alg, ep.SplineParams.uniform(n, kappa, tau), n)


def test_action_examples():
    alg = lie.make_algebra("abelian:1")
    grid = Grid.box(1, 33)
    s = alg.exp(grid.axis(0)[None])
    assert abs(solver.action_value(alg, spline(alg), s, grid)) <= 1e-20
    assert np.isclose(solver.action_value(alg, spline(alg, tau=1.0), s, grid), 0.5, atol=1e-12)
    so3 = lie.make_algebra("so3")
    const = np.broadcast_to(so3.exp(np.array([0.3, 0.1, -0.2])), (33, 3, 3))
    assert solver.action_value(so3, spline(so3, tau=2.0), const, grid) == 0.0


@pytest.mark.parametrize("triv", ["right", "left"])
def test_gradient_matches_brute_force(triv):
    alg = lie.make_algebra("se2")
    grid = Grid.box(1, 15)
    t = grid.axis(0)
    L = spline(alg, tau=0.5)
    s = alg.exp(np.stack([np.sin(2 * t), t**2, np.cos(t)]))
    eps = 1e-5
    g = solver.action_gradient(alg, L, s, grid, solver.SolverOptions(fd_eps=eps), triv)
    mask = solver.layer_mask(grid, 2)
    assert np.all(g[:, mask] == 0)
    ref = np.zeros_like(g)
    for i in np.flatnonzero(~mask):
        for a in range(3):
            vals = []
            for sgn in (1.0, -1.0):
                moved = s.copy()
                G = alg.exp(sgn * eps * np.eye(3)[a])
                moved[i] = G @ s[i] if triv == "right" else s[i] @ G
                vals.append(solver.action_value(alg, L, moved, grid, triv))
            ref[a, i] = (vals[0] - vals[1]) / (2 * eps)
    assert np.allclose(g, ref, atol=1e-8 * max(1.0, np.abs(ref).max()))


def test_gradient_directional_consistency():
    alg = lie.make_algebra("so3")
    grid = Grid.box(2, 9)
    X = grid.coords()
    L = spline(alg, 2, tau=0.2)
    s = alg.exp(np.stack([np.sin(X[0]) * X[1], X[0] ** 2, 0.3 * X[1]]))
    prob = solver.ActionProblem(alg, L, grid)
    g = prob.gradient(s, 1e-5)
    d = np.random.default_rng(0).standard_normal(g.shape)
    d[:, prob.mask] = 0
    eps = 1e-5
    num = (prob.action(prob.move(s, d, eps)) - prob.action(prob.move(s, d, -eps))) / (2 * eps)
    assert np.isclose(np.vdot(g, d), num, rtol=1e-5)


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000))
def test_action_invariant_under_constant_shift(seed):
    alg = lie.make_algebra("heisenberg3")
    grid = Grid.box(1, 17)
    t = grid.axis(0)
    rng = np.random.default_rng(seed)
    s = alg.exp(np.stack([np.sin(t), t**2, t]))
    h = alg.exp(rng.standard_normal(3))
    L = spline(alg, tau=0.4)
    a = solver.action_value(alg, L, s, grid)
    assert np.isclose(solver.action_value(alg, L, s @ h, grid), a, rtol=1e-12)
    a = solver.action_value(alg, L, s, grid, "left")
    assert np.isclose(solver.action_value(alg, L, h @ s, grid, "left"), a, rtol=1e-12)


def test_critical_start_stops_immediately():
    alg = lie.make_algebra("so3")
    grid = Grid.box(1, 17)
    xi = np.array([0.4, -0.2, 0.1])
    s0 = alg.exp(np.einsum("a,t->at", xi, grid.axis(0)))
    L = spline(alg)
    bc = solver.BoundaryData.from_field(s0, grid, 2)
    s, trace = solver.minimize(alg, L, s0, grid, bc)
    assert trace.iterations <= 2 and trace.status == "converged"
    assert abs(trace.actions[-1] - trace.actions[0]) <= 1e-12


def test_boundary_precondition():
    alg = lie.make_algebra("so3")
    grid = Grid.box(1, 17)
    bc, s0 = solver.clamped_hermite(alg, grid, 2, [0, 0, 0], [0.3, 0, 0], [0, 0, 0], [0, 0, 0])
    bad = s0.copy()
    bad[0] = alg.exp(np.array([0.5, 0, 0]))
    with pytest.raises(PreconditionError):
        solver.minimize(alg, spline(alg), bad, grid, bc)
    with pytest.raises(PreconditionError):
        solver.minimize(alg, spline(alg), s0[:-1], grid, bc)


def test_monotone_trace_flat_iterates_and_fixed_boundary():
    alg = lie.make_algebra("so3")
    grid = Grid.box(1, 25)
    L = spline(alg, tau=0.1)
    bc, s0 = solver.clamped_hermite(alg, grid, 2, [0, 0, 0], [0.5, -0.2, 0.3], [0.3, 0, 0], [0, 0.4, 0])
    seen = []

    def callback(it, s, S, gnorm):
        seen.append(bc.mismatch(s))

    s, trace = solver.minimize(alg, L, s0, grid, bc, solver.SolverOptions(grad_tol=1e-6), callback=callback)
    assert trace.status == "converged"
    assert np.all(np.diff(trace.actions) <= 0)
    assert max(seen) == 0.0
    assert trace.actions[-1] < trace.actions[0]


def test_flatness_along_iterates_in_2d():
    alg = lie.make_algebra("so3")
    grid = Grid.box(2, 9)
    X = grid.coords()
    L = spline(alg, 2)
    s0 = alg.exp(np.stack([0.3 * X[0] * X[1], 0.2 * np.sin(X[0]), 0.1 * X[1] ** 2]))
    bc = solver.BoundaryData.from_field(s0, grid, 2)
    defects = []

    def callback(it, s, S, gnorm):
        sigma = connection.reduce(alg, s, grid)
        defects.append(connection.flatness_report(alg, sigma, grid).passed)

    solver.minimize(alg, L, s0, grid, bc, solver.SolverOptions(max_iters=5, on_stall="return"), callback=callback)
    assert defects and all(defects)


def test_gradient_descent_fixed_step_and_options():
    alg = lie.make_algebra("abelian:1")
    grid = Grid.box(1, 17)
    bc, s0 = solver.clamped_hermite(alg, grid, 2, [0.0], [1.0], [0.0], [0.0])
    opts = solver.SolverOptions(method="gd", step_rule="fixed", step=1e-6, max_iters=20, grad_tol=1e-12)
    s, trace = solver.minimize(alg, spline(alg), s0, grid, bc, opts)
    assert trace.status in ("max_iters", "stalled")
    assert np.all(np.diff(trace.actions) <= 0)
    with pytest.raises(ValueError):
        solver.SolverOptions(armijo=2.0)
    with pytest.raises(ValueError):
        solver.SolverOptions(method="newton")


def test_beam_small_grid():
    alg = lie.make_algebra("abelian:1")
    grid = Grid.box(1, 33)
    t = grid.axis(0)
    bc, s0 = solver.clamped_hermite(alg, grid, 2, [0.0], [1.0], [0.0], [0.0])
    s0 = solver.initial_guess(alg, grid, bc, "geodesic")
    s, trace = solver.minimize(alg, spline(alg), s0, grid, bc, solver.SolverOptions(grad_tol=1e-8))
    assert trace.status == "converged"
    assert np.max(np.abs(np.log(s[:, 0, 0]) - (3 * t**2 - 2 * t**3))) <= 2e-2
