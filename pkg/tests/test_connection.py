from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _oracles import slopes
from epfield import connection, jets, lie
from epfield.errors import DimensionMismatch
from epfield.jets import Grid

TRIVS = ("right", "left")


@pytest.mark.parametrize("triv", TRIVS)
@settings(max_examples=15)
@given(xi=arrays(np.float64, (3,), elements=st.floats(-2, 2)))
def test_one_parameter_subgroup_reduces_exactly(triv, xi):
    alg = lie.make_algebra("so3")
    grid = Grid.box(2, 7)
    X = grid.coords()
    s = alg.exp(np.einsum("a,...->a...", xi, X[0]))
    sigma = connection.reduce(alg, s, grid, triv)
    assert np.allclose(sigma[0], xi[:, None, None], atol=1e-12)
    assert np.allclose(sigma[1], 0, atol=1e-12)


def test_constant_field_reduces_to_zero():
    alg = lie.make_algebra("se2")
    grid = Grid.box(2, 5)
    s = np.broadcast_to(alg.exp(np.array([0.3, -0.2, 1.0])), grid.size + (3, 3))
    assert np.allclose(connection.reduce(alg, s, grid), 0, atol=1e-14)


def test_abelian_reduce_is_second_order():
    alg = lie.make_algebra("abelian:1")
    errs = []
    for N in (17, 33, 65):
        grid = Grid.box(1, N)
        x = grid.axis(0)
        s = alg.exp(np.sin(2 * x)[None])
        errs.append(np.max(np.abs(connection.reduce(alg, s, grid)[0, 0] - 2 * np.cos(2 * x))))
    assert min(slopes(errs)) >= 1.9


def test_curvature_examples():
    ab = lie.make_algebra("abelian:1")
    grid = Grid.box(2, 9)
    X = grid.coords()
    sigma = np.stack([X[1][None], X[0][None]])
    F = connection.curvature(ab, sigma, grid)
    assert np.allclose(F[0][:, grid.interior(1)], 0, atol=1e-13)
    sigma = np.stack([np.zeros((1,) + grid.size), X[0][None]])
    assert np.allclose(connection.curvature(ab, sigma, grid)[0], 0.5)
    so3 = lie.make_algebra("so3")
    const = np.zeros((2, 3) + grid.size)
    const[0, 0] = const[1, 1] = 1.0
    # the bracket enters with the trivialization sign: -1/2 e3 for right, +1/2 e3 for left
    for triv, sign in (("right", -1.0), ("left", 1.0)):
        F = connection.curvature(so3, const, grid, triv)
        assert np.allclose(F[0], np.array([0, 0, 0.5 * sign])[:, None, None])
    rep = connection.flatness_report(so3, const, grid)
    assert not rep.passed and np.isclose(rep.max_defect, 0.5)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=10)
def test_curvature_antisymmetry(seed):
    alg = lie.make_algebra("heisenberg3")
    grid = Grid.box(3, 6)
    sigma = np.random.default_rng(seed).standard_normal((3, 3) + grid.size)
    for mu, nu in connection.pairs(3):
        a = connection.curvature_component(alg, sigma, grid, mu, nu)
        b = connection.curvature_component(alg, sigma, grid, nu, mu)
        assert np.allclose(a, -b, atol=1e-12)


def test_abelian_prolonged_curvature_is_derivative_of_curvature():
    alg = lie.make_algebra("abelian:2")
    grid = Grid.box(2, 12)
    X = grid.coords()
    sigma = np.stack([np.stack([np.sin(X[1]), X[0] * X[1]]), np.stack([X[0] ** 3, np.cos(X[0] + X[1])])])
    F = connection.curvature(alg, sigma, grid)[0]
    J = (1, 1)
    FJ = connection.curvature_component(alg, jets.partial(sigma, J, grid), grid, 0, 1)
    # the abelian curvature is linear, so prolongation commutes with d^J up to stencil composition
    rep = connection.flatness_report(alg, sigma, grid, jet_order=2, tol=1e9)
    assert rep.max_defect >= np.max(np.abs(jets.partial(F, J, grid)[:, grid.interior(3)])) - 1e-9
    assert np.allclose(FJ[:, grid.interior(3)], jets.partial(F, J, grid)[:, grid.interior(3)], atol=1e-1)


def test_flatness_of_reduced_group_field():
    alg = lie.make_algebra("so3")
    grid = Grid.box(2, 33)
    X = grid.coords()
    s = alg.exp(np.einsum("a,...->a...", [1.0, 0, 0], X[0])) @ alg.exp(np.einsum("a,...->a...", [0, 1.0, 0], X[1]))
    rep = connection.flatness_report(alg, connection.reduce(alg, s, grid), grid)
    assert rep.passed and rep.max_defect <= rep.tolerance
    assert connection.flatness_report(alg, np.zeros((2, 3) + grid.size), grid).max_defect == 0.0


def test_shape_errors():
    alg = lie.make_algebra("so3")
    grid = Grid.box(2, 5)
    with pytest.raises(DimensionMismatch):
        connection.curvature(alg, np.zeros((2, 2) + grid.size), grid)
    with pytest.raises(ValueError):
        connection.bracket_sign("middle")
