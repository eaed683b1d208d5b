from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _oracles import commutator_structure_constants
from epfield import lie
from epfield.errors import (
    AntisymmetryViolation,
    BasisMismatch,
    DegenerateMetric,
    DimensionMismatch,
    JacobiViolation,
    LogDomain,
    NoMatrixBasis,
)

KEYS = ("so3", "heisenberg3", "se2", "abelian:3")
finite = st.floats(-3, 3, allow_nan=False)
vec3 = arrays(np.float64, (3,), elements=finite)


def skew(v):
    x, y, z = v
    return np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)


def test_so3_constants_match_skew_commutators():
    alg = lie.make_algebra("so3")
    basis = np.stack([skew(e) for e in np.eye(3)])
    assert np.allclose(alg.basis, basis)
    assert np.allclose(commutator_structure_constants(basis), alg.c, atol=1e-14)


@pytest.mark.parametrize("key", ["heisenberg3", "se2", "abelian:3"])
def test_named_constants_match_commutators(key):
    alg = lie.make_algebra(key)
    assert np.allclose(commutator_structure_constants(alg.basis), alg.c, atol=1e-14)


def test_valid_handles():
    assert lie.make_algebra("abelian:2").is_abelian
    c = np.zeros((2, 2, 2))
    c[0, 0, 1], c[0, 1, 0] = 1.0, -1.0
    alg = lie.LieAlgebra(lie.LieAlgebraSpec(c))
    assert alg.dim == 2 and not alg.is_abelian


def test_invalid_specs():
    c = np.zeros((2, 2, 2))
    c[0, 0, 1] = 1.0
    with pytest.raises(AntisymmetryViolation):
        lie.LieAlgebra(lie.LieAlgebraSpec(c))
    with pytest.raises(DegenerateMetric):
        lie.make_algebra("so3", np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(DegenerateMetric):
        lie.make_algebra("so3", np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(DimensionMismatch):
        lie.make_algebra("so3", np.eye(2))
    bad = lie.named_spec("so3")
    with pytest.raises(BasisMismatch):
        lie.LieAlgebra(lie.LieAlgebraSpec(bad.struct_consts, None, -bad.matrix_basis))


def test_jacobi_violation_detected():
    # generic antisymmetric constants break Jacobi
    c = np.random.default_rng(3).standard_normal((3, 3, 3))
    c = c - c.transpose(0, 2, 1)
    with pytest.raises(JacobiViolation):
        lie.LieAlgebra(lie.LieAlgebraSpec(c))


def test_unknown_key_lists_known_keys():
    with pytest.raises(KeyError, match="so3"):
        lie.named_spec("su7")


def test_bracket_examples():
    so3 = lie.make_algebra("so3")
    e = np.eye(3)
    assert np.allclose(so3.bracket(e[0], e[1]), e[2])
    h = lie.make_algebra("heisenberg3")
    assert np.allclose(h.bracket(e[0], e[2]), 0)
    assert np.allclose(h.bracket(e[0], e[1]), e[2])
    ab = lie.make_algebra("abelian:3")
    assert np.allclose(ab.ad_dagger(e[0], e[1]), 0)
    assert np.allclose(so3.coad(e[0] + 2 * e[1], so3.flat(e[0] + 2 * e[1])), 0)


def test_ad_dagger_heisenberg_linear_system():
    # g(ad_x y, z) = g(y, w) solved for w by brute force over a basis
    h = lie.make_algebra("heisenberg3", np.diag([1.0, 2.0, 3.0]))
    rng = np.random.default_rng(0)
    x, z = rng.standard_normal((2, 3))
    M = np.array([[h.inner(h.bracket(x, ei), z) for ei in np.eye(3)]])
    w = np.linalg.solve(h.metric, M.ravel())
    assert np.allclose(h.ad_dagger(x, z), w)


def test_exp_examples():
    so3 = lie.make_algebra("so3")
    assert np.allclose(so3.exp(np.zeros(3)), np.eye(3))
    R = so3.exp(np.array([0, 0, np.pi / 2]))
    assert np.allclose(R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_no_matrix_basis():
    alg = lie.LieAlgebra(lie.LieAlgebraSpec(np.zeros((2, 2, 2))))
    with pytest.raises(NoMatrixBasis):
        alg.exp(np.zeros(2))


def test_log_domain():
    so3 = lie.make_algebra("so3")
    with pytest.raises(LogDomain):
        so3.log(so3.exp(np.array([np.pi, 0, 0])))


@pytest.mark.parametrize("key", KEYS)
@given(x=vec3, y=vec3, z=vec3)
def test_adjointness_and_jacobi(key, x, y, z):
    alg = lie.make_algebra(key)
    assert abs(alg.inner(alg.bracket(x, y), z) - alg.inner(y, alg.ad_dagger(x, z))) <= 1e-12 * (1 + np.abs(x).max() * np.abs(y).max() * np.abs(z).max())
    jac = alg.bracket(x, alg.bracket(y, z)) + alg.bracket(y, alg.bracket(z, x)) + alg.bracket(z, alg.bracket(x, y))
    assert np.max(np.abs(jac)) <= 1e-12 * 100


@given(lam=st.floats(0.1, 10), x=vec3, z=vec3)
def test_biinvariance_scalar_metric(lam, x, z):
    alg = lie.make_algebra("so3", lam * np.eye(3))
    assert alg.is_bi_invariant()
    assert np.max(np.abs(alg.ad_dagger(x, z) + alg.bracket(x, z))) <= 1e-12 * 10


def test_biinvariance_detector_negative():
    assert not lie.make_algebra("heisenberg3").is_bi_invariant()
    assert not lie.make_algebra("se2").is_bi_invariant()
    assert not lie.make_algebra("so3", np.diag([1.0, 2.0, 3.0])).is_bi_invariant()


@pytest.mark.parametrize("key", KEYS)
@given(v=arrays(np.float64, (3,), elements=st.floats(-1, 1)))
def test_exp_log_round_trip(key, v):
    alg = lie.make_algebra(key)
    assert np.max(np.abs(alg.log(alg.exp(v)) - v)) <= 1e-10
    assert alg.membership_residual(alg.exp(v)) <= 1e-12


@given(x=vec3, y=vec3)
def test_Ad_is_conjugation(x, y):
    alg = lie.make_algebra("se2")
    g = alg.exp(0.3 * x)
    lhs = np.einsum("ab,b->a", alg.Ad(g), y)
    rhs = alg.vee(g @ alg.hat(y) @ np.linalg.inv(g))
    assert np.allclose(lhs, rhs, atol=1e-10)
