from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from epfield import matfun
from epfield.errors import LogDomain

mats = arrays(np.float64, (3, 3), elements=st.floats(-2, 2))


@given(a=mats)
def test_expm_matches_scipy(a):
    ref = sla.expm(a)
    assert np.allclose(matfun.expm(a), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


@given(a=arrays(np.float64, (3, 3), elements=st.floats(-0.3, 0.3)))
def test_logm_inverts_expm(a):
    assert np.allclose(matfun.logm(matfun.expm(a)), a, atol=1e-12)


def test_logm_matches_scipy_far_from_identity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.standard_normal((4, 4))
        m = sla.expm(0.9 * a / np.linalg.norm(a, 2) * 2.5)
        assert np.allclose(matfun.logm(m), sla.logm(m).real, atol=1e-9)


def test_batched_shapes():
    a = np.random.default_rng(1).standard_normal((5, 2, 3, 3)) * 0.2
    assert matfun.expm(a).shape == a.shape
    assert np.allclose(matfun.expm(a)[3, 1], sla.expm(a[3, 1]))


def test_small_increment_keeps_relative_precision():
    e = 1e-12 * np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(matfun.log1pm(e), e - e @ e / 2, rtol=1e-10, atol=1e-30)
    assert np.allclose(matfun.expm1m(e), e + e @ e / 2, rtol=1e-10, atol=1e-30)


def test_log_domain():
    with pytest.raises(LogDomain):
        matfun.logm(np.diag([-1.0, 1.0]))


def test_inv_ext_and_log1pm_ext():
    rng = np.random.default_rng(2)
    a = np.eye(3) + 0.3 * rng.standard_normal((4, 3, 3))
    x = matfun.inv_ext(a)
    assert x.dtype == np.longdouble
    resid = np.abs(a.astype(np.longdouble) @ x - np.eye(3)).max()
    assert resid <= 10 * np.finfo(np.longdouble).eps * 10
    e = 0.05 * rng.standard_normal((4, 3, 3))
    assert np.allclose(matfun.log1pm_ext(e).astype(float), matfun.log1pm(e), atol=1e-15)
