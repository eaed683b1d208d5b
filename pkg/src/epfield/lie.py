"""Lie algebra and matrix-group services.

An algebra is described by structure constants ``c[a, b, g]`` with
``[B_b, B_g] = c[a, b, g] B_a``, a (pseudo-)metric ``g`` and optionally a
list of ``d x d`` matrices realising the basis.  Algebra-valued arrays carry
their coefficient axis first (``shape (m, ...)``); group-valued arrays carry
the matrix axes last (``shape (..., d, d)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matfun
from .errors import (
    AntisymmetryViolation,
    BasisMismatch,
    DegenerateMetric,
    DimensionMismatch,
    JacobiViolation,
    LogDomain,
    NoMatrixBasis,
)

STRUCTURE_TOL = 1e-12
DEGENERACY_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class LieAlgebraSpec:
    struct_consts: np.ndarray
    metric: np.ndarray | None = None
    matrix_basis: np.ndarray | None = None
    name: str = "custom"
    group: str | None = None

    @property
    def dim(self) -> int:
        return int(np.asarray(self.struct_consts).shape[0])


class LieAlgebra:
    """Validated, immutable algebra handle.

    Caches the per-basis ad matrices, the metric inverse and the bilinear
    tensors used by the field-equation modules.
    """

    def __init__(self, spec: LieAlgebraSpec):
        c = np.array(spec.struct_consts, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[1] != c.shape[2]:
            raise DimensionMismatch(f"structure constants must be m x m x m, got {c.shape}")
        m = c.shape[0]
        g = np.eye(m) if spec.metric is None else np.array(spec.metric, dtype=float)
        if g.shape != (m, m):
            raise DimensionMismatch(f"metric must be {m} x {m}, got {g.shape}")
        basis = None
        if spec.matrix_basis is not None:
            basis = np.array(spec.matrix_basis, dtype=float)
            if basis.ndim != 3 or basis.shape[0] != m or basis.shape[1] != basis.shape[2]:
                raise DimensionMismatch(f"matrix basis must be m x d x d with m={m}, got {basis.shape}")

        _check_antisymmetry(c)
        _check_jacobi(c)
        if not np.allclose(g, g.T, rtol=0, atol=STRUCTURE_TOL):
            i, j = np.unravel_index(np.argmax(np.abs(g - g.T)), g.shape)
            raise DegenerateMetric(f"metric is not symmetric at ({i}, {j})")
        det = np.linalg.det(g)
        if abs(det) <= DEGENERACY_TOL:
            raise DegenerateMetric(f"metric is degenerate (|det g| = {abs(det):.3e})")
        if basis is not None:
            _check_basis(c, basis)

        self.spec = spec
        self.name = spec.name
        self.group = spec.group
        self.dim = m
        self.c = c
        self.c.setflags(write=False)
        self.metric = g
        self.metric_inv = np.linalg.inv(g)
        self.basis = basis
        # ad_mats[b] is the matrix of ad_{B_b}: (ad_{B_b})[a, g] = c[a, b, g]
        self.ad_mats = np.transpose(c, (1, 0, 2)).copy()
        # (ad^dagger_x y)^d = dag[d, b, e] x^b y^e
        self.dagger_tensor = np.einsum("dg,abg,ae->dbe", self.metric_inv, c, g)
        self.is_abelian = bool(np.all(c == 0))
        if basis is not None:
            flat = basis.reshape(m, -1).T
            self._basis_pinv = np.linalg.pinv(flat)

    # ------------------------------------------------------------------ checks
    def _vec(self, x, name: str = "vector") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[0] != self.dim:
            raise DimensionMismatch(f"{name} must have leading axis {self.dim}, got shape {x.shape}")
        return x

    # ----------------------------------------------------------------- algebra
    def bracket(self, x, y) -> np.ndarray:
        """``[x, y]`` for coefficient arrays of shape ``(m, ...)``."""
        x, y = self._vec(x), self._vec(y)
        return np.einsum("abg,b...,g...->a...", self.c, x, y)

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad_x`` (shape ``(m, m, ...)``)."""
        x = self._vec(x)
        return np.einsum("abg,b...->ag...", self.c, x)

    def ad_dagger(self, x, z) -> np.ndarray:
        """Metric adjoint: ``g(ad_x y, z) = g(y, ad_dagger(x, z))``."""
        x, z = self._vec(x), self._vec(z)
        return np.einsum("dbe,b...,e...->d...", self.dagger_tensor, x, z)

    def coad(self, x, mu) -> np.ndarray:
        """Coadjoint action on a dual vector, ``(ad_x)^T mu``.

        Sign fixed so that ``sharp(coad(x, flat(z))) == ad_dagger(x, z)``.
        """
        x, mu = self._vec(x), self._vec(mu, "dual vector")
        return np.einsum("abg,b...,a...->g...", self.c, x, mu)

    def flat(self, x) -> np.ndarray:
        return np.einsum("ab,b...->a...", self.metric, self._vec(x))

    def sharp(self, mu) -> np.ndarray:
        return np.einsum("ab,b...->a...", self.metric_inv, self._vec(mu, "dual vector"))

    def inner(self, x, y) -> np.ndarray:
        return np.einsum("ab,a...,b...->...", self.metric, self._vec(x), self._vec(y))

    def is_bi_invariant(self, tol: float = STRUCTURE_TOL) -> bool:
        """True when ``ad_dagger = -ad`` on every basis element."""
        dag = np.einsum("dbe->bde", self.dagger_tensor)
        return bool(np.max(np.abs(dag + self.ad_mats), initial=0.0) <= tol)

    # ------------------------------------------------------------------- group
    def _need_basis(self) -> np.ndarray:
        if self.basis is None:
            raise NoMatrixBasis(f"algebra '{self.name}' has no matrix basis")
        return self.basis

    def hat(self, x) -> np.ndarray:
        """Coefficients ``(m, ...)`` to matrices ``(..., d, d)``."""
        basis = self._need_basis()
        return np.einsum("a...,aij->...ij", self._vec(x), basis)

    def vee(self, mat) -> np.ndarray:
        """Least-squares coefficients of matrices ``(..., d, d)`` in the basis."""
        basis = self._need_basis()
        mat = np.asarray(mat, dtype=float)
        flat = mat.reshape(mat.shape[:-2] + (-1,))
        coeffs = np.einsum("ak,...k->a...", self._basis_pinv, flat)
        return coeffs

    def exp(self, x) -> np.ndarray:
        return matfun.expm(self.hat(x))

    def log(self, g, check: bool = True) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        res = matfun.logm(g)
        coeffs = self.vee(res)
        if check:
            back = self.hat(coeffs)
            err = np.max(np.abs(back - res), initial=0.0)
            if not np.isfinite(err) or err > 1e-8 * max(1.0, float(np.max(np.abs(res), initial=0.0))):
                raise LogDomain(
                    f"logarithm leaves the algebra '{self.name}' (residual {err:.2e}); "
                    "element outside the principal branch"
                )
        return coeffs

    def log_near_identity(self, e, check: bool = False) -> np.ndarray:
        """Coefficients of ``log(I + e)`` for small increments ``e``."""
        res = matfun.log1pm(e)
        coeffs = self.vee(res)
        if check:
            err = np.max(np.abs(self.hat(coeffs) - res), initial=0.0)
            if err > 1e-8:
                raise LogDomain(f"logarithm leaves the algebra (residual {err:.2e})")
        return coeffs

    def Ad(self, g) -> np.ndarray:
        """Matrix of ``Ad_g`` in the basis, shape ``(m, m, ...)`` for ``g`` of shape ``(..., d, d)``."""
        basis = self._need_basis()
        g = np.asarray(g, dtype=float)
        ginv = np.linalg.inv(g)
        conj = g[..., None, :, :] @ basis @ ginv[..., None, :, :]
        coeffs = self.vee(conj)  # (m_out, ..., m_in)
        return np.moveaxis(coeffs, -1, 1)

    def membership_residual(self, g) -> float:
        """Distance of ``g`` from the named group (0 for groups without an equation)."""
        g = np.asarray(g, dtype=float)
        eye = np.eye(g.shape[-1])
        if self.group == "SO3":
            res = np.abs(np.swapaxes(g, -1, -2) @ g - eye).max(initial=0.0)
            return float(max(res, np.abs(np.linalg.det(g) - 1).max(initial=0.0)))
        if self.group == "SE2":
            rot = g[..., :2, :2]
            res = np.abs(np.swapaxes(rot, -1, -2) @ rot - np.eye(2)).max(initial=0.0)
            last = np.abs(g[..., 2, :] - np.array([0.0, 0.0, 1.0])).max(initial=0.0)
            return float(max(res, last))
        if self.group == "H3":
            low = np.tril(g, -1)
            return float(max(np.abs(low).max(initial=0.0), np.abs(np.diagonal(g, axis1=-2, axis2=-1) - 1).max(initial=0.0)))
        if self.group == "Rm":
            off = g - np.eye(g.shape[-1]) * np.diagonal(g, axis1=-2, axis2=-1)[..., None, :]
            return float(np.abs(off).max(initial=0.0))
        return 0.0


def _check_antisymmetry(c: np.ndarray) -> None:
    sym = c + np.transpose(c, (0, 2, 1))
    if np.max(np.abs(sym), initial=0.0) > STRUCTURE_TOL:
        a, b, g = np.unravel_index(np.argmax(np.abs(sym)), sym.shape)
        raise AntisymmetryViolation(
            f"c[{a}][{b}][{g}] = {c[a, b, g]:.6g} but c[{a}][{g}][{b}] = {c[a, g, b]:.6g}"
        )


def jacobi_residual(c: np.ndarray) -> np.ndarray:
    """Jacobi sum indexed ``[a, b, g, d]`` (zero for a Lie algebra)."""
    t1 = np.einsum("lbg,ald->abgd", c, c)
    t2 = np.einsum("lgd,alb->abgd", c, c)
    t3 = np.einsum("ldb,alg->abgd", c, c)
    return t1 + t2 + t3


def _check_jacobi(c: np.ndarray) -> None:
    res = jacobi_residual(c)
    if np.max(np.abs(res), initial=0.0) > STRUCTURE_TOL:
        a, b, g, d = np.unravel_index(np.argmax(np.abs(res)), res.shape)
        raise JacobiViolation(
            f"Jacobi identity fails for basis triple ({b}, {g}, {d}), component {a}: residual {res[a, b, g, d]:.3e}"
        )


def _check_basis(c: np.ndarray, basis: np.ndarray) -> None:
    comm = np.einsum("bij,gjk->bgik", basis, basis) - np.einsum("gij,bjk->bgik", basis, basis)
    expected = np.einsum("abg,aik->bgik", c, basis)
    diff = np.abs(comm - expected)
    if np.max(diff, initial=0.0) > STRUCTURE_TOL:
        b, g, _, _ = np.unravel_index(np.argmax(diff), diff.shape)
        raise BasisMismatch(
            f"commutator [B_{b}, B_{g}] of the matrix basis does not match the structure constants "
            f"(max deviation {np.max(diff):.3e})"
        )
    flat = basis.reshape(basis.shape[0], -1)
    if np.linalg.matrix_rank(flat) < basis.shape[0]:
        raise BasisMismatch("matrix basis is linearly dependent")


# ---------------------------------------------------------------- named algebras
def _so3() -> LieAlgebraSpec:
    basis = np.zeros((3, 3, 3))
    basis[0][2, 1], basis[0][1, 2] = 1, -1
    basis[1][0, 2], basis[1][2, 0] = 1, -1
    basis[2][1, 0], basis[2][0, 1] = 1, -1
    c = np.zeros((3, 3, 3))
    for a, b, g in ((2, 0, 1), (0, 1, 2), (1, 2, 0)):
        c[a, b, g], c[a, g, b] = 1, -1
    return LieAlgebraSpec(c, np.eye(3), basis, "so3", "SO3")


def _heisenberg3() -> LieAlgebraSpec:
    basis = np.zeros((3, 3, 3))
    basis[0][0, 1] = 1
    basis[1][1, 2] = 1
    basis[2][0, 2] = 1
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = 1, -1
    return LieAlgebraSpec(c, np.eye(3), basis, "heisenberg3", "H3")


def _se2() -> LieAlgebraSpec:
    basis = np.zeros((3, 3, 3))
    basis[0][1, 0], basis[0][0, 1] = 1, -1
    basis[1][0, 2] = 1
    basis[2][1, 2] = 1
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = 1, -1
    c[1, 0, 2], c[1, 2, 0] = -1, 1
    return LieAlgebraSpec(c, np.eye(3), basis, "se2", "SE2")


def _abelian(m: int) -> LieAlgebraSpec:
    basis = np.zeros((m, m, m))
    for a in range(m):
        basis[a][a, a] = 1
    return LieAlgebraSpec(np.zeros((m, m, m)), np.eye(m), basis, f"abelian:{m}", "Rm")


NAMED_ALGEBRAS = ("so3", "heisenberg3", "se2", "abelian:<m>")


def named_spec(key: str) -> LieAlgebraSpec:
    if key == "so3":
        return _so3()
    if key == "heisenberg3":
        return _heisenberg3()
    if key == "se2":
        return _se2()
    if key.startswith("abelian:"):
        try:
            m = int(key.split(":", 1)[1])
        except ValueError:
            m = 0
        if m >= 1:
            return _abelian(m)
    raise KeyError(f"unknown group key '{key}'; known keys: {', '.join(NAMED_ALGEBRAS)}")


def make_algebra(spec: LieAlgebraSpec | str, metric: Sequence | np.ndarray | None = None) -> LieAlgebra:
    """Validate ``spec`` (or a named key) and return an algebra handle."""
    if isinstance(spec, str):
        spec = named_spec(spec)
    if metric is not None:
        spec = LieAlgebraSpec(spec.struct_consts, np.asarray(metric, dtype=float), spec.matrix_basis, spec.name, spec.group)
    return LieAlgebra(spec)


def random_algebra_vectors(alg: LieAlgebra, count: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal((alg.dim, count))
