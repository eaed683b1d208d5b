"""Reduced (Euler-Poincare) field equations.

``ep_general`` evaluates the multi-index operator for an arbitrary reduced
Lagrangian ``l(x, A_{mu,J})``; the ``spline_*`` functions evaluate the closed
forms for second-order splines and elastica.

Sign conventions
----------------
``ep_general`` returns a dual-vector (covector) field
``sum_mu (d_mu + s ad^T_{sigma_mu}) J_mu`` with
``J_mu = sum_J (-1)^|J| d^J (dl/dA_{mu,J})`` and ``s`` the trivialization sign.
The spline residuals return algebra vectors normalized by an overall factor
``-1`` relative to ``sharp(ep_general)`` for the spline Lagrangian, i.e.
``spline_residual = -sharp(ep_general(spline_lagrangian))`` nodewise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import dual, jets
from .connection import bracket_sign
from .errors import DimensionMismatch, NotBiInvariant
from .jets import Grid, Lagrangian
from .lie import LieAlgebra

EP_GENERAL_SIGN = "covector: sum_mu (d_mu + s ad^T_sigma_mu) J_mu"
SPLINE_SIGN = "vector: -sharp(ep_general) for the spline Lagrangian"


@dataclass(frozen=True)
class SplineParams:
    kappa: tuple
    tau: tuple
    order: int = 2

    def __post_init__(self):
        kappa = tuple(float(k) for k in np.atleast_1d(self.kappa))
        tau = tuple(float(t) for t in np.atleast_1d(self.tau))
        if len(tau) == 1 and len(kappa) > 1:
            tau = tau * len(kappa)
        if len(kappa) != len(tau):
            raise ValueError("kappa and tau must have one entry per axis")
        if all(k == 0 for k in kappa):
            raise ValueError("at least one kappa must be nonzero")
        if self.order < 1:
            raise ValueError("spline order must be >= 1")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def uniform(cls, n: int, kappa: float = 1.0, tau: float = 0.0, order: int = 2) -> "SplineParams":
        return cls((kappa,) * n, (tau,) * n, order)

    def check(self, n: int) -> None:
        if len(self.kappa) != n:
            raise DimensionMismatch(f"spline parameters have {len(self.kappa)} axes, field has {n}")


# ------------------------------------------------------------------ jet tables
def reduced_keys(n: int, k: int) -> list[tuple[int, tuple]]:
    """Reduced jet keys ``(mu, J)`` with ``|J| <= k - 1``, graded-lex in ``J``."""
    return [(mu, J) for mu in range(n) for J in jets.multi_indices(n, k - 1)]


def reduced_jets(sigma: np.ndarray, grid: Grid, k: int) -> dict:
    return {(mu, J): jets.partial(sigma[mu], J, grid) for mu, J in reduced_keys(grid.n, k)}


def jet_partials(L: Lagrangian, sigma: np.ndarray, grid: Grid) -> dict:
    """``dl/dA_{mu,J}`` at every node, keyed by ``(mu, J)``; each ``(m,) + grid``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != grid.n + 2 or sigma.shape[0] != grid.n or sigma.shape[2:] != grid.size:
        raise DimensionMismatch(f"reduced field shape {sigma.shape} does not match grid {grid.size}")
    table = reduced_jets(sigma, grid, L.order)
    return jets.jet_gradient(L, grid.coords(), table)


def reduced_current(L: Lagrangian, sigma: np.ndarray, grid: Grid, P: dict | None = None) -> np.ndarray:
    """``J_mu = sum_J (-1)^|J| d^J P^J_mu``, shape ``(n, m) + grid``."""
    P = jet_partials(L, sigma, grid) if P is None else P
    n = grid.n
    out = np.zeros(np.shape(sigma))
    for mu, J in reduced_keys(n, L.order):
        out[mu] += (-1) ** jets.order(J) * jets.partial(P[(mu, J)], J, grid)
    return out


def ep_general(
    alg: LieAlgebra, L: Lagrangian, sigma: np.ndarray, grid: Grid, trivialization: str = "right"
) -> np.ndarray:
    """Euler-Poincare expression of a reduced Lagrangian, covector field ``(m,) + grid``.

    The outer derivative ``d^{J + 1_mu}`` is evaluated as ``d_mu`` applied to
    ``d^J``, so the result equals the discrete divergence of
    :func:`reduced_current` plus the coadjoint term.
    """
    s = bracket_sign(trivialization)
    sigma = np.asarray(sigma, dtype=float)
    Jc = reduced_current(L, sigma, grid)
    out = np.zeros(Jc.shape[1:])
    for mu in range(grid.n):
        out += jets.d1(Jc[mu], mu, grid) + s * alg.coad(sigma[mu], Jc[mu])
    return out


def ep_interior(grid: Grid, k: int) -> np.ndarray:
    """Nodes free of one-sided stencils for :func:`ep_general` at order ``k``."""
    r = 2 * jets.stencil_radius(max(k - 1, 0)) + 1
    return grid.interior(r)


# ---------------------------------------------------------------- spline chain
def chain_tensor(alg: LieAlgebra) -> np.ndarray:
    """Bilinear ``Q(a, b) = 1/2 (ad^dag_a b + ad^dag_b a - ad_a b)`` as ``Q[d, b, e]``."""
    dag = alg.dagger_tensor
    return 0.5 * (dag + np.transpose(dag, (0, 2, 1)) - alg.c)


def xi_chain(alg: LieAlgebra, sigma: np.ndarray, grid: Grid, k: int) -> list[list[np.ndarray]]:
    """Per axis ``mu``: the fields ``xi_mu^0 .. xi_mu^{k-1}`` (no sum over ``mu``).

    ``xi^j = d_mu xi^{j-1} + Q(sigma_mu, xi^{j-1})``.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    sigma = np.asarray(sigma, dtype=float)
    Q = chain_tensor(alg)
    out = []
    for mu in range(grid.n):
        chain = [sigma[mu]]
        for _ in range(1, k):
            prev = chain[-1]
            chain.append(jets.d1(prev, mu, grid) + np.einsum("dbe,b...,e...->d...", Q, sigma[mu], prev))
        out.append(chain)
    return out


def _taylor_chain(Q: np.ndarray, derivs: list) -> object:
    """Top of the xi-chain from the derivative list ``[A, A', ..., A^{(k-1)}]``.

    Works on arrays and Duals alike; the chain is propagated as Taylor data
    along its own axis (shift plus Leibniz rule for the bilinear term).
    """
    from math import comb

    sig = derivs
    cur = list(derivs)
    while len(cur) > 1:
        nxt = []
        for p in range(len(cur) - 1):
            term = cur[p + 1]
            for q in range(p + 1):
                term = term + comb(p, q) * dual.einsum("dbe,b...,e...->d...", Q, sig[q], cur[p - q])
            nxt.append(term)
        cur = nxt
    return cur[0]


def spline_lagrangian(alg: LieAlgebra, params: SplineParams, n: int) -> Lagrangian:
    """Reduced spline/elastica density ``1/2 sum_mu kappa_mu |xi_mu^{k-1}|^2 + 1/2 tau_mu |sigma_mu|^2``.

    Reads the pure jets ``A_{mu, j 1_mu}`` for ``j < k``.
    """
    params.check(n)
    k = params.order
    Q = chain_tensor(alg)
    g = alg.metric
    reads = tuple((mu, jets.unit(n, mu, j)) for mu in range(n) for j in range(k))

    def evaluator(x, table):
        total = 0.0
        for mu in range(n):
            derivs = [table[(mu, jets.unit(n, mu, j))] for j in range(k)]
            xi = _taylor_chain(Q, derivs)
            if params.kappa[mu] != 0.0:
                total = total + 0.5 * params.kappa[mu] * dual.einsum("ab,a...,b...->...", g, xi, xi)
            if params.tau[mu] != 0.0:
                A = derivs[0]
                total = total + 0.5 * params.tau[mu] * dual.einsum("ab,a...,b...->...", g, A, A)
        return total

    return Lagrangian(k, evaluator, "dual", reads, name="spline")


# ------------------------------------------------------------- closed forms k=2
def _check_k2(params: SplineParams, grid: Grid) -> None:
    params.check(grid.n)
    if params.order != 2:
        raise ValueError("closed-form spline residuals require order k = 2")


def spline_residual_k2(
    alg: LieAlgebra, sigma: np.ndarray, grid: Grid, params: SplineParams, trivialization: str = "right"
) -> np.ndarray:
    """Closed-form second-order spline/elastica residual, algebra field ``(m,) + grid``.

    ``sum_mu kappa_mu (d + s ad^dag_sigma)(ad^dag_eta sigma + ad_eta sigma + d eta)
    - tau_mu (d + s ad^dag_sigma) sigma`` with ``eta = d sigma + ad^dag_sigma sigma``.
    """
    _check_k2(params, grid)
    s = bracket_sign(trivialization)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros(sigma.shape[1:])
    for mu in range(grid.n):
        sg = sigma[mu]
        eta = jets.d1(sg, mu, grid) + alg.ad_dagger(sg, sg)
        inner = alg.ad_dagger(eta, sg) + alg.bracket(eta, sg) + jets.d1(eta, mu, grid)
        kap, tau = params.kappa[mu], params.tau[mu]
        out += kap * (jets.d1(inner, mu, grid) + s * alg.ad_dagger(sg, inner))
        if tau != 0.0:
            out -= tau * (jets.d1(sg, mu, grid) + s * alg.ad_dagger(sg, sg))
    return out


def spline_residual_biinvariant(
    alg: LieAlgebra, sigma: np.ndarray, grid: Grid, params: SplineParams, trivialization: str = "right"
) -> np.ndarray:
    """Bi-invariant form ``sum_mu kappa_mu (d^3 sigma - s [sigma, d^2 sigma]) - tau_mu d sigma``."""
    _check_k2(params, grid)
    if not alg.is_bi_invariant():
        raise NotBiInvariant(f"metric on '{alg.name}' is not bi-invariant (ad^dag != -ad)")
    s = bracket_sign(trivialization)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros(sigma.shape[1:])
    for mu in range(grid.n):
        sg = sigma[mu]
        d2 = jets.d1(jets.d1(sg, mu, grid), mu, grid)
        d3 = jets.d1(d2, mu, grid)
        out += params.kappa[mu] * (d3 - s * alg.bracket(sg, d2))
        if params.tau[mu] != 0.0:
            out -= params.tau[mu] * jets.d1(sg, mu, grid)
    return out


spline_residual_k2.sign_convention = SPLINE_SIGN
spline_residual_biinvariant.sign_convention = SPLINE_SIGN
ep_general.sign_convention = EP_GENERAL_SIGN


def spline_interior(grid: Grid) -> np.ndarray:
    """Nodes where the three stacked first-derivative stencils are all central."""
    return grid.interior(3)


def residual_summary(res: np.ndarray, mask: np.ndarray) -> dict:
    vals = np.asarray(res)[..., mask] if mask is not None else np.asarray(res)
    if vals.size == 0:
        return {"sup": 0.0, "l2_mean": 0.0, "nodes": 0}
    norms = np.sqrt(np.sum(vals**2, axis=0)) if vals.ndim > 1 else np.abs(vals)
    return {"sup": float(np.max(np.abs(vals))), "l2_mean": float(np.sqrt(np.mean(norms**2))), "nodes": int(norms.size)}


# ------------------------------------------------------- exponential chart
CHART_TERMS = 30


def chart_lagrangian(alg: LieAlgebra, L: Lagrangian, n: int, trivialization: str = "right",
                     terms: int = CHART_TERMS) -> Lagrangian:
    """Unreduced Lagrangian of a field ``y`` with ``s = exp(y)``, for orders ``k <= 2``.

    The reduced jets are rebuilt from the chart jets through the series
    ``sigma_mu = sum_j (s ad_y)^j / (j + 1)! d_mu y`` and its first
    derivatives, then handed to ``L``.  Jet keys are plain multi-indices.
    """
    if L.order > 2:
        raise ValueError("the exponential-chart pullback is implemented for orders k <= 2")
    s = bracket_sign(trivialization)
    c = alg.c
    k = L.order
    coeff = [s**j / float(np.prod(np.arange(1, j + 2))) for j in range(terms)]

    def ad(y, v):
        return dual.einsum("abg,b...,g...->a...", c, y, v)

    def evaluator(x, table):
        y = table[(0,) * n]
        reduced = {}
        for mu in range(n):
            ymu = table[jets.unit(n, mu)]
            v = ymu
            sig = coeff[0] * v
            ws = [table[jets.add(jets.unit(n, mu), jets.unit(n, nu))] for nu in range(n)] if k == 2 else []
            derivs = [coeff[0] * w for w in ws]
            for j in range(1, terms):
                if k == 2:
                    ws = [ad(table[jets.unit(n, nu)], v) + ad(y, w) for nu, w in enumerate(ws)]
                    derivs = [d + coeff[j] * w for d, w in zip(derivs, ws)]
                v = ad(y, v)
                sig = sig + coeff[j] * v
            reduced[(mu, (0,) * n)] = sig
            for nu, d in enumerate(derivs):
                reduced[(mu, jets.unit(n, nu))] = d
        return L.evaluator(x, reduced)

    return Lagrangian(k, evaluator, L.strategy, None, L.fd_eps, name=f"{L.name}-chart")


def chart_el_residual(alg: LieAlgebra, L: Lagrangian, field: np.ndarray, grid: Grid,
                      trivialization: str = "right") -> np.ndarray:
    """Unreduced EL expression of the group field ``field`` in exponential-chart coordinates."""
    y = alg.log(np.asarray(field, dtype=float))
    return jets.el_residual(chart_lagrangian(alg, L, grid.n, trivialization), y, grid)
