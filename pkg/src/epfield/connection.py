"""Reduction of group fields, curvature and flatness diagnostics.

A reduced field ``sigma`` has shape ``(n, m) + grid``: one algebra field per
coordinate direction.  Group fields have shape ``grid + (d, d)``.

Two trivializations are supported.  ``"right"`` (the default) uses
``sigma_mu = (d_mu s) s^{-1}`` and is invariant under ``s -> s g`` for a
constant ``g``; ``"left"`` uses ``sigma_mu = s^{-1} d_mu s``.  Signs of the
bracket terms in curvature and in the field equations depend on the choice
(see :func:`bracket_sign`).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import jets
from .errors import DimensionMismatch
from .jets import Grid
from .lie import LieAlgebra

TRIVIALIZATIONS = ("right", "left")


def bracket_sign(trivialization: str) -> int:
    """+1 for right trivialization, -1 for left."""
    if trivialization == "right":
        return 1
    if trivialization == "left":
        return -1
    raise ValueError(f"unknown trivialization '{trivialization}' (use one of {TRIVIALIZATIONS})")


def _check_group_field(alg: LieAlgebra, s: np.ndarray, grid: Grid) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    basis = alg._need_basis()
    d = basis.shape[-1]
    if s.shape != grid.size + (d, d):
        raise DimensionMismatch(f"group field must have shape {grid.size + (d, d)}, got {s.shape}")
    return s


def edge_logs(alg: LieAlgebra, s: np.ndarray, mu: int, trivialization: str = "right") -> np.ndarray:
    """Logarithms of the transitions between neighbours along axis ``mu``.

    Returns shape ``(m,) + grid`` with ``N_mu - 1`` entries along ``mu``.
    Transitions are formed in difference form, ``(s_b - s_a) s_a^{-1}``, so
    that near-identity steps keep full relative precision.
    """
    n = s.ndim - 2
    a = np.take(s, np.arange(s.shape[mu] - 1), axis=mu)
    b = np.take(s, np.arange(1, s.shape[mu]), axis=mu)
    inv = np.linalg.inv(a)
    if trivialization == "right":
        e = (b - a) @ inv
    else:
        bracket_sign(trivialization)
        e = inv @ (b - a)
    logs = alg.log_near_identity(e)
    return logs


def sigma_from_edges(edges: list[np.ndarray], grid: Grid) -> np.ndarray:
    """Combine per-axis edge logs into node values of ``sigma``."""
    out = []
    for mu, l in enumerate(edges):
        ax = 1 + mu
        N = grid.size[mu]
        h = grid.h[mu]
        shape = list(l.shape)
        shape[ax] = N
        sig = np.empty(shape, dtype=np.result_type(l.dtype, float))
        lm = np.moveaxis(l, ax, 0)
        sm = np.moveaxis(sig, ax, 0)
        sm[1:-1] = (lm[1:] + lm[:-1]) / (2 * h)
        if N >= 3:
            sm[0] = (3 * lm[0] - lm[1]) / (2 * h)
            sm[-1] = (3 * lm[-1] - lm[-2]) / (2 * h)
        else:
            sm[0] = sm[-1] = lm[0] / h
        out.append(sig)
    return np.stack(out)


def reduce(alg: LieAlgebra, s: np.ndarray, grid: Grid, trivialization: str = "right") -> np.ndarray:
    """Logarithmic derivative of a group field, shape ``(n, m) + grid``.

    Interior nodes average the two adjacent edge logarithms; faces use a
    one-sided second-order combination.
    """
    bracket_sign(trivialization)
    s = _check_group_field(alg, s, grid)
    edges = [edge_logs(alg, s, mu, trivialization) for mu in range(grid.n)]
    return sigma_from_edges(edges, grid)


def _check_reduced(alg: LieAlgebra, sigma: np.ndarray, grid: Grid) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (grid.n, alg.dim) + grid.size:
        raise DimensionMismatch(
            f"reduced field must have shape {(grid.n, alg.dim) + grid.size}, got {sigma.shape}"
        )
    return sigma


def pairs(n: int) -> list[tuple[int, int]]:
    return [(mu, nu) for mu in range(n) for nu in range(mu + 1, n)]


def curvature_component(
    alg: LieAlgebra, sigma: np.ndarray, grid: Grid, mu: int, nu: int, J=None, trivialization: str = "right"
) -> np.ndarray:
    """Jet-prolonged curvature component ``F_{mu nu, J}``, shape ``(m,) + grid``."""
    s = bracket_sign(trivialization)
    n = grid.n
    J = (0,) * n if J is None else tuple(J)
    a = jets.partial(sigma[nu], jets.add(J, jets.unit(n, mu)), grid)
    b = jets.partial(sigma[mu], jets.add(J, jets.unit(n, nu)), grid)
    br = np.zeros_like(a)
    for I in jets.sub_indices(J):
        rest = tuple(j - i for j, i in zip(J, I))
        br += jets.multinomial(J, I) * alg.bracket(jets.partial(sigma[mu], I, grid), jets.partial(sigma[nu], rest, grid))
    return 0.5 * (a - b - s * br)


def curvature(alg: LieAlgebra, sigma: np.ndarray, grid: Grid, trivialization: str = "right") -> np.ndarray:
    """Curvature components ``F_{mu nu}`` for ``mu < nu``, shape ``(n(n-1)/2, m) + grid``.

    ``F = 1/2 (d_mu sigma_nu - d_nu sigma_mu - s [sigma_mu, sigma_nu])`` with
    ``s`` the trivialization sign, so that logarithmic derivatives of group
    fields are flat in either convention.
    """
    sigma = _check_reduced(alg, sigma, grid)
    comps = [curvature_component(alg, sigma, grid, mu, nu, None, trivialization) for mu, nu in pairs(grid.n)]
    if not comps:
        return np.zeros((0, alg.dim) + grid.size)
    return np.stack(comps)


@dataclass
class FlatnessReport:
    max_defect: float
    node: tuple
    coords: tuple
    component: tuple  # (mu, nu, J, alpha)
    tolerance: float
    passed: bool
    jet_order: int
    interior_only: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["component"] = [self.component[0], self.component[1], list(self.component[2]), self.component[3]]
        d["node"] = list(self.node)
        d["coords"] = list(self.coords)
        return d


FLATNESS_C = 1.0


def default_flatness_tol(grid: Grid, C: float = FLATNESS_C) -> float:
    return 10.0 * C * float(np.max(grid.h)) ** 2


def flatness_report(
    alg: LieAlgebra,
    sigma: np.ndarray,
    grid: Grid,
    jet_order: int = 0,
    tol: float | None = None,
    interior_only: bool = True,
    trivialization: str = "right",
) -> FlatnessReport:
    """Largest jet-prolonged curvature component over nodes and components."""
    sigma = _check_reduced(alg, sigma, grid)
    if jet_order < 0:
        raise ValueError("jet order must be >= 0")
    tol = default_flatness_tol(grid) if tol is None else float(tol)
    best = (0.0, (0,) * grid.n, (0, 0, (0,) * grid.n, 0))
    radius = jets.stencil_radius(jet_order + 1)
    mask = grid.interior(radius) if interior_only else np.ones(grid.size, dtype=bool)
    if not mask.any():
        mask = np.ones(grid.size, dtype=bool)
    for mu, nu in pairs(grid.n):
        for J in jets.multi_indices(grid.n, jet_order):
            F = curvature_component(alg, sigma, grid, mu, nu, J, trivialization)
            A = np.where(mask, np.abs(F), -1.0)
            idx = np.unravel_index(np.argmax(A), A.shape)
            val = float(A[idx])
            if val > best[0]:
                best = (val, tuple(int(i) for i in idx[1:]), (mu, nu, J, int(idx[0])))
    X = grid.coords()
    coords = tuple(float(X[(mu,) + best[1]]) for mu in range(grid.n))
    return FlatnessReport(
        max_defect=best[0],
        node=best[1],
        coords=coords,
        component=best[2],
        tolerance=tol,
        passed=bool(best[0] <= tol),
        jet_order=jet_order,
        interior_only=interior_only,
    )
