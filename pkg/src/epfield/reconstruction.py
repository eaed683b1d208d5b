"""Rebuild a group field from a flat reduced field; plaquette holonomy."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .connection import bracket_sign, flatness_report, pairs, _check_reduced
from .errors import NotFlat
from .jets import Grid
from .lie import LieAlgebra


def edge_transports(alg: LieAlgebra, sigma: np.ndarray, grid: Grid, mu: int) -> np.ndarray:
    """``U_mu = exp(h_mu * midpoint sigma_mu)`` on every edge along ``mu``.

    Shape ``grid`` with ``N_mu - 1`` along ``mu``, plus ``(d, d)``.
    """
    sm = np.moveaxis(sigma[mu], 1 + mu, 0)
    mid = 0.5 * (sm[1:] + sm[:-1]) * grid.h[mu]
    mid = np.moveaxis(mid, 0, 1 + mu)
    return alg.exp(mid)


def reconstruct(
    alg: LieAlgebra,
    sigma: np.ndarray,
    grid: Grid,
    base=None,
    trivialization: str = "right",
    check: bool = True,
    tol: float | None = None,
    axes=None,
) -> np.ndarray:
    """Integrate edge transports from the first node.

    The line through the first node is filled along ``axes[0]`` (default axis
    order), then that line is swept along ``axes[1]``, and so on.  Right
    trivialization transports by ``s(x + h e_mu) = U_mu(x) s(x)``; left by
    ``s(x) U_mu(x)``.
    """
    s = bracket_sign(trivialization)
    sigma = _check_reduced(alg, sigma, grid)
    basis = alg._need_basis()
    d = basis.shape[-1]
    n = grid.n
    axes = tuple(range(n)) if axes is None else tuple(int(a) for a in axes)
    if sorted(axes) != list(range(n)):
        raise ValueError(f"sweep order {axes} is not a permutation of the grid axes")
    base = np.eye(d) if base is None else np.asarray(base, dtype=float)
    if check:
        rep = flatness_report(alg, sigma, grid, 0, tol=tol, trivialization=trivialization)
        if not rep.passed:
            raise NotFlat(
                f"reduced field is not flat: curvature {rep.max_defect:.3e} at node {rep.node} "
                f"exceeds tolerance {rep.tolerance:.3e}",
                rep.max_defect,
            )
    out = np.empty(grid.size + (d, d))
    out[(0,) * n] = base
    for j, mu in enumerate(axes):
        U = edge_transports(alg, sigma, grid, mu)
        done = set(axes[:j])
        # slab: swept axes free, mu running, the rest at their first node
        for i in range(grid.size[mu] - 1):
            src = tuple(slice(None) if a in done else (i if a == mu else 0) for a in range(n))
            dst = tuple(slice(None) if a in done else (i + 1 if a == mu else 0) for a in range(n))
            Ui = U[src]
            out[dst] = Ui @ out[src] if s > 0 else out[src] @ Ui
    return out


@dataclass
class HolonomyReport:
    max_defect: float
    plaquette: tuple  # (mu, nu, node)
    scaled: float  # max defect divided by h_mu h_nu

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plaquette"] = [self.plaquette[0], self.plaquette[1], list(self.plaquette[2])]
        return d


def holonomy_report(alg: LieAlgebra, sigma: np.ndarray, grid: Grid, trivialization: str = "right") -> HolonomyReport:
    """Largest log-norm of an elementary plaquette product."""
    s = bracket_sign(trivialization)
    sigma = _check_reduced(alg, sigma, grid)
    best = HolonomyReport(0.0, (0, 0, (0,) * grid.n), 0.0)
    for mu, nu in pairs(grid.n):
        Um = edge_transports(alg, sigma, grid, mu)
        Un = edge_transports(alg, sigma, grid, nu)
        n = grid.n

        def sl(shift: dict):
            # plaquette corners along (mu, nu), every node along other axes
            idx = []
            for a in range(n):
                if a in (mu, nu):
                    start = shift.get(a, 0)
                    idx.append(slice(start, grid.size[a] - 1 + start))
                else:
                    idx.append(slice(None))
            return tuple(idx)

        # U_mu at x and x + h_nu; U_nu at x and x + h_mu (restricted to plaquette corners)
        um_x = Um[sl({})]
        um_xn = Um[sl({nu: 1})]
        un_x = Un[sl({})]
        un_xm = Un[sl({mu: 1})]
        if s > 0:
            P = un_xm @ um_x @ np.linalg.inv(un_x) @ np.linalg.inv(um_xn)
        else:
            P = np.linalg.inv(um_xn) @ np.linalg.inv(un_x) @ um_x @ un_xm
        logs = alg.log(P)
        norms = np.sqrt(np.sum(logs**2, axis=0))
        idx = np.unravel_index(np.argmax(norms), norms.shape)
        val = float(norms[idx])
        if val > best.max_defect:
            best = HolonomyReport(val, (mu, nu, tuple(int(i) for i in idx)), val / float(grid.h[mu] * grid.h[nu]))
    return best


def holonomy_defect(alg: LieAlgebra, sigma: np.ndarray, grid: Grid, trivialization: str = "right") -> float:
    return holonomy_report(alg, sigma, grid, trivialization).max_defect
