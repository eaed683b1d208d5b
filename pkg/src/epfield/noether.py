"""Reduced Noether current and its discrete divergence.

The reduced current is ``J_mu = sum_J (-1)^|J| d^J (dl/dA_{mu,J})`` (one
covector per axis).  Its plain divergence reproduces the Euler-Poincare
expression only up to the coadjoint term.  Transporting it with a group field
``s`` whose logarithmic derivative is ``sigma`` removes that term:
``d_mu (Ad_s^T J_mu) = Ad_s^T (EP expression)`` for right trivialization
(``Ad_{s^{-1}}^T`` for left).
"""

from __future__ import annotations

import numpy as np

from . import jets
from .connection import bracket_sign
from .ep import reduced_current
from .jets import Grid, Lagrangian
from .lie import LieAlgebra


def frame_matrix(alg: LieAlgebra, frame: np.ndarray, trivialization: str = "right") -> np.ndarray:
    """``Ad_s`` (right) or ``Ad_{s^{-1}}`` (left) at every node, shape ``(m, m) + grid``."""
    s = bracket_sign(trivialization)
    frame = np.asarray(frame, dtype=float)
    return alg.Ad(frame if s > 0 else np.linalg.inv(frame))


def noether_current(
    L: Lagrangian,
    sigma: np.ndarray,
    grid: Grid,
    alg: LieAlgebra | None = None,
    frame: np.ndarray | None = None,
    trivialization: str = "right",
) -> np.ndarray:
    """Current field ``J[mu, alpha]`` at every node, shape ``(n, m) + grid``.

    Without ``frame`` the reduced current is returned.  With ``frame`` (a
    group field reducing to ``sigma``) the conserved, frame-transported
    current is returned; ``alg`` is then required.
    """
    Jc = reduced_current(L, np.asarray(sigma, dtype=float), grid)
    if frame is None:
        return Jc
    if alg is None:
        raise ValueError("a frame-transported current needs the algebra handle")
    A = frame_matrix(alg, frame, trivialization)
    return np.einsum("ab...,mb...->ma...", np.swapaxes(A, 0, 1), Jc)


def divergence_defect(Jf: np.ndarray, grid: Grid) -> np.ndarray:
    """``sum_mu d_mu J[mu]`` per component, shape ``(m,) + grid``."""
    Jf = np.asarray(Jf, dtype=float)
    out = np.zeros(Jf.shape[1:])
    for mu in range(grid.n):
        out += jets.d1(Jf[mu], mu, grid)
    return out


def defect_summary(div: np.ndarray, mask: np.ndarray | None = None) -> dict:
    vals = div[:, mask] if mask is not None else div.reshape(div.shape[0], -1)
    if vals.size == 0:
        return {"sup": 0.0, "l2": 0.0}
    return {"sup": float(np.max(np.abs(vals))), "l2": float(np.sqrt(np.mean(np.sum(vals**2, axis=0))))}
