"""Multi-indices, finite-difference total derivatives and the Euler-Lagrange operator.

Fields live on a uniform box grid.  The grid axes are always the trailing
``n`` axes of an array, so a scalar field has shape ``grid.size`` and an
algebra field has shape ``(m,) + grid.size``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import dual
from .errors import DimensionMismatch, IndexNotDominated, NonFiniteLagrangian, StencilTooWide

MAX_ORDER = 6

MultiIndex = tuple


# ----------------------------------------------------------------- multi-indices
def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All ``J`` with ``|J| <= k`` in graded lexicographic order."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    out = []
    for deg in range(k + 1):
        level = [J for J in itertools.product(range(deg + 1), repeat=n) if sum(J) == deg]
        level.sort(reverse=True)
        out.extend(level)
    return out


def order(J: Sequence[int]) -> int:
    return int(sum(J))


def factorial(J: Sequence[int]) -> int:
    return math.prod(math.factorial(j) for j in J)


def multinomial(J: Sequence[int], I: Sequence[int]) -> int:
    """``binom(J, I)``: product of componentwise binomials."""
    if len(J) != len(I):
        raise DimensionMismatch(f"multi-index lengths differ: {len(J)} vs {len(I)}")
    for mu, (j, i) in enumerate(zip(J, I)):
        if i > j or i < 0:
            raise IndexNotDominated(f"I={tuple(I)} is not dominated by J={tuple(J)} (entry {mu})")
    return math.prod(math.comb(j, i) for j, i in zip(J, I))


def unit(n: int, mu: int, times: int = 1) -> tuple[int, ...]:
    J = [0] * n
    J[mu] = times
    return tuple(J)


def add(J: Sequence[int], I: Sequence[int]) -> tuple[int, ...]:
    return tuple(a + b for a, b in zip(J, I))


def sub_indices(J: Sequence[int]) -> list[tuple[int, ...]]:
    """All ``I <= J`` componentwise."""
    return [tuple(I) for I in itertools.product(*(range(j + 1) for j in J))]


# -------------------------------------------------------------------------- grid
@dataclass(frozen=True)
class Grid:
    extent: tuple[tuple[float, float], ...]
    size: tuple[int, ...]

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extent)
        size = tuple(int(s) for s in self.size)
        if len(ext) != len(size) or not size:
            raise DimensionMismatch("extent and size must have the same positive length")
        if any(b <= a for a, b in ext):
            raise ValueError("grid extents must satisfy a < b")
        if any(s < 2 for s in size):
            raise ValueError("every axis needs at least 2 nodes")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "size", size)

    @classmethod
    def box(cls, n: int, N: int, a: float = 0.0, b: float = 1.0) -> "Grid":
        return cls(((a, b),) * n, (N,) * n)

    @property
    def n(self) -> int:
        return len(self.size)

    @property
    def h(self) -> np.ndarray:
        return np.array([(b - a) / (s - 1) for (a, b), s in zip(self.extent, self.size)])

    @property
    def npoints(self) -> int:
        return math.prod(self.size)

    def axis(self, mu: int) -> np.ndarray:
        a, b = self.extent[mu]
        return np.linspace(a, b, self.size[mu])

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(n,) + size``."""
        return np.stack(np.meshgrid(*[self.axis(mu) for mu in range(self.n)], indexing="ij"))

    def trapezoid_weights(self) -> np.ndarray:
        w = np.ones(())
        for mu in range(self.n):
            wm = np.full(self.size[mu], self.h[mu])
            wm[[0, -1]] *= 0.5
            w = np.multiply.outer(w, wm)
        return w

    def boundary_distance(self) -> np.ndarray:
        """Per node, the smallest index distance to the boundary."""
        d = None
        for mu in range(self.n):
            i = np.arange(self.size[mu])
            dm = np.minimum(i, self.size[mu] - 1 - i)
            shape = [1] * self.n
            shape[mu] = -1
            dm = dm.reshape(shape)
            d = dm if d is None else np.minimum(d, dm)
        return np.broadcast_to(d, self.size).copy()

    def interior(self, radius: int | Sequence[int]) -> np.ndarray:
        """Boolean mask of nodes at least ``radius`` nodes away from each face."""
        r = [radius] * self.n if np.isscalar(radius) else list(radius)
        mask = np.ones(self.size, dtype=bool)
        for mu in range(self.n):
            i = np.arange(self.size[mu])
            ok = (i >= r[mu]) & (i <= self.size[mu] - 1 - r[mu])
            shape = [1] * self.n
            shape[mu] = -1
            mask &= ok.reshape(shape)
        return mask


# ---------------------------------------------------------------------- stencils
def fd_weights(offsets: Sequence[float], order_: int) -> np.ndarray:
    """Weights ``w`` with ``sum w_i f(x + o_i) ~ f^(order)(x)`` for unit spacing."""
    o = np.asarray(offsets, dtype=float)
    p = len(o)
    V = np.vander(o, p, increasing=True).T
    rhs = np.zeros(p)
    rhs[order_] = math.factorial(order_)
    return np.linalg.solve(V, rhs)


def stencil_radius(order_: int) -> int:
    return (order_ + 1) // 2


@lru_cache(maxsize=256)
def _diff_matrix(N: int, order_: int, h: float) -> np.ndarray:
    if order_ == 0:
        return np.eye(N)
    if order_ > MAX_ORDER:
        raise StencilTooWide(f"derivative order {order_} exceeds the supported maximum {MAX_ORDER}")
    r = stencil_radius(order_)
    width = order_ + 2  # one-sided second-order stencil
    if N < max(2 * r + 1, width):
        raise StencilTooWide(
            f"axis with {N} nodes cannot carry an order-{order_} stencil (needs {max(2 * r + 1, width)})"
        )
    D = np.zeros((N, N))
    central = fd_weights(np.arange(-r, r + 1), order_)
    for i in range(r, N - r):
        D[i, i - r : i + r + 1] = central
    for i in range(r):
        D[i, :width] = fd_weights(np.arange(width) - i, order_)
        j = N - 1 - i
        D[j, N - width :] = fd_weights(np.arange(N - width, N) - j, order_)
    D /= h**order_
    D.setflags(write=False)
    return D


def diff_matrix(grid: Grid, mu: int, order_: int) -> np.ndarray:
    """Dense ``N_mu x N_mu`` matrix of the order-``order_`` derivative along ``mu``."""
    return _diff_matrix(grid.size[mu], int(order_), float(grid.h[mu]))


def apply_axis(D: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(f, axis, -1)
    return np.moveaxis(moved @ D.T, -1, axis)


def partial(f, J: Sequence[int], grid: Grid):
    """Discrete ``d^|J| f / dx^J`` along the trailing ``n`` axes of ``f``.

    Each axis uses a second-order stencil of the requested order (central in
    the interior, one-sided near the faces); axes are composed.
    """
    if len(J) != grid.n:
        raise DimensionMismatch(f"multi-index {tuple(J)} does not match grid dimension {grid.n}")
    out = f
    for mu, j in enumerate(J):
        if j == 0:
            continue
        D = diff_matrix(grid, mu, j)
        ax = -grid.n + mu
        if isinstance(out, dual.Dual):
            out = dual.Dual(apply_axis(D, out.val, ax), apply_axis(D, out.der, ax))
        else:
            out = apply_axis(D, dual.asreal(out), ax)
    return out


def d1(f, mu: int, grid: Grid):
    return partial(f, unit(grid.n, mu), grid)


def partial_radius(J: Sequence[int]) -> tuple[int, ...]:
    return tuple(stencil_radius(j) for j in J)


# -------------------------------------------------------------------- Lagrangian
JetTable = Mapping


@dataclass(frozen=True)
class Lagrangian:
    """A k-th order Lagrangian density on jet coordinates.

    ``evaluator(x, jets)`` receives node coordinates ``x`` (shape
    ``(n,) + grid``) and a table mapping jet keys to arrays of shape
    ``(m,) + grid`` (or :class:`~epfield.dual.Dual` wrappers of them) and
    returns the density, shape ``grid``.  Keys are multi-indices ``J`` for an
    unreduced field and pairs ``(mu, J)`` for a reduced one.  ``reads`` lists
    the keys the evaluator uses (``None`` means every key up to the order).
    """

    order: int
    evaluator: Callable
    strategy: str = "dual"
    reads: tuple | None = None
    fd_eps: float | None = None
    name: str = "lagrangian"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("Lagrangian order must be >= 1")
        if self.strategy not in ("dual", "fd"):
            raise ValueError(f"unknown derivative strategy '{self.strategy}'")

    def value(self, x, jets) -> np.ndarray:
        return dual.value(self.evaluator(x, jets))


def _check_finite(arr: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(arr)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteLagrangian(f"non-finite {where} at node {node}", node)


def jet_gradient(L: Lagrangian, x: np.ndarray, jets: Mapping, keys: Iterable | None = None) -> dict:
    """``dL/d(jet coordinate)`` for every key, each of shape ``(m,) + grid``."""
    keys = list(jets.keys()) if keys is None else list(keys)
    if L.reads is not None:
        read = set(L.reads)
        active = [key for key in keys if key in read]
    else:
        active = keys
    zeros = {key: np.zeros_like(np.asarray(jets[key], dtype=float)) for key in keys}
    if not active:
        _check_finite(L.value(x, jets), "Lagrangian value")
        return zeros
    if L.strategy == "dual":
        total = sum(np.shape(jets[key])[0] for key in active)
        seeded = dict(jets)
        starts = {}
        pos = 0
        for key in active:
            seeded[key] = dual.seed_block(jets[key], pos, total)
            starts[key] = pos
            pos += np.shape(jets[key])[0]
        out = L.evaluator(x, seeded)
        if not isinstance(out, dual.Dual):
            _check_finite(np.asarray(out, dtype=float), "Lagrangian value")
            return zeros
        _check_finite(out.val, "Lagrangian value")
        grid_shape = out.val.shape
        der = np.broadcast_to(out.der, (total,) + grid_shape)
        for key in active:
            m = np.shape(jets[key])[0]
            zeros[key] = np.array(der[starts[key] : starts[key] + m])
        _check_finite(der, "Lagrangian derivative")
        return zeros
    # central differences, one coordinate at a time at every node simultaneously
    base = {key: np.asarray(v, dtype=float) for key, v in jets.items()}
    _check_finite(L.value(x, base), "Lagrangian value")
    cbrt_eps = np.cbrt(np.finfo(float).eps) if L.fd_eps is None else L.fd_eps
    for key in active:
        arr = base[key]
        for a in range(arr.shape[0]):
            eps = cbrt_eps * np.maximum(1.0, np.abs(arr[a]))
            plus = dict(base)
            minus = dict(base)
            p = arr.copy()
            q = arr.copy()
            p[a] += eps
            q[a] -= eps
            plus[key] = p
            minus[key] = q
            zeros[key][a] = (L.value(x, plus) - L.value(x, minus)) / ((p[a] - arr[a]) + (arr[a] - q[a]))
        _check_finite(zeros[key], "Lagrangian derivative")
    return zeros


def field_jets(y: np.ndarray, grid: Grid, k: int) -> dict:
    """Jet table ``{J: partial(y, J)}`` for ``|J| <= k`` of a field ``(m,) + grid``."""
    return {J: partial(y, J, grid) for J in multi_indices(grid.n, k)}


def el_residual(L: Lagrangian, fields, grid: Grid) -> np.ndarray:
    """Discrete Euler-Lagrange expression, shape ``(m,) + grid``.

    ``fields`` is either an array ``(m,) + grid`` or a list of ``m`` scalar
    fields.  Only interior nodes (see :func:`el_interior`) are meaningful.
    """
    y = np.asarray(fields, dtype=float)
    if y.ndim == grid.n:
        y = y[None]
    if y.shape[1:] != grid.size:
        raise DimensionMismatch(f"field shape {y.shape[1:]} does not match grid {grid.size}")
    k = L.order
    jets = field_jets(y, grid, k)
    P = jet_gradient(L, grid.coords(), jets)
    res = np.zeros_like(y)
    for J in multi_indices(grid.n, k):
        res += (-1) ** order(J) * partial(P[J], J, grid)
    return res


def el_interior(grid: Grid, k: int) -> np.ndarray:
    """Nodes whose EL value uses no one-sided stencil (two stacked order-k stencils)."""
    return grid.interior(2 * stencil_radius(k))
