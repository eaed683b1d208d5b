"""Vectorised forward-mode dual numbers.

A :class:`Dual` carries a value array ``val`` and a stack of tangents ``der``
with one leading seed axis, ``der.shape == (s,) + val.shape``.  All seeds
propagate in a single pass, which is how jet-coordinate gradients of a
Lagrangian are obtained at every grid node at once.
"""

from __future__ import annotations

import numpy as np


def asreal(x) -> np.ndarray:
    """Float array; extended-precision input keeps its dtype."""
    a = np.asarray(x)
    return a if a.dtype == np.longdouble else a.astype(float, copy=False)


class Dual:
    __slots__ = ("val", "der")
    __array_priority__ = 100.0

    def __init__(self, val, der):
        self.val = asreal(val)
        self.der = asreal(der)

    @property
    def shape(self) -> tuple:
        return self.val.shape

    @property
    def nseeds(self) -> int:
        return self.der.shape[0]

    def __len__(self) -> int:
        return len(self.val)

    def __getitem__(self, idx) -> "Dual":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.der[(slice(None),) + idx])

    def _bd(self, shape) -> np.ndarray:
        return np.broadcast_to(self._dd(len(shape)), (self.der.shape[0],) + tuple(shape))

    def _dd(self, ndim: int) -> np.ndarray:
        # tangents with value axes left-padded to ``ndim`` (numpy broadcasting)
        extra = ndim - self.val.ndim
        if extra <= 0:
            return self.der
        return self.der.reshape((self.der.shape[0],) + (1,) * extra + self.val.shape)

    # arithmetic ---------------------------------------------------------
    def __neg__(self) -> "Dual":
        return Dual(-self.val, -self.der)

    def __pos__(self) -> "Dual":
        return self

    def __add__(self, other) -> "Dual":
        if isinstance(other, Dual):
            nd = max(self.val.ndim, other.val.ndim)
            return Dual(self.val + other.val, self._dd(nd) + other._dd(nd))
        return Dual(self.val + other, self._bd(np.broadcast_shapes(self.val.shape, np.shape(other))))

    __radd__ = __add__

    def __sub__(self, other) -> "Dual":
        return self + (-other)

    def __rsub__(self, other) -> "Dual":
        return (-self) + other

    def __mul__(self, other) -> "Dual":
        if isinstance(other, Dual):
            nd = max(self.val.ndim, other.val.ndim)
            return Dual(self.val * other.val, self._dd(nd) * other.val + self.val * other._dd(nd))
        other = asreal(other)
        return Dual(self.val * other, self._dd(other.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if isinstance(other, Dual):
            nd = max(self.val.ndim, other.val.ndim)
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self._dd(nd) - self.val * inv * other._dd(nd)) * inv)
        other = asreal(other)
        return Dual(self.val / other, self._dd(other.ndim) / other)

    def __rtruediv__(self, other) -> "Dual":
        inv = 1.0 / self.val
        other = asreal(other)
        return Dual(other * inv, -other * inv * inv * self._dd(other.ndim))

    def __pow__(self, p) -> "Dual":
        if isinstance(p, Dual):
            return exp(p * log(self))
        p = float(p)
        if p == 0.0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.der))
        if p == 1.0:
            return self
        if p == 2.0:
            return self * self
        return Dual(self.val**p, p * self.val ** (p - 1) * self.der)

    def __rpow__(self, base) -> "Dual":
        base = asreal(base)
        out = base**self.val
        return Dual(out, out * np.log(base) * self.der)

    def sum(self, axis=None) -> "Dual":
        if axis is None:
            return Dual(self.val.sum(), self.der.reshape(self.nseeds, -1).sum(axis=1))
        ax = axis if axis < 0 else axis + 1
        return Dual(self.val.sum(axis=axis), self.der.sum(axis=ax))

    def __repr__(self) -> str:
        return f"Dual(val={self.val!r}, nseeds={self.nseeds})"


def value(x):
    return x.val if isinstance(x, Dual) else asreal(x)


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def seed_block(val: np.ndarray, start: int, total: int) -> Dual:
    """Seed ``val`` (shape ``(m, ...)``) with unit tangents ``start .. start+m-1``.

    Component ``a`` of the result has tangent 1 in seed ``start + a``.
    """
    val = asreal(val)
    m = val.shape[0]
    der = np.zeros((total,) + val.shape, dtype=val.dtype)
    for a in range(m):
        der[start + a, a] = 1.0
    return Dual(val, der)


def _unary(x, f, df):
    if isinstance(x, Dual):
        return Dual(f(x.val), df(x.val) * x.der)
    return f(asreal(x))


def sin(x):
    return _unary(x, np.sin, np.cos)


def cos(x):
    return _unary(x, np.cos, lambda v: -np.sin(v))


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, e * x.der)
    return np.exp(x)


def log(x):
    return _unary(x, np.log, lambda v: 1.0 / v)


def sqrt(x):
    if isinstance(x, Dual):
        r = np.sqrt(x.val)
        return Dual(r, 0.5 / r * x.der)
    return np.sqrt(x)


def tanh(x):
    return _unary(x, np.tanh, lambda v: 1.0 - np.tanh(v) ** 2)


def pow(x, p):
    return x**p


def einsum(spec: str, *ops):
    """``np.einsum`` with the product rule for :class:`Dual` operands.

    ``spec`` must contain an explicit ``->``.  Plain arrays are constants.
    """
    if "->" not in spec:
        raise ValueError("dual einsum needs an explicit output specification")
    lhs, out = spec.split("->")
    terms = lhs.split(",")
    if len(terms) != len(ops):
        raise ValueError("operand count does not match the einsum specification")
    vals = [value(o) for o in ops]
    primal = np.einsum(spec, *vals)
    der = None
    seed = "Z"
    if seed in spec:
        raise ValueError("axis label 'Z' is reserved")
    for i, op in enumerate(ops):
        if not isinstance(op, Dual):
            continue
        sub = terms.copy()
        sub[i] = seed + terms[i]
        args = vals.copy()
        args[i] = op.der
        part = np.einsum(",".join(sub) + "->" + seed + out, *args)
        der = part if der is None else der + part
    if der is None:
        return primal
    return Dual(primal, der)


def stack(items, axis: int = 0):
    """Stack a mixed list of Duals/arrays along a new value axis."""
    if not any(isinstance(i, Dual) for i in items):
        return np.stack([asreal(i) for i in items], axis=axis)
    ns = next(i.nseeds for i in items if isinstance(i, Dual))
    vals = [value(i) for i in items]
    shape = np.broadcast_shapes(*[v.shape for v in vals])
    ders = [
        np.broadcast_to(i.der, (ns,) + shape) if isinstance(i, Dual) else np.zeros((ns,) + shape)
        for i in items
    ]
    ax = axis if axis < 0 else axis + 1
    return Dual(np.stack([np.broadcast_to(v, shape) for v in vals], axis=axis), np.stack(ders, axis=ax))
