"""Independent reference computations built on sympy and plain numpy."""

from __future__ import annotations

import itertools

import numpy as np
import sympy as sp

from epfield import jets
from epfield.jets import Grid, Lagrangian


def jet_symbols(n: int, m: int, k: int):
    xs = sp.symbols(f"x1:{n + 1}")
    keys = [(a, J) for J in jets.multi_indices(n, k) for a in range(m)]
    ys = {key: sp.Symbol(f"y{key[0]}_" + "".join(map(str, key[1]))) for key in keys}
    return xs, keys, ys


def random_polynomial_lagrangian(rng, n: int, m: int, k: int, terms: int = 6):
    """Random polynomial density in ``x`` and the jets up to order ``k``."""
    xs, keys, ys = jet_symbols(n, m, k)
    atoms = list(xs) + [ys[key] for key in keys]
    top = [ys[key] for key in keys if jets.order(key[1]) == k]
    expr = sp.Rational(1, 2) * sum(t**2 for t in top)
    for _ in range(terms):
        deg = int(rng.integers(1, 4))
        factors = [atoms[int(i)] for i in rng.integers(0, len(atoms), size=deg)]
        coeff = sp.Float(float(np.round(rng.uniform(-1, 1), 3)))
        expr += coeff * sp.Mul(*factors)
    return sp.expand(expr), xs, keys, ys


def as_lagrangian(expr, xs, keys, ys, k: int) -> Lagrangian:
    f = sp.lambdify(list(xs) + [ys[key] for key in keys], expr, "numpy")

    def evaluator(x, table):
        args = [x[mu] for mu in range(len(xs))] + [table[J][a] for a, J in keys]
        return f(*args) + 0.0 * x[0]

    return Lagrangian(k, evaluator, "dual", name="sympy")


def el_same_stencils(expr, xs, keys, ys, y: np.ndarray, grid: Grid, k: int) -> np.ndarray:
    """EL expression from symbolic partials, differentiated with the library stencils."""
    m = y.shape[0]
    X = grid.coords()
    table = {J: jets.partial(y, J, grid) for J in jets.multi_indices(grid.n, k)}
    args = [X[mu] for mu in range(grid.n)] + [table[J][a] for a, J in keys]
    out = np.zeros_like(y)
    for a, J in keys:
        P = sp.lambdify(list(xs) + [ys[key] for key in keys], sp.diff(expr, ys[(a, J)]), "numpy")
        vals = np.broadcast_to(np.asarray(P(*args), dtype=float), grid.size)
        out[a] += (-1) ** jets.order(J) * jets.partial(vals, J, grid)
    return out


def el_continuum(expr, xs, keys, ys, fields):
    """Exact EL expression along sympy fields ``fields[a](x)``, lambdified in ``x``."""
    subs = {}
    for a, J in keys:
        f = fields[a]
        for mu, j in enumerate(J):
            if j:
                f = sp.diff(f, xs[mu], j)
        subs[ys[(a, J)]] = f
    m = len(fields)
    out = [sp.Integer(0)] * m
    for a, J in keys:
        P = sp.diff(expr, ys[(a, J)]).subs(subs)
        for mu, j in enumerate(J):
            if j:
                P = sp.diff(P, xs[mu], j)
        out[a] += (-1) ** sum(J) * P
    return [sp.lambdify(list(xs), e, "numpy") for e in out]


def commutator_structure_constants(basis: np.ndarray) -> np.ndarray:
    """``c[a, b, g]`` from matrix commutators, solved by least squares in the basis."""
    m = basis.shape[0]
    flat = basis.reshape(m, -1).T
    c = np.zeros((m, m, m))
    for b, g in itertools.product(range(m), repeat=2):
        comm = basis[b] @ basis[g] - basis[g] @ basis[b]
        c[:, b, g] = np.linalg.lstsq(flat, comm.ravel(), rcond=None)[0]
    return c


def slopes(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))
