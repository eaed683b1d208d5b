"""CSV and JSON interchange for fields, reports and traces.

Rows follow row-major node order (last grid axis fastest).  Floats are
written with 17 significant digits so that a write/read cycle is exact and
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError
from .jets import Grid


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _node_rows(grid: Grid):
    X = grid.coords()
    for idx in np.ndindex(*grid.size):
        yield idx, [X[(mu,) + idx] for mu in range(grid.n)]


def _write(path, header: Sequence[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, str) else (str(r) if isinstance(r, (int, np.integer)) else fmt(r)) for r in row])


def _read(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ParseError(f"{path}: rows do not match the header width {len(header)}")
    return header, data


def grid_from_coords(coords: np.ndarray) -> Grid:
    """Recover a uniform grid from row-major node coordinates ``(points, n)``."""
    n = coords.shape[1]
    axes = [np.unique(coords[:, mu]) for mu in range(n)]
    size = tuple(len(a) for a in axes)
    if int(np.prod(size)) != coords.shape[0]:
        raise ParseError("node coordinates do not form a full rectangular grid")
    grid = Grid(tuple((a[0], a[-1]) for a in axes), size)
    ref = grid.coords().reshape(n, -1).T
    if not np.allclose(ref, coords, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(np.abs(coords))))):
        raise ParseError("nodes are not uniform or not in row-major order")
    return grid


def _split_coords(header: list[str], data: np.ndarray, prefix: str = "x") -> int:
    n = 0
    while n < len(header) and header[n] == f"{prefix}{n + 1}":
        n += 1
    if n == 0:
        raise ParseError(f"header must start with x1 (got {header[:3]})")
    return n


# ------------------------------------------------------------- algebra fields
def write_algebra_field(path, grid: Grid, field: np.ndarray) -> None:
    field = np.asarray(field, dtype=float)
    if field.ndim == grid.n:
        field = field[None]
    m = field.shape[0]
    header = [f"x{mu + 1}" for mu in range(grid.n)] + [f"v{a + 1}" for a in range(m)]
    _write(path, header, (xs + [field[(a,) + idx] for a in range(m)] for idx, xs in _node_rows(grid)))


def read_algebra_field(path) -> tuple[Grid, np.ndarray]:
    header, data = _read(path)
    n = _split_coords(header, data)
    grid = grid_from_coords(data[:, :n])
    vals = data[:, n:].T
    return grid, vals.reshape((vals.shape[0],) + grid.size)


def write_reduced_field(directory, grid: Grid, sigma: np.ndarray, stem: str = "sigma") -> list[Path]:
    paths = []
    for mu in range(grid.n):
        p = Path(directory) / f"{stem}_{mu + 1}.csv"
        write_algebra_field(p, grid, sigma[mu])
        paths.append(p)
    return paths


def read_reduced_field(paths: Sequence) -> tuple[Grid, np.ndarray]:
    comps = [read_algebra_field(p) for p in paths]
    grid = comps[0][0]
    for g, _ in comps[1:]:
        if g != grid:
            raise ParseError("reduced field components live on different grids")
    if len(comps) != grid.n:
        raise ParseError(f"a reduced field on a {grid.n}-dimensional grid needs {grid.n} component files")
    return grid, np.stack([c[1] for c in comps])


# --------------------------------------------------------------- group fields
def write_group_field(path, grid: Grid, field: np.ndarray) -> None:
    field = np.asarray(field, dtype=float)
    d = field.shape[-1]
    header = [f"x{mu + 1}" for mu in range(grid.n)] + [f"g{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    _write(path, header, (xs + list(field[idx].ravel()) for idx, xs in _node_rows(grid)))


def read_group_field(path) -> tuple[Grid, np.ndarray]:
    header, data = _read(path)
    n = _split_coords(header, data)
    k = data.shape[1] - n
    d = int(round(np.sqrt(k)))
    if d * d != k:
        raise ParseError(f"{path}: {k} matrix columns do not form a square matrix")
    grid = grid_from_coords(data[:, :n])
    return grid, data[:, n:].reshape(grid.size + (d, d))


# ------------------------------------------------------- curvature / current
def write_curvature(path, grid: Grid, F: np.ndarray, pairs: Sequence[tuple[int, int]]) -> None:
    m = F.shape[1] if F.size else 0
    header = [f"x{mu + 1}" for mu in range(grid.n)] + ["mu", "nu"] + [f"F{a + 1}" for a in range(m)]

    def rows():
        for idx, xs in _node_rows(grid):
            for p, (mu, nu) in enumerate(pairs):
                yield xs + [mu + 1, nu + 1] + [F[(p, a) + idx] for a in range(m)]

    _write(path, header, rows())


def write_current(path, grid: Grid, J: np.ndarray) -> None:
    n, m = J.shape[:2]
    header = [f"x{mu + 1}" for mu in range(grid.n)] + ["mu", "alpha", "J"]

    def rows():
        for idx, xs in _node_rows(grid):
            for mu in range(n):
                for a in range(m):
                    yield xs + [mu + 1, a + 1, J[(mu, a) + idx]]

    _write(path, header, rows())


def write_trace(path, rows) -> None:
    _write(path, ["iter", "action", "grad_norm", "step"], ([int(r[0]), r[1], r[2], r[3]] for r in rows))


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ----------------------------------------------------------------- plotting
def write_plot_script(path, csv_name: str, grid: Grid, ncols: int, title: str, col_prefix: str = "v") -> None:
    """gnuplot script for 1D line plots or 2D surface slices of a field CSV."""
    lines = ["set datafile separator ','", f"set title '{title}'", "set key autotitle columnhead"]
    if grid.n == 1:
        lines.append("set xlabel 'x1'")
        plots = [f"'{csv_name}' using 1:{2 + a} with lines" for a in range(ncols)]
        lines.append("plot " + ", \\\n     ".join(plots))
    else:
        lines += ["set xlabel 'x1'", "set ylabel 'x2'"]
        if grid.n > 2:
            lines.append("# slice at the first node of the remaining axes")
            cond = " && ".join(f"$%d==%s" % (3 + i, fmt(grid.extent[2 + i][0])) for i in range(grid.n - 2))
            plots = [
                f"'{csv_name}' using 1:2:(({cond}) ? ${grid.n + 1 + a} : 1/0) with points"
                for a in range(ncols)
            ]
        else:
            plots = [f"'{csv_name}' using 1:2:{grid.n + 1 + a} with points" for a in range(ncols)]
        lines.append("splot " + ", \\\n      ".join(plots))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")
