"""JSON run configuration: parsing, defaults and cross-validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import lie
from .ep import SplineParams
from .errors import AlgebraError, ParseError, ValidationError
from .jets import Grid
from .solver import SolverOptions

COMMANDS = ("solve", "residual", "curvature", "reconstruct", "noether", "el-check")

SOLVER_DEFAULTS = {f.name: f.default for f in fields(SolverOptions) if f.name != "on_stall"}

DEFAULTS = {
    "group": None,
    "metric": None,
    "trivialization": "right",
    "grid": {"extent": None, "size": None},
    "order_k": 2,
    "spline": {"kappa": 1.0, "tau": 0.0},
    "boundary": None,
    "initial_guess": "blend",
    "solver": SOLVER_DEFAULTS,
    "input": {"sigma": None, "group_field": None, "frame": None},
    "field": None,
    "diagnostics": {
        "flatness_tol": None,
        "flatness_jet_order": 0,
        "residual_tol": None,
        "noether_tol": None,
        "el_tol": None,
    },
    "output": {"dir": "out"},
}

TOP_KEYS = set(DEFAULTS)
FIELD_KINDS = ("constant", "product_exp", "chart_poly")
BOUNDARY_FAMILIES = ("hermite",)


@dataclass
class RunConfig:
    """Validated configuration; ``data`` holds the full effective dictionary."""

    data: dict
    base_dir: Path

    # convenience accessors -----------------------------------------------
    def algebra(self) -> lie.LieAlgebra:
        return _algebra(self.data)

    def grid(self) -> Grid:
        g = self.data["grid"]
        return Grid(tuple(tuple(e) for e in g["extent"]), tuple(g["size"]))

    @property
    def k(self) -> int:
        return int(self.data["order_k"])

    @property
    def trivialization(self) -> str:
        return self.data["trivialization"]

    def spline_params(self) -> SplineParams:
        sp = self.data["spline"]
        return SplineParams(tuple(sp["kappa"]), tuple(sp["tau"]), self.k)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(on_stall="return", **self.data["solver"])

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


# ------------------------------------------------------------------ loading
def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, path.parent)


def config_from_dict(raw: dict, base_dir=".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ParseError("config root must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ParseError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    data = _merge(DEFAULTS, raw)
    _validate(data)
    return RunConfig(data, Path(base_dir))


def _merge(defaults: dict, raw: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in raw.items():
        if isinstance(out.get(key), dict) and isinstance(val, dict):
            sub = out[key]
            extra = set(val) - set(sub)
            if extra and key in ("grid", "spline", "solver", "diagnostics", "output", "input"):
                raise ParseError(f"unknown field(s) in '{key}': {', '.join(sorted(extra))}")
            sub.update(copy.deepcopy(val))
        else:
            out[key] = copy.deepcopy(val)
    return out


# --------------------------------------------------------------- validation
def _algebra(data: dict) -> lie.LieAlgebra:
    group = data["group"]
    if group is None:
        raise ValidationError("field 'group': a named key or an inline algebra spec is required")
    try:
        if isinstance(group, str):
            spec = lie.named_spec(group)
        elif isinstance(group, dict):
            if "struct_consts" not in group:
                raise ValidationError("field 'group': inline spec needs 'struct_consts'")
            spec = lie.LieAlgebraSpec(
                np.asarray(group["struct_consts"], dtype=float),
                None if group.get("metric") is None else np.asarray(group["metric"], dtype=float),
                None if group.get("matrix_basis") is None else np.asarray(group["matrix_basis"], dtype=float),
                group.get("name", "custom"),
                group.get("group", "custom"),
            )
        else:
            raise ValidationError("field 'group' must be a string key or an object")
        return lie.make_algebra(spec, data["metric"])
    except KeyError as exc:
        raise ValidationError(f"field 'group': {exc.args[0]}") from exc
    except (AlgebraError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"field 'group': {exc}") from exc


def _vec(val, m: int, where: str) -> list:
    arr = np.asarray(val, dtype=float)
    if arr.shape != (m,):
        raise ValidationError(f"field '{where}' must be a vector of length {m}")
    return arr.tolist()


def _per_axis(val, n: int, where: str) -> list:
    arr = np.atleast_1d(np.asarray(val, dtype=float))
    if arr.shape == (1,):
        arr = np.repeat(arr, n)
    if arr.shape != (n,):
        raise ValidationError(f"field '{where}' needs one entry per axis ({n})")
    return arr.tolist()


def _validate(data: dict) -> None:
    alg = _algebra(data)
    m = alg.dim
    if data["trivialization"] not in ("right", "left"):
        raise ValidationError("field 'trivialization' must be 'right' or 'left'")

    g = data["grid"]
    if g["size"] is None:
        raise ValidationError("field 'grid.size' is required")
    size = [int(v) for v in np.atleast_1d(g["size"])]
    n = len(size)
    if n < 1:
        raise ValidationError("field 'grid.size' must list at least one axis")
    extent = g["extent"] if g["extent"] is not None else [[0.0, 1.0]] * n
    extent = np.asarray(extent, dtype=float)
    if extent.shape != (n, 2) or np.any(extent[:, 1] <= extent[:, 0]):
        raise ValidationError("field 'grid.extent' must hold one increasing [a, b] pair per axis")
    g["size"], g["extent"] = size, extent.tolist()

    k = data["order_k"]
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ValidationError("field 'order_k' must be a positive integer")
    for mu, N in enumerate(size):
        if N < 2 * k + 1:
            raise ValidationError(f"field 'grid.size[{mu}]' = {N} violates N ≥ 2k+1 (k = {k})")

    sp = data["spline"]
    sp["kappa"] = _per_axis(sp["kappa"], n, "spline.kappa")
    sp["tau"] = _per_axis(sp["tau"], n, "spline.tau")
    try:
        SplineParams(tuple(sp["kappa"]), tuple(sp["tau"]), k)
    except ValueError as exc:
        raise ValidationError(f"field 'spline': {exc}") from exc

    try:
        SolverOptions(**data["solver"])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field 'solver': {exc}") from exc
    if data["solver"]["method"] not in ("lbfgs", "gd"):
        raise ValidationError("field 'solver.method' must be 'lbfgs' or 'gd'")
    if data["solver"]["step_rule"] not in ("armijo", "fixed"):
        raise ValidationError("field 'solver.step_rule' must be 'armijo' or 'fixed'")
    if data["initial_guess"] not in ("blend", "geodesic"):
        raise ValidationError("field 'initial_guess' must be 'blend' or 'geodesic'")

    b = data["boundary"]
    if b is not None:
        if not isinstance(b, dict) or b.get("type", "clamped") != "clamped":
            raise ValidationError("field 'boundary.type' must be 'clamped'")
        b.setdefault("type", "clamped")
        if "data" in b:
            if not isinstance(b["data"], str):
                raise ValidationError("field 'boundary.data' must be a group-field CSV path")
        else:
            fam = b.setdefault("family", "hermite")
            if fam not in BOUNDARY_FAMILIES:
                raise ValidationError(f"field 'boundary.family': unknown family '{fam}' (known: hermite)")
            if n != 1:
                raise ValidationError("field 'boundary.family': the hermite family needs a one-dimensional grid")
            for key in ("y0", "y1", "v0", "v1"):
                b[key] = _vec(b.get(key, [0.0] * m), m, f"boundary.{key}")

    f = data["field"]
    if f is not None:
        kind = f.get("kind") if isinstance(f, dict) else None
        if kind not in FIELD_KINDS:
            raise ValidationError(f"field 'field.kind' must be one of {', '.join(FIELD_KINDS)}")
        if kind in ("constant", "product_exp"):
            key = "values" if kind == "constant" else "xi"
            arr = np.asarray(f.get(key), dtype=float)
            if arr.shape != (n, m):
                raise ValidationError(f"field 'field.{key}' must be an {n} x {m} array (one vector per axis)")
            f[key] = arr.tolist()
        else:
            terms = f.get("terms")
            if not isinstance(terms, list) or not terms:
                raise ValidationError("field 'field.terms' must be a non-empty list")
            for i, t in enumerate(terms):
                if len(t.get("power", [])) != n:
                    raise ValidationError(f"field 'field.terms[{i}].power' needs {n} exponents")
                t["coeff"] = _vec(t.get("coeff"), m, f"field.terms[{i}].coeff")

    for key, val in data["diagnostics"].items():
        if key == "flatness_jet_order":
            if not isinstance(val, int) or val < 0:
                raise ValidationError("field 'diagnostics.flatness_jet_order' must be a non-negative integer")
        elif val is not None and (not isinstance(val, (int, float)) or val <= 0):
            raise ValidationError(f"field 'diagnostics.{key}' must be positive or null")
