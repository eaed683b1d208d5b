"""Command-line front end: ``epfield <command> --config run.json [--out dir]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, connection, ep, io, noether, reconstruction, solver
from .config import COMMANDS, RunConfig, load_config
from .errors import ConfigError, EPFieldError, NotFlat, ValidationError
from .jets import Grid

log = logging.getLogger("epfield")

EXIT_OK, EXIT_ERROR, EXIT_DIAGNOSTIC = 0, 1, 2


def report_mask(grid: Grid, k: int) -> np.ndarray:
    """Nodes used for residual and divergence summaries."""
    return grid.interior(2 * k)


# ------------------------------------------------------------------- fields
def group_field_from_family(alg, grid: Grid, spec: dict) -> np.ndarray:
    X = grid.coords()
    kind = spec["kind"]
    if kind == "product_exp":
        out = None
        for mu, xi in enumerate(spec["xi"]):
            f = alg.exp(np.einsum("a,...->a...", np.asarray(xi), X[mu]))
            out = f if out is None else out @ f
        return out
    if kind == "chart_poly":
        y = np.zeros((alg.dim,) + grid.size)
        for t in spec["terms"]:
            mono = np.ones(grid.size)
            for mu, p in enumerate(t["power"]):
                mono = mono * X[mu] ** p
            y += np.einsum("a,...->a...", np.asarray(t["coeff"]), mono)
        return alg.exp(y)
    raise ValidationError(f"field kind '{kind}' does not describe a group field")


def _check_grid(found: Grid, grid: Grid, what: str) -> None:
    if found.size != grid.size or not np.allclose(found.extent, grid.extent, rtol=1e-12, atol=1e-12):
        raise ValidationError(f"{what} lives on grid {found.size} {found.extent}, config declares {grid.size} {grid.extent}")


def load_group_field(cfg: RunConfig, alg, grid: Grid, key: str = "group_field") -> np.ndarray | None:
    src = cfg.data["input"].get(key)
    if src is not None:
        found, field = io.read_group_field(cfg.path(src))
        _check_grid(found, grid, f"input.{key}")
        return field
    fam = cfg.data["field"]
    if key == "group_field" and fam is not None and fam["kind"] != "constant":
        return group_field_from_family(alg, grid, fam)
    return None


def load_sigma(cfg: RunConfig, alg, grid: Grid) -> np.ndarray:
    src = cfg.data["input"].get("sigma")
    if src is not None:
        paths = [src] if isinstance(src, str) else list(src)
        found, sigma = io.read_reduced_field([cfg.path(p) for p in paths])
        _check_grid(found, grid, "input.sigma")
        return sigma
    fam = cfg.data["field"]
    if fam is not None and fam["kind"] == "constant":
        vals = np.asarray(fam["values"], dtype=float)
        return np.broadcast_to(vals.reshape(vals.shape + (1,) * grid.n), (grid.n, alg.dim) + grid.size).copy()
    field = load_group_field(cfg, alg, grid)
    if field is None:
        raise ValidationError("no reduced field supplied: set 'input.sigma', 'input.group_field' or 'field'")
    return connection.reduce(alg, field, grid, cfg.trivialization)


# ----------------------------------------------------------------- commands
class Run:
    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.alg = cfg.algebra()
        self.grid = cfg.grid()
        self.artifacts: list[str] = []
        self.report: dict = {}

    def _name(self, path: Path) -> None:
        self.artifacts.append(str(path.relative_to(self.out)))

    def field_csv(self, name: str, field: np.ndarray, title: str) -> None:
        p = self.out / f"{name}.csv"
        io.write_algebra_field(p, self.grid, field)
        self._name(p)
        self.plot(name, field.shape[0], title)

    def plot(self, name: str, ncols: int, title: str) -> None:
        p = self.out / f"plot_{name}.gp"
        io.write_plot_script(p, f"{name}.csv", self.grid, ncols, title)
        self._name(p)

    def spline_lagrangian(self):
        return ep.spline_lagrangian(self.alg, self.cfg.spline_params(), self.grid.n)

    def residual_field(self, sigma: np.ndarray) -> np.ndarray:
        params = self.cfg.spline_params()
        if self.cfg.k == 2:
            return ep.spline_residual_k2(self.alg, sigma, self.grid, params, self.cfg.trivialization)
        L = self.spline_lagrangian()
        return -self.alg.sharp(ep.ep_general(self.alg, L, sigma, self.grid, self.cfg.trivialization))

    # solve ---------------------------------------------------------------
    def solve(self) -> int:
        cfg, alg, grid, k = self.cfg, self.alg, self.grid, self.cfg.k
        b = cfg.data["boundary"]
        if b is None:
            raise ValidationError("command 'solve' needs a 'boundary' block")
        if "data" in b:
            found, field = io.read_group_field(cfg.path(b["data"]))
            _check_grid(found, grid, "boundary.data")
            bc = solver.BoundaryData.from_field(field, grid, k)
        else:
            bc, _ = solver.clamped_hermite(alg, grid, k, b["y0"], b["y1"], b["v0"], b["v1"])
        s0 = solver.initial_guess(alg, grid, bc, cfg.data["initial_guess"])
        L = self.spline_lagrangian()
        s, trace = solver.minimize(alg, L, s0, grid, bc, cfg.solver_options(), cfg.trivialization)
        sigma = connection.reduce(alg, s, grid, cfg.trivialization)
        mask = report_mask(grid, k)
        res = self.residual_field(sigma)
        Jf = noether.noether_current(L, sigma, grid, alg, frame=s, trivialization=cfg.trivialization)
        div = noether.divergence_defect(Jf, grid)
        flat = connection.flatness_report(alg, sigma, grid, cfg.data["diagnostics"]["flatness_jet_order"],
                                          cfg.data["diagnostics"]["flatness_tol"],
                                          trivialization=cfg.trivialization)
        p = self.out / "group_field.csv"
        io.write_group_field(p, grid, s)
        self._name(p)
        self.plot("group_field", alg.basis.shape[-1] ** 2, "group field entries")
        for mu in range(grid.n):
            self.field_csv(f"sigma_{mu + 1}", sigma[mu], f"reduced field, axis {mu + 1}")
        self.field_csv("residual", res, "spline residual")
        self.field_csv("noether_divergence", div, "divergence of the transported current")
        p = self.out / "current.csv"
        io.write_current(p, grid, Jf)
        self._name(p)
        p = self.out / "trace.csv"
        io.write_trace(p, trace.rows)
        self._name(p)
        self.report = {
            "status": trace.status,
            "iterations": trace.iterations,
            "noise_steps": trace.noise_steps,
            "final_action": trace.rows[-1][1],
            "grad_norm": trace.rows[-1][2],
            "spline_residual_sup": ep.residual_summary(res, mask)["sup"],
            "noether_defect_sup": noether.defect_summary(div, mask)["sup"],
            "summary_nodes": int(mask.sum()),
            "boundary_mismatch": bc.mismatch(s),
            "flatness": flat.to_dict(),
        }
        return EXIT_OK if trace.status == "converged" else EXIT_DIAGNOSTIC

    # residual ------------------------------------------------------------
    def residual(self) -> int:
        sigma = load_sigma(self.cfg, self.alg, self.grid)
        res = self.residual_field(sigma)
        mask = report_mask(self.grid, self.cfg.k)
        self.field_csv("residual", res, "spline residual")
        summ = ep.residual_summary(res, mask)
        self.report = {"residual": summ, "sign_convention": ep.SPLINE_SIGN, "order_k": self.cfg.k}
        if self.cfg.k == 2 and self.alg.is_bi_invariant():
            bi = ep.spline_residual_biinvariant(self.alg, sigma, self.grid, self.cfg.spline_params(),
                                                self.cfg.trivialization)
            self.report["biinvariant_difference_sup"] = ep.residual_summary(bi - res, mask)["sup"]
        return self._tol("residual_tol", summ["sup"])

    # curvature -----------------------------------------------------------
    def curvature(self) -> int:
        sigma = load_sigma(self.cfg, self.alg, self.grid)
        diag = self.cfg.data["diagnostics"]
        rep = connection.flatness_report(self.alg, sigma, self.grid, diag["flatness_jet_order"],
                                         diag["flatness_tol"], trivialization=self.cfg.trivialization)
        F = connection.curvature(self.alg, sigma, self.grid, self.cfg.trivialization)
        p = self.out / "curvature.csv"
        io.write_curvature(p, self.grid, F, connection.pairs(self.grid.n))
        self._name(p)
        self.report = {"flatness": rep.to_dict()}
        if not rep.passed:
            print(f"epfield: curvature {rep.max_defect:.6e} at {rep.coords} exceeds tolerance "
                  f"{rep.tolerance:.3e}", file=sys.stderr)
            return EXIT_DIAGNOSTIC
        return EXIT_OK

    # reconstruct ---------------------------------------------------------
    def reconstruct(self) -> int:
        sigma = load_sigma(self.cfg, self.alg, self.grid)
        tol = self.cfg.data["diagnostics"]["flatness_tol"]
        try:
            s = reconstruction.reconstruct(self.alg, sigma, self.grid, trivialization=self.cfg.trivialization, tol=tol)
        except NotFlat as exc:
            self.report = {"error": "NotFlat", "defect": exc.defect, "message": str(exc)}
            print(f"epfield: {exc}", file=sys.stderr)
            return EXIT_DIAGNOSTIC
        hol = reconstruction.holonomy_report(self.alg, sigma, self.grid, self.cfg.trivialization)
        back = connection.reduce(self.alg, s, self.grid, self.cfg.trivialization)
        p = self.out / "group_field.csv"
        io.write_group_field(p, self.grid, s)
        self._name(p)
        self.plot("group_field", s.shape[-1] ** 2, "reconstructed group field")
        self.report = {
            "holonomy": hol.to_dict(),
            "roundtrip_sup": float(np.max(np.abs(back - sigma))),
        }
        return EXIT_OK

    # noether -------------------------------------------------------------
    def noether(self) -> int:
        cfg, alg, grid = self.cfg, self.alg, self.grid
        sigma = load_sigma(cfg, alg, grid)
        frame = load_group_field(cfg, alg, grid, "frame")
        if frame is None and cfg.data["input"].get("sigma") is None:
            frame = load_group_field(cfg, alg, grid)
        if frame is None:
            frame = reconstruction.reconstruct(alg, sigma, grid, trivialization=cfg.trivialization,
                                               tol=cfg.data["diagnostics"]["flatness_tol"])
        L = self.spline_lagrangian()
        Jf = noether.noether_current(L, sigma, grid, alg, frame=frame, trivialization=cfg.trivialization)
        div = noether.divergence_defect(Jf, grid)
        mask = report_mask(grid, cfg.k)
        p = self.out / "current.csv"
        io.write_current(p, grid, Jf)
        self._name(p)
        self.field_csv("noether_divergence", div, "divergence of the transported current")
        summ = noether.defect_summary(div, mask)
        self.report = {"noether_defect": summ, "residual_sup": ep.residual_summary(self.residual_field(sigma), mask)["sup"]}
        return self._tol("noether_tol", summ["sup"])

    # el-check ------------------------------------------------------------
    def el_check(self) -> int:
        cfg, alg, grid = self.cfg, self.alg, self.grid
        field = load_group_field(cfg, alg, grid)
        if field is None:
            raise ValidationError("command 'el-check' needs 'input.group_field' or a group-field 'field' family")
        L = self.spline_lagrangian()
        res = ep.chart_el_residual(alg, L, field, grid, cfg.trivialization)
        mask = grid.interior(2 * cfg.k)
        self.field_csv("el_residual", res, "Euler-Lagrange residual in the exponential chart")
        summ = ep.residual_summary(res, mask)
        self.report = {"el_residual": summ}
        return self._tol("el_tol", summ["sup"])

    def _tol(self, key: str, value: float) -> int:
        tol = self.cfg.data["diagnostics"][key]
        self.report["tolerance"] = tol
        if tol is not None and value > tol:
            self.report["passed"] = False
            print(f"epfield: {key.replace('_tol', '')} sup {value:.6e} exceeds {tol:.3e}", file=sys.stderr)
            return EXIT_DIAGNOSTIC
        self.report["passed"] = True
        return EXIT_OK


def _render(exc: Exception, grid: Grid | None) -> str:
    msg = f"{type(exc).__name__}: {exc}"
    node = getattr(exc, "node", None)
    if node is not None and grid is not None and len(node) >= grid.n:
        idx = tuple(node[-grid.n:])
        X = grid.coords()
        coords = [float(X[(mu,) + idx]) for mu in range(grid.n)]
        msg += f" (coordinates {coords})"
    return msg


def run(command: str, cfg: RunConfig, out) -> int:
    """Execute ``command``; write artifacts, report and manifest under ``out``."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command '{command}'")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    job = Run(cfg, out)
    method = getattr(job, command.replace("-", "_"))
    try:
        code = method()
    except EPFieldError as exc:
        if isinstance(exc, ConfigError):
            raise
        job.report = {"error": type(exc).__name__, "message": _render(exc, job.grid)}
        print(f"epfield: {_render(exc, job.grid)}", file=sys.stderr)
        code = EXIT_ERROR
    job.report["exit_code"] = code
    io.write_json(out / "report.json", job.report)
    io.write_json(
        out / "manifest.json",
        {
            "command": command,
            "version": __version__,
            "config": cfg.to_dict(),
            "threads": os.environ.get("TOOL_THREADS"),
            "artifacts": sorted(job.artifacts + ["report.json"]),
            "exit_code": code,
        },
    )
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="epfield", description="Reduced field equations on Lie groups.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.path(cfg.data["output"]["dir"])
        return run(args.command, cfg, out)
    except ConfigError as exc:
        print(f"epfield: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"epfield: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
