from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from epfield import cli, io
from epfield.config import config_from_dict

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, command, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    out = tmp_path / f"out_{command}"
    code = cli.main([command, "--config", str(p), "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def test_curvature_non_flat(tmp_path):
    data = json.loads((CONFIGS / "curvature_constant.json").read_text())
    code, out, report = run(tmp_path, "curvature", data)
    assert code == 2
    assert np.isclose(report["flatness"]["max_defect"], 0.5)
    assert (out / "curvature.csv").exists()


def test_reconstruct_product_and_non_flat(tmp_path):
    data = {"group": "so3", "grid": {"size": [9, 9]},
            "field": {"kind": "product_exp", "xi": [[0.5, 0, 0], [0, 0.4, 0.1]]}}
    code, out, report = run(tmp_path, "reconstruct", data)
    assert code == 0 and report["roundtrip_sup"] < 1e-2
    _, field = io.read_group_field(out / "group_field.csv")
    assert field.shape == (9, 9, 3, 3)
    data["field"] = {"kind": "constant", "values": [[1.0, 0, 0], [0, 1.0, 0]]}
    code, _, report = run(tmp_path, "reconstruct", data, "c2.json")
    assert code == 2 and report["error"] == "NotFlat"


def test_solve_report_and_manifest(tmp_path):
    data = json.loads((CONFIGS / "beam.json").read_text())
    data["grid"]["size"] = [17]
    data["solver"] = {"grad_tol": 1e-6}
    code, out, report = run(tmp_path, "solve", data)
    assert code == 0
    for key in ("status", "iterations", "final_action", "grad_norm", "spline_residual_sup",
                "noether_defect_sup", "boundary_mismatch", "flatness"):
        assert key in report
    assert report["boundary_mismatch"] == 0.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve" and manifest["exit_code"] == 0
    assert all((out / a).exists() for a in manifest["artifacts"])
    trace = np.loadtxt(out / "trace.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.all(np.diff(trace[:, 1]) <= 0)
    # identical config, identical artifacts
    code2, out2, _ = run(tmp_path, "solve", data, "again.json")
    out2b = tmp_path / "out_solve_b"
    cli.main(["solve", "--config", str(tmp_path / "again.json"), "--out", str(out2b)])
    assert (out / "group_field.csv").read_text() == (out2b / "group_field.csv").read_text()


def test_el_check_residual_noether(tmp_path):
    data = json.loads((CONFIGS / "el_check.json").read_text())
    data["grid"]["size"] = [33]
    code, out, report = run(tmp_path, "el-check", data)
    assert code == 0 and report["el_residual"]["nodes"] == 33 - 8
    data["diagnostics"] = {"residual_tol": 1e-30}
    code, _, report = run(tmp_path, "residual", data, "r.json")
    assert code == 2 and report["passed"] is False
    code, out, report = run(tmp_path, "noether", data, "n.json")
    assert code == 0 and (out / "current.csv").exists()


def test_error_exit_codes(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"group": "so3", "grid": {"size": [4]}}')
    assert cli.main(["curvature", "--config", str(p)]) == 1
    assert "N ≥ 2k+1" in capsys.readouterr().err
    assert cli.main(["curvature", "--config", str(tmp_path / "missing.json")]) == 1
    code, _, _ = run(tmp_path, "el-check", {"group": "so3", "grid": {"size": [9]}}, "e.json")
    assert code == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "epfield.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "el-check" in proc.stdout


def test_report_mask():
    cfg = config_from_dict({"group": "so3", "grid": {"size": [17]}})
    assert cli.report_mask(cfg.grid(), 2).sum() == 17 - 8
