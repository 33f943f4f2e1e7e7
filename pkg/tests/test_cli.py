import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pinnray.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def tiny_square(tmp_path, **train):
    spec = json.loads((CONFIGS / "square_stretch.json").read_text())
    spec["network"] = {"layers": 1, "width": 6, "seed": 0}
    spec["points"] = {"n_collocation": 60, "n_boundary": 10, "seed": 0}
    spec["mesh"] = {"structured": [4, 4]}
    spec["train"].update({"epochs": 15, "log_every": 5}, **train)
    spec["out"] = "out"
    path = tmp_path / "square.json"
    path.write_text(json.dumps(spec))
    return path


def test_geometry_from_params_file(tmp_path, capsys):
    assert main(["geometry", "--config", str(CONFIGS / "finray_params.json"), "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "domain.json").read_text())
    assert len(d["holes"]) == 5
    first = (tmp_path / "domain.json").read_bytes()
    assert main(["geometry", "--config", str(CONFIGS / "finray_params.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "domain.json").read_bytes() == first
    assert "5 holes" in capsys.readouterr().out


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["geometry", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_config_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "geometry": {"kind": "rectangle", "bbox": [0, 0, 1, 1]}, "colour": 1}')
    assert main(["fem", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_fem_patch_config(tmp_path):
    assert main(["fem", "--config", str(CONFIGS / "patch_test.json"), "--out", str(tmp_path)]) == 0
    for name in ("mesh.msh", "fem_nodes.csv", "fem_elements.csv", "fem_markers.csv", "fem_summary.json"):
        assert (tmp_path / name).is_file()
    elems = np.loadtxt(tmp_path / "fem_elements.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(elems[:, 2:5], np.tile([0.01, -0.0045, 0.0025], (len(elems), 1)), atol=1e-10)
    markers = np.loadtxt(tmp_path / "fem_markers.csv", delimiter=",", skiprows=1)
    exact = markers[:, 1:3] @ np.array([[0.01, 0.002], [0.003, -0.0045]]).T
    np.testing.assert_allclose(markers[:, 3:5], exact, atol=1e-10)


def test_fem_without_support_reports_rigid_modes(tmp_path, capsys):
    spec = json.loads((CONFIGS / "square_stretch.json").read_text())
    spec["boundary"] = [{"point": [0.5, 1.0], "disp": [0.0, -0.1]}]
    spec["mesh"] = {"h": 0.25}
    path = tmp_path / "loose.json"
    path.write_text(json.dumps(spec))
    assert main(["fem", "--config", str(path), "--out", str(tmp_path)]) == 1
    assert "rotation" in capsys.readouterr().err


def test_asm_without_markers_is_usage_error(tmp_path, capsys):
    cfg = tiny_square(tmp_path)
    assert main(["train", "--config", str(cfg), "--variant", "asm"]) == 2
    assert "marker" in capsys.readouterr().err


def test_seeded_training_is_reproducible(tmp_path):
    cfg = tiny_square(tmp_path)
    assert main(["train", "--config", str(cfg), "--deterministic", "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", str(cfg), "--deterministic", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "loss_std.csv").read_bytes()
    assert a == (tmp_path / "b" / "loss_std.csv").read_bytes()
    assert a.decode().splitlines()[0] == "epoch,l_pde,l_bc,l_asm,l_total"
    assert main(["train", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "loss_std.csv").read_bytes() != a


def test_full_pipeline_on_square(tmp_path, capsys):
    cfg = tiny_square(tmp_path)
    out = tmp_path / "run"
    common = ["--config", str(cfg), "--out", str(out)]
    assert main(["fem", *common]) == 0
    markers = out / "fem_markers.csv"
    assert main(["train", *common]) == 0
    assert main(["train", *common, "--variant", "asm", "--markers", str(markers)]) == 0
    assert main(["evaluate", *common, "--markers", str(markers)]) == 0
    metrics = {m["method"]: m for m in json.loads((out / "metrics.json").read_text())}
    assert set(metrics) == {"fem", "pinn_std", "pinn_asm"}
    # the FEM scored against its own interpolated markers is exact
    assert metrics["fem"]["mae_disp"] < 1e-12
    table = (out / "comparison.txt").read_text().splitlines()
    assert table[0].split()[2:] == ["fem", "pinn_std", "pinn_asm"]
    assert [ln.split()[0] for ln in table[1:]] == ["u", "v", "disp"]
    for source in ("fem", "std", "asm"):
        assert main(["export", *common, "--source", source, "--spacing", "0.25"]) == 0
        rows = (out / f"fields_{source}.csv").read_text().splitlines()
        assert len(rows) == 1 + 25


def test_evaluate_without_results(tmp_path, capsys):
    cfg = tiny_square(tmp_path)
    markers = tmp_path / "m.csv"
    markers.write_text("marker_id,x,y,u,v\n1,0.5,0.5,0,-0.05\n")
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "empty"), "--markers", str(markers)]) == 2
    assert "nothing to evaluate" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pinnray.cli", "geometry", "--config",
                        str(CONFIGS / "finray_params.json"), "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "domain.json").is_file()
    r = subprocess.run([sys.executable, "-m", "pinnray.cli", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2
