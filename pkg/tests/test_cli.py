import copy
import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from pmajorant.cli import load_schema, main, validate_config
from pmajorant.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "problem": {"kind": "dirichlet_poisson", "p": 2, "domain": [0, 1], "h": "1"},
    "constants_mode": "rigorous",
    "reference": {"method": "auto", "n_ref": 64},
    "approximations": [2, 4, 8],
    "eta_star": ["ideal", "postprocessed"],
    "output": {"json": "r.json", "csv": "r.csv", "svg": "r.svg"},
    "seed": 0,
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def strip_time(text):
    data = json.loads(text)
    data.pop("timestamp")
    return data


def test_schema_ships_with_package():
    schema = load_schema()
    assert schema["properties"]["problem"]["properties"]["kind"]["enum"][0] == "dirichlet_poisson"
    validate_config(copy.deepcopy(SMALL))


@pytest.mark.parametrize("mutate, pointer", [
    (lambda c: c["problem"].update(p=1), "/problem/p"),
    (lambda c: c["problem"].update(kind="heat"), "/problem/kind"),
    (lambda c: c.update(approximations=[2, 0]), "/approximations/1"),
    (lambda c: c["reference"].pop("n_ref"), "/reference"),
    (lambda c: c.update(extra=1), ""),
    (lambda c: c.update(approximations=[2, 5]), "/approximations/1"),
    (lambda c: c.update(approximations=[32]), "/reference/n_ref"),
    (lambda c: c["problem"].update(kind="fractional"), "/problem/s"),
    (lambda c: c["problem"].update(kind="obstacle"), "/problem/phi"),
    (lambda c: c["problem"].update(kind="anisotropic1d"), "/problem/a"),
])
def test_config_errors_carry_pointer(mutate, pointer):
    cfg = copy.deepcopy(SMALL)
    mutate(cfg)
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    assert info.value.pointer in ((pointer,) if pointer else ("", "/"))


def test_config_error_exit_code(tmp_path, caplog):
    cfg = copy.deepcopy(SMALL)
    cfg["problem"]["p"] = 0.5
    assert main(["sweep", "--config", str(write(tmp_path, cfg)), "--out-dir", str(tmp_path), "--quiet"]) == 1
    assert "/problem/p" in caplog.text
    assert main(["sweep", "--config", str(tmp_path / "missing.json"), "--quiet"]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["sweep", "--config", str(tmp_path / "bad.json"), "--quiet"]) == 1
    assert main(["sweep", "--quiet"]) == 1


def test_sweep_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(write(tmp_path, SMALL)), "--out-dir", str(out), "--quiet"]) == 0
    report = json.loads((out / "r.json").read_text())
    assert report["certified_violations"] == 0
    assert len(report["cases"]) == 6
    assert report["constants"]["C_F"]["provenance"] == "rigorous_bound"
    with open(out / "r.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(SMALL["approximations"]) * len(SMALL["eta_star"])
    ideal = [r for r in rows if r["eta_star"] == "ideal"]
    assert all(1.0 <= float(r["efficiency"]) <= 1.3 for r in ideal)
    svg = (out / "r.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_estimate_writes_json_only(tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "--config", str(write(tmp_path, SMALL)), "--out-dir", str(out), "--quiet"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["r.json"]


def test_solve(tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", "--config", str(write(tmp_path, SMALL)), "--out-dir", str(out), "--quiet"]) == 0
    data = json.loads((out / "r.json").read_text())
    assert data["reference"]["provenance"] == "analytic_shooting"
    assert len(data["reference"]["field"]["values"]) == 65


def test_reports_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["sweep", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
        texts.append((out / "r.json").read_text())
    assert strip_time(texts[0]) == strip_time(texts[1])
    assert (tmp_path / "run0" / "r.csv").read_bytes() == (tmp_path / "run1" / "r.csv").read_bytes()


def test_bundled_poisson_config(tmp_path, capsys):
    assert main(["sweep", "--config", str(CONFIGS / "poisson_p2.json"), "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "poisson_p2.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert all(1.0 <= float(r["efficiency"]) <= 1.3 for r in rows)
    assert "eff=" in capsys.readouterr().out


def test_bundled_obstacle_config(tmp_path):
    assert main(["sweep", "--config", str(CONFIGS / "obstacle_p2.json"), "--out-dir", str(tmp_path), "--quiet"]) == 0
    report = json.loads((tmp_path / "obstacle_p2.json").read_text())
    left, right = report["extras"]["contact_region"]
    assert left == pytest.approx(0.354, abs=0.01)
    assert right == pytest.approx(0.646, abs=0.01)
    assert all(case["sandwich_ok"] for case in report["cases"])


def test_ineq_exit_codes(tmp_path, capsys):
    assert main(["ineq", "--seed", "42", "--trials", "2000", "--p", "1.5", "3", "--out-dir", str(tmp_path), "--quiet"]) == 0
    data = json.loads((tmp_path / "ineq_report.json").read_text())
    assert data["seed"] == 42 and data["violations"] == 0
    # the published anisotropic constant fails for large exponents
    assert main(["ineq", "--trials", "2000", "--p", "10", "--out-dir", str(tmp_path), "--quiet"]) == 2


def test_constants_subcommand(capsys):
    assert main(["constants", "--p", "2", "--domain", "0", "1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["p"] == 2
    assert any(entry["provenance"] == "exact" for entry in data["constants"].values())


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pmajorant", "constants", "--p", "3", "--quiet"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "pmajorant", "--version"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.strip()
