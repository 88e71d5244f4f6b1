import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from cascadebench.cli import main

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def smoke_config(tmp_path):
    doc = json.loads((ROOT / "configs" / "smoke.json").read_text())
    for key in ("interactions", "suppliers", "genres"):
        doc["dataset"][key] = str((ROOT / "configs" / doc["dataset"][key]).resolve())
    doc.update(n=60, num_eval_users=3, output_dir="out")
    path = tmp_path / "smoke.json"
    path.write_text(json.dumps(doc))
    return path


def test_run_writes_outputs(smoke_config, capsys):
    assert main(["run", "--config", str(smoke_config)]) == 0
    report = json.loads(capsys.readouterr().out)
    out = Path(report["output_dir"])
    assert report["runs"] == 4
    assert (out / "summary.csv").exists() and (out / "comparison.csv").exists()


def test_validate_data(smoke_config, capsys):
    assert main(["validate-data", "--config", str(smoke_config)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["dataset"]["items"] == 100
    assert Path(report["split_report"]).exists()


def test_sweep_c_list(smoke_config, capsys):
    assert main(["sweep", "--config", str(smoke_config), "--c", "0.5,2"]) == 0
    report = json.loads(capsys.readouterr().out)
    sweep = (Path(report["output_dir"]) / "sweep.csv").read_text().splitlines()
    assert len(sweep) == 3


def test_structured_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dataset": {"interactions": "nope.csv", "suppliers": "nope.tsv"},
                               "algorithms": [{"kind": "LinUCB"}], "output_dir": "o"}))
    assert main(["run", "--config", str(bad)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "nope.csv" in err["error"]


def test_missing_supplier_is_hard_error(smoke_config, tmp_path, capsys):
    doc = json.loads(smoke_config.read_text())
    sup = tmp_path / "partial.tsv"
    lines = Path(doc["dataset"]["suppliers"]).read_text().splitlines()
    sup.write_text("\n".join(lines[:-30]) + "\n")
    doc["dataset"]["suppliers"] = str(sup)
    smoke_config.write_text(json.dumps(doc))
    assert main(["validate-data", "--config", str(smoke_config)]) == 1
    assert "without a supplier" in json.loads(capsys.readouterr().err)["error"]


def test_module_entry_point(smoke_config, tmp_path):
    env_out = tmp_path / "env_out"
    proc = subprocess.run(
        [sys.executable, "-m", "cascadebench", "run", "--config", str(smoke_config)],
        capture_output=True,
        text=True,
        env={**os.environ, "CASCADEBENCH_OUTPUT_DIR": str(env_out)},
    )
    assert proc.returncode == 0, proc.stderr
    assert (env_out / "summary.csv").exists()
