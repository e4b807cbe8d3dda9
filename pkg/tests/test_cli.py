import json
import subprocess
import sys

import pytest

from mpqc.cli import main
from test_experiments import tiny


def _write(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_validate_bundled(capsys):
    assert main(["validate", "table1"]) == 0
    assert "table1: valid" in capsys.readouterr().out


def test_validate_invalid_config(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, tiny(**{"sweep.L": []}))]) == 1
    assert "$.sweep.L" in capsys.readouterr().err


def test_unknown_config_name(capsys):
    assert main(["validate", "no-such-experiment"]) == 1


def test_usage_errors_exit_1(capsys):
    for argv in (["check-grad", "--trials", "0"], ["check-grad", "--trials", "x"], ["frobnicate"],
                 []):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 1


def test_check_grad_is_deterministic(capsys):
    assert main(["check-grad", "--trials", "5", "--seed", "9"]) == 0
    first = capsys.readouterr().out
    assert main(["check-grad", "--trials", "5", "--seed", "9"]) == 0
    assert capsys.readouterr().out == first
    assert "max relative error" in first


def test_run_writes_under_out(tmp_path, capsys):
    doc = tiny(**{"sweep.L": [3], "sweep.eps": [0.0], "sweep.targets": ["1"]})
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] fidelity" in out
    assert (tmp_path / "o" / "tiny" / "summary.json").exists()


def test_strict_acceptance_failure_exits_3(tmp_path, capsys):
    doc = tiny(**{"sweep.L": [3], "sweep.eps": [0.0], "sweep.targets": ["1"],
                  "acceptance": [{"name": "impossible", "metric": "final_fidelity", "op": ">",
                                  "value": 1.0}]})
    spec = _write(tmp_path, doc)
    args = ["run", spec, "--out", str(tmp_path), "--no-plots"]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 3
    assert "[FAIL] impossible" in capsys.readouterr().out


def test_solver_failure_exits_2(tmp_path, capsys):
    doc = tiny(**{"schemes": [{"label": "tec", "scheme": "tec", "M": 1, "mode": "open", "L": 1}],
                  "system.box": {"lo": -0.1, "hi": 0.1}, "sweep.L": [3], "sweep.eps": [0.0],
                  "sweep.targets": ["1"], "baseline_qoc": {"enabled": False, "solver": {}},
                  "acceptance": []})
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path), "--strict"]) == 2
    assert "error:" in capsys.readouterr().err


def test_compare_prints_table(tmp_path, capsys):
    doc = tiny(**{"sweep.L": [3, 12], "sweep.eps": [0.0], "sweep.targets": ["1"],
                  "schemes": [{"label": "basic", "scheme": "basic", "M": "L", "mode": "open"}],
                  "acceptance": []})
    assert main(["compare", _write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "target,label,L,mpqc_cost,mpqc_time,qoc_cost,qoc_time" in out


def test_compare_without_baseline_is_config_error(tmp_path, capsys):
    doc = tiny(baseline_qoc={"enabled": False, "solver": {}})
    assert main(["compare", _write(tmp_path, doc), "--out", str(tmp_path)]) == 1


def test_output_root_env_var(tmp_path):
    doc = tiny(**{"sweep.L": [3], "sweep.eps": [0.0], "sweep.targets": ["1"]})
    spec = _write(tmp_path, doc)
    env_root = tmp_path / "from-env"
    proc = subprocess.run([sys.executable, "-m", "mpqc.cli", "run", spec, "--no-plots"],
                          cwd=tmp_path, capture_output=True, text=True,
                          env={"MPQC_OUTPUT_ROOT": str(env_root), "PATH": ""})
    assert proc.returncode == 0, proc.stderr
    assert (env_root / "tiny" / "summary.json").exists()
    assert not (tmp_path / "results").exists()
