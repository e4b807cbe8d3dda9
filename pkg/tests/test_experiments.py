import copy
import json

import numpy as np
import pytest

from mpqc.errors import ConfigError
from mpqc.experiments import (bundled_names, compare_qoc_vs_mpqc, evaluate_acceptance,
                              parse_spec, read_config, run_experiment)
from mpqc.experiments.io import (INDEX_SCHEMA, SUMMARY_SCHEMA, csv_header, read_log_csv,
                                 validate_index, validate_summary)
from mpqc.experiments.runner import (RunSummary, build_cost, build_system,
                                     min_feasible_horizon, output_root)
from mpqc.solvers.common import SolverOptions
from mpqc.states import ket

TINY = {
    "version": 1,
    "name": "tiny",
    "seed": 3,
    "system": {
        "state_kind": "ket",
        "dt": 0.1,
        "N": 12,
        "drift": [{"coefficient": [1.0, 0.0], "word": "Z"}],
        "controls": [[{"coefficient": [1.0, 0.0], "word": "X"}],
                     [{"coefficient": [1.0, 0.0], "word": "Y"}]],
        "box": {"lo": -2.0, "hi": 2.0},
        "mismatch": [{"coefficient": [1.0, 0.0], "word": "X"}],
    },
    "initial_state": "0",
    "cost": {"alpha": 1.0, "beta": 1.0, "R": 1e-3, "eta": 0.0, "S": 0.0, "u_ref": "zero"},
    "sweep": {"targets": ["1", "+"], "L": [3, 6], "eps": [0.0, 0.5]},
    "schemes": [{"label": "basic", "scheme": "basic", "M": 1, "mode": "open", "solver": {}}],
    "baseline_qoc": {"enabled": True, "solver": {}},
    "acceptance": [
        {"name": "fidelity", "metric": "final_fidelity", "op": ">=", "value": 0.5,
         "where": {"label": "basic"}},
    ],
}


def tiny(**changes):
    doc = copy.deepcopy(TINY)
    for path, value in changes.items():
        node = doc
        keys = path.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return doc


def test_bundled_configs_round_trip():
    names = bundled_names()
    assert {"table1", "table2", "table3", "fig3-compare", "fig4-robustness"} <= set(names)
    for name in names:
        spec = read_config(name)
        again = parse_spec(json.loads(spec.to_json()))
        assert again.to_dict() == spec.to_dict()


def test_read_config_from_file(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    assert read_config(str(p)).name == "tiny"
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "missing.json"))
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "bad.json"))


@pytest.mark.parametrize("axis", ["targets", "L", "eps"])
def test_empty_sweep_axis_is_named(axis):
    with pytest.raises(ConfigError, match=f"sweep axis '{axis}' is empty") as info:
        parse_spec(tiny(**{f"sweep.{axis}": []}))
    assert info.value.path == f"$.sweep.{axis}"


@pytest.mark.parametrize("change,path", [
    ({"system.dt": -1}, "$.system.dt"),
    ({"system.N": "ten"}, "$.system.N"),
    ({"system.box": {"lo": 1.0, "hi": -1.0}}, "$.system.box"),
    ({"cost.alpha": -2}, "$.cost.alpha"),
    ({"cost.R": [[1.0]]}, "$.cost.R"),
    ({"sweep.L": [0]}, "$.sweep.L[0]"),
    ({"sweep.targets": ["q"]}, "$.sweep.targets[0]"),
    ({"initial_state": "00"}, "$.initial_state"),
    ({"version": 2}, "$.version"),
    ({"schemes": [{"label": "x", "scheme": "magic", "M": 1, "mode": "open"}]},
     "$.schemes[0].scheme"),
    ({"schemes": [{"label": "x", "scheme": "basic", "M": 4, "mode": "open"}]},
     "$.schemes[0].M"),
    ({"schemes": [{"label": "qoc", "scheme": "basic", "M": 1, "mode": "open"}]}, "$.schemes"),
    ({"schemes": [{"label": "x", "scheme": "basic", "M": 1, "mode": "open",
                   "solver": {"rng_seed": 4}}]}, "$.schemes[0].solver.rng_seed"),
    ({"schemes": [{"label": "x", "scheme": "basic", "M": 1, "mode": "open",
                   "solver": {"bogus": 4}}]}, "$.schemes[0].solver"),
    ({"acceptance": [{"metric": "speed", "op": ">="}]}, "$.acceptance[0].metric"),
    ({"extra": 1}, "$.extra"),
])
def test_config_errors_carry_field_paths(change, path):
    with pytest.raises(ConfigError) as info:
        parse_spec(tiny(**change))
    assert info.value.path == path


def test_missing_physics_field_is_an_error():
    doc = tiny()
    del doc["system"]["dt"]
    with pytest.raises(ConfigError) as info:
        parse_spec(doc)
    assert info.value.path == "$.system.dt"


def test_eps_needs_mismatch():
    doc = tiny()
    del doc["system"]["mismatch"]
    with pytest.raises(ConfigError, match="mismatch"):
        parse_spec(doc)


def test_raw_matrix_and_raw_state():
    doc = tiny(**{"system.drift": {"matrix": {"re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}},
                  "initial_state": {"re": [1, 0], "im": [0, 0]}})
    spec = parse_spec(doc)
    np.testing.assert_array_equal(spec.system["H0"], np.diag([1.0, -1.0]))
    with pytest.raises(ConfigError):
        parse_spec(tiny(**{"system.drift": {"matrix": {"re": [[1, 1], [0, 1]],
                                                       "im": [[0, 0], [0, 0]]}}}))


def test_build_cost_target_input():
    doc = tiny(**{"cost.u_ref": "target"})
    spec = parse_spec(doc)
    sys = build_system(spec)
    cost = build_cost(spec, sys, ket("1"))
    np.testing.assert_allclose(cost.u_ref, [0.0, 0.0], atol=1e-14)
    with pytest.raises(ConfigError):
        build_cost(spec, sys, ket("+"))   # Z + u_x X + u_y Y cannot hold |+>


def test_min_feasible_horizon_is_minimal():
    spec = parse_spec(tiny())
    sys = build_system(spec)
    cost = build_cost(spec, sys, ket("1"))
    opts = SolverOptions()
    L = min_feasible_horizon("tec", sys, cost, ket("0"), 12, opts)
    from mpqc.experiments.runner import first_solve_feasible
    assert first_solve_feasible("tec", sys, cost, ket("0"), L, opts)
    assert L == 1 or not first_solve_feasible("tec", sys, cost, ket("0"), L - 1, opts)


def _runs(result):
    return {r.run_id: r for r in result.runs}


def test_run_experiment_outputs(tmp_path):
    spec = parse_spec(tiny())
    result = run_experiment(spec, tmp_path)
    # 2 targets x 2 L x 2 eps basic runs, plus one QOC per target replayed at each eps
    assert len(result.runs) == 8 + 4
    assert result.out_dir == tmp_path / "tiny"
    for r in result.runs:
        assert r.ok
        doc = json.loads((result.out_dir / "runs" / f"{r.run_id}.json").read_text())
        validate_summary(doc)
        header, rows = read_log_csv(result.out_dir / r.csv)
        assert header == csv_header(2, 2)
        assert len(rows) == spec.N + 1
        assert rows[-1][header.index("u_1")] is None   # no input on the final row
        assert rows[0][header.index("jstar")] is not None
        assert rows[-1][header.index("fidelity")] == pytest.approx(r.final_fidelity, abs=0)
    index = json.loads((result.out_dir / "summary.json").read_text())
    validate_index(index)
    assert (result.out_dir / "summary.csv").read_text().count("\n") == len(result.runs) + 1
    svgs = sorted(p.name for p in result.out_dir.glob("*.svg"))
    assert any(n.startswith("fidelity__") for n in svgs)
    assert any(n.startswith("fidelity_vs_eps__") for n in svgs)
    assert result.passed


def test_rerun_is_bit_identical(tmp_path):
    spec = parse_spec(tiny(**{"sweep.L": [3], "sweep.eps": [0.5]}))
    a = run_experiment(spec, tmp_path / "a", plots=False)
    b = run_experiment(spec, tmp_path / "b", workers=2, plots=False)
    for r in a.runs:
        ca = (a.out_dir / r.csv).read_bytes()
        cb = (b.out_dir / r.csv).read_bytes()
        assert ca == cb
        other = _runs(b)[r.run_id]
        assert (r.final_fidelity, r.total_cost, r.iterations) == \
            (other.final_fidelity, other.total_cost, other.iterations)


def test_solver_failure_is_recorded_not_raised(tmp_path):
    doc = tiny(**{"schemes": [{"label": "tec", "scheme": "tec", "M": 1, "mode": "open", "L": 1}],
                  "system.box": {"lo": -0.1, "hi": 0.1}, "sweep.L": [3], "sweep.eps": [0.0],
                  "sweep.targets": ["1"], "baseline_qoc": {"enabled": False, "solver": {}},
                  "acceptance": []})
    result = run_experiment(parse_spec(doc), tmp_path, plots=False)
    (run,) = result.runs
    assert run.status == "infeasible" and run.error
    assert run.final_fidelity is None
    validate_summary(json.loads((result.out_dir / "runs" / f"{run.run_id}.json").read_text()))
    assert result.failed_runs == [run]


def test_min_feasible_scheme_runs(tmp_path):
    doc = tiny(**{"schemes": [{"label": "tec", "scheme": "tec", "M": 1, "mode": "open",
                               "L": "min_feasible", "shrink_horizon": True}],
                  "sweep.eps": [0.0], "sweep.targets": ["1"],
                  "baseline_qoc": {"enabled": False, "solver": {}}, "acceptance": []})
    result = run_experiment(parse_spec(doc), tmp_path, plots=False)
    (run,) = result.runs
    assert run.ok and 1 <= run.L <= 12
    assert run.final_fidelity >= 1 - 1e-6


def _summary(label, target="1", eps=0.0, L=3, fid=0.9, cost=1.0, status="ok"):
    ok = status == "ok"
    return RunSummary(f"{label}-{target}-{eps}-{L}", label, "basic", target, eps, L, 1, "open",
                      status, fid if ok else None, cost if ok else None, 0.1, 5,
                      1.0 if ok else None, 1, None if ok else "boom", None)


def test_acceptance_absolute_and_relative():
    doc = tiny(acceptance=[
        {"name": "abs", "metric": "final_fidelity", "op": ">=", "value": 0.8},
        {"name": "rel", "metric": "total_cost", "op": "<=", "value": 1.1, "relative_to": "qoc",
         "where": {"min_L": 3}},
        {"name": "eq", "metric": "total_cost", "op": "==", "relative_to": "qoc", "tol": 1e-9,
         "where": {"L": 6}},
    ])
    spec = parse_spec(doc)
    runs = [_summary("basic", L=3, cost=1.05), _summary("basic", L=6, cost=1.0),
            _summary("qoc", L=12, cost=1.0, fid=0.95)]
    assert [c.passed for c in evaluate_acceptance(spec, runs)] == [True, True, True]
    runs[0] = _summary("basic", L=3, cost=1.2)
    runs[1] = _summary("basic", L=6, cost=1.0 + 1e-6)
    assert [c.passed for c in evaluate_acceptance(spec, runs)] == [True, False, False]
    runs[0] = _summary("basic", L=3, status="error")
    out = evaluate_acceptance(spec, runs)
    assert not out[0].passed and "run failed" in out[0].detail


def test_acceptance_with_nothing_selected_fails():
    doc = tiny(acceptance=[{"name": "x", "metric": "final_fidelity", "op": ">=", "value": 0.5,
                            "where": {"target": "nowhere"}}])
    (out,) = evaluate_acceptance(parse_spec(doc), [_summary("basic")])
    assert not out.passed


def test_compare_rows(tmp_path):
    doc = tiny(**{"sweep.L": [3, 12], "sweep.eps": [0.0], "sweep.targets": ["1"],
                  "schemes": [{"label": "basic", "scheme": "basic", "M": "L", "mode": "open"}],
                  "acceptance": []})
    rows, result = compare_qoc_vs_mpqc(parse_spec(doc), tmp_path)
    assert [r["L"] for r in rows] == [3, 12]
    full = rows[-1]
    assert full["mpqc_cost"] == pytest.approx(full["qoc_cost"], abs=1e-9)
    text = (result.out_dir / "comparison.csv").read_text().splitlines()
    assert text[0] == "target,label,L,mpqc_cost,mpqc_time,qoc_cost,qoc_time"
    assert len(text) == 3
    assert list(result.out_dir.glob("cost_vs_L__basic__*.svg"))


def test_compare_needs_baseline(tmp_path):
    doc = tiny(baseline_qoc={"enabled": False, "solver": {}})
    with pytest.raises(ConfigError):
        compare_qoc_vs_mpqc(parse_spec(doc), tmp_path)


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MPQC_OUTPUT_ROOT", str(tmp_path))
    assert output_root() == tmp_path
    assert output_root("elsewhere").name == "elsewhere"


def test_schemas_are_consistent():
    assert set(SUMMARY_SCHEMA["required"]) == set(RunSummary.__dataclass_fields__)
    assert INDEX_SCHEMA["properties"]["runs"]["items"] is SUMMARY_SCHEMA
