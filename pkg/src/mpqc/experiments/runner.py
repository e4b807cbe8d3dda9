"""Run experiment grids, write artifacts and evaluate acceptance checks."""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..costs import CostSpec, stage_cost
from ..dynamics import ControlSystem, Plant, step
from ..errors import (ConfigError, InfeasibleSetpoint, InfeasibleTerminalConstraint, MpqcError,
                      SolverDiverged)
from ..mpc import Mode, MpqcConfig, Scheme, SolveRecord, TrajectoryLog, run_mpqc
from ..solvers import NotAnEigenstate, compute_target_input, solve_qoc, solve_setpoint, solve_tec
from ..states import StateKind, fidelity
from . import io, plotting
from .config import parse_spec

OUTPUT_ROOT_ENV = "MPQC_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "results"


@dataclass
class RunSummary:
    """Outcome of one grid point.  Failed runs carry ``status != "ok"`` and no metrics."""

    run_id: str
    label: str
    scheme: str
    target: str
    eps: float
    L: int
    M: int
    mode: str
    status: str
    final_fidelity: object
    total_cost: object
    wall_time: float
    iterations: int
    satisfaction_rate: object
    n_solves: int
    error: object = None
    csv: object = None

    @property
    def ok(self):
        return self.status == "ok"


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentResult:
    spec: object
    runs: list
    checks: list
    out_dir: Path
    traces: dict

    @property
    def failed_runs(self):
        return [r for r in self.runs if not r.ok]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def output_root(override=None):
    if override is not None:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


# -- building blocks ------------------------------------------------------------

def build_system(spec):
    s = spec.system
    return ControlSystem.from_hamiltonians(s["H0"], s["H"], s["dt"], s["box_lo"], s["box_hi"],
                                           StateKind(s["state_kind"]))


def build_cost(spec, sys, target):
    """CostSpec for one target.  ``u_ref = "target"`` fails if no constant input holds it."""
    c = spec.cost
    u_target = None
    if target.kind == StateKind.KET:
        ut = compute_target_input(sys, target)
        if not isinstance(ut, NotAnEigenstate):
            u_target = ut
    if isinstance(c["u_ref"], str):
        if c["u_ref"] == "zero":
            u_ref = np.zeros(sys.m)
        elif u_target is None:
            raise ConfigError("$.cost.u_ref", "no constant input keeps this target stationary")
        else:
            u_ref = u_target
    else:
        u_ref = c["u_ref"]
    return CostSpec(target, c["R"], u_ref, alpha=c["alpha"], beta=c["beta"], eta=c["eta"],
                    S=c["S"], u_target=u_target)


def _slug(key, index):
    names = {"0": "0", "1": "1", "+": "plus", "-": "minus", "+i": "plusi", "-i": "minusi"}
    if key in names:
        return names[key]
    if all(ch in "01+-" for ch in key):
        return key.replace("+", "p").replace("-", "m")
    return f"target{index}"


def run_id(label, target_slug, L, eps):
    return f"{label}__{target_slug}__L{L}__eps{eps:+.4f}"


def first_solve_feasible(scheme, sys, spec, x0, L, opts):
    solve = solve_tec if Scheme(scheme) == Scheme.TEC else solve_setpoint
    try:
        solve(sys, spec, x0, L, opts)
    except (InfeasibleTerminalConstraint, InfeasibleSetpoint):
        return False
    return True


def min_feasible_horizon(scheme, sys, spec, x0, N, opts):
    """Smallest L in [1, N] whose first solve meets the constraint (bisection).

    Assumes feasibility is monotone in L, which holds whenever holding the
    target input after reaching it is admissible.
    """
    if not first_solve_feasible(scheme, sys, spec, x0, N, opts):
        raise InfeasibleTerminalConstraint(f"no feasible horizon up to N={N}")
    lo, hi = 0, N       # lo infeasible (or 0), hi feasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if first_solve_feasible(scheme, sys, spec, x0, mid, opts):
            hi = mid
        else:
            lo = mid
    return hi


def replay(true_sys, spec, x0, inputs, scheme, M, solves):
    """Apply a fixed input sequence to ``true_sys`` and log the realized trajectory."""
    states = [x0]
    for u in inputs:
        states.append(step(true_sys, states[-1], u))
    fid = np.array([fidelity(s, spec.x_ref) for s in states])
    ell = np.array([stage_cost(spec, states[k], inputs[k], k) for k in range(len(inputs))])
    return TrajectoryLog(scheme, M, states, np.asarray(inputs), fid, ell, solves)


def _true_system(spec, sys, eps):
    if eps == 0:
        return sys
    return sys.with_drift(sys.hamiltonian_offset(eps * spec.system["mismatch"]))


def _summary(rid, label, scheme, target, eps, L, M, mode, log=None, cspec=None, csv=None,
             status="ok", error=None, wall_time=0.0):
    if log is None:
        return RunSummary(rid, label, scheme, target, float(eps), int(L), int(M), mode, status,
                          None, None, float(wall_time), 0, None, 0, error, None)
    return RunSummary(
        rid, label, scheme, target, float(eps), int(L), int(M), mode, status,
        float(np.clip(log.fidelity[-1], 0.0, 1.0)), float(log.total_cost(cspec)),
        float(log.wall_time), int(log.iterations), float(log.satisfaction_rate()),
        len(log.solves), error, csv,
    )


def _status_of(exc):
    if isinstance(exc, (InfeasibleTerminalConstraint, InfeasibleSetpoint)):
        return "infeasible"
    if isinstance(exc, SolverDiverged):
        return "diverged"
    return "error"


# -- tasks (each is independent and may run in a worker process) ----------------------

def _task_mpqc(doc, task, out_dir):
    spec = parse_spec(doc)
    sys = build_system(spec)
    entry = spec.schemes[task["scheme_index"]]
    ti, eps = task["target_index"], task["eps"]
    target = spec.sweep["target_states"][ti]
    tkey = spec.sweep["target_keys"][ti]
    slug = _slug(tkey, ti)
    opts = entry.solver.replace(rng_seed=spec.seed)
    L = task["L"]
    x0 = spec.initial_state
    try:
        cspec = build_cost(spec, sys, target)
        if L == "min_feasible":
            L = min_feasible_horizon(entry.scheme, sys, cspec, x0, spec.N, opts)
            if entry.M != "L":
                L = max(L, entry.M)
    except (MpqcError, ValueError) as e:
        # an unreachable target is reported at the longest horizon tried
        L = spec.N if L == "min_feasible" else L
        rid = run_id(entry.label, slug, L, eps)
        return [(_summary(rid, entry.label, entry.scheme.value, tkey, eps, L, entry.m_for(L),
                          entry.mode.value, status=_status_of(e), error=str(e)), None)]
    M = entry.m_for(L)

    rid = run_id(entry.label, slug, L, eps)
    cfg = MpqcConfig(entry.scheme, L, M, spec.N, entry.mode, opts, entry.shrink_horizon)
    start = time.perf_counter()
    try:
        if entry.mode == Mode.CLOSED_LOOP:
            plant = Plant.with_drift_error(sys, spec.system["mismatch"], eps, x0)
            log = run_mpqc(cfg, sys, cspec, plant=plant)
        else:
            log = run_mpqc(cfg, sys, cspec, x0=x0)
            if eps != 0:
                log = replay(_true_system(spec, sys, eps), cspec, x0, log.inputs, log.scheme,
                             log.M, log.solves)
    except (MpqcError, ValueError) as e:
        return [(_summary(rid, entry.label, entry.scheme.value, tkey, eps, L, M, entry.mode.value,
                          status=_status_of(e), error=str(e),
                          wall_time=time.perf_counter() - start), None)]
    csv_name = f"runs/{rid}.csv"
    io.write_log_csv(out_dir / csv_name, log, sys.m)
    s = _summary(rid, entry.label, entry.scheme.value, tkey, eps, L, M, entry.mode.value,
                 log, cspec, csv_name)
    return [(s, _trace(log))]


def _task_qoc(doc, task, out_dir):
    """One full-horizon solve on the nominal model, replayed on the plant for every eps."""
    spec = parse_spec(doc)
    sys = build_system(spec)
    ti = task["target_index"]
    tkey = spec.sweep["target_keys"][ti]
    slug = _slug(tkey, ti)
    opts = spec.baseline_qoc["solver"].replace(rng_seed=spec.seed)
    x0, N = spec.initial_state, spec.N
    out = []
    try:
        cspec = build_cost(spec, sys, spec.sweep["target_states"][ti])
        start = time.perf_counter()
        res = solve_qoc(sys, cspec, x0, N, opts)
        elapsed = time.perf_counter() - start
    except (MpqcError, ValueError) as e:
        for eps in spec.sweep["eps"]:
            rid = run_id("qoc", slug, N, eps)
            out.append((_summary(rid, "qoc", "qoc", tkey, eps, N, N, "open",
                                 status=_status_of(e), error=str(e)), None))
        return out
    record = SolveRecord(t=0, horizon=N, jstar=float(res.cost), residual=0.0,
                         iterations=int(res.iterations), wall_time=elapsed,
                         converged=bool(res.converged), feasible=True)
    for eps in spec.sweep["eps"]:
        rid = run_id("qoc", slug, N, eps)
        log = replay(_true_system(spec, sys, eps), cspec, x0, res.u_opt, Scheme.BASIC, N, [record])
        csv_name = f"runs/{rid}.csv"
        io.write_log_csv(out_dir / csv_name, log, sys.m)
        out.append((_summary(rid, "qoc", "qoc", tkey, eps, N, N, "open", log, cspec, csv_name),
                    _trace(log)))
    return out


def _trace(log):
    return {"fidelity": np.asarray(log.fidelity), "inputs": np.asarray(log.inputs)}


def _dispatch(args):
    kind, doc, task, out_dir = args
    fn = _task_qoc if kind == "qoc" else _task_mpqc
    return fn(doc, task, Path(out_dir))


def grid_tasks(spec):
    """Every grid point, in a fixed order: baseline per target, then schemes."""
    tasks = []
    n_targets = len(spec.sweep["targets"])
    if spec.baseline_qoc["enabled"]:
        tasks += [("qoc", {"target_index": ti}) for ti in range(n_targets)]
    for ti in range(n_targets):
        for eps in spec.sweep["eps"]:
            for si, entry in enumerate(spec.schemes):
                Ls = [entry.L] if entry.L is not None else spec.sweep["L"]
                for L in Ls:
                    tasks.append(("mpqc", {"scheme_index": si, "target_index": ti,
                                           "eps": eps, "L": L}))
    return tasks


# -- coordinator --------------------------------------------------------------------

def run_experiment(spec, root=None, workers=1, plots=True):
    """Execute the whole grid; per-run failures are recorded, not raised.

    Writes ``runs/<run_id>.csv`` and ``runs/<run_id>.json`` per run, plus
    ``summary.json``, ``summary.csv`` and SVG plots under
    ``<root>/<output_dir>``.  Numeric outputs depend only on the spec (and
    its seed); wall times naturally vary.
    """
    out_dir = output_root(root) / spec.output_dir
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    doc = spec.to_dict()
    jobs = [(kind, doc, task, str(out_dir)) for kind, task in grid_tasks(spec)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_dispatch, jobs))
    else:
        results = [_dispatch(j) for j in jobs]

    runs, traces = [], {}
    for group in results:
        for summary, trace in group:
            runs.append(summary)
            if trace is not None:
                traces[summary.run_id] = trace
    for r in runs:
        d = io.summary_dict(r)
        io.validate_summary(d)
        io.write_json(out_dir / "runs" / f"{r.run_id}.json", d)

    checks = evaluate_acceptance(spec, runs)
    index = {"name": spec.name, "seed": spec.seed, "runs": [io.summary_dict(r) for r in runs],
             "acceptance": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]}
    io.validate_index(index)
    io.write_json(out_dir / "summary.json", index)
    io.write_summary_csv(out_dir / "summary.csv", index["runs"])
    result = ExperimentResult(spec, runs, checks, out_dir, traces)
    if plots:
        write_plots(result)
    return result


def write_plots(result):
    spec, out = result.spec, result.out_dir
    sys_lo, sys_hi = spec.system["box_lo"], spec.system["box_hi"]
    eps_grid = spec.sweep["eps"]
    eps0 = min(eps_grid, key=abs)
    for ti, tkey in enumerate(spec.sweep["target_keys"]):
        slug = _slug(tkey, ti)
        mine = [r for r in result.runs if r.target == tkey and r.ok and r.run_id in result.traces]
        at0 = [r for r in mine if r.eps == eps0]
        if at0:
            plotting.plot_fidelity(
                out / f"fidelity__{slug}.svg",
                [(f"{r.label} L={r.L}", result.traces[r.run_id]["fidelity"]) for r in at0],
                title=f"{spec.name}: target {tkey}, eps={eps0:g}")
            for r in at0:
                plotting.plot_inputs(out / f"inputs__{r.run_id}.svg",
                                     result.traces[r.run_id]["inputs"], sys_lo, sys_hi,
                                     title=f"{r.label} L={r.L} target {tkey}")
        if len(eps_grid) > 1:
            series = []
            for label in sorted({r.label for r in mine}):
                rs = sorted((r for r in mine if r.label == label), key=lambda r: r.eps)
                series.append((label, [r.eps for r in rs], [r.final_fidelity for r in rs]))
            plotting.plot_fidelity_vs_eps(out / f"fidelity_vs_eps__{slug}.svg", series,
                                          title=f"{spec.name}: target {tkey}")


# -- acceptance --------------------------------------------------------------------------

def _metric(run, name):
    if not run.ok:
        return None
    if name == "final_infidelity":
        return 1.0 - run.final_fidelity
    return getattr(run, name)


def _selected(run, where):
    if "label" in where and run.label != where["label"]:
        return False
    if "target" in where and run.target != where["target"]:
        return False
    if "L" in where and run.L != where["L"]:
        return False
    if "min_L" in where and run.L < where["min_L"]:
        return False
    if "min_abs_eps" in where and abs(run.eps) < where["min_abs_eps"] - 1e-12:
        return False
    return True


def _compare(a, op, b, tol):
    if op == ">=":
        return a >= b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == "<":
        return a < b
    return abs(a - b) <= tol


def evaluate_acceptance(spec, runs):
    """Evaluate every configured check; a check fails if any selected run fails it."""
    out = []
    for chk in spec.acceptance:
        sel = [r for r in runs if _selected(r, chk.where)]
        if chk.relative_to is not None:
            sel = [r for r in sel if r.label != chk.relative_to]
        if not sel:
            out.append(CheckOutcome(chk.name, False, "no runs selected"))
            continue
        bad = []
        for r in sel:
            a = _metric(r, chk.metric)
            if chk.relative_to is None:
                b = chk.value
            else:
                partners = [p for p in runs if p.label == chk.relative_to
                            and p.target == r.target and p.eps == r.eps]
                if len(partners) != 1:
                    bad.append(f"{r.run_id}: {len(partners)} '{chk.relative_to}' partners")
                    continue
                pm = _metric(partners[0], chk.metric)
                b = None if pm is None else (pm if chk.op == "==" else chk.value * pm)
            if a is None or b is None:
                bad.append(f"{r.run_id}: run failed")
            elif not _compare(a, chk.op, b, chk.tol):
                bad.append(f"{r.run_id}: {chk.metric}={a:.6g} vs {b:.6g}")
        detail = f"{len(sel) - len(bad)}/{len(sel)} runs pass"
        if bad:
            detail += "; " + "; ".join(bad[:5])
        out.append(CheckOutcome(chk.name, not bad, detail))
    return out


# -- QOC comparison ---------------------------------------------------------------------

COMPARE_COLUMNS = ["target", "label", "L", "mpqc_cost", "mpqc_time", "qoc_cost", "qoc_time"]


def compare_qoc_vs_mpqc(spec, root=None, workers=1):
    """Basic MPQC over the L grid against one direct full-horizon solve.

    Returns ``(rows, result)``; rows have the columns of ``COMPARE_COLUMNS`` and
    are also written to ``comparison.csv`` next to a cost-vs-L plot per target.
    """
    if not spec.baseline_qoc["enabled"]:
        raise ConfigError("$.baseline_qoc.enabled", "comparison needs the QOC baseline")
    if not any(s.scheme == Scheme.BASIC for s in spec.schemes):
        raise ConfigError("$.schemes", "comparison needs at least one basic scheme")
    result = run_experiment(spec, root, workers)
    basic = {s.label for s in spec.schemes if s.scheme == Scheme.BASIC}
    rows = []
    for r in result.runs:
        if r.label not in basic or not r.ok:
            continue
        q = [p for p in result.runs if p.label == "qoc" and p.target == r.target and p.eps == r.eps]
        if not q or not q[0].ok:
            continue
        rows.append({"target": r.target, "label": r.label, "L": r.L,
                     "mpqc_cost": r.total_cost, "mpqc_time": r.wall_time,
                     "qoc_cost": q[0].total_cost, "qoc_time": q[0].wall_time})
    io.write_rows_csv(result.out_dir / "comparison.csv", COMPARE_COLUMNS, rows)
    for ti, tkey in enumerate(spec.sweep["target_keys"]):
        for label in sorted(basic):
            mine = sorted((x for x in rows if x["target"] == tkey and x["label"] == label),
                          key=lambda x: x["L"])
            if mine:
                plotting.plot_cost_vs_L(
                    result.out_dir / f"cost_vs_L__{label}__{_slug(tkey, ti)}.svg", mine,
                    title=f"{spec.name}: {label} vs QOC, target {tkey}")
    return rows, result
