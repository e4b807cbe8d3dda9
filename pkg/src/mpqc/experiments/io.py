"""Per-step CSV logs and JSON run summaries.

Per-step CSV columns, in this order:

    t, x_re_0 .. x_re_{n-1}, x_im_0 .. x_im_{n-1}, u_1 .. u_m,
    fidelity, stage_cost, jstar, residual

One row per realized state X_0 .. X_N (N + 1 rows).  States are flattened
row-major.  ``u_*`` and ``stage_cost`` are empty on the final row; ``jstar``
and ``residual`` are filled only on steps where a solve happened.  Floats are
written with ``repr`` so they read back bit-identically.
"""

import csv
import json
from dataclasses import asdict

import jsonschema
import numpy as np

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["run_id", "label", "scheme", "target", "eps", "L", "M", "mode", "status",
                 "final_fidelity", "total_cost", "wall_time", "iterations",
                 "satisfaction_rate", "n_solves", "error", "csv"],
    "additionalProperties": False,
    "properties": {
        "run_id": {"type": "string"},
        "label": {"type": "string"},
        "scheme": {"enum": ["basic", "tec", "setpoint", "qoc"]},
        "target": {"type": "string"},
        "eps": {"type": "number"},
        "L": {"type": "integer", "minimum": 1},
        "M": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["open", "closed"]},
        "status": {"enum": ["ok", "infeasible", "diverged", "error"]},
        "final_fidelity": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "total_cost": {"type": ["number", "null"]},
        "wall_time": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "satisfaction_rate": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "n_solves": {"type": "integer", "minimum": 0},
        "error": {"type": ["string", "null"]},
        "csv": {"type": ["string", "null"]},
    },
}

INDEX_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "seed", "runs", "acceptance"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "runs": {"type": "array", "items": SUMMARY_SCHEMA},
        "acceptance": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed", "detail"],
                "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"},
                               "detail": {"type": "string"}},
            },
        },
    },
}


def csv_header(n, m):
    return (["t"] + [f"x_re_{i}" for i in range(n)] + [f"x_im_{i}" for i in range(n)]
            + [f"u_{j + 1}" for j in range(m)] + ["fidelity", "stage_cost", "jstar", "residual"])


def _f(x):
    return repr(float(x))


def write_log_csv(path, log, m):
    """Write a :class:`~mpqc.mpc.TrajectoryLog` as the per-step CSV."""
    flat = [np.asarray(s.data).reshape(-1) for s in log.states]
    n = flat[0].size
    solves = {r.t: r for r in log.solves}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n, m))
        for t, x in enumerate(flat):
            row = [t] + [_f(v) for v in x.real] + [_f(v) for v in x.imag]
            if t < log.N:
                row += [_f(v) for v in log.inputs[t]]
                row += [_f(log.fidelity[t]), _f(log.stage_costs[t])]
            else:
                row += [""] * m + [_f(log.fidelity[t]), ""]
            rec = solves.get(t)
            row += [_f(rec.jstar), _f(rec.residual)] if rec else ["", ""]
            w.writerow(row)


def read_log_csv(path):
    """Read a per-step CSV back as ``(header, rows)``; empty cells become None."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[None if c == "" else (int(c) if i == 0 else float(c)) for i, c in enumerate(row)]
                for row in r]
    return header, rows


def summary_dict(summary):
    return asdict(summary)


def validate_summary(doc):
    jsonschema.validate(doc, SUMMARY_SCHEMA)


def validate_index(doc):
    jsonschema.validate(doc, INDEX_SCHEMA)


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


SUMMARY_COLUMNS = ["run_id", "label", "scheme", "target", "eps", "L", "M", "mode", "status",
                   "final_fidelity", "total_cost", "wall_time", "iterations",
                   "satisfaction_rate", "n_solves"]


def write_summary_csv(path, docs):
    """One delimited row per run (the machine-readable counterpart of the plots)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for d in docs:
            w.writerow(["" if d[c] is None else (_f(d[c]) if isinstance(d[c], float) else d[c])
                        for c in SUMMARY_COLUMNS])


def write_rows_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_f(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
