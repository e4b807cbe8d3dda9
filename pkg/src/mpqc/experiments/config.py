"""Experiment configuration: parsing, validation and serialization.

An experiment is a JSON document::

    {
      "version": 1,
      "name": "table1",
      "seed": 0,
      "output_dir": "table1",
      "system": {
        "state_kind": "ket",
        "dt": 0.05,
        "N": 100,
        "drift": [{"coefficient": [-0.5, 0.0], "word": "Z"}],
        "controls": [[{"coefficient": [1.0, 0.0], "word": "X"}], ...],
        "box": {"lo": -1.0, "hi": 1.0},
        "mismatch": [{"coefficient": [1.0, 0.0], "word": "X"}]      (optional)
      },
      "initial_state": "0",
      "cost": {"alpha": 1.0, "beta": 1.0, "R": 1e-4, "eta": 0.0, "S": 0.0,
               "u_ref": "zero"},
      "sweep": {"targets": ["1", "+", "-"], "L": [10], "eps": [0.0]},
      "schemes": [{"label": "basic", "scheme": "basic", "M": 1, "mode": "open",
                   "shrink_horizon": false, "solver": {}}],
      "baseline_qoc": {"enabled": false, "solver": {}},
      "acceptance": []
    }

Hamiltonian terms are Pauli strings with complex coefficients; a raw matrix
may be given instead as ``{"matrix": {"re": [[...]], "im": [[...]]}}``.
States are names accepted by :func:`mpqc.states.ket` or raw vectors
``{"re": [...], "im": [...]}``.  ``R`` and ``S`` are a scalar (times the
identity) or a full matrix.  ``u_ref`` is ``"zero"``, ``"target"`` (the
constant input that keeps the target stationary) or an explicit m-vector.

A scheme entry may pin its own horizon with ``"L": <int>`` or ask for the
shortest horizon whose first solve is feasible with ``"L": "min_feasible"``;
otherwise it runs once per value of ``sweep.L``.  ``"M": "L"`` applies the
whole horizon per solve.

Physics fields (dt, N, box, Hamiltonian, cost weights) have no defaults.
Every error is a :class:`ConfigError` naming the offending field.
"""

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..mpc import Mode, Scheme
from ..pauli import pauli_word
from ..solvers.common import SolverOptions
from ..states import GeneralizedState, StateKind, density, ket

VERSION = 1
METRICS = ("final_fidelity", "final_infidelity", "total_cost", "wall_time",
           "satisfaction_rate", "iterations")
OPS = (">=", "<=", ">", "<", "==")


# -- small field readers ---------------------------------------------------------

def _get(d, key, path, kind=None, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = d[key]
    if kind is not None and not _is(value, kind):
        raise ConfigError(f"{path}.{key}", f"expected {kind}, got {type(value).__name__}")
    return value


def _is(value, kind):
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    if kind == "list":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    raise ValueError(kind)


def _no_extra(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", "unknown field")


def _number(value, path):
    if not _is(value, "number") or not np.isfinite(value):
        raise ConfigError(path, "expected a finite number")
    return float(value)


def _complex(value, path):
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(path, "expected [re, im]")
    return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _complex_array(d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected {re, im}")
    _no_extra(d, ("re", "im"), path)
    try:
        re = np.array(_get(d, "re", path), dtype=float)
        im = np.array(d.get("im", np.zeros_like(re).tolist()), dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(path, f"not a numeric array ({e})") from None
    if re.shape != im.shape:
        raise ConfigError(path, "re and im parts differ in shape")
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise ConfigError(path, "non-finite entries")
    return re + 1j * im


def _hamiltonian(terms, path, dim=None):
    """Sum of Pauli terms, or a raw matrix."""
    if isinstance(terms, dict):
        _no_extra(terms, ("matrix",), path)
        h = _complex_array(_get(terms, "matrix", path), f"{path}.matrix")
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigError(f"{path}.matrix", "must be square")
    else:
        if not isinstance(terms, list) or not terms:
            raise ConfigError(path, "expected a non-empty list of Pauli terms or {matrix}")
        h = None
        for i, term in enumerate(terms):
            p = f"{path}[{i}]"
            _no_extra(term if isinstance(term, dict) else {}, ("coefficient", "word"), p)
            coef = _complex(_get(term, "coefficient", p), f"{p}.coefficient")
            word = _get(term, "word", p, "string")
            try:
                mat = pauli_word(word)
            except ValueError as e:
                raise ConfigError(f"{p}.word", str(e)) from None
            if h is not None and mat.shape != h.shape:
                raise ConfigError(f"{p}.word", "Pauli words of differing length")
            h = coef * mat if h is None else h + coef * mat
    if dim is not None and h.shape[0] != dim:
        raise ConfigError(path, f"dimension {h.shape[0]} differs from the drift dimension {dim}")
    if np.linalg.norm(h - h.conj().T) > 1e-12:
        raise ConfigError(path, "Hamiltonian is not Hermitian")
    return h


def _weight(value, m, path):
    """Scalar (times identity) or m x m matrix."""
    if _is(value, "number"):
        return _number(value, path) * np.eye(m)
    try:
        mat = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a number or a matrix") from None
    if mat.shape != (m, m):
        raise ConfigError(path, f"expected a {m}x{m} matrix, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.T)) > 1e-12 or np.min(np.linalg.eigvalsh(mat)) < -1e-12:
        raise ConfigError(path, "must be symmetric positive semidefinite")
    return mat


# -- parsed pieces ------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeEntry:
    label: str
    scheme: Scheme
    M: object             # int or "L"
    mode: Mode
    shrink_horizon: bool
    L: object             # None, int or "min_feasible"
    solver: SolverOptions

    def m_for(self, L):
        return L if self.M == "L" else self.M


@dataclass(frozen=True)
class AcceptanceCheck:
    """``metric(run) op value`` for every selected run; with ``relative_to``,
    ``metric(run) op value * metric(partner)`` where the partner is the run of
    the named label with the same target and eps (``op "=="`` compares the
    difference against ``tol``)."""

    name: str
    metric: str
    op: str
    value: float
    relative_to: object = None
    where: dict = field(default_factory=dict)
    tol: float = 0.0


@dataclass
class ExperimentSpec:
    name: str
    seed: int
    output_dir: str
    system: dict
    initial_state: object
    cost: dict
    sweep: dict
    schemes: list
    baseline_qoc: dict
    acceptance: list
    raw: dict = field(repr=False, default_factory=dict)

    # -- derived physics -----------------------------------------------------------
    @property
    def state_kind(self):
        return StateKind(self.system["state_kind"])

    @property
    def dt(self):
        return float(self.system["dt"])

    @property
    def N(self):
        return int(self.system["N"])

    def to_dict(self):
        return copy.deepcopy(self.raw)

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=False)


def _state(value, path, kind, dim):
    """GeneralizedState from a name or a raw vector/matrix."""
    if isinstance(value, str):
        if kind == StateKind.UNITARY:
            if value != "I":
                raise ConfigError(path, "unitary states are 'I' or a raw matrix")
            return GeneralizedState(StateKind.UNITARY, np.eye(dim))
        try:
            psi = ket(value)
        except KeyError:
            raise ConfigError(path, f"unknown state {value!r}") from None
        if psi.dim != dim:
            raise ConfigError(path, f"state {value!r} has dimension {psi.dim}, system has {dim}")
        return density(psi) if kind == StateKind.DENSITY else psi
    data = _complex_array(value, path)
    try:
        if kind == StateKind.UNITARY:
            st = GeneralizedState(kind, data)
        elif kind == StateKind.DENSITY:
            st = density(GeneralizedState(StateKind.KET, data))
        else:
            st = GeneralizedState(kind, data)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from None
    if st.dim != dim:
        raise ConfigError(path, f"state has dimension {st.dim}, system has {dim}")
    return st


def _state_key(value):
    return value if isinstance(value, str) else json.dumps(value, sort_keys=True)


def parse_spec(doc):
    """Validate a config document (dict) and return an :class:`ExperimentSpec`."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "config must be a JSON object")
    _no_extra(doc, ("version", "name", "seed", "output_dir", "system", "initial_state",
                    "cost", "sweep", "schemes", "baseline_qoc", "acceptance"), "$")
    version = _get(doc, "version", "$", "int")
    if version != VERSION:
        raise ConfigError("$.version", f"unsupported version {version}, expected {VERSION}")
    name = _get(doc, "name", "$", "string")
    seed = _get(doc, "seed", "$", "int")
    output_dir = _get(doc, "output_dir", "$", "string", default=name)

    sysd = _get(doc, "system", "$", "object")
    _no_extra(sysd, ("state_kind", "dt", "N", "drift", "controls", "box", "mismatch"), "$.system")
    kind_s = _get(sysd, "state_kind", "$.system", "string")
    try:
        kind = StateKind(kind_s)
    except ValueError:
        raise ConfigError("$.system.state_kind",
                          f"expected one of {[k.value for k in StateKind]}") from None
    dt = _number(_get(sysd, "dt", "$.system"), "$.system.dt")
    if dt <= 0:
        raise ConfigError("$.system.dt", "must be positive")
    N = _get(sysd, "N", "$.system", "int")
    if N < 1:
        raise ConfigError("$.system.N", "must be at least 1")
    h0 = _hamiltonian(_get(sysd, "drift", "$.system"), "$.system.drift")
    dim = h0.shape[0]
    controls = _get(sysd, "controls", "$.system", "list")
    if not controls:
        raise ConfigError("$.system.controls", "need at least one control")
    hs = [_hamiltonian(c, f"$.system.controls[{j}]", dim) for j, c in enumerate(controls)]
    m = len(hs)
    box = _get(sysd, "box", "$.system", "object")
    _no_extra(box, ("lo", "hi"), "$.system.box")
    lo = _vector_or_scalar(_get(box, "lo", "$.system.box"), m, "$.system.box.lo")
    hi = _vector_or_scalar(_get(box, "hi", "$.system.box"), m, "$.system.box.hi")
    if np.any(lo > hi):
        raise ConfigError("$.system.box", "lo exceeds hi")
    mismatch = None
    if "mismatch" in sysd:
        mismatch = _hamiltonian(sysd["mismatch"], "$.system.mismatch", dim)

    x0 = _state(_get(doc, "initial_state", "$"), "$.initial_state", kind, dim)

    costd = _get(doc, "cost", "$", "object")
    _no_extra(costd, ("alpha", "beta", "R", "eta", "S", "u_ref"), "$.cost")
    cost = {k: _number(_get(costd, k, "$.cost"), f"$.cost.{k}") for k in ("alpha", "beta", "eta")}
    for k, v in cost.items():
        if v < 0:
            raise ConfigError(f"$.cost.{k}", "must be nonnegative")
    cost["R"] = _weight(_get(costd, "R", "$.cost"), m, "$.cost.R")
    cost["S"] = _weight(_get(costd, "S", "$.cost"), m, "$.cost.S")
    u_ref = _get(costd, "u_ref", "$.cost")
    if isinstance(u_ref, str):
        if u_ref not in ("zero", "target"):
            raise ConfigError("$.cost.u_ref", "expected 'zero', 'target' or an m-vector")
        if u_ref == "target" and kind != StateKind.KET:
            raise ConfigError("$.cost.u_ref", "'target' needs state_kind 'ket'")
    else:
        u_ref = _vector_or_scalar(u_ref, m, "$.cost.u_ref", scalar=False)
    cost["u_ref"] = u_ref

    sweepd = _get(doc, "sweep", "$", "object")
    _no_extra(sweepd, ("targets", "L", "eps"), "$.sweep")
    targets = _axis(sweepd, "targets", "$.sweep")
    target_states = [_state(t, f"$.sweep.targets[{i}]", kind, dim) for i, t in enumerate(targets)]
    Ls = _axis(sweepd, "L", "$.sweep")
    for i, L in enumerate(Ls):
        if not _is(L, "int") or not 1 <= L <= N:
            raise ConfigError(f"$.sweep.L[{i}]", f"horizon must be an integer in [1, N={N}]")
    eps = [_number(e, f"$.sweep.eps[{i}]") for i, e in enumerate(_axis(sweepd, "eps", "$.sweep"))]
    if mismatch is None and any(e != 0 for e in eps):
        raise ConfigError("$.sweep.eps", "nonzero eps needs system.mismatch")

    schemes = [_scheme(s, f"$.schemes[{i}]", N, kind)
               for i, s in enumerate(_get(doc, "schemes", "$", "list"))]
    if not schemes:
        raise ConfigError("$.schemes", "need at least one scheme")
    labels = [s.label for s in schemes]
    if len(set(labels)) != len(labels):
        raise ConfigError("$.schemes", "scheme labels must be unique")
    if "qoc" in labels:
        raise ConfigError("$.schemes", "the label 'qoc' is reserved for the baseline")
    for i, s in enumerate(schemes):
        if s.L is None and s.M != "L" and s.M > min(Ls):
            raise ConfigError(f"$.schemes[{i}].M", f"M={s.M} exceeds the sweep horizon L={min(Ls)}")
    if any(s.mode == Mode.CLOSED_LOOP for s in schemes) and mismatch is None:
        raise ConfigError("$.system.mismatch", "closed-loop schemes need a mismatch term")

    based = _get(doc, "baseline_qoc", "$", "object", default={"enabled": False, "solver": {}})
    _no_extra(based, ("enabled", "solver"), "$.baseline_qoc")
    baseline = {"enabled": _get(based, "enabled", "$.baseline_qoc", "bool"),
                "solver": _solver(based.get("solver", {}), "$.baseline_qoc.solver")}

    checks = [_check(c, f"$.acceptance[{i}]", labels + ["qoc"])
              for i, c in enumerate(_get(doc, "acceptance", "$", "list", default=[]))]

    system = {"state_kind": kind.value, "dt": dt, "N": N, "H0": h0, "H": hs,
              "box_lo": lo, "box_hi": hi, "mismatch": mismatch}
    sweep = {"targets": targets, "target_states": target_states,
             "target_keys": [_state_key(t) for t in targets], "L": Ls, "eps": eps}
    raw = copy.deepcopy(doc)
    raw.setdefault("output_dir", output_dir)
    return ExperimentSpec(name, seed, output_dir, system, x0, cost, sweep, schemes,
                          baseline, checks, raw)


def _vector_or_scalar(value, m, path, scalar=True):
    if scalar and _is(value, "number"):
        return np.full(m, _number(value, path))
    if not isinstance(value, list) or len(value) != m:
        raise ConfigError(path, f"expected {'a number or ' if scalar else ''}a list of {m} numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _axis(d, key, path):
    values = _get(d, key, path, "list")
    if not values:
        raise ConfigError(f"{path}.{key}", f"sweep axis '{key}' is empty")
    return values


def _solver(d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if "rng_seed" in d:
        raise ConfigError(f"{path}.rng_seed", "set the top-level seed instead")
    try:
        return SolverOptions.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(path, str(e).strip("'\"")) from None


def _scheme(d, path, N, kind):
    _no_extra(d if isinstance(d, dict) else {}, ("label", "scheme", "M", "mode",
                                                  "shrink_horizon", "L", "solver"), path)
    scheme_s = _get(d, "scheme", path, "string")
    try:
        scheme = Scheme(scheme_s)
    except ValueError:
        raise ConfigError(f"{path}.scheme",
                          f"expected one of {[s.value for s in Scheme]}") from None
    if scheme == Scheme.SETPOINT and kind != StateKind.KET:
        raise ConfigError(f"{path}.scheme", "setpoint scheme needs state_kind 'ket'")
    label = _get(d, "label", path, "string", default=scheme.value)
    M = _get(d, "M", path)
    if not (M == "L" or (_is(M, "int") and M >= 1)):
        raise ConfigError(f"{path}.M", "expected a positive integer or 'L'")
    mode_s = _get(d, "mode", path, "string")
    try:
        mode = Mode(mode_s)
    except ValueError:
        raise ConfigError(f"{path}.mode", "expected 'open' or 'closed'") from None
    shrink = _get(d, "shrink_horizon", path, "bool", default=False)
    L = _get(d, "L", path, default=None)
    if L is not None:
        if L == "min_feasible":
            if scheme == Scheme.BASIC:
                raise ConfigError(f"{path}.L", "'min_feasible' applies to constrained schemes")
        elif not (_is(L, "int") and 1 <= L <= N):
            raise ConfigError(f"{path}.L", f"expected an integer in [1, N={N}] or 'min_feasible'")
        if _is(L, "int") and _is(M, "int") and M > L:
            raise ConfigError(f"{path}.M", f"M={M} exceeds L={L}")
    solver = _solver(d.get("solver", {}), f"{path}.solver")
    return SchemeEntry(label, scheme, M, mode, shrink, L, solver)


def _check(d, path, labels):
    _no_extra(d if isinstance(d, dict) else {}, ("name", "metric", "op", "value",
                                                  "relative_to", "where", "tol"), path)
    metric = _get(d, "metric", path, "string")
    if metric not in METRICS:
        raise ConfigError(f"{path}.metric", f"expected one of {list(METRICS)}")
    op = _get(d, "op", path, "string")
    if op not in OPS:
        raise ConfigError(f"{path}.op", f"expected one of {list(OPS)}")
    value = _number(_get(d, "value", path, default=1.0), f"{path}.value")
    rel = _get(d, "relative_to", path, default=None)
    if rel is not None and rel not in labels:
        raise ConfigError(f"{path}.relative_to", f"unknown label {rel!r}")
    if op == "==" and rel is None:
        raise ConfigError(f"{path}.op", "'==' needs relative_to")
    where = _get(d, "where", path, "object", default={})
    _no_extra(where, ("label", "target", "L", "min_L", "min_abs_eps"), f"{path}.where")
    if "label" in where and where["label"] not in labels:
        raise ConfigError(f"{path}.where.label", f"unknown label {where['label']!r}")
    tol = _number(_get(d, "tol", path, default=0.0), f"{path}.tol")
    name = _get(d, "name", path, "string", default=f"{metric} {op} {value}")
    return AcceptanceCheck(name, metric, op, value, rel, dict(where), tol)


# -- files ----------------------------------------------------------------------

def bundled_names():
    return sorted(p.name[:-5] for p in resources.files(__package__).joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


def read_config(path_or_name):
    """Parse a config file, or a bundled config given by name (e.g. ``"table1"``)."""
    p = Path(path_or_name)
    if p.suffix != ".json" and not p.exists():
        res = resources.files(__package__).joinpath("configs", f"{path_or_name}.json")
        if not res.is_file():
            raise ConfigError("$", f"no config file or bundled config named {path_or_name!r} "
                                   f"(bundled: {', '.join(bundled_names())})")
        text = res.read_text()
    else:
        try:
            text = p.read_text()
        except OSError as e:
            raise ConfigError("$", f"cannot read {p}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_spec(doc)
