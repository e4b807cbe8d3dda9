"""Receding-horizon loop and runtime checks of its stability guarantees."""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .costs import stage_cost, terminal_cost
from .dynamics import step
from .errors import (InfeasibleSetpoint, InfeasibleTerminalConstraint, NotApplicable,
                     SchemeMismatch, SolverDiverged)
from .solvers.basic import solve_basic
from .solvers.common import SolverOptions, shift_sequence
from .solvers.setpoint import solve_setpoint
from .solvers.tec import solve_tec
from .states import fidelity


class Scheme(str, Enum):
    BASIC = "basic"
    TEC = "tec"
    SETPOINT = "setpoint"


class Mode(str, Enum):
    OPEN_LOOP = "open"
    CLOSED_LOOP = "closed"


@dataclass(frozen=True)
class MpqcConfig:
    """Scheme, horizons and solver settings of one receding-horizon run.

    With ``shrink_horizon`` the prediction horizon is ``min(L, N - t)``, so the
    last predictions end exactly at N (for TEC this makes the terminal
    constraint act on the final state of the run).
    """

    scheme: Scheme
    L: int
    M: int
    N: int
    mode: Mode = Mode.OPEN_LOOP
    solver_opts: SolverOptions = field(default_factory=SolverOptions)
    shrink_horizon: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 1 <= self.M <= self.L <= self.N:
            raise ValueError(f"need 1 <= M <= L <= N, got M={self.M}, L={self.L}, N={self.N}")


@dataclass
class SolveRecord:
    t: int
    horizon: int
    jstar: float
    residual: float
    iterations: int
    wall_time: float
    converged: bool
    feasible: bool
    setpoint: Optional[tuple] = None


@dataclass
class TrajectoryLog:
    """Realized states X_0..X_N, applied inputs u_0..u_{N-1} and one record per solve."""

    scheme: Scheme
    M: int
    states: list
    inputs: np.ndarray
    fidelity: np.ndarray
    stage_costs: np.ndarray
    solves: list

    @property
    def N(self):
        return len(self.inputs)

    def solve_at(self, t):
        for rec in self.solves:
            if rec.t == t:
                return rec
        return None

    def total_cost(self, spec):
        """Open-loop objective evaluated on the realized trajectory."""
        return float(np.sum(self.stage_costs) + terminal_cost(spec, self.states[-1]))

    @property
    def wall_time(self):
        return float(sum(r.wall_time for r in self.solves))

    @property
    def iterations(self):
        return int(sum(r.iterations for r in self.solves))

    def satisfaction_rate(self):
        """Fraction of solves whose constraint residual met the solver tolerance."""
        if not self.solves:
            return 1.0
        return float(np.mean([r.feasible for r in self.solves]))


def _solve(cfg, sys, spec, x, L, t, warm):
    opts = cfg.solver_opts
    if cfg.scheme == Scheme.BASIC:
        return solve_basic(sys, spec, x, L, opts, t0=t, u_init=warm.get("u"))
    if cfg.scheme == Scheme.TEC:
        return solve_tec(sys, spec, x, L, opts, t0=t, u_init=warm.get("u"),
                         multipliers=warm.get("mu"))
    return solve_setpoint(sys, spec, x, L, opts, t0=t, u_init=warm.get("u"),
                          setpoint_init=warm.get("setpoint"), multipliers=warm.get("mu"))


def _pad_input(cfg, spec, result, t):
    if cfg.scheme == Scheme.SETPOINT and result.setpoint is not None:
        return result.setpoint[1]
    if cfg.scheme == Scheme.TEC:
        return spec.ref_at(t, 1)[0]
    return result.u_opt[-1]


def run_mpqc(cfg, sys, spec, plant=None, x0=None):
    """Run the receding-horizon controller for N steps.

    Open loop: the state is advanced with the nominal model ``sys``.  Closed
    loop: inputs are applied to ``plant`` and the next state is read from it.
    A constraint failure on the very first solve aborts the run (the target is
    out of reach for this horizon); later failures keep the best iterate and
    are recorded as infeasible solves.
    """
    if cfg.mode == Mode.CLOSED_LOOP:
        if plant is None:
            raise ValueError("closed-loop runs need a plant")
        x = plant.current
    else:
        if plant is not None:
            raise ValueError("open-loop runs do not take a plant")
        if x0 is None:
            raise ValueError("open-loop runs need an initial state")
        x = x0
    if x0 is not None and cfg.mode == Mode.CLOSED_LOOP and not np.array_equal(x0.data, x.data):
        raise ValueError("x0 disagrees with the plant's current state")

    states, inputs, solves = [x], [], []
    warm = {}
    t = 0
    while t < cfg.N:
        L = min(cfg.L, cfg.N - t) if cfg.shrink_horizon else cfg.L
        if warm.get("u") is not None and len(warm["u"]) != L:
            warm["u"] = shift_sequence(warm["u"], 0, L, warm["pad"])
        start = time.perf_counter()
        try:
            result = _solve(cfg, sys, spec, x, L, t, warm)
        except (InfeasibleTerminalConstraint, InfeasibleSetpoint) as e:
            if t == 0:
                raise type(e)(
                    f"first solve infeasible: {e}. Increase the horizon L or the input "
                    "bounds, or check that the target is reachable from the initial state.",
                    e.result,
                ) from e
            result = e.result
        except SolverDiverged as e:
            raise SolverDiverged(f"at step {t}: {e}") from e
        elapsed = time.perf_counter() - start
        solves.append(SolveRecord(
            t=t, horizon=L, jstar=float(result.cost),
            residual=float(result.constraint_residual),
            iterations=int(result.iterations), wall_time=elapsed,
            converged=bool(result.converged),
            feasible=bool(result.constraint_residual <= cfg.solver_opts.constraint_tol),
            setpoint=result.setpoint,
        ))

        n_apply = min(cfg.M, cfg.N - t)
        for i in range(n_apply):
            u = result.u_opt[i]
            x = plant.step(u) if cfg.mode == Mode.CLOSED_LOOP else step(sys, x, u)
            inputs.append(np.array(u))
            states.append(x)
        t += n_apply

        if cfg.solver_opts.warm_start:
            pad = _pad_input(cfg, spec, result, t)
            next_len = min(cfg.L, cfg.N - t) if cfg.shrink_horizon else cfg.L
            warm = {
                "u": shift_sequence(result.u_opt, n_apply, max(next_len, 1), pad),
                "pad": pad,
                "mu": result.multipliers,
                "setpoint": result.setpoint,
            }

    inputs = np.array(inputs)
    fid = np.array([fidelity(s, spec.x_ref) for s in states])
    ell = np.array([stage_cost(spec, states[k], inputs[k], k) for k in range(len(inputs))])
    return TrajectoryLog(cfg.scheme, cfg.M, states, inputs, fid, ell, solves)


# -- stability diagnostics -----------------------------------------------------

@dataclass(frozen=True)
class DescentViolation:
    t: int
    excess: float


def check_descent(log, spec, tol=1e-6):
    """Steps where J*(X_{t+1}) - J*(X_t) + l(X_t, u_t) exceeds ``tol``.

    Only meaningful for terminal-constrained runs applying one input per solve.
    """
    if Scheme(log.scheme) != Scheme.TEC:
        raise SchemeMismatch(f"descent check needs a TEC run, got {Scheme(log.scheme).value}")
    if log.M != 1:
        raise SchemeMismatch(f"descent check needs M = 1, got M = {log.M}")
    by_t = {r.t: r.jstar for r in log.solves}
    out = []
    for t in range(log.N):
        if t in by_t and t + 1 in by_t:
            ell = stage_cost(spec, log.states[t], log.inputs[t], t)
            excess = by_t[t + 1] - by_t[t] + ell
            if excess > tol:
                out.append(DescentViolation(t, float(excess)))
    return out


@dataclass(frozen=True)
class DecayFit:
    """Fitted envelope ``1 - F_t <= C gamma^t (1 - F_0)``.

    ``C`` and ``gamma`` come from a least-squares fit of the log-infidelity;
    ``C_envelope`` is the smallest constant for which the bound with the
    fitted ``gamma`` holds at every step of the segment.  ``holds`` requires
    ``gamma < 1`` and the fitted envelope, scaled by ``1 + tol``, to cover
    every point.
    """

    C: float
    gamma: float
    C_envelope: float
    holds: bool
    segment: int


def check_exponential_decay(log_or_infidelity, floor=1e-9, tol=1e-6):
    """Fit geometric decay to the infidelity before it reaches ``floor``.

    Accepts a :class:`TrajectoryLog` or a plain infidelity sequence.
    """
    if isinstance(log_or_infidelity, TrajectoryLog):
        infid = 1.0 - np.asarray(log_or_infidelity.fidelity, dtype=float)
    else:
        infid = np.asarray(log_or_infidelity, dtype=float)
    if infid.size == 0 or infid[0] <= floor:
        raise NotApplicable("initial infidelity is already at the numerical floor")
    below = np.nonzero(infid <= floor)[0]
    end = int(below[0]) if below.size else len(infid)
    seg = infid[:end]
    if len(seg) < 2:
        raise NotApplicable("fewer than two points above the floor")
    t = np.arange(len(seg), dtype=float)
    slope, intercept = np.polyfit(t, np.log(seg), 1)
    gamma = float(np.exp(slope))
    C = float(np.exp(intercept) / seg[0])
    ratio = seg / (seg[0] * gamma ** t)
    c_env = float(np.max(ratio))
    holds = bool(gamma < 1.0 and np.all(ratio <= C * (1.0 + tol)))
    return DecayFit(C, gamma, c_env, holds, len(seg))
