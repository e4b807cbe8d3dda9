"""Basic MPQC subproblem: horizon cost with terminal cost, box-constrained inputs."""

import numpy as np

from ..costs import cost_and_gradient, horizon_cost, _check_inputs
from ..dynamics import propagate_data
from .common import SolveResult, initial_inputs
from .inner import inner_minimize


def _start(sys, spec, x_t, L, opts, t0, u_init):
    if u_init is not None:
        u0 = np.asarray(u_init, dtype=float)
        if u0.shape != (L, sys.m):
            raise ValueError(f"u_init must have shape {(L, sys.m)}")
        return np.clip(u0, sys.box_lo, sys.box_hi)
    return initial_inputs(sys, spec.ref_at(t0, L), opts)


def solve_basic(sys, spec, x_t, L, opts, t0=0, u_init=None):
    """Minimise sum_k l(X_k, u_k) + Phi(X_L) from ``x_t`` over L steps by projected gradient."""
    if L < 1:
        raise ValueError("horizon L must be at least 1")
    u0 = _start(sys, spec, x_t, L, opts, t0, u_init)
    _check_inputs(sys, spec, x_t, u0)
    shape = u0.shape
    lo = np.broadcast_to(sys.box_lo, shape).ravel()
    hi = np.broadcast_to(sys.box_hi, shape).ravel()
    x0, kind = x_t.data, x_t.kind

    def fg(z):
        f, g, _ = cost_and_gradient(spec, sys, x0, kind, z.reshape(shape), t0)
        return f, g.ravel()

    def f_only(z):
        return horizon_cost(spec, sys, x_t, z.reshape(shape), t0)

    res = inner_minimize(fg, f_only, u0.ravel(), lo, hi, opts)
    u = res.x.reshape(shape)
    return SolveResult(
        u_opt=u,
        x_pred=propagate_data(sys, x0, u),
        cost=float(res.f),
        iterations=res.iterations,
        converged=res.converged,
        residuals={"stationarity": res.stationarity},
    )


def solve_qoc(sys, spec, x0, N, opts, u_init=None):
    """Direct full-horizon solve of the open-loop optimal control problem."""
    return solve_basic(sys, spec, x0, N, opts, 0, u_init)
