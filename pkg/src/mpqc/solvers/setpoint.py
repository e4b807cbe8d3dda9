"""MPQC subproblem with an artificial setpoint (tracking formulation).

The problem is

    min  alpha sum_k (1 - F(X_k, s)) + sum_k ||u_k - u_s||_R^2
             + eta (1 - F(s, X_ref)) + ||u_s - u_hold||_S^2
    s.t. F(X_L, s) = 1,   s = exp(-A(u_s) dt) s  up to global phase.

For pure states the terminal constraint pins ``s`` to ``X_L`` up to phase,
so ``s`` is eliminated by substituting ``s = X_L``.  (Keeping ``s`` as a
free variable coupled to ``X_L`` by a penalty produces a badly conditioned
valley: ``s`` moves O(1) per O(dt) change of the inputs.)  The remaining
decision variables are the input sequence and ``u_s``; the steady-state
condition is imposed through the augmented Lagrangian as

    (V s - s <s, V s>) / dt = 0,   V = exp(-A(u_s) dt),

which says ``s`` is an eigenvector of ``V``.  The 1/dt keeps the defect O(1).

A per-step input moves the predicted states by O(dt) while ``u_s`` changes
the defect by O(1), so the inner solver works with ``u_s / dt`` to balance
the curvature of the two blocks.
"""

import numpy as np

from ..costs import Trajectory, _check_inputs, _quad, overlaps
from ..dynamics import assemble_generator, propagate_data
from ..errors import InfeasibleSetpoint, KindMismatch
from ..expm import mat_exp
from ..states import StateKind
from .auglag import augmented_lagrangian
from .basic import _start
from .common import SolveResult, initial_inputs


def _parallel_defect(s, y):
    """y minus its projection on the unit vector s."""
    return y - s * np.vdot(s, y)


def _infidelity(s, y):
    s = s / np.linalg.norm(s)
    y = y / np.linalg.norm(y)
    return max(0.0, 1.0 - abs(np.vdot(s, y)) ** 2)


class _SetpointProblem:
    def __init__(self, sys, spec, x_t, L):
        self.sys, self.spec, self.x_t, self.L = sys, spec, x_t, L
        self.m = sys.m
        self.ref = spec.x_ref.data[:, 0]
        self.hold = np.asarray(spec.hold_input(), dtype=float)
        self._memo = self._hold_memo = None

    def split(self, z):
        return z[:self.L * self.m].reshape(self.L, self.m), z[self.L * self.m:]

    def _hold_prop(self, us):
        key = us.tobytes()
        if self._hold_memo is None or self._hold_memo[0] != key:
            self._hold_memo = (key, mat_exp(-self.sys.dt * assemble_generator(self.sys, us)))
        return self._hold_memo[1]

    def states(self, u):
        """Predicted states under ``u``; the last call is cached (constraint and
        residual checks ask for the same point in a row)."""
        key = u.tobytes()
        if self._memo is None or self._memo[0] != key:
            self._memo = (key, propagate_data(self.sys, self.x_t.data, u))
        return self._memo[1]

    def _final(self, u):
        return self.states(u)[-1][:, 0]

    def constraints(self, z):
        u, us = self.split(z)
        s = self._final(u)
        return _parallel_defect(s, self._hold_prop(us) @ s) / self.sys.dt

    def residuals(self, z):
        u, us = self.split(z)
        s = self._final(u)
        return {"terminal": 0.0, "steady": _infidelity(s, self._hold_prop(us) @ s)}

    def residual(self, z):
        return self.residuals(z)["steady"]

    def cost(self, u, us, states):
        spec = self.spec
        s = states[-1]
        val = spec.alpha * np.sum(1.0 - np.abs(overlaps(s, states[:self.L])) ** 2)
        val += _quad(spec.R, u - us)
        val += spec.eta * (1.0 - abs(np.vdot(self.ref, s[:, 0])) ** 2)
        return val + _quad(spec.S, us - self.hold)

    def objective(self, z, mu, rho, grad):
        sys, spec, L = self.sys, self.spec, self.L
        u, us = self.split(z)
        traj = Trajectory(sys, self.x_t.data, u, derivatives=grad, extra=us)
        states = traj.states
        s = states[-1][:, 0]
        v, dv = traj.extra_prop, traj.extra_dprop
        vs = v @ s
        svs = np.vdot(s, vs)
        c = (vs - s * svs) / sys.dt
        o = states[:L, :, 0] @ s.conj()          # <s, X_k>, k < L
        ref_s = np.vdot(self.ref, s)
        du = u - us
        du_r = du @ spec.R
        dh = us - self.hold
        val = (spec.alpha * (L - np.vdot(o, o).real) + np.sum(du_r * du)
               + spec.eta * (1.0 - abs(ref_s) ** 2) + dh @ spec.S @ dh
               + np.vdot(mu, c).real + 0.5 * rho * np.vdot(c, c).real)
        if not grad:
            return val, None

        seeds = np.zeros_like(states)
        # stage fidelities |<s, X_k>|^2 with s = X_L
        seeds[1:L] = (-2.0 * spec.alpha) * o[1:L, None, None] * states[-1]
        g_s = -2.0 * spec.alpha * (o.conj() @ states[:L, :, 0])
        # setpoint-to-target fidelity
        g_s -= 2.0 * spec.eta * ref_s * self.ref
        # steady-state defect c = (V s - s <s, V s>) / dt
        w = (mu + rho * c) / sys.dt
        g_y = w - s * np.vdot(s, w)
        g_s += -(np.conj(svs) * w + np.vdot(w, s) * vs) + v.conj().T @ g_y
        g_us = ((dv @ s) @ g_y.conj()).real
        seeds[L, :, 0] += g_s

        g_u = traj.pullback(seeds) + 2.0 * du_r
        g_us += -2.0 * du_r.sum(axis=0) + 2.0 * dh @ spec.S
        return val, np.concatenate([g_u.ravel(), g_us])


def solve_setpoint(sys, spec, x_t, L, opts, t0=0, u_init=None, setpoint_init=None,
                   multipliers=None):
    """Solve the tracking subproblem from ``x_t`` over L steps.

    ``setpoint_init`` is an optional ``(s, u_s)`` warm start (only ``u_s`` is
    used, ``s`` follows from the inputs).  The returned ``setpoint`` is
    ``(s, u_s)``.  Raises :class:`InfeasibleSetpoint` (best iterate in
    ``.result``) when the steady-state residual exceeds ``constraint_tol``.
    ``t0`` is accepted for signature parity with the other solvers; the
    setpoint cost does not depend on absolute time.
    """
    if L < 1:
        raise ValueError("horizon L must be at least 1")
    if x_t.kind != StateKind.KET or sys.state_kind != StateKind.KET:
        raise KindMismatch("setpoint optimization is implemented for pure states")
    if u_init is None:
        u0 = initial_inputs(sys, np.tile(spec.hold_input(), (L, 1)), opts)
    else:
        u0 = _start(sys, spec, x_t, L, opts, 0, u_init)
    _check_inputs(sys, spec, x_t, u0)
    prob = _SetpointProblem(sys, spec, x_t, L)
    us0 = prob.hold if setpoint_init is None else np.asarray(setpoint_init[1], dtype=float)
    us0 = np.clip(us0, sys.box_lo, sys.box_hi)
    z0 = np.concatenate([u0.ravel(), us0])

    lo = np.concatenate([np.broadcast_to(sys.box_lo, u0.shape).ravel(), sys.box_lo])
    hi = np.concatenate([np.broadcast_to(sys.box_hi, u0.shape).ravel(), sys.box_hi])
    scale = np.concatenate([np.ones(u0.size), np.full(sys.m, 1.0 / sys.dt)])
    al = augmented_lagrangian(prob, z0, lo, hi, opts, warm=multipliers, scale=scale)

    u, us = prob.split(al.x)
    res = prob.residuals(al.x)
    states = prob.states(u)
    result = SolveResult(
        u_opt=u.copy(),
        x_pred=states,
        cost=float(prob.cost(u, us, states)),
        constraint_residual=max(res.values()),
        setpoint=(states[-1][:, 0].copy(), us.copy()),
        iterations=al.inner_iterations,
        converged=al.converged,
        multipliers=(al.mu, al.rho),
        residuals={**res, "outer": al.outer_iterations},
    )
    if result.constraint_residual > opts.constraint_tol:
        raise InfeasibleSetpoint(
            f"steady-state residual {res['steady']:.3e} exceeds {opts.constraint_tol:.1e} "
            f"with L={L}",
            result,
        )
    return result
