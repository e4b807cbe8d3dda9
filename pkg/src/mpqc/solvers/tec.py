"""MPQC subproblem with a terminal equality constraint F(X_L, X_ref) = 1.

The scalar condition ``1 - F = 0`` has a vanishing gradient on the feasible
set, which makes multiplier updates useless.  It is imposed instead through
the equivalent linear condition ``P X_L = 0`` with ``P`` the orthogonal
projector onto the complement of ``X_ref``; ``||P X_L||^2 = 1 - F`` for kets.
"""

import numpy as np

from ..costs import Trajectory, _stage_terms, cost_and_gradient, fid, horizon_cost
from ..dynamics import propagate_data
from ..errors import InfeasibleTerminalConstraint
from .auglag import augmented_lagrangian
from .basic import _start
from .common import SolveResult


def complement(ref, x):
    """x minus its component along ref (Frobenius inner product)."""
    return x - ref * (np.vdot(ref, x) / np.vdot(ref, ref).real)


class _TecProblem:
    def __init__(self, sys, spec, x_t, shape, t0):
        self.sys, self.spec, self.x_t, self.shape, self.t0 = sys, spec, x_t, shape, t0
        self.ref = spec.x_ref.data
        self._memo = None

    def states(self, z):
        """Predicted states under ``z``; the last call is cached (constraint and
        residual checks ask for the same point in a row)."""
        key = z.tobytes()
        if self._memo is None or self._memo[0] != key:
            self._memo = (key, propagate_data(self.sys, self.x_t.data, z.reshape(self.shape)))
        return self._memo[1]

    def _final(self, z):
        return self.states(z)[-1]

    def constraints(self, z):
        return complement(self.ref, self._final(z))

    def residual(self, z):
        return 1.0 - fid(self.x_t.kind, self.ref, self._final(z))

    def objective(self, z, mu, rho, grad):
        u = z.reshape(self.shape)
        if not grad:
            traj = Trajectory(self.sys, self.x_t.data, u, derivatives=False)
            J = _stage_terms(self.spec, self.x_t.kind, self.ref, traj, u, self.t0, False)[0]
            c = complement(self.ref, traj.states[-1])
            return J + np.vdot(mu, c).real + 0.5 * rho * np.vdot(c, c).real, None

        def penalty(traj):
            c = complement(self.ref, traj.states[-1])
            seeds = np.zeros_like(traj.states)
            seeds[-1] = complement(self.ref, mu + rho * c)
            return np.vdot(mu, c).real + 0.5 * rho * np.vdot(c, c).real, seeds

        f, g, _ = cost_and_gradient(self.spec, self.sys, self.x_t.data, self.x_t.kind, u,
                                    self.t0, terminal=False, extra_seed=penalty)
        return f, g.ravel()


def solve_tec(sys, spec, x_t, L, opts, t0=0, u_init=None, multipliers=None):
    """Minimise sum_{k<L} l(X_k, u_k) subject to F(X_L, X_ref) = 1 and the input box.

    Raises :class:`InfeasibleTerminalConstraint` (carrying the best iterate as
    ``.result``) when the terminal residual is still above ``constraint_tol``
    at the iteration cap.
    """
    if L < 1:
        raise ValueError("horizon L must be at least 1")
    u0 = _start(sys, spec, x_t, L, opts, t0, u_init)
    shape = u0.shape
    prob = _TecProblem(sys, spec, x_t, shape, t0)
    lo = np.broadcast_to(sys.box_lo, shape).ravel()
    hi = np.broadcast_to(sys.box_hi, shape).ravel()
    al = augmented_lagrangian(prob, u0.ravel(), lo, hi, opts, warm=multipliers)
    u = al.x.reshape(shape)
    result = SolveResult(
        u_opt=u,
        x_pred=prob.states(al.x),
        cost=horizon_cost(spec, sys, x_t, u, t0, terminal=False),
        constraint_residual=max(al.residual, 0.0),
        iterations=al.inner_iterations,
        converged=al.converged,
        multipliers=(al.mu, al.rho),
        residuals={"terminal": max(al.residual, 0.0), "outer": al.outer_iterations},
    )
    if al.residual > opts.constraint_tol:
        raise InfeasibleTerminalConstraint(
            f"terminal residual 1-F = {al.residual:.3e} > {opts.constraint_tol:.1e} with L={L}; "
            "the target may not be reachable within the horizon",
            result,
        )
    return result
