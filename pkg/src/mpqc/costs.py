"""
Stage, terminal and horizon costs with exact gradients.

Gradients use the convention ``df = Re <G, dX>`` with ``<a, b> = sum conj(a) b``:
an "adjoint seed" ``G_k`` is attached to each predicted state and pulled back
through the propagator chain, differentiating each propagator exactly with
the block Frechet derivative.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import assemble_generator
from .errors import DimensionMismatch, KindMismatch
from .expm import mat_exp, mat_exp_frechet_multi
from .states import GeneralizedState, StateKind

PSD_TOL = 1e-10


def _check_psd(name, mat, m):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape != (m, m):
        raise DimensionMismatch(f"{name} must be {m}x{m}, got {mat.shape}")
    if np.max(np.abs(mat - mat.T), initial=0.0) > PSD_TOL:
        raise ValueError(f"{name} is not symmetric")
    if np.min(np.linalg.eigvalsh(mat)) < -PSD_TOL:
        raise ValueError(f"{name} is not positive semidefinite")
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Weights of the stage cost, terminal cost and setpoint penalty.

    ``u_ref`` is the input reference: an m-vector, or an ``(T, m)`` array of
    per-step references (the last row is reused past its end).  ``u_target``
    is the constant input that keeps ``x_ref`` stationary, if one is known;
    it is what the setpoint penalty ``||u_s - u_target||_S^2`` pulls towards.
    """

    x_ref: GeneralizedState
    R: np.ndarray
    u_ref: np.ndarray
    alpha: float = 1.0
    beta: float = 0.0
    eta: float = 0.0
    S: Optional[np.ndarray] = None
    u_target: Optional[np.ndarray] = None

    def __post_init__(self):
        u_ref = np.array(self.u_ref, dtype=float)
        if u_ref.ndim not in (1, 2):
            raise DimensionMismatch("u_ref must be an m-vector or a (T, m) array")
        m = u_ref.shape[-1]
        R = _check_psd("R", self.R, m)
        S = _check_psd("S", np.zeros((m, m)) if self.S is None else self.S, m)
        for name in ("alpha", "beta", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        u_ref.setflags(write=False)
        object.__setattr__(self, "u_ref", u_ref)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "S", S)
        if self.u_target is not None:
            ut = np.array(self.u_target, dtype=float)
            if ut.shape != (m,):
                raise DimensionMismatch("u_target must be an m-vector")
            ut.setflags(write=False)
            object.__setattr__(self, "u_target", ut)

    @property
    def m(self):
        return self.u_ref.shape[-1]

    @property
    def constant_reference(self):
        return self.u_ref.ndim == 1 or bool(np.all(self.u_ref == self.u_ref[0]))

    def ref_at(self, t0, length):
        """Input references for absolute steps t0 .. t0 + length - 1, shape (length, m)."""
        if self.u_ref.ndim == 1:
            return np.broadcast_to(self.u_ref, (length, self.m))
        idx = np.minimum(np.arange(t0, t0 + length), self.u_ref.shape[0] - 1)
        return self.u_ref[idx]

    def hold_input(self):
        """Input that keeps x_ref in place: ``u_target`` if known, else the first reference."""
        if self.u_target is not None:
            return self.u_target
        return self.u_ref if self.u_ref.ndim == 1 else self.u_ref[0]


# -- fidelity on raw arrays -------------------------------------------------

def fid(kind, ref, x):
    """F(x, ref) on raw arrays."""
    o = np.vdot(ref, x)
    if kind == StateKind.KET:
        return min(1.0, abs(o) ** 2)
    if kind == StateKind.UNITARY:
        return min(1.0, abs(o) ** 2 / ref.shape[0] ** 2)
    return float(o.real)


def fid_grad(kind, ref, x):
    """G with dF = Re <G, dx>."""
    if kind == StateKind.DENSITY:
        return ref
    o = np.vdot(ref, x)
    n = ref.shape[0] ** 2 if kind == StateKind.UNITARY else 1.0
    return (2.0 * o / n) * ref


def _as_ref(spec, x):
    if x.kind != spec.x_ref.kind or x.data.shape != spec.x_ref.data.shape:
        raise KindMismatch(
            f"state ({x.kind.value}, {x.data.shape}) incompatible with target "
            f"({spec.x_ref.kind.value}, {spec.x_ref.data.shape})"
        )
    return spec.x_ref.data


def _quad(R, du):
    du = np.atleast_2d(du)
    return float(np.sum((du @ R) * du))


# -- public cost functions -----------------------------------------------------

def stage_cost(spec, x, u, t=0):
    """alpha (1 - F(x, x_ref)) + ||u - u_ref,t||_R^2."""
    ref = _as_ref(spec, x)
    du = np.asarray(u, dtype=float) - spec.ref_at(t, 1)[0]
    return spec.alpha * (1.0 - fid(x.kind, ref, x.data)) + _quad(spec.R, du)


def terminal_cost(spec, x):
    ref = _as_ref(spec, x)
    return spec.beta * (1.0 - fid(x.kind, ref, x.data))


def _check_inputs(sys, spec, x0, u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != sys.m or u.shape[0] < 1:
        raise DimensionMismatch(f"control sequence must have shape (L>=1, {sys.m}), got {u.shape}")
    if spec.m != sys.m:
        raise DimensionMismatch("cost and system disagree on the number of inputs")
    _as_ref(spec, x0)
    return u


def overlaps(ref, states):
    """<ref, X_k> for a stack of states."""
    return np.einsum("ab,kab->k", ref.conj(), states)


def fids(kind, ref, states):
    """F(X_k, ref) for a stack of states."""
    o = overlaps(ref, states)
    if kind == StateKind.KET:
        return np.minimum(np.abs(o) ** 2, 1.0)
    if kind == StateKind.UNITARY:
        return np.minimum(np.abs(o) ** 2 / ref.shape[0] ** 2, 1.0)
    return o.real


def fid_grads(kind, ref, states):
    """Stack of dF/dX_k."""
    if kind == StateKind.DENSITY:
        return np.broadcast_to(ref, states.shape).copy()
    n = ref.shape[0] ** 2 if kind == StateKind.UNITARY else 1.0
    return (2.0 / n) * overlaps(ref, states)[:, None, None] * ref


class Trajectory:
    """Forward pass kept around for the adjoint sweep."""

    def __init__(self, sys, x0, u, derivatives, extra=None):
        """``extra`` is an optional (m,) input whose propagator (and derivatives)
        is computed in the same batch and stored as ``extra_prop``/``extra_dprop``."""
        rows = u if extra is None else np.vstack([u, extra])
        gen = -sys.dt * assemble_generator(sys, rows)
        if derivatives:
            dirs = np.broadcast_to(-sys.dt * sys.B, (len(rows),) + sys.B.shape)
            props, dprops = mat_exp_frechet_multi(gen, dirs)
        else:
            props, dprops = mat_exp(gen), None
        if extra is not None:
            self.extra_prop = props[-1]
            self.extra_dprop = None if dprops is None else dprops[-1]
            props = props[:-1]
            dprops = None if dprops is None else dprops[:-1]
        self.props, self.dprops = props, dprops
        states = np.empty((len(u) + 1,) + x0.shape, dtype=complex)
        states[0] = x0
        props = self.props
        for k in range(len(u)):
            states[k + 1] = props[k] @ states[k]
        self.states = states

    def pullback(self, seeds):
        """Gradient w.r.t. the inputs given per-state seeds ``seeds[k] = dJ/dX_k`` (k = 0..L)."""
        L = self.props.shape[0]
        adj = self.props.conj().swapaxes(-1, -2)
        lam = np.empty_like(self.states)
        lam[L] = seeds[L]
        for k in range(L - 1, 0, -1):
            lam[k] = seeds[k] + adj[k] @ lam[k + 1]
        # grad[k, j] = Re <lam_{k+1}, dU_{k,j} X_k>
        moved = np.einsum("kjab,kbc->kjac", self.dprops, self.states[:-1])
        return np.einsum("kac,kjac->kj", lam[1:].conj(), moved).real

    def initial_costate(self, seeds):
        """dJ/dX_0 for the same seeds (used when X_0 is itself a variable)."""
        lam = seeds[-1]
        for k in range(self.props.shape[0] - 1, -1, -1):
            lam = seeds[k] + self.props[k].conj().T @ lam
        return lam


def _stage_terms(spec, kind, ref, traj, u, t0, terminal):
    L = len(u)
    f = fids(kind, ref, traj.states)
    du = u - spec.ref_at(t0, L)
    cost = spec.alpha * np.sum(1.0 - f[:L]) + _quad(spec.R, du)
    if terminal:
        cost += spec.beta * (1.0 - f[L])
    return cost, du, f


def horizon_cost(spec, sys, x0, u, t0=0, terminal=True):
    """sum_{k<L} l(X_k, u_k) + Phi(X_L) along the nominal prediction from ``x0``."""
    u = _check_inputs(sys, spec, x0, u)
    traj = Trajectory(sys, x0.data, u, derivatives=False)
    return float(_stage_terms(spec, x0.kind, spec.x_ref.data, traj, u, t0, terminal)[0])


def cost_and_gradient(spec, sys, x0_data, kind, u, t0=0, terminal=True, extra_seed=None):
    """Horizon cost, its gradient (L, m) and the forward trajectory.

    ``extra_seed(traj) -> (value, seeds)`` lets constrained solvers add terms
    that depend on the predicted states (augmented-Lagrangian penalties).
    """
    ref = spec.x_ref.data
    traj = Trajectory(sys, x0_data, u, derivatives=True)
    cost, du, _ = _stage_terms(spec, kind, ref, traj, u, t0, terminal)
    L = len(u)
    weights = np.full(L + 1, spec.alpha)
    weights[0] = 0.0
    weights[L] = spec.beta if terminal else 0.0
    seeds = -weights[:, None, None] * fid_grads(kind, ref, traj.states)
    if extra_seed is not None:
        value, more = extra_seed(traj)
        cost += value
        seeds = seeds + more
    grad = traj.pullback(seeds) + 2.0 * du @ spec.R
    return float(cost), grad, traj


def horizon_cost_gradient(spec, sys, x0, u, t0=0, terminal=True):
    """Exact dJ/du for :func:`horizon_cost`, shape (L, m)."""
    u = _check_inputs(sys, spec, x0, u)
    return cost_and_gradient(spec, sys, x0.data, x0.kind, u, t0, terminal)[1]


def fd_gradient(f, u, h=1e-6):
    """Central finite differences of a scalar function of an array."""
    u = np.asarray(u, dtype=float)
    g = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        e = np.zeros_like(u)
        e[idx] = h
        g[idx] = (f(u + e) - f(u - e)) / (2 * h)
    return g
