"""Discrete-time bilinear dynamics ``X_{t+1} = exp(-A(u_t) dt) X_t``."""

from dataclasses import dataclass, field

import numpy as np

from .embedding import commutator_superop
from .errors import ConstraintViolation, DimensionMismatch
from .expm import mat_exp
from .states import GeneralizedState, StateKind


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Drift ``A0``, control generators ``B`` (shape ``(m, n, n)``), timestep and input box.

    ``n`` is the size of the generator: ``d`` for kets and unitaries, ``d**2``
    for vectorized density matrices.
    """

    A0: np.ndarray
    B: np.ndarray
    dt: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    state_kind: StateKind = StateKind.KET
    hermitian: bool = False

    def __post_init__(self):
        a0 = np.array(self.A0, dtype=complex)
        b = np.array(self.B, dtype=complex)
        if b.ndim == 2:
            b = b[None]
        if a0.ndim != 2 or a0.shape[0] != a0.shape[1]:
            raise DimensionMismatch(f"A0 must be square, got {a0.shape}")
        if b.ndim != 3 or b.shape[1:] != a0.shape:
            raise DimensionMismatch(f"control generators {b.shape} do not match A0 {a0.shape}")
        m = b.shape[0]
        lo = np.broadcast_to(np.asarray(self.box_lo, dtype=float), (m,)).copy()
        hi = np.broadcast_to(np.asarray(self.box_hi, dtype=float), (m,)).copy()
        if np.any(lo > hi):
            raise ValueError("box_lo must not exceed box_hi")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for arr in (a0, b, lo, hi):
            arr.setflags(write=False)
        object.__setattr__(self, "A0", a0)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "state_kind", StateKind(self.state_kind))
        if self.hermitian:
            # generators must be i * Hermitian
            for g in (a0, *b):
                h = -1j * g
                if np.linalg.norm(h - h.conj().T) > 1e-10:
                    raise ValueError("generator is not i times a Hermitian matrix")

    @classmethod
    def from_hamiltonians(cls, h0, controls, dt, box_lo=-np.inf, box_hi=np.inf,
                          state_kind=StateKind.KET):
        """Build ``A0 = i H0``, ``B_j = i H_j`` (commutator superoperators for densities)."""
        state_kind = StateKind(state_kind)
        lift = (lambda h: commutator_superop(np.asarray(h, dtype=complex))) \
            if state_kind == StateKind.DENSITY else (lambda h: np.asarray(h, dtype=complex))
        a0 = 1j * lift(h0)
        b = np.array([1j * lift(h) for h in controls])
        return cls(a0, b, dt, box_lo, box_hi, state_kind, hermitian=True)

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def n(self):
        return self.A0.shape[0]

    def with_drift(self, extra):
        """Copy with ``extra`` (a generator, not a Hamiltonian) added to ``A0``."""
        return ControlSystem(self.A0 + extra, self.B, self.dt, self.box_lo, self.box_hi,
                             self.state_kind, self.hermitian)

    def hamiltonian_offset(self, h):
        """Generator corresponding to an extra Hamiltonian term ``h``."""
        h = np.asarray(h, dtype=complex)
        if self.state_kind == StateKind.DENSITY:
            h = commutator_superop(h)
        return 1j * h

    def in_box(self, u, tol=0.0):
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.box_lo - tol) and np.all(u <= self.box_hi + tol))


def assemble_generator(sys, u):
    """A(u) = A0 + sum_j u_j B_j; ``u`` may be an m-vector or an (L, m) sequence."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != sys.m:
        raise DimensionMismatch(f"input has {u.shape[-1]} components, system has {sys.m}")
    n = sys.A0.shape[0]
    return sys.A0 + (u @ sys.B.reshape(sys.m, n * n)).reshape(u.shape[:-1] + (n, n))


def propagators(sys, u):
    """Stack of one-step propagators ``exp(-A(u_k) dt)`` for an (L, m) sequence."""
    return mat_exp(-sys.dt * assemble_generator(sys, np.atleast_2d(u)))


def _check_state(sys, x):
    if x.kind != sys.state_kind:
        raise DimensionMismatch(f"state kind {x.kind.value} but system expects {sys.state_kind.value}")
    if x.data.shape[0] != sys.n:
        raise DimensionMismatch(f"state has {x.data.shape[0]} rows, generators are {sys.n}x{sys.n}")


def step(sys, x, u, enforce_box=False):
    """Advance one timestep."""
    _check_state(sys, x)
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.m,):
        raise DimensionMismatch(f"input must have shape ({sys.m},), got {u.shape}")
    if enforce_box and not sys.in_box(u):
        raise ConstraintViolation(f"input {u} outside [{sys.box_lo}, {sys.box_hi}]")
    prop = mat_exp(-sys.dt * assemble_generator(sys, u))
    return x.with_data(prop @ x.data)


def propagate_data(sys, x0, u):
    """Array version of :func:`propagate`: returns shape ``(L + 1, *x0.shape)``."""
    props = propagators(sys, u)
    out = np.empty((props.shape[0] + 1,) + x0.shape, dtype=complex)
    out[0] = x0
    for k in range(props.shape[0]):
        out[k + 1] = props[k] @ out[k]
    return out


def propagate(sys, x0, u, enforce_box=False):
    """States X_0 .. X_L under the sequence ``u`` of shape (L, m)."""
    _check_state(sys, x0)
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != sys.m or u.shape[0] < 1:
        raise DimensionMismatch(f"control sequence must have shape (L>=1, {sys.m}), got {u.shape}")
    if enforce_box and not sys.in_box(u):
        raise ConstraintViolation("control sequence leaves the input box")
    return [x0.with_data(d) for d in propagate_data(sys, x0.data, u)]


@dataclass(eq=False)
class Plant:
    """Simulated experiment: evolves under ``true_system`` while the controller models ``nominal``.

    Reading ``current`` stands for an exact tomographic state measurement.
    """

    nominal: ControlSystem
    true_system: ControlSystem
    current: GeneralizedState
    history: list = field(default_factory=list)

    def __post_init__(self):
        a, b = self.nominal, self.true_system
        if a.n != b.n or a.m != b.m or a.dt != b.dt or a.state_kind != b.state_kind:
            raise DimensionMismatch("nominal and true systems must share n, m, dt and state kind")
        self.history = [self.current]

    @classmethod
    def with_drift_error(cls, nominal, h_error, eps, x0):
        """Plant whose true drift Hamiltonian is the nominal one plus ``eps * h_error``."""
        true = nominal.with_drift(nominal.hamiltonian_offset(eps * np.asarray(h_error)))
        return cls(nominal, true, x0)

    def step(self, u):
        self.current = step(self.true_system, self.current, u)
        self.history.append(self.current)
        return self.current


def plant_step(plant, u):
    return plant.step(u)
