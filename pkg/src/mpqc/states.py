"""Generalized quantum states and the fidelity measures used as costs."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, KindMismatch

STATE_TOL = 1e-10


class StateKind(str, Enum):
    KET = "ket"
    UNITARY = "unitary"
    DENSITY = "density"  # column-stacked vec(rho)


@dataclass(frozen=True, eq=False)
class GeneralizedState:
    """State variable ``X`` of the bilinear dynamics.

    ``data`` is a complex column vector (``KET``, ``DENSITY``) or a square
    matrix (``UNITARY``).  The array is made read-only on construction.
    """

    kind: StateKind
    data: np.ndarray
    check: bool = True

    def __post_init__(self):
        kind = StateKind(self.kind)
        data = np.array(self.data, dtype=complex)
        if kind in (StateKind.KET, StateKind.DENSITY) and data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.size == 0:
            raise DimensionMismatch(f"state data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("state has non-finite entries")
        if kind == StateKind.UNITARY and data.shape[0] != data.shape[1]:
            raise DimensionMismatch("unitary state must be square")
        if kind != StateKind.UNITARY and data.shape[1] != 1:
            raise DimensionMismatch(f"{kind.value} state must be a column vector")
        if kind == StateKind.DENSITY:
            d = int(round(np.sqrt(data.shape[0])))
            if d * d != data.shape[0]:
                raise DimensionMismatch("vectorized density length must be a square")
        data.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", data)
        if self.check:
            validate_state(self)

    @property
    def dim(self):
        """Hilbert-space dimension d."""
        if self.kind == StateKind.DENSITY:
            return int(round(np.sqrt(self.data.shape[0])))
        return self.data.shape[0]

    def with_data(self, data, check=False):
        return GeneralizedState(self.kind, data, check=check)

    def __repr__(self):
        return f"GeneralizedState({self.kind.value}, dim={self.dim})"


def validate_state(x, tol=STATE_TOL):
    """Raise ``ValueError`` when ``x`` violates its kind's normalisation."""
    if x.kind == StateKind.KET:
        err = abs(np.linalg.norm(x.data) - 1.0)
        if err > tol:
            raise ValueError(f"ket not normalized (| |psi| - 1 | = {err:.2e})")
    elif x.kind == StateKind.UNITARY:
        u = x.data
        err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
        if err > tol:
            raise ValueError(f"matrix not unitary (|U^H U - I|_F = {err:.2e})")
    else:
        rho = devec(x.data)
        if np.linalg.norm(rho - rho.conj().T) > tol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")


def vec(m):
    """Column-stacking vectorization, returned as a column vector."""
    return np.asarray(m).reshape(-1, order="F")[:, None]


def devec(v):
    v = np.asarray(v).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


_NAMED_QUBIT = {
    "0": np.array([1.0, 0.0]),
    "1": np.array([0.0, 1.0]),
    "+": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0]) / np.sqrt(2.0),
    "+i": np.array([1.0, 1.0j]) / np.sqrt(2.0),
    "-i": np.array([1.0, -1.0j]) / np.sqrt(2.0),
}


def ket(label):
    """Named ket on one or more qubits, e.g. ``ket("0")``, ``ket("+")``, ``ket("01")``.

    Multi-qubit labels are read character by character over ``0 1 + -``.
    """
    if label in _NAMED_QUBIT:
        return GeneralizedState(StateKind.KET, _NAMED_QUBIT[label])
    if label and all(c in "01+-" for c in label):
        v = np.array([1.0 + 0j])
        for c in label:
            v = np.kron(v, _NAMED_QUBIT[c])
        return GeneralizedState(StateKind.KET, v)
    raise KeyError(f"unknown state label {label!r}")


def density(psi):
    """Vectorized density matrix of a pure ket."""
    v = psi.data[:, 0]
    return GeneralizedState(StateKind.DENSITY, vec(np.outer(v, v.conj())))


def identity_state(d):
    return GeneralizedState(StateKind.UNITARY, np.eye(d))


def random_ket(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return GeneralizedState(StateKind.KET, v / np.linalg.norm(v))


def random_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return GeneralizedState(StateKind.UNITARY, q)


def _require(x, y, kind):
    if x.kind != kind or y.kind != kind:
        raise KindMismatch(f"expected two {kind.value} states, got {x.kind.value} and {y.kind.value}")
    if x.data.shape != y.data.shape:
        raise KindMismatch(f"dimension mismatch: {x.data.shape} vs {y.data.shape}")


def fidelity_pure(psi, psi_ref):
    """|<psi_ref|psi>|^2."""
    _require(psi, psi_ref, StateKind.KET)
    return float(min(1.0, abs(np.vdot(psi_ref.data, psi.data)) ** 2))


def fidelity_unitary(u, u_ref):
    """Phase-insensitive gate fidelity |tr(U_ref^H U)|^2 / d^2."""
    _require(u, u_ref, StateKind.UNITARY)
    d = u.data.shape[0]
    return float(min(1.0, abs(np.vdot(u_ref.data, u.data)) ** 2 / d**2))


def fidelity_density(rho, rho_ref):
    """Hilbert-Schmidt overlap Re tr(rho_ref rho); the fidelity whenever one state is pure."""
    _require(rho, rho_ref, StateKind.DENSITY)
    return float(np.real(np.vdot(rho_ref.data, rho.data)))


def fidelity(x, x_ref):
    """Dispatch on the state kind."""
    if x.kind == StateKind.KET:
        return fidelity_pure(x, x_ref)
    if x.kind == StateKind.UNITARY:
        return fidelity_unitary(x, x_ref)
    return fidelity_density(x, x_ref)


def overlap_norm(kind, ref):
    """Normaliser n with F(X, ref) = |<ref, X>|^2 / n for kets and unitaries."""
    if kind == StateKind.UNITARY:
        return float(ref.shape[0]) ** 2
    return 1.0


def phase_aligned_distance(psi1, psi2):
    """min_phi || psi1 - e^{i phi} psi2 ||_2."""
    o = np.vdot(psi2.data, psi1.data)
    phase = o / abs(o) if abs(o) > 0 else 1.0
    return float(np.linalg.norm(psi1.data - phase * psi2.data))
