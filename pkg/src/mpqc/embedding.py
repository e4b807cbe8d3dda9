"""
Real-valued reformulation of the complex dynamics.

A ket ``psi = a + i b`` evolving under ``d/dt psi = -i H psi`` with
``H = H_r + i H_i`` satisfies::

    d/dt [a; b] = [[H_i, H_r], [-H_r, H_i]] [a; b]

and a density matrix ``rho = A + i B`` under ``d/dt rho = -i [H, rho]``
obeys the same block pattern with every block replaced by its commutator
superoperator acting on ``vec(A)``, ``vec(B)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .expm import mat_exp
from .states import GeneralizedState, StateKind, devec, vec


@dataclass(frozen=True)
class RealEmbedding:
    kind: StateKind
    a: np.ndarray
    b: np.ndarray

    def stacked(self):
        """Column-stacked real vector/matrix [a; b] (density blocks are vectorized first)."""
        if self.kind == StateKind.DENSITY:
            return np.vstack([vec(self.a).real, vec(self.b).real])
        return np.vstack([self.a, self.b])


def embed_real(x):
    """Split ``x`` into real and imaginary parts; density states are devectorized to A, B."""
    data = devec(x.data) if x.kind == StateKind.DENSITY else x.data
    return RealEmbedding(x.kind, data.real.copy(), data.imag.copy())


def recover_complex(e, check=True):
    z = e.a + 1j * e.b
    if e.kind == StateKind.DENSITY:
        z = vec(z)
    return GeneralizedState(e.kind, z, check=check)


def from_stacked(kind, stacked, check=True):
    """Inverse of :meth:`RealEmbedding.stacked`."""
    stacked = np.asarray(stacked, dtype=float)
    half = stacked.shape[0] // 2
    a, b = stacked[:half], stacked[half:]
    if kind == StateKind.DENSITY:
        a, b = devec(a), devec(b)
        return recover_complex(RealEmbedding(kind, a.real, b.real), check=check)
    return recover_complex(RealEmbedding(kind, a, b), check=check)


def commutator_superop(h):
    """Matrix of ``X -> [h, X]`` acting on column-stacked ``vec(X)``."""
    n = h.shape[0]
    eye = np.eye(n)
    return np.kron(eye, h) - np.kron(h.T, eye)


def embedded_generator(h_r, h_i, kind=StateKind.KET):
    """Real block generator G with ``d/dt [a; b] = G [a; b]``.

    For ``DENSITY`` the blocks are commutator superoperators (size 2 d^2).
    """
    h_r = np.asarray(h_r, dtype=float)
    h_i = np.asarray(h_i, dtype=float)
    if h_r.ndim != 2 or h_r.shape[0] != h_r.shape[1] or h_r.shape != h_i.shape:
        raise DimensionMismatch(f"H_r {h_r.shape} and H_i {h_i.shape} must be equal and square")
    if StateKind(kind) == StateKind.DENSITY:
        h_r, h_i = commutator_superop(h_r), commutator_superop(h_i)
    return np.block([[h_i, h_r], [-h_r, h_i]])


def embedded_propagate(h, x, dt):
    """Evolve ``x`` for time ``dt`` under Hamiltonian ``h`` entirely in real arithmetic."""
    h = np.asarray(h, dtype=complex)
    g = embedded_generator(h.real, h.imag, x.kind)
    y = mat_exp(g * dt) @ embed_real(x).stacked()
    return from_stacked(x.kind, y, check=False)
