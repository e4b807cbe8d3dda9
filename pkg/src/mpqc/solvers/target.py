"""Constant input that makes a target ket an eigenvector of the generator."""

from dataclasses import dataclass

import numpy as np

from ..dynamics import assemble_generator
from ..errors import KindMismatch
from ..states import StateKind


@dataclass(frozen=True)
class NotAnEigenstate:
    """No admissible constant input keeps the target stationary."""

    residual: float
    u_best: np.ndarray


def target_input_residual(sys, x_ref, u):
    """|| P_perp A(u) x_ref || with P_perp the projector orthogonal to x_ref."""
    r = x_ref.data[:, 0]
    v = assemble_generator(sys, u) @ r
    return float(np.linalg.norm(v - r * np.vdot(r, v)))


def compute_target_input(sys, x_ref, tol=1e-10):
    """Minimum-norm u with A(u) x_ref parallel to x_ref, or :class:`NotAnEigenstate`.

    The eigenvalue is allowed to be complex (purely imaginary for Hamiltonian
    generators).  The condition is affine in u, so this is a linear
    least-squares problem over the stacked real and imaginary parts.
    """
    if x_ref.kind != StateKind.KET:
        raise KindMismatch("target input is defined for kets")
    r = x_ref.data[:, 0]
    proj = np.eye(len(r)) - np.outer(r, r.conj())
    cols = np.stack([proj @ (b @ r) for b in sys.B], axis=1)
    rhs = -(proj @ (sys.A0 @ r))
    mat = np.vstack([cols.real, cols.imag])
    vec = np.concatenate([rhs.real, rhs.imag])
    u = np.linalg.lstsq(mat, vec, rcond=None)[0]
    u[np.abs(u) < 1e-14] = 0.0
    residual = target_input_residual(sys, x_ref, u)
    if residual <= tol:
        return u
    return NotAnEigenstate(residual, u)
