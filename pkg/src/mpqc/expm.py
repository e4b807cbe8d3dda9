"""
Matrix exponential by scaling and squaring with diagonal Pade approximants,
plus its directional (Frechet) derivative.

All routines accept a single square matrix or a stack ``(..., n, n)``; stacks
are exponentiated in one vectorised pass, which is what the gradient code in
:mod:`mpqc.costs` relies on for speed.

Reference: N. J. Higham, "The scaling and squaring method for the matrix
exponential revisited", SIAM J. Matrix Anal. Appl. 26 (2005).
"""

import numpy as np

from .errors import DimensionMismatch

# Backward-error bounds theta_m for degree m (double precision).
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
        16380.0, 182.0, 1.0,
    ),
}


def _check_square(a, name="A"):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def _one_norm(a):
    return np.max(np.sum(np.abs(a), axis=-2), axis=-1)


def _pade_uv(a, m, eye):
    b = _PADE[m]
    a2 = a @ a
    if m == 3:
        u = a @ (b[3] * a2 + b[1] * eye)
        v = b[2] * a2 + b[0] * eye
        return u, v
    a4 = a2 @ a2
    if m == 5:
        u = a @ (b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    a6 = a2 @ a4
    if m == 7:
        u = a @ (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    if m == 9:
        a8 = a4 @ a4
        u = a @ (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
    )
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    return u, v


def mat_exp(a):
    """Return ``exp(a)`` for a square matrix or a stack of them.

    The Pade degree and number of squarings are chosen from the largest
    1-norm in the stack, so every member gets at least the accuracy the
    single-matrix algorithm would give it.
    """
    a = _check_square(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("mat_exp: non-finite entries")
    dtype = np.result_type(a.dtype, np.float64)
    a = a.astype(dtype, copy=False)
    n = a.shape[-1]
    eye = np.eye(n, dtype=dtype)
    norm = float(np.max(_one_norm(a))) if a.size else 0.0

    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            u, v = _pade_uv(a, m, eye)
            return np.linalg.solve(v - u, v + u)

    s = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    u, v = _pade_uv(a / 2.0**s, 13, eye)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def mat_exp_frechet(a, e):
    """Return ``(exp(a), L)`` where ``L`` is the derivative of exp at ``a`` in direction ``e``.

    Uses the block identity ``exp([[a, e], [0, a]]) = [[exp(a), L], [0, exp(a)]]``.
    """
    a = _check_square(a)
    e = _check_square(e, "E")
    if a.shape != e.shape:
        raise DimensionMismatch(f"A {a.shape} and E {e.shape} differ")
    expa, derivs = mat_exp_frechet_multi(a, e[..., None, :, :])
    return expa, derivs[..., 0, :, :]


def mat_exp_frechet_multi(a, directions):
    """Derivatives of exp at ``a`` along several directions at once.

    ``a`` has shape ``(..., n, n)`` and ``directions`` shape ``(..., k, n, n)``.
    One exponential of the ``n(k+1)``-sized block upper-triangular matrix
    ``[[a, E_1 .. E_k], [0, I_k (x) a]]`` is taken; its first block row holds
    ``exp(a)`` followed by the ``k`` directional derivatives.

    Returns ``(exp(a), D)`` with ``D`` of shape ``(..., k, n, n)``.
    """
    a = _check_square(a)
    directions = np.asarray(directions)
    n = a.shape[-1]
    if directions.shape[-2:] != (n, n):
        raise DimensionMismatch(
            f"directions must have trailing shape {(n, n)}, got {directions.shape}"
        )
    k = directions.shape[-3]
    batch = np.broadcast_shapes(a.shape[:-2], directions.shape[:-3])
    dtype = np.result_type(a.dtype, directions.dtype, np.float64)
    big = np.zeros(batch + (n * (k + 1), n * (k + 1)), dtype=dtype)
    for j in range(k + 1):
        big[..., j * n:(j + 1) * n, j * n:(j + 1) * n] = a
    for j in range(k):
        big[..., :n, (j + 1) * n:(j + 2) * n] = directions[..., j, :, :]
    top = mat_exp(big)[..., :n, :]
    expa = top[..., :, :n]
    derivs = top[..., :, n:].reshape(top.shape[:-1] + (k, n)).swapaxes(-3, -2)
    return expa, derivs
