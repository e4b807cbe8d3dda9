"""Pauli matrices and Pauli-string operators."""

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


def pauli_word(word):
    """Tensor product for a word over {I, X, Y, Z}; ``"XZ"`` is X (x) Z."""
    if not word or any(c not in PAULI for c in word):
        raise ValueError(f"bad Pauli word {word!r}")
    return reduce(np.kron, (PAULI[c] for c in word))


def pauli_sum(terms):
    """Sum of ``(coefficient, word)`` pairs. All words must have the same length."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty Pauli sum")
    n = len(terms[0][1])
    out = np.zeros((2**n, 2**n), dtype=complex)
    for coef, word in terms:
        if len(word) != n:
            raise ValueError("Pauli words of differing length")
        out += complex(coef) * pauli_word(word)
    return out
