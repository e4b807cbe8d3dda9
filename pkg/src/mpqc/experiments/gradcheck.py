"""Finite-difference check of the exact horizon-cost gradient on random instances."""

from dataclasses import dataclass

import numpy as np

from ..costs import CostSpec, fd_gradient, horizon_cost, horizon_cost_gradient
from ..dynamics import ControlSystem
from ..states import StateKind, density, random_ket, random_unitary

THRESHOLD = 1e-5
KINDS = (StateKind.KET, StateKind.UNITARY, StateKind.DENSITY)


@dataclass(frozen=True)
class GradCheckReport:
    trials: int
    seed: int
    errors: tuple        # per-trial relative error
    kinds: tuple

    @property
    def max_error(self):
        return max(self.errors)

    @property
    def passed(self):
        return self.max_error <= THRESHOLD

    def lines(self):
        out = [f"gradient check: {self.trials} random instances, seed {self.seed}"]
        for kind in KINDS:
            errs = [e for e, k in zip(self.errors, self.kinds) if k == kind.value]
            if errs:
                out.append(f"  {kind.value:8s} n={len(errs):3d}  max rel. error {max(errs):.3e}")
        out.append(f"max relative error {self.max_error:.3e} "
                   f"({'PASS' if self.passed else 'FAIL'}, threshold {THRESHOLD:.0e})")
        return out


def _random_hermitian(d, rng):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2.0


def random_instance(rng):
    """Random (system, cost, x0, u, t0, terminal) on one or two qubits."""
    kind = KINDS[rng.integers(len(KINDS))]
    d = int(rng.choice([2, 4])) if kind != StateKind.DENSITY else 2
    m = int(rng.integers(1, 4))
    L = int(rng.integers(1, 7))
    dt = float(rng.uniform(0.02, 0.3))
    sys = ControlSystem.from_hamiltonians(_random_hermitian(d, rng),
                                          [_random_hermitian(d, rng) for _ in range(m)],
                                          dt, state_kind=kind)
    if kind == StateKind.KET:
        x0, ref = random_ket(d, rng), random_ket(d, rng)
    elif kind == StateKind.UNITARY:
        x0, ref = random_unitary(d, rng), random_unitary(d, rng)
    else:
        x0, ref = density(random_ket(d, rng)), density(random_ket(d, rng))
    a = rng.normal(size=(m, m))
    u_ref = rng.normal(size=(L + 2, m)) if rng.random() < 0.5 else rng.normal(size=m)
    spec = CostSpec(ref, 0.1 * a @ a.T, u_ref, alpha=float(rng.uniform(0.5, 2.0)),
                    beta=float(rng.uniform(0.0, 3.0)))
    u = rng.normal(size=(L, m))
    t0 = int(rng.integers(0, 3))
    return sys, spec, x0, u, t0, bool(rng.random() < 0.7)


def relative_error(g, fd):
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12))


def check_gradients(seed=0, trials=50, h=1e-6):
    """Relative error of the adjoint gradient against central differences."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    errors, kinds = [], []
    for _ in range(trials):
        sys, spec, x0, u, t0, terminal = random_instance(rng)
        g = horizon_cost_gradient(spec, sys, x0, u, t0, terminal)
        fd = fd_gradient(lambda v: horizon_cost(spec, sys, x0, v, t0, terminal), u, h)
        errors.append(relative_error(g, fd))
        kinds.append(x0.kind.value)
    return GradCheckReport(trials, seed, tuple(errors), tuple(kinds))
