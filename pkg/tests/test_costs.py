import numpy as np
import pytest

from mpqc import CostSpec, horizon_cost, horizon_cost_gradient, stage_cost, terminal_cost
from mpqc.costs import fd_gradient
from mpqc.dynamics import propagate
from mpqc.errors import DimensionMismatch
from mpqc.states import GeneralizedState, StateKind, ket, random_ket


def _spec(ref, m=3, **kw):
    kw.setdefault("R", 1e-2 * np.eye(m))
    kw.setdefault("u_ref", np.zeros(m))
    return CostSpec(ref, **kw)


def test_stage_cost_zero_at_reference():
    assert stage_cost(_spec(ket("0")), ket("0"), np.zeros(3)) == 0.0


def test_stage_cost_substitution():
    # |<x|ref>|^2 = 0.75
    x = GeneralizedState(StateKind.KET, [np.sqrt(0.75), 0.5])
    spec = _spec(ket("0"), R=np.zeros((3, 3)))
    assert stage_cost(spec, x, np.ones(3)) == pytest.approx(0.25, abs=1e-15)


def test_stage_cost_input_penalty():
    spec = _spec(ket("0"), R=np.diag([1.0, 2.0, 3.0]), u_ref=[0.1, 0.0, 0.0])
    assert stage_cost(spec, ket("0"), [0.3, 1.0, -1.0]) == pytest.approx(0.04 + 2 + 3)


def test_stage_cost_time_varying_reference():
    spec = _spec(ket("0"), m=1, R=np.eye(1), u_ref=[[0.0], [1.0]])
    assert stage_cost(spec, ket("0"), [1.0], t=0) == pytest.approx(1.0)
    assert stage_cost(spec, ket("0"), [1.0], t=1) == 0.0
    assert stage_cost(spec, ket("0"), [1.0], t=9) == 0.0


def test_terminal_cost_examples():
    assert terminal_cost(_spec(ket("1"), beta=3.0), ket("1")) == 0.0
    assert terminal_cost(_spec(ket("1"), beta=0.0), ket("0")) == 0.0
    x = GeneralizedState(StateKind.KET, [np.sqrt(0.8), np.sqrt(0.2)])
    assert terminal_cost(_spec(ket("0"), beta=5.0), x) == pytest.approx(1.0, abs=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        _spec(ket("0"), alpha=-1.0)
    with pytest.raises(ValueError):
        _spec(ket("0"), R=-np.eye(3))
    with pytest.raises(DimensionMismatch):
        _spec(ket("0"), R=np.eye(2))


def test_horizon_cost_zero_for_held_eigenstate(qubit3):
    # |1> is an eigenstate of the drift, so u = 0 keeps it in place
    spec = _spec(ket("1"), beta=2.0)
    assert horizon_cost(spec, qubit3, ket("1"), np.zeros((10, 3))) == pytest.approx(0.0, abs=1e-12)


def test_horizon_cost_is_sum_of_stages(qubit3, rng):
    for _ in range(5):
        spec = _spec(random_ket(2, rng), alpha=rng.uniform(0.1, 2), beta=rng.uniform(0, 3),
                     R=np.diag(rng.uniform(0, 1, 3)), u_ref=rng.uniform(-1, 1, (12, 3)))
        x0 = random_ket(2, rng)
        u = rng.uniform(-1, 1, (12, 3))
        states = propagate(qubit3, x0, u)
        total = sum(stage_cost(spec, states[k], u[k], k) for k in range(12))
        total += terminal_cost(spec, states[-1])
        assert horizon_cost(spec, qubit3, x0, u) == pytest.approx(total, abs=1e-12)
        no_term = horizon_cost(spec, qubit3, x0, u, terminal=False)
        assert no_term == pytest.approx(total - terminal_cost(spec, states[-1]), abs=1e-12)


def test_gradient_pure_input_penalty(qubit3, rng):
    R = np.diag([0.5, 1.0, 2.0])
    u_ref = rng.uniform(-1, 1, 3)
    spec = _spec(ket("0"), alpha=0.0, R=R, u_ref=u_ref)
    u = rng.uniform(-1, 1, (4, 3))
    g = horizon_cost_gradient(spec, qubit3, ket("0"), u)
    np.testing.assert_allclose(g, 2 * (u - u_ref) @ R, atol=1e-14)


def test_gradient_matches_finite_differences(qubit3, rng):
    for t0 in (0, 3):
        spec = _spec(ket("1"), beta=2.0, u_ref=rng.uniform(-1, 1, (20, 3)))
        x0 = random_ket(2, rng)
        u = rng.uniform(-1, 1, (10, 3))
        g = horizon_cost_gradient(spec, qubit3, x0, u, t0=t0)
        fd = fd_gradient(lambda v: horizon_cost(spec, qubit3, x0, v, t0=t0), u)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-5


def test_gradient_unitary_and_density(rng):
    from mpqc import ControlSystem
    from mpqc.pauli import SX, SY, SZ
    from mpqc.states import density, identity_state, random_unitary
    for kind, x0, ref in [
        (StateKind.UNITARY, identity_state(2), random_unitary(2, rng)),
        (StateKind.DENSITY, density(ket("0")), density(random_ket(2, rng))),
    ]:
        sys = ControlSystem.from_hamiltonians(SZ, [SX, SY], 0.1, -1, 1, state_kind=kind)
        spec = _spec(ref, m=2, beta=1.5)
        u = rng.uniform(-1, 1, (6, 2))
        g = horizon_cost_gradient(spec, sys, x0, u)
        fd = fd_gradient(lambda v: horizon_cost(spec, sys, x0, v), u)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-5


def test_gradient_vanishes_at_held_eigenstate(qubit3):
    spec = _spec(ket("1"), beta=1.0)
    g = horizon_cost_gradient(spec, qubit3, ket("1"), np.zeros((5, 3)))
    assert np.linalg.norm(g) <= 1e-12
