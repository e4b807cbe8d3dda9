import numpy as np
import pytest

from mpqc import (CostSpec, InfeasibleTerminalConstraint, NotAnEigenstate, SolverOptions,
                  compute_target_input, solve_basic, solve_qoc, solve_setpoint, solve_tec)
from mpqc.costs import fd_gradient
from mpqc.dynamics import propagate, step
from mpqc.errors import KindMismatch
from mpqc.solvers.common import initial_inputs, project_box, shift_sequence
from mpqc.solvers.setpoint import _SetpointProblem
from mpqc.solvers.target import target_input_residual
from mpqc.solvers.tec import _TecProblem
from mpqc.states import fidelity, identity_state, ket, random_ket

EXACT = SolverOptions(init_noise=0.0)


def test_project_box():
    np.testing.assert_array_equal(project_box([[0.2, -0.3]], -1, 1), [[0.2, -0.3]])
    np.testing.assert_array_equal(project_box([[3.0, -5.0]], [-1, -2], [1, 2]), [[1.0, -2.0]])
    with pytest.raises(ValueError):
        project_box([0.0], 1, -1)


def test_shift_sequence():
    u = np.arange(8.0).reshape(4, 2)
    np.testing.assert_array_equal(shift_sequence(u, 1, 4, [9, 9]),
                                  [[2, 3], [4, 5], [6, 7], [9, 9]])
    np.testing.assert_array_equal(shift_sequence(u, 0, 2, [9, 9]), u[:2])
    np.testing.assert_array_equal(shift_sequence(u, 4, 2, [7, 8]), [[7, 8], [7, 8]])


def test_initial_inputs_seeded_and_in_box(qubit3):
    opts = SolverOptions(rng_seed=5, init_noise=0.5)
    center = np.ones((6, 3))
    a = initial_inputs(qubit3, center, opts)
    assert np.array_equal(a, initial_inputs(qubit3, center, opts))
    assert qubit3.in_box(a)
    assert not np.array_equal(a, initial_inputs(qubit3, center, opts.replace(rng_seed=6)))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(inner_solver="newton")
    with pytest.raises(ValueError):
        SolverOptions(penalty_growth=1.0)
    with pytest.raises(KeyError):
        SolverOptions.from_dict({"bogus": 1})
    opts = SolverOptions(max_inner_iters=7)
    assert SolverOptions.from_dict(opts.to_dict()) == opts


# -- target input --------------------------------------------------------------

def test_target_input_drift_eigenstate(qubit3):
    np.testing.assert_array_equal(compute_target_input(qubit3, ket("1")), [0.0, 0.0, 0.0])


def test_target_input_plus_state(qubit3):
    u = compute_target_input(qubit3, ket("+"))
    # A(u)|+> parallel to |+> needs u_2 = 0 and u_3 = 0.5; min norm sets u_1 = 0
    np.testing.assert_allclose(u, [0.0, 0.0, 0.5], atol=1e-12)
    assert target_input_residual(qubit3, ket("+"), u) <= 1e-10
    for u1 in (-0.7, 0.3):
        assert target_input_residual(qubit3, ket("+"), [u1, 0.0, 0.5]) <= 1e-12


def test_target_input_not_an_eigenstate(qubit_x):
    out = compute_target_input(qubit_x, ket("-"))
    assert isinstance(out, NotAnEigenstate)
    assert out.residual > 0.1
    # brute force: no single input in a wide range comes close
    grid = np.linspace(-50, 50, 20001)
    assert min(target_input_residual(qubit_x, ket("-"), [g]) for g in grid) >= out.residual - 1e-9


def test_target_input_kets_only(qubit3):
    with pytest.raises(KindMismatch):
        compute_target_input(qubit3, identity_state(2))


# -- basic -------------------------------------------------------------------------

def _spec(ref, m=3, **kw):
    kw.setdefault("R", 1e-4 * np.eye(m))
    kw.setdefault("u_ref", np.zeros(m))
    return CostSpec(ref, **kw)


def test_basic_at_target_returns_reference(qubit3):
    spec = _spec(ket("1"), beta=1.0)
    res = solve_basic(qubit3, spec, ket("1"), 5, EXACT)
    np.testing.assert_allclose(res.u_opt, 0.0, atol=1e-12)
    assert res.cost == pytest.approx(0.0, abs=1e-12)


def test_basic_single_solve_respects_reachability(qubit3):
    # |0> -> |1> in L*dt = 0.5: the polar angle moves at most 2*sqrt(2)*T, capping F near 0.44
    spec = _spec(ket("1"), alpha=0.0, R=np.zeros((3, 3)), beta=1.0)
    res = solve_basic(qubit3, spec, ket("0"), 10, SolverOptions())
    assert qubit3.in_box(res.u_opt)
    final = propagate(qubit3, ket("0"), res.u_opt)[-1]
    np.testing.assert_allclose(res.x_pred[-1], final.data, atol=1e-14)
    f = fidelity(final, ket("1"))
    assert f <= (1 - np.cos(2 * np.sqrt(2) * 0.5)) / 2 + 1e-12
    # brute force over constant inputs: the optimized pulse does at least as well
    grid = np.linspace(-1, 1, 11)
    best = max(fidelity(propagate(qubit3, ket("0"), np.tile([a, b, c], (10, 1)))[-1], ket("1"))
               for a in grid for b in grid for c in grid)
    assert f >= best - 1e-9


def test_basic_is_deterministic(qubit3):
    spec = _spec(ket("+"), beta=1.0)
    a = solve_basic(qubit3, spec, ket("0"), 8, SolverOptions(rng_seed=3))
    b = solve_basic(qubit3, spec, ket("0"), 8, SolverOptions(rng_seed=3))
    assert np.array_equal(a.u_opt, b.u_opt) and a.cost == b.cost


def test_qoc_is_basic_over_full_horizon(qubit3):
    spec = _spec(ket("1"), beta=1.0)
    a = solve_qoc(qubit3, spec, ket("0"), 12, SolverOptions())
    b = solve_basic(qubit3, spec, ket("0"), 12, SolverOptions())
    assert np.array_equal(a.u_opt, b.u_opt)


@pytest.mark.parametrize("inner", ["lbfgsb", "pgd"])
def test_inner_solvers_agree_on_small_problem(qubit3, inner):
    spec = _spec(ket("1"), beta=1.0)
    res = solve_basic(qubit3, spec, ket("0"), 4, SolverOptions(inner_solver=inner,
                                                              max_inner_iters=3000))
    ref = solve_basic(qubit3, spec, ket("0"), 4, SolverOptions())
    assert res.cost == pytest.approx(ref.cost, rel=1e-4)


# -- terminal equality constraint ---------------------------------------------------

def test_tec_at_target_is_trivial(qubit3):
    spec = _spec(ket("1"))
    res = solve_tec(qubit3, spec, ket("1"), 4, EXACT)
    np.testing.assert_allclose(res.u_opt, 0.0, atol=1e-12)
    assert res.constraint_residual <= 1e-14


def test_tec_reaches_target_with_long_horizon(qubit_x):
    spec = _spec(ket("-"), m=1)
    res = solve_tec(qubit_x, spec, ket("+"), 30, SolverOptions())
    assert res.constraint_residual <= 1e-7
    final = propagate(qubit_x, ket("+"), res.u_opt)[-1]
    assert fidelity(final, ket("-")) >= 1 - 1e-7
    assert qubit_x.in_box(res.u_opt)


def test_tec_single_step_is_infeasible(qubit_x):
    # dense grid over the only input: one step gets nowhere near |->
    best = max(fidelity(step(qubit_x, ket("+"), [g]), ket("-")) for g in np.linspace(-1, 1, 2001))
    assert best < 0.5
    with pytest.raises(InfeasibleTerminalConstraint) as info:
        solve_tec(qubit_x, _spec(ket("-"), m=1), ket("+"), 1, SolverOptions())
    assert info.value.result.constraint_residual >= 1 - best - 1e-9


def test_tec_augmented_objective_gradient(qubit3, rng):
    spec = _spec(ket("1"), R=1e-2 * np.eye(3))
    x0 = random_ket(2, rng)
    prob = _TecProblem(qubit3, spec, x0, (5, 3), 0)
    mu = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
    z = rng.uniform(-1, 1, 15)
    _, g = prob.objective(z, mu, 7.0, True)
    fd = fd_gradient(lambda v: prob.objective(v, mu, 7.0, False)[0], z)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


# -- setpoint ------------------------------------------------------------------------

def _setpoint_spec(ref, **kw):
    kw.setdefault("eta", 5.0)
    kw.setdefault("S", np.eye(3))
    return _spec(ref, **kw)


def test_setpoint_at_target_is_trivial(qubit3):
    spec = _setpoint_spec(ket("1"), u_target=np.zeros(3))
    res = solve_setpoint(qubit3, spec, ket("1"), 2, EXACT)
    s, us = res.setpoint
    assert abs(np.vdot(s, ket("1").data[:, 0])) ** 2 == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(us, 0.0, atol=1e-10)
    assert res.cost == pytest.approx(0.0, abs=1e-12)


def test_setpoint_without_target_weight_holds_current_state(qubit3):
    # eta = 0, S = 0: any reachable steady state is optimal; |+> is one
    spec = _setpoint_spec(ket("1"), eta=0.0, S=np.zeros((3, 3)))
    res = solve_setpoint(qubit3, spec, ket("+"), 2, SolverOptions())
    assert res.constraint_residual <= 1e-7
    assert res.cost <= 1e-7


def test_setpoint_moves_towards_target(qubit3):
    u_t = compute_target_input(qubit3, ket("+"))
    spec = _setpoint_spec(ket("+"), u_target=u_t)
    res = solve_setpoint(qubit3, spec, ket("0"), 2, SolverOptions())
    s = res.setpoint[0]
    assert abs(np.vdot(s, ket("+").data[:, 0])) ** 2 > 0.5
    assert res.constraint_residual <= 1e-7


def test_setpoint_augmented_objective_gradient(qubit3, rng):
    spec = _setpoint_spec(ket("+"), R=1e-2 * np.eye(3), u_target=[0.0, 0.0, 0.5])
    prob = _SetpointProblem(qubit3, spec, random_ket(2, rng), 3)
    mu = rng.normal(size=2) + 1j * rng.normal(size=2)
    z = rng.uniform(-1, 1, 12)
    _, g = prob.objective(z, mu, 3.0, True)
    fd = fd_gradient(lambda v: prob.objective(v, mu, 3.0, False)[0], z)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


def test_setpoint_kets_only(qubit3):
    with pytest.raises(KindMismatch):
        solve_setpoint(qubit3, _setpoint_spec(identity_state(2)), identity_state(2), 2, EXACT)
