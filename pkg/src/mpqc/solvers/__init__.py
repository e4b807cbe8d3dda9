"""Finite-horizon solvers used inside the receding-horizon loop."""

from .basic import solve_basic, solve_qoc
from .common import SolveResult, SolverOptions, initial_inputs, project_box, shift_sequence
from .setpoint import solve_setpoint
from .target import NotAnEigenstate, compute_target_input
from .tec import solve_tec

__all__ = [
    "NotAnEigenstate", "SolveResult", "SolverOptions", "compute_target_input",
    "initial_inputs", "project_box", "shift_sequence", "solve_basic", "solve_qoc",
    "solve_setpoint", "solve_tec",
]
