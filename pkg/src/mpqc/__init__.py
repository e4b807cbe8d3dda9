"""Model predictive quantum control: receding-horizon pulse design for bilinear quantum systems."""

from .costs import CostSpec, horizon_cost, horizon_cost_gradient, stage_cost, terminal_cost
from .dynamics import ControlSystem, Plant, plant_step, propagate, step
from .errors import (ConfigError, DimensionMismatch, InfeasibleSetpoint,
                     InfeasibleTerminalConstraint, KindMismatch, MpqcError, NotApplicable,
                     SchemeMismatch, SolverDiverged)
from .mpc import (Mode, MpqcConfig, Scheme, TrajectoryLog, check_descent,
                  check_exponential_decay, run_mpqc)
from .solvers import (NotAnEigenstate, SolveResult, SolverOptions, compute_target_input,
                      solve_basic, solve_qoc, solve_setpoint, solve_tec)
from .states import GeneralizedState, StateKind, fidelity, ket

__version__ = "0.1.0"
