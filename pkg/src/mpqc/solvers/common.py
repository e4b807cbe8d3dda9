"""Options, results and small helpers shared by the finite-horizon solvers."""

from dataclasses import dataclass, field, fields, asdict
from typing import Optional

import numpy as np

from ..states import GeneralizedState


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for every MPQC subproblem solver.

    ==================  =========  ==================================================
    field               default    meaning
    ==================  =========  ==================================================
    max_outer_iters     40         augmented-Lagrangian multiplier updates
    max_inner_iters     400        projected-gradient iterations per inner solve
    step_size           1.0        pgd only: first trial step (``fixed``: the constant step)
    inner_solver        "lbfgsb"   ``"lbfgsb"`` (SciPy L-BFGS-B) or ``"pgd"`` (projected gradient)
    line_search         "armijo"   pgd only: ``"armijo"`` (BB trial + backtracking) or ``"fixed"``
    grad_tol            1e-6       projected-gradient stationarity, inf-norm
    constraint_tol      1e-7       terminal / steady-state residual (1 - F scale)
    penalty_init        10.0       initial quadratic penalty weight
    penalty_growth      10.0       penalty factor when the residual stalls
    penalty_max         1e8        penalty ceiling
    warm_start          True       reuse the shifted previous solution in MPC loops
    rng_seed            0          seed of the initial-guess perturbation
    init_noise          0.05       perturbation amplitude, fraction of the box half-width
    ==================  =========  ==================================================
    """

    max_outer_iters: int = 40
    max_inner_iters: int = 400
    step_size: float = 1.0
    inner_solver: str = "lbfgsb"
    line_search: str = "armijo"
    grad_tol: float = 1e-6
    constraint_tol: float = 1e-7
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e8
    warm_start: bool = True
    rng_seed: int = 0
    init_noise: float = 0.05

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be positive")
        for name in ("step_size", "grad_tol", "constraint_tol", "penalty_init", "penalty_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.inner_solver not in ("lbfgsb", "pgd"):
            raise ValueError("inner_solver must be 'lbfgsb' or 'pgd'")
        if self.line_search not in ("armijo", "fixed"):
            raise ValueError("line_search must be 'armijo' or 'fixed'")
        if self.init_noise < 0:
            raise ValueError("init_noise must be nonnegative")

    def replace(self, **changes):
        return SolverOptions(**{**asdict(self), **changes})

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class SolveResult:
    """Outcome of one finite-horizon solve.

    ``x_pred`` holds the predicted states X_0 .. X_L under ``u_opt`` (raw arrays).
    ``multipliers`` is solver state for warm starts and carries no meaning outside.
    """

    u_opt: np.ndarray
    x_pred: np.ndarray
    cost: float
    constraint_residual: float = 0.0
    setpoint: Optional[tuple] = None
    iterations: int = 0
    converged: bool = False
    multipliers: Optional[tuple] = None
    residuals: dict = field(default_factory=dict)

    def predicted_states(self, kind):
        return [GeneralizedState(kind, x, check=False) for x in self.x_pred]


def project_box(u, lo, hi):
    """Componentwise clamp of an (L, m) sequence (or m-vector) into [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("lo must not exceed hi")
    return np.clip(np.asarray(u, dtype=float), lo, hi)


def initial_inputs(sys, center, opts):
    """Seeded perturbation of ``center`` (an (L, m) array) projected into the box."""
    center = np.asarray(center, dtype=float)
    if opts.init_noise == 0:
        return project_box(center, sys.box_lo, sys.box_hi)
    rng = np.random.default_rng(opts.rng_seed)
    half = (sys.box_hi - sys.box_lo) / 2.0
    half = np.where(np.isfinite(half), half, 1.0)
    noise = opts.init_noise * half * rng.uniform(-1.0, 1.0, size=center.shape)
    return project_box(center + noise, sys.box_lo, sys.box_hi)


def shift_sequence(u, by, length, pad):
    """Drop the first ``by`` rows and pad with ``pad`` up to ``length`` rows."""
    u = np.asarray(u, dtype=float)
    out = u[by:by + length]
    missing = length - len(out)
    if missing > 0:
        out = np.vstack([out, np.tile(np.asarray(pad, dtype=float), (missing, 1))])
    return out.copy()
