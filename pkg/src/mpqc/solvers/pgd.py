"""Box-constrained projected gradient descent with Barzilai-Borwein trial steps.

Every accepted step satisfies the Armijo condition along the projection arc,
so the objective decreases monotonically (``line_search="armijo"``).
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverDiverged

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60
STEP_MIN, STEP_MAX = 1e-12, 1e12


@dataclass
class PGResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    iterations: int
    converged: bool
    stationarity: float
    history: list = field(default_factory=list)


def stationarity(x, g, lo, hi):
    """inf-norm of the projected-gradient step P(x - g) - x."""
    return float(np.max(np.abs(np.clip(x - g, lo, hi) - x), initial=0.0))


def _finite(f, where):
    if not np.isfinite(f):
        raise SolverDiverged(f"non-finite objective during {where}")
    return f


def minimize_box(fun_grad, fun, x0, lo, hi, max_iter, grad_tol, step_size=1.0,
                 line_search="armijo", record=False):
    """Minimise ``fun`` over the box [lo, hi].

    ``fun_grad(x) -> (f, g)``; ``fun(x) -> f`` is used inside the line search.
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f, g = fun_grad(x)
    _finite(f, "initial evaluation")
    history = [f] if record else []
    alpha = step_size
    x_prev = g_prev = None
    it = 0
    pg = stationarity(x, g, lo, hi)
    while pg > grad_tol and it < max_iter:
        it += 1
        if line_search == "fixed":
            x_new = np.clip(x - step_size * g, lo, hi)
            f_new, g_new = fun_grad(x_new)
            _finite(f_new, "fixed step")
        else:
            if x_prev is not None:
                s, y = x - x_prev, g - g_prev
                sy = float(s @ y)
                alpha = float(s @ s) / sy if sy > 0 else STEP_MAX
                alpha = min(max(alpha, STEP_MIN), STEP_MAX)
            for _ in range(MAX_BACKTRACKS):
                x_new = np.clip(x - alpha * g, lo, hi)
                f_new = _finite(fun(x_new), "line search")
                if f_new <= f + ARMIJO_C * float(g @ (x_new - x)):
                    break
                alpha *= 0.5
            else:
                break  # no decrease possible at machine precision
            if not f_new <= f:
                break
            f_new, g_new = fun_grad(x_new)
        x_prev, g_prev = x, g
        x, f, g = x_new, f_new, g_new
        pg = stationarity(x, g, lo, hi)
        if record:
            history.append(f)
    return PGResult(x, f, g, it, pg <= grad_tol, pg, history)
