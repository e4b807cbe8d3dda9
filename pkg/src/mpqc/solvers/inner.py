"""Bound-constrained inner minimisation shared by all subproblem solvers.

``inner_solver="lbfgsb"`` uses SciPy's L-BFGS-B; ``"pgd"`` uses the in-house
projected gradient method of :mod:`.pgd`.  Both accept every step only on
sufficient decrease, so the objective is monotone along the iterates.
"""

import warnings

import numpy as np
from scipy.optimize import minimize

from ..errors import SolverDiverged
from .pgd import PGResult, minimize_box, stationarity

LBFGS_MEMORY = 20


def lbfgsb_box(fun_grad, x0, lo, hi, max_iter, grad_tol, record=False):
    """L-BFGS-B over the box [lo, hi] (infinite bounds allowed)."""
    x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)
    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))
    history = []

    def wrapped(x):
        f, g = fun_grad(x)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise SolverDiverged("non-finite objective or gradient")
        return f, g

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))

    if record:
        history.append(float(wrapped(x0)[0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(wrapped, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       callback=callback if record else None,
                       options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 1e-15,
                                "maxcor": LBFGS_MEMORY})
    x = np.clip(res.x, lo, hi)
    pg = stationarity(x, res.jac, lo, hi)
    return PGResult(x, float(res.fun), np.asarray(res.jac), int(res.nit), pg <= grad_tol, pg,
                    history)


def inner_minimize(fun_grad, fun, x0, lo, hi, opts, grad_tol=None, record=False):
    """Dispatch on ``opts.inner_solver``; ``grad_tol`` overrides ``opts.grad_tol``."""
    tol = opts.grad_tol if grad_tol is None else grad_tol
    if opts.inner_solver == "pgd":
        return minimize_box(fun_grad, fun, x0, lo, hi, opts.max_inner_iters, tol,
                            opts.step_size, opts.line_search, record)
    return lbfgsb_box(fun_grad, x0, lo, hi, opts.max_inner_iters, tol, record)
