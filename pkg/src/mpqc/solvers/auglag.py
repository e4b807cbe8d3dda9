"""Augmented-Lagrangian outer loop for equality constraints ``c(x) = 0``.

A problem object supplies

* ``objective(x, mu, rho, grad) -> (value, gradient or None)`` of
  ``f(x) + Re<mu, c(x)> + rho/2 ||c(x)||^2``,
* ``constraints(x) -> c`` (any array; complex entries allowed),
* ``residual(x) -> float`` compared against ``constraint_tol``.

An optional positive ``scale`` vector changes variables to ``y = scale * x``
for the inner solver (diagonal preconditioning); everything returned is in
the original variables.
"""

from dataclasses import dataclass

import numpy as np

from .inner import inner_minimize
from .pgd import stationarity


@dataclass
class ALResult:
    x: np.ndarray
    mu: np.ndarray
    rho: float
    residual: float
    stationary: bool
    converged: bool
    inner_iterations: int
    outer_iterations: int


def augmented_lagrangian(problem, x0, lo, hi, opts, warm=None, scale=None):
    """Run the outer loop from ``x0``.

    ``warm`` is an optional ``(mu, rho)`` pair from a related earlier solve
    (the previous receding-horizon step).  Starting from it skips the loose
    early subproblems, which would otherwise wander away from a good guess.
    """
    d = np.ones(len(x0)) if scale is None else np.asarray(scale, dtype=float)
    lo, hi = np.asarray(lo) * d, np.asarray(hi) * d

    def fg(y, mu, rho):
        f, g = problem.objective(y / d, mu, rho, True)
        return f, g / d

    x = np.clip(np.asarray(x0, dtype=float), lo / d, hi / d)
    c = problem.constraints(x)
    residual = problem.residual(x)
    mu = np.zeros_like(c)
    rho = opts.penalty_init
    # early subproblems only need rough solutions; tighten towards grad_tol
    inner_tol = max(opts.grad_tol, 1e-2)
    if warm is not None and np.shape(warm[0]) == c.shape:
        mu = np.array(warm[0])
        rho = float(warm[1])
        inner_tol = opts.grad_tol
        if residual <= opts.constraint_tol:
            # the inner solver would stop at once if the warm start is already optimal
            f, g = fg(x * d, mu, rho)
            if stationarity(x * d, g, lo, hi) <= opts.grad_tol:
                return ALResult(x, mu + rho * c, rho, residual, True, True, 0, 0)
    prev_norm = np.inf
    total = 0
    stationary = False
    current = True
    outer = 0
    for outer in range(1, opts.max_outer_iters + 1):
        res = inner_minimize(
            lambda y: fg(y, mu, rho),
            lambda y: problem.objective(y / d, mu, rho, False)[0],
            x * d, lo, hi, opts, inner_tol,
        )
        x = res.x / d
        current = False  # mu not yet updated with c(x)
        stationary = res.stationarity <= opts.grad_tol
        total += res.iterations
        c = problem.constraints(x)
        residual = problem.residual(x)
        if residual <= opts.constraint_tol and (stationary or res.iterations == 0):
            break  # done, or feasible and the inner solver cannot improve further
        if residual <= opts.constraint_tol:
            inner_tol = opts.grad_tol
            continue  # feasible already; just finish the inner solve
        inner_tol = max(opts.grad_tol, 0.1 * inner_tol)
        mu = mu + rho * c
        current = True
        norm = float(np.linalg.norm(c))
        if norm > 0.25 * prev_norm:
            rho = min(rho * opts.penalty_growth, opts.penalty_max)
        prev_norm = norm
    if not current:
        # first-order multiplier estimate at the returned point, for warm starts
        mu = mu + rho * c
    return ALResult(x, mu, rho, residual, stationary,
                    residual <= opts.constraint_tol and stationary, total, outer)
