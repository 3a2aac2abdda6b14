"""Shared projected-gradient engine.

The near-ML detector and the ML channel estimator maximize the same
objective shape, a sum of ``log Phi(sqrt(2 rho) * <row, z>)`` terms over a
norm ball; only the row matrix and the ball radius differ.  Both call
``solve`` here, which is a thin validated wrapper over the backend kernel
(compiled when available).
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels

__all__ = ["PgaResult", "solve"]


@dataclass(frozen=True)
class PgaResult:
    """Outcome of one projected-gradient ascent run.

    ``x`` is the best-objective iterate (inside or on the constraint
    ball); ``converged`` is False when the relative-step termination rule
    never fired within the iteration budget.
    """

    x: np.ndarray
    iterations: int
    converged: bool
    step_halvings: int
    objective: float


def solve(rows, sqrt2rho: float, norm_bound: float, kappa: float,
          epsilon: float, max_iterations: int) -> PgaResult:
    """Maximize ``sum(log Phi(sqrt2rho * rows @ x))`` over ``||x||^2 <= norm_bound``.

    Starts from the matched-filter direction scaled onto the sphere,
    takes fixed-size gradient steps with radial projection back onto the
    ball, halves the step (up to 20 times) whenever it would decrease the
    objective, and stops once the iterate moves by less than ``epsilon``
    relative to its norm.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d matrix")
    if not np.all(np.isfinite(rows)):
        raise ValueError("rows must be finite")
    if not (np.isfinite(sqrt2rho) and sqrt2rho > 0):
        raise ValueError("sqrt2rho must be positive")
    if not norm_bound > 0:
        raise ValueError("norm_bound must be positive")
    if not (kappa > 0 and epsilon > 0):
        raise ValueError("kappa and epsilon must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    x, iterations, converged, halvings, objective = kernels.pga_solve(
        rows, float(sqrt2rho), float(norm_bound), float(kappa),
        float(epsilon), int(max_iterations)
    )
    return PgaResult(
        x=np.asarray(x),
        iterations=int(iterations),
        converged=bool(converged),
        step_halvings=int(halvings),
        objective=float(objective),
    )
