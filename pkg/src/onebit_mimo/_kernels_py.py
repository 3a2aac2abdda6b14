"""Pure-numpy kernels: the reference backend.

``_kernels.pyx`` mirrors this module operation by operation; ``_backend``
picks one of the two at import time.  Everything here works on float64
arrays and returns plain python scalars/ints where a single value is
expected, so the caller never notices which backend is active.

The log-CDF uses three branches:

* ``t >= 2``: ``log1p(-erfc(t/sqrt(2))/2)`` keeps full relative accuracy
  when ``Phi(t)`` is close to 1.
* ``-8 <= t < 2``: ``log(erfc(-t/sqrt(2))/2)`` is accurate down to where
  erfc itself starts to underflow.
* ``t < -8``: asymptotic expansion of Mills' ratio,
  ``log Phi(t) = -t^2/2 - log(2*pi)/2 - log(-t) + log(S(t))`` with
  ``S(t) = 1 - 1/t^2 + 3/t^4 - 15/t^6 + ...``.  A naive ``Phi`` underflows
  to zero near ``t = -38`` and the objective would be poisoned by
  ``log(0)``; the expansion stays finite for any ``t``.

The series is summed with a fixed term count on purpose: a data-dependent
stopping rule would make the last ulp of ``S`` depend on which other
values happen to share the array, and likelihood values would stop being
reproducible across call sites.
"""

import numpy as np
from scipy.special import erfc

_LOG_SQRT_2PI = 0.9189385332046727  # log(2*pi)/2
_SQRT1_2 = 0.7071067811865476
_MILLS_TERMS = 30
_SCAN_CHUNK = 8192


def _mills_sum(t):
    # S(t) for t <= -8; 30 terms keep the truncation error below the
    # smallest term reachable at |t| = 8 (~2e-14) without entering the
    # divergent tail of the expansion.
    inv_t2 = 1.0 / (t * t)
    s = np.ones_like(t)
    term = np.ones_like(t)
    for k in range(1, _MILLS_TERMS + 1):
        term = term * (-(2 * k - 1))
        term = term * inv_t2
        s = s + term
    return s


def log_norm_cdf(t):
    """Elementwise log of the standard normal CDF of a float64 array."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape, dtype=np.float64)
    hi = t >= 2.0
    lo = t < -8.0
    mid = ~(hi | lo)
    if hi.any():
        out[hi] = np.log1p(-0.5 * erfc(t[hi] * _SQRT1_2))
    if mid.any():
        out[mid] = np.log(0.5 * erfc(-t[mid] * _SQRT1_2))
    if lo.any():
        tl = t[lo]
        out[lo] = (
            -0.5 * tl * tl - _LOG_SQRT_2PI - np.log(-tl) + np.log(_mills_sum(tl))
        )
    return out


def norm_hazard(t):
    """Elementwise phi(t)/Phi(t) of a float64 array."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape, dtype=np.float64)
    lo = t < -8.0
    if lo.any():
        tl = t[lo]
        # phi/Phi = -t / S(t); never 0/0, grows like -t.
        out[lo] = -tl / _mills_sum(tl)
    hi = ~lo
    if hi.any():
        th = t[hi]
        out[hi] = np.exp(-0.5 * th * th - _LOG_SQRT_2PI - log_norm_cdf(th))
    return out


def pga_solve(rows, sqrt2rho, norm_bound, kappa, epsilon, max_iterations):
    """Projected gradient ascent of sum(log Phi(sqrt2rho * rows @ x)).

    Constraint is the ball ``||x||^2 <= norm_bound``; the start point is the
    matched-filter direction ``rows^T 1`` scaled onto the sphere.  A step
    that would decrease the objective is retried with a halved step length
    (at most 20 halvings, then accepted as-is).  Terminates when
    ``||x_k - x_{k-1}|| < epsilon * ||x_{k-1}||`` or on an exactly zero
    step (fixpoint), else after ``max_iterations``.

    Returns ``(x_best, iterations, converged, halvings, objective)`` where
    ``x_best`` is the best-objective iterate seen (equal to the final
    iterate whenever no forced step was accepted).
    """
    rows = np.asarray(rows, dtype=np.float64)
    n_dim = rows.shape[1]
    radius = np.sqrt(norm_bound)
    v = rows.sum(axis=0)
    v_norm = np.linalg.norm(v)
    if v_norm > 0.0:
        x = (radius / v_norm) * v
    else:
        x = np.zeros(n_dim)
    u = rows @ x
    f = float(log_norm_cdf(sqrt2rho * u).sum())
    best_f = f
    best_x = x.copy()
    iterations = 0
    halvings = 0
    converged = False
    for _ in range(max_iterations):
        h = norm_hazard(sqrt2rho * u)
        grad = sqrt2rho * (rows.T @ h)
        step = kappa
        for attempt in range(21):
            x_new = x + step * grad
            nn = float(x_new @ x_new)
            if nn > norm_bound:
                x_new = x_new * (radius / np.sqrt(nn))
            u_new = rows @ x_new
            f_new = float(log_norm_cdf(sqrt2rho * u_new).sum())
            if f_new >= f or attempt == 20:
                break
            step *= 0.5
            halvings += 1
        iterations += 1
        dx = float(np.linalg.norm(x_new - x))
        x_prev_norm = float(np.linalg.norm(x))
        x, u, f = x_new, u_new, f_new
        if f > best_f:
            best_f = f
            best_x = x.copy()
        if dx < epsilon * x_prev_norm or dx == 0.0:
            converged = True
            break
    return best_x, iterations, converged, halvings, best_f


def scan_best(rows, sqrt2rho, cands):
    """Best candidate row of ``cands`` under the summed log-Phi objective.

    Returns ``(index, value)`` of the first candidate attaining the
    maximum (strictly-greater replacement, so ties keep the earliest).
    ``cands`` has one candidate per row; an empty matrix yields
    ``(-1, -inf)``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cands = np.asarray(cands, dtype=np.float64)
    best_idx = -1
    best_f = -np.inf
    rows_t = rows.T
    for start in range(0, cands.shape[0], _SCAN_CHUNK):
        block = cands[start : start + _SCAN_CHUNK]
        vals = log_norm_cdf(sqrt2rho * (block @ rows_t)).sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_f:
            best_f = float(vals[i])
            best_idx = start + i
    return best_idx, best_f
