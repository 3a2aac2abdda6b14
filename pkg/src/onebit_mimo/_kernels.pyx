# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Mirrors ``_kernels_py`` (same branch structure, same fixed-length Mills
series, same acceptance/termination rules); see that module for the
numerical rationale.  Values can differ from the python backend in the
last ulp because libm's erfc and BLAS summation orders are not
bit-identical to scipy/numpy, but every documented tolerance is met by
both.
"""

import numpy as np

from libc.math cimport INFINITY, erfc, exp, log, log1p, sqrt

cdef double _LOG_SQRT_2PI = 0.9189385332046727
cdef double _SQRT1_2 = 0.7071067811865476
cdef int _MILLS_TERMS = 30


cdef inline double _mills_sum_c(double t) nogil:
    cdef double inv_t2 = 1.0 / (t * t)
    cdef double s = 1.0
    cdef double term = 1.0
    cdef int k
    for k in range(1, _MILLS_TERMS + 1):
        term = term * (-(2 * k - 1))
        term = term * inv_t2
        s = s + term
    return s


cdef inline double _log_norm_cdf_c(double t) nogil:
    if t >= 2.0:
        return log1p(-0.5 * erfc(t * _SQRT1_2))
    if t >= -8.0:
        return log(0.5 * erfc(-t * _SQRT1_2))
    return -0.5 * t * t - _LOG_SQRT_2PI - log(-t) + log(_mills_sum_c(t))


cdef inline double _norm_hazard_c(double t) nogil:
    if t < -8.0:
        return -t / _mills_sum_c(t)
    return exp(-0.5 * t * t - _LOG_SQRT_2PI - _log_norm_cdf_c(t))


def log_norm_cdf(t):
    """Elementwise log of the standard normal CDF of a float64 array."""
    arr = np.ascontiguousarray(t, dtype=np.float64)
    flat = arr.reshape(-1)
    out = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _log_norm_cdf_c(src[i])
    return out.reshape(arr.shape)


def norm_hazard(t):
    """Elementwise phi(t)/Phi(t) of a float64 array."""
    arr = np.ascontiguousarray(t, dtype=np.float64)
    flat = arr.reshape(-1)
    out = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _norm_hazard_c(src[i])
    return out.reshape(arr.shape)


def pga_solve(rows, double sqrt2rho, double norm_bound, double kappa,
              double epsilon, int max_iterations):
    """Projected gradient ascent; see ``_kernels_py.pga_solve``."""
    rows_arr = np.ascontiguousarray(rows, dtype=np.float64)
    cdef double[:, ::1] A = rows_arr
    cdef Py_ssize_t R = A.shape[0]
    cdef Py_ssize_t D = A.shape[1]
    x_arr = np.zeros(D, dtype=np.float64)
    best_arr = np.zeros(D, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] best_x = best_arr
    u_arr = np.empty(R, dtype=np.float64)
    h_arr = np.empty(R, dtype=np.float64)
    g_arr = np.empty(D, dtype=np.float64)
    xt_arr = np.empty(D, dtype=np.float64)
    ut_arr = np.empty(R, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double[::1] h = h_arr
    cdef double[::1] grad = g_arr
    cdef double[::1] x_try = xt_arr
    cdef double[::1] u_try = ut_arr
    cdef double radius = sqrt(norm_bound)
    cdef double v_norm = 0.0, acc, f, f_try, best_f, nn, step, dx, x_prev_norm
    cdef Py_ssize_t r, d
    cdef int it, attempt, iterations = 0, halvings = 0, converged = 0, accepted
    with nogil:
        # init: matched-filter direction rows^T 1 scaled to the sphere
        for d in range(D):
            acc = 0.0
            for r in range(R):
                acc += A[r, d]
            x[d] = acc
        for d in range(D):
            v_norm += x[d] * x[d]
        v_norm = sqrt(v_norm)
        if v_norm > 0.0:
            for d in range(D):
                x[d] = (radius / v_norm) * x[d]
        else:
            for d in range(D):
                x[d] = 0.0
        f = 0.0
        for r in range(R):
            acc = 0.0
            for d in range(D):
                acc += A[r, d] * x[d]
            u[r] = acc
            f += _log_norm_cdf_c(sqrt2rho * acc)
        best_f = f
        for d in range(D):
            best_x[d] = x[d]
        for it in range(max_iterations):
            for r in range(R):
                h[r] = _norm_hazard_c(sqrt2rho * u[r])
            for d in range(D):
                acc = 0.0
                for r in range(R):
                    acc += A[r, d] * h[r]
                grad[d] = sqrt2rho * acc
            step = kappa
            for attempt in range(21):
                for d in range(D):
                    x_try[d] = x[d] + step * grad[d]
                nn = 0.0
                for d in range(D):
                    nn += x_try[d] * x_try[d]
                if nn > norm_bound:
                    acc = radius / sqrt(nn)
                    for d in range(D):
                        x_try[d] = x_try[d] * acc
                f_try = 0.0
                for r in range(R):
                    acc = 0.0
                    for d in range(D):
                        acc += A[r, d] * x_try[d]
                    u_try[r] = acc
                    f_try += _log_norm_cdf_c(sqrt2rho * acc)
                if f_try >= f or attempt == 20:
                    break
                step *= 0.5
                halvings += 1
            iterations += 1
            dx = 0.0
            x_prev_norm = 0.0
            for d in range(D):
                acc = x_try[d] - x[d]
                dx += acc * acc
                x_prev_norm += x[d] * x[d]
            dx = sqrt(dx)
            x_prev_norm = sqrt(x_prev_norm)
            for d in range(D):
                x[d] = x_try[d]
            for r in range(R):
                u[r] = u_try[r]
            f = f_try
            if f > best_f:
                best_f = f
                for d in range(D):
                    best_x[d] = x[d]
            if dx < epsilon * x_prev_norm or dx == 0.0:
                converged = 1
                break
    return best_arr, iterations, bool(converged), halvings, best_f


def scan_best(rows, double sqrt2rho, cands):
    """First-maximum candidate scan; see ``_kernels_py.scan_best``.

    Per-candidate partial sums are monotone nonincreasing (each log-Phi
    term is <= 0), so a candidate is abandoned as soon as its running sum
    drops to the incumbent.
    """
    rows_arr = np.ascontiguousarray(rows, dtype=np.float64)
    cands_arr = np.ascontiguousarray(cands, dtype=np.float64)
    cdef double[:, ::1] A = rows_arr
    cdef double[:, ::1] X = cands_arr
    cdef Py_ssize_t R = A.shape[0]
    cdef Py_ssize_t D = A.shape[1]
    cdef Py_ssize_t C = X.shape[0]
    if C > 0 and X.shape[1] != D:
        raise ValueError("candidate width %d does not match row width %d"
                         % (X.shape[1], D))
    cdef double best_f = -INFINITY
    cdef Py_ssize_t best_idx = -1
    cdef double s, acc
    cdef Py_ssize_t c, r, d
    with nogil:
        for c in range(C):
            s = 0.0
            for r in range(R):
                acc = 0.0
                for d in range(D):
                    acc += A[r, d] * X[c, d]
                s += _log_norm_cdf_c(sqrt2rho * acc)
                if s <= best_f:
                    break
            if s > best_f:
                best_f = s
                best_idx = c
    return int(best_idx), float(best_f)
