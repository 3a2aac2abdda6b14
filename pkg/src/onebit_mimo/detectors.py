"""The four detectors: exhaustive ML, ZF, and the one- and two-stage
near-ML detectors.

All likelihoods are sums of ``log Phi(sqrt(2 rho) * <row, x_R>)`` over the
sign-refined real-expanded channel rows; ``x_R`` stacks real parts first,
imaginary parts second.  Ties anywhere resolve to the lexicographically
smallest symbol-index tuple.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import pga
from ._backend import kernels
from .model import (
    Constellation,
    indices_to_symbols,
    nearest_symbol,
    nearest_symbols,
    real_stack,
)

__all__ = [
    "ENUMERATION_CAP",
    "NmlConfig",
    "DetectorOutput",
    "SearchSpaceTooLargeError",
    "SingularChannelError",
    "DegenerateEstimateError",
    "log_likelihood",
    "detect_ml_exhaustive",
    "detect_zf",
    "detect_nml_one_stage",
    "build_candidate_set",
    "detect_nml_two_stage",
]

ENUMERATION_CAP = 1 << 26

_SCAN_CHUNK = 65536


class SearchSpaceTooLargeError(ValueError):
    """Raised when an exhaustive enumeration would exceed the cap."""


class SingularChannelError(ValueError):
    """Raised for rank-deficient (or too-short) channel matrices."""


class DegenerateEstimateError(ValueError):
    """Raised when a pseudo-inverse estimate is exactly zero.

    Silently emitting an arbitrary symbol would corrupt error statistics
    invisibly, so this measure-zero event is loud instead.
    """


@dataclass(frozen=True)
class NmlConfig:
    """Tuning knobs of the projected-gradient stage and the candidate set.

    Defaults are the operating values used throughout the experiments:
    step 0.01, relative termination threshold 1e-3, candidate distance
    ratio 1.3.
    """

    kappa: float = 0.01
    epsilon: float = 1e-3
    max_iterations: int = 500
    candidate_ratio: float = 1.3

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.candidate_ratio > 1:
            raise ValueError("candidate_ratio must be > 1")


@dataclass(frozen=True)
class DetectorOutput:
    """Detected symbol indices plus per-detector diagnostics.

    ``soft_estimate`` is the stacked-real relaxed estimate where one
    exists (one-stage nML, ZF); ``iterations`` counts accepted gradient
    steps; ``candidate_set_size`` is the product set size of the second
    stage; ``log_likelihood`` is the objective value of the decided
    symbol tuple where the detector evaluates it.  ``fallback`` marks a
    two-stage run that had to return the first-stage decision because the
    candidate product exceeded the enumeration cap.
    """

    symbols: Tuple[int, ...]
    soft_estimate: Optional[np.ndarray] = None
    iterations: Optional[int] = None
    candidate_set_size: Optional[int] = None
    log_likelihood: Optional[float] = None
    converged: Optional[bool] = None
    step_halvings: Optional[int] = None
    fallback: bool = False


def _check_rows(G_tilde, k: int) -> np.ndarray:
    rows = np.ascontiguousarray(G_tilde, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 2 * k:
        raise ValueError(
            "expected a (2*N_r, %d) sign-refined row matrix, got %r"
            % (2 * k, rows.shape)
        )
    if rows.shape[0] % 2:
        raise ValueError("row count must be even (2 per receive antenna)")
    return rows


def log_likelihood(G_tilde, x_R, rho: float) -> float:
    """Sum of ``log Phi(sqrt(2 rho) * <row, x_R>)`` over all rows.

    Always <= 0; unchanged (up to rounding) under simultaneous
    permutation of the rows.
    """
    x_R = np.ascontiguousarray(x_R, dtype=np.float64)
    if x_R.ndim != 1 or x_R.shape[0] % 2:
        raise ValueError("x_R must be a stacked real vector of even length")
    rows = _check_rows(G_tilde, x_R.shape[0] // 2)
    if not rho > 0:
        raise ValueError("rho must be positive")
    _, value = kernels.scan_best(rows, math.sqrt(2.0 * rho), x_R[None, :])
    return value


def _scan_symbol_product(rows, sqrt2rho, constellation, per_user_sets):
    """Maximize the objective over the product of per-user index sets.

    Candidates are enumerated lexicographically (user 0 most significant,
    indices ascending within a set) in bounded chunks; the first maximum
    wins.  Returns ``(symbol_tuple, objective)``.
    """
    sets = [np.asarray(s, dtype=np.int64) for s in per_user_sets]
    sizes = [s.shape[0] for s in sets]
    k = len(sets)
    strides = [1] * k
    for i in range(k - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    total = strides[0] * sizes[0]
    best_val = -np.inf
    best_flat = -1
    for start in range(0, total, _SCAN_CHUNK):
        flat = np.arange(start, min(start + _SCAN_CHUNK, total), dtype=np.int64)
        cols = []
        for i in range(k):
            digit = (flat // strides[i]) % sizes[i]
            cols.append(constellation.points[sets[i][digit]])
        pts = np.stack(cols, axis=1)
        cands = np.ascontiguousarray(
            np.concatenate([pts.real, pts.imag], axis=1)
        )
        idx, val = kernels.scan_best(rows, sqrt2rho, cands)
        if val > best_val:
            best_val = val
            best_flat = start + idx
    symbols = tuple(
        int(sets[i][(best_flat // strides[i]) % sizes[i]]) for i in range(k)
    )
    return symbols, float(best_val)


def detect_ml_exhaustive(G_tilde, constellation: Constellation, k: int,
                         rho: float) -> DetectorOutput:
    """Exhaustive maximum-likelihood detection over all ``M**K`` candidates.

    Raises ``SearchSpaceTooLargeError`` beyond the enumeration cap
    (callers should use the nML detectors there).
    """
    rows = _check_rows(G_tilde, k)
    if not rho > 0:
        raise ValueError("rho must be positive")
    total = constellation.order**k
    if total > ENUMERATION_CAP:
        raise SearchSpaceTooLargeError(
            "search space %d exceeds the enumeration cap %d"
            % (total, ENUMERATION_CAP)
        )
    full = np.arange(constellation.order, dtype=np.int64)
    symbols, value = _scan_symbol_product(
        rows, math.sqrt(2.0 * rho), constellation, [full] * k
    )
    return DetectorOutput(symbols=symbols, log_likelihood=value)


def detect_zf(H, q, constellation: Constellation) -> DetectorOutput:
    """ZF detection: pseudo-inverse of the channel applied to the signs.

    The complex-valued ``+-1 +- 1j`` observation is rebuilt from the
    stacked sign vector, passed through the pseudo-inverse, rescaled to
    squared norm K, and sliced per user for nearest-symbol decisions.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2:
        raise ValueError("H must be a matrix")
    n_r, k = H.shape
    if n_r < k:
        raise SingularChannelError(
            "ZF needs at least as many receive antennas as users"
        )
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (2 * n_r,):
        raise ValueError("sign vector length does not match the channel")
    if not np.all(np.abs(q) == 1.0):
        raise ValueError("signs must be exactly +-1")
    y_hat = q[:n_r] + 1j * q[n_r:]
    sol, _, rank, _ = np.linalg.lstsq(H, y_hat, rcond=None)
    if rank < k:
        raise SingularChannelError("channel matrix is rank deficient")
    nrm = np.linalg.norm(sol)
    if nrm == 0.0:
        raise DegenerateEstimateError("pseudo-inverse estimate is zero")
    xbar = (np.sqrt(k) / nrm) * sol
    symbols = tuple(int(s) for s in nearest_symbols(constellation, xbar))
    return DetectorOutput(symbols=symbols, soft_estimate=real_stack(xbar))


def detect_nml_one_stage(G_tilde, constellation: Constellation, k: int,
                         rho: float, cfg: NmlConfig = NmlConfig()
                         ) -> DetectorOutput:
    """One-stage nML: projected gradient ascent, then per-user quantization.

    The relaxed estimate is normalized onto the sphere ``||x||^2 = K``
    before symbol-by-symbol nearest decisions; the reported
    ``log_likelihood`` is that of the decided symbol tuple.
    """
    rows = _check_rows(G_tilde, k)
    if not rho > 0:
        raise ValueError("rho must be positive")
    sqrt2rho = math.sqrt(2.0 * rho)
    res = pga.solve(
        rows,
        sqrt2rho=sqrt2rho,
        norm_bound=float(k),
        kappa=cfg.kappa,
        epsilon=cfg.epsilon,
        max_iterations=cfg.max_iterations,
    )
    nrm = np.linalg.norm(res.x)
    if nrm > 0.0:
        xbar = (np.sqrt(k) / nrm) * res.x
    else:
        xbar = res.x
    z = xbar[:k] + 1j * xbar[k:]
    symbols = tuple(int(s) for s in nearest_symbols(constellation, z))
    decided = real_stack(indices_to_symbols(constellation, symbols))
    _, value = kernels.scan_best(rows, sqrt2rho, decided[None, :])
    return DetectorOutput(
        symbols=symbols,
        soft_estimate=xbar,
        iterations=res.iterations,
        log_likelihood=value,
        converged=res.converged,
        step_halvings=res.step_halvings,
    )


def build_candidate_set(soft, symbols: Sequence[int],
                        constellation: Constellation, ratio: float):
    """Per-user candidate index sets from soft-estimate distance ratios.

    User k's set keeps every symbol whose distance to the soft value
    ``z_k`` is within ``ratio`` times the distance of the decided symbol;
    an exact hit (zero denominator) keeps only the decided symbol.  The
    decided symbol is always a member.
    """
    if not ratio > 1:
        raise ValueError("ratio must be > 1")
    soft = np.asarray(soft, dtype=np.float64)
    k = len(symbols)
    if soft.shape != (2 * k,):
        raise ValueError("soft estimate must have length 2K")
    out = []
    for i in range(k):
        z = soft[i] + 1j * soft[k + i]
        if int(symbols[i]) != nearest_symbol(constellation, z):
            raise ValueError(
                "symbols[%d] is not the nearest symbol of its soft value" % i
            )
        d_hat = abs(z - constellation.points[symbols[i]])
        if d_hat == 0.0:
            out.append((int(symbols[i]),))
            continue
        dist = np.abs(z - constellation.points)
        members = np.nonzero(dist / d_hat < ratio)[0]
        out.append(tuple(int(m) for m in members))
    return tuple(out)


def detect_nml_two_stage(G_tilde, H, constellation: Constellation, k: int,
                         rho: float, cfg: NmlConfig = NmlConfig()
                         ) -> DetectorOutput:
    """Two-stage nML: candidate sets from the one-stage soft output, then
    exhaustive likelihood maximization over their product.

    ``H`` is accepted for interface symmetry with the other detectors and
    only dimension-checked; the second stage consumes the sign-refined
    rows alone.  With the ratio pushed to infinity this detector and the
    exhaustive ML detector coincide.
    """
    rows = _check_rows(G_tilde, k)
    if H is not None:
        H = np.asarray(H)
        if H.ndim != 2 or (2 * H.shape[0], 2 * H.shape[1]) != rows.shape:
            raise ValueError("H dimensions do not match the row matrix")
    stage1 = detect_nml_one_stage(G_tilde, constellation, k, rho, cfg)
    sets = build_candidate_set(
        stage1.soft_estimate, stage1.symbols, constellation, cfg.candidate_ratio
    )
    size = 1
    for s in sets:
        size *= len(s)
    if size > ENUMERATION_CAP:
        return DetectorOutput(
            symbols=stage1.symbols,
            iterations=stage1.iterations,
            candidate_set_size=size,
            log_likelihood=stage1.log_likelihood,
            converged=stage1.converged,
            step_halvings=stage1.step_halvings,
            fallback=True,
        )
    symbols, value = _scan_symbol_product(
        rows, math.sqrt(2.0 * rho), constellation, sets
    )
    return DetectorOutput(
        symbols=symbols,
        iterations=stage1.iterations,
        candidate_set_size=size,
        log_likelihood=value,
        converged=stage1.converged,
        step_halvings=stage1.step_halvings,
    )
