"""Training-based channel estimation from one-bit observations.

The training phase is the detection problem with the roles of channel and
signal swapped: the known unitary pilot block plays the channel, the
unknown per-antenna channel vector plays the symbol vector.  The ML
estimator therefore reuses the exact projected-gradient engine of the
nML detector (``pga.solve``), with two differences: the row matrix is the
sign-refined real training expansion, and the converged point is returned
as-is (ball-constrained) instead of being pushed onto the sphere.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import pga
from .detectors import DegenerateEstimateError, NmlConfig, SingularChannelError
from .model import sgn
from .numerics import RngStream, draw_std_complex_gaussian

__all__ = [
    "TrainingBlock",
    "ChannelEstimate",
    "make_unitary_training",
    "training_real_rows",
    "observe_training",
    "estimate_ml",
    "estimate_zf",
    "mse",
    "nmse",
]


@dataclass(frozen=True, eq=False)
class TrainingBlock:
    """A unitary pilot block.

    ``x_train`` is K x T complex with ``x_train @ x_train.conj().T ==
    T * I_K``; each user's row has squared norm T, i.e. unit average
    power per channel use.  ``length`` is the fading-block length L and
    is carried for context only.
    """

    x_train: np.ndarray
    T: int
    length: Optional[int] = None


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    """A stacked-real estimate of one antenna's channel to the K users."""

    g_hat: np.ndarray
    method: str
    iterations: Optional[int] = None
    converged: Optional[bool] = None


def make_unitary_training(k: int, t: int, rng: RngStream,
                          length: Optional[int] = None) -> TrainingBlock:
    """Random unitary training: orthonormalized Gaussian rows scaled by sqrt(T).

    Requires ``t > k``.  Deterministic given the stream (consumes
    ``k * t`` complex draws, then a QR factorization).
    """
    if t <= k:
        raise ValueError("training length T must exceed the user count K")
    a = draw_std_complex_gaussian(rng, k * t).reshape(k, t)
    q, _ = np.linalg.qr(a.conj().T)
    return TrainingBlock(
        x_train=np.sqrt(t) * q.conj().T, T=t, length=length
    )


def training_real_rows(block: TrainingBlock) -> np.ndarray:
    """The 2T x 2K real rows of the training map.

    Row i dotted with the stacked channel ``[Re(g); Im(g)]`` reproduces
    the i-th real-expanded training observation (reals first, then
    imaginaries), matching the column order of the 2K x 2T real pilot
    expansion.
    """
    x = block.x_train
    xr, xi = x.real.T, x.imag.T
    top = np.hstack([xr, xi])
    bot = np.hstack([-xi, xr])
    return np.ascontiguousarray(np.vstack([top, bot]))


def observe_training(g, block: TrainingBlock, rho: float,
                     rng: RngStream = None, noise=None) -> np.ndarray:
    """One-bit observations of the training phase.

    ``g`` is the stacked-real channel (length 2K).  Adds real Gaussian
    noise of variance 1/2 per component (drawn as T complex samples,
    stacked reals-first) unless an explicit ``noise`` vector of length 2T
    is supplied, then quantizes with ``sgn`` (0 maps to +1).
    """
    g = np.asarray(g, dtype=np.float64)
    rows = training_real_rows(block)
    if g.shape != (rows.shape[1],):
        raise ValueError("channel vector length does not match the block")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or an explicit noise vector is required")
        w = draw_std_complex_gaussian(rng, block.T)
        noise = np.concatenate([w.real, w.imag])
    else:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (2 * block.T,):
            raise ValueError("noise vector must have length 2T")
    y = np.sqrt(rho) * (rows @ g) + noise
    return sgn(y)


def estimate_ml(block: TrainingBlock, signs, rho: float,
                cfg: NmlConfig = NmlConfig(),
                norm_bound: Optional[float] = None) -> ChannelEstimate:
    """Norm-constrained ML channel estimate via projected gradient ascent.

    Maximizes the summed log-Phi likelihood of the sign-refined training
    rows over the ball ``||g||^2 <= norm_bound`` (default K, the average
    squared channel norm).  The returned estimate is *not* normalized
    onto the sphere; only its direction-and-norm trade-off is constrained
    by the ball.  Lifting the bound far above K reproduces the
    unconstrained estimator, which overestimates the norm.
    """
    signs = np.asarray(signs, dtype=np.float64)
    rows = training_real_rows(block)
    if signs.shape != (rows.shape[0],):
        raise ValueError("sign vector must have length 2T")
    if not np.all(np.abs(signs) == 1.0):
        raise ValueError("signs must be exactly +-1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    k = rows.shape[1] // 2
    if norm_bound is None:
        norm_bound = float(k)
    refined = np.ascontiguousarray(rows * signs[:, None])
    res = pga.solve(
        refined,
        sqrt2rho=math.sqrt(2.0 * rho),
        norm_bound=norm_bound,
        kappa=cfg.kappa,
        epsilon=cfg.epsilon,
        max_iterations=cfg.max_iterations,
    )
    return ChannelEstimate(
        g_hat=res.x,
        method="ML",
        iterations=res.iterations,
        converged=res.converged,
    )


def estimate_zf(block: TrainingBlock, signs) -> ChannelEstimate:
    """ZF channel estimate: pseudo-inverse of the training rows, rescaled.

    The output always satisfies ``||g_hat||^2 == K`` exactly (it carries
    direction information only).
    """
    signs = np.asarray(signs, dtype=np.float64)
    rows = training_real_rows(block)
    if signs.shape != (rows.shape[0],):
        raise ValueError("sign vector must have length 2T")
    if not np.all(np.abs(signs) == 1.0):
        raise ValueError("signs must be exactly +-1")
    sol, _, rank, _ = np.linalg.lstsq(rows, signs, rcond=None)
    if rank < rows.shape[1]:
        raise SingularChannelError("training map is rank deficient")
    nrm = np.linalg.norm(sol)
    if nrm == 0.0:
        raise DegenerateEstimateError("pseudo-inverse estimate is zero")
    k = rows.shape[1] // 2
    return ChannelEstimate(g_hat=(np.sqrt(k) / nrm) * sol, method="ZF")


def mse(g_true, est: ChannelEstimate) -> float:
    """Per-draw squared error ``||g - g_hat||^2 / K`` (harness averages)."""
    g_true = np.asarray(g_true, dtype=np.float64)
    k = g_true.shape[0] // 2
    return float(np.sum((g_true - est.g_hat) ** 2) / k)


def nmse(g_true, est: ChannelEstimate) -> float:
    """Direction-only squared error of unit-normalized vectors, over K.

    Invariant to positive rescaling of either argument; raises on a
    zero-norm input.
    """
    g_true = np.asarray(g_true, dtype=np.float64)
    n_true = np.linalg.norm(g_true)
    n_est = np.linalg.norm(est.g_hat)
    if n_true == 0.0 or n_est == 0.0:
        raise ValueError("NMSE is undefined for zero-norm vectors")
    k = g_true.shape[0] // 2
    diff = g_true / n_true - est.g_hat / n_est
    return float(np.sum(diff**2) / k)
