"""Closed-form receiver statistics and their Monte-Carlo checks.

Three facts about the one-bit front end are exposed here:

* the probability that two transmit vectors differing only in the sign
  of one user's (unit-modulus) symbol produce the *same* quantized
  observation, in closed form and by simulation;
* the scalar building block behind it, ``Pr(sgn(u - v) = sgn(u + v))``
  for independent zero-mean Gaussians;
* the saturation of the relaxed-ML estimate's norm at its ball bound as
  the SNR grows.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import pga
from .detectors import NmlConfig
from .model import (
    Constellation,
    draw_symbols,
    expand_real,
    indices_to_symbols,
    make_constellation,
    sgn,
    sign_refine,
)
from .numerics import RngStream, draw_std_complex_gaussian, log_norm_cdf

__all__ = [
    "COLLISION_BLOCK",
    "CollisionSpec",
    "collision_probability_closed_form",
    "collision_probability_monte_carlo",
    "sign_agreement_probability",
    "sign_agreement_monte_carlo",
    "lemma1_norm_check",
]

COLLISION_BLOCK = 65536


@dataclass(frozen=True)
class CollisionSpec:
    """Setting for the observation-collision probability.

    K users with unit-modulus symbols, N_r one-bit receive chains,
    per-user power ``p`` and complex noise variance ``sigma2``.
    """

    k: int
    n_r: int
    p: float
    sigma2: float

    def __post_init__(self):
        if self.k < 1 or self.n_r < 1:
            raise ValueError("k and n_r must be positive integers")
        if not self.p > 0 or not self.sigma2 > 0:
            raise ValueError("p and sigma2 must be positive")


def collision_probability_closed_form(spec: CollisionSpec) -> float:
    """Probability that flipping one user's symbol sign leaves all 2 N_r
    observed bits unchanged.

    Equals ``((2/pi) * arctan(sqrt(((K-1) p + sigma2) / p))) ** (2 N_r)``:
    each of the 2 N_r real observations agrees independently with
    probability given by the scalar sign-agreement law, where the flipped
    user contributes the "difference" component and the other users plus
    noise contribute the "common" component.
    """
    ratio = ((spec.k - 1) * spec.p + spec.sigma2) / spec.p
    per_bit = (2.0 / math.pi) * math.atan(math.sqrt(ratio))
    return per_bit ** (2 * spec.n_r)


def collision_probability_monte_carlo(
    spec: CollisionSpec, trials: int, rng: RngStream
) -> Tuple[float, float]:
    """Simulated collision probability and its binomial standard error.

    Each trial shares the channel, noise, and K-1 interfering symbols
    between the two hypotheses; the second transmit vector flips the
    sign of user 0's QPSK symbol, so its unquantized observation is
    ``y2 = y1 - 2 sqrt(p) h_0 x_0``.  Trials are partitioned into fixed
    blocks of ``COLLISION_BLOCK``, one child stream per block, so the
    estimate does not depend on how the blocks are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    qpsk = make_constellation("psk", 4)
    root_p = math.sqrt(spec.p)
    root_s = math.sqrt(spec.sigma2)
    hits = 0
    n_blocks = (trials + COLLISION_BLOCK - 1) // COLLISION_BLOCK
    for b in range(n_blocks):
        size = min(COLLISION_BLOCK, trials - b * COLLISION_BLOCK)
        sub = RngStream(rng.master_seed, rng.stream_id + b)
        h = draw_std_complex_gaussian(sub, size * spec.n_r * spec.k)
        h = h.reshape(size, spec.n_r, spec.k)
        idx = draw_symbols(sub, qpsk, size * spec.k).reshape(size, spec.k)
        x = indices_to_symbols(qpsk, idx)
        noise = draw_std_complex_gaussian(sub, size * spec.n_r)
        noise = noise.reshape(size, spec.n_r)
        y1 = root_p * np.einsum("tnk,tk->tn", h, x) + root_s * noise
        y2 = y1 - 2.0 * root_p * h[:, :, 0] * x[:, 0, None]
        same = np.logical_and(
            sgn(y1.real) == sgn(y2.real), sgn(y1.imag) == sgn(y2.imag)
        )
        hits += int(np.all(same, axis=1).sum())
    p_hat = hits / trials
    stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)
    return p_hat, stderr


def sign_agreement_probability(sigma_u: float, sigma_v: float) -> float:
    """``Pr(sgn(u - v) = sgn(u + v)) = (2/pi) arctan(sigma_u / sigma_v)``
    for independent ``u ~ N(0, sigma_u^2)``, ``v ~ N(0, sigma_v^2)``."""
    if not sigma_u > 0 or not sigma_v > 0:
        raise ValueError("standard deviations must be positive")
    return (2.0 / math.pi) * math.atan(sigma_u / sigma_v)


def sign_agreement_monte_carlo(
    sigma_u: float, sigma_v: float, trials: int, rng: RngStream
) -> Tuple[float, float]:
    """Empirical counterpart of ``sign_agreement_probability``."""
    if not sigma_u > 0 or not sigma_v > 0:
        raise ValueError("standard deviations must be positive")
    if trials < 1:
        raise ValueError("trials must be positive")
    gen = rng.generator()
    u = sigma_u * gen.standard_normal(trials)
    v = sigma_v * gen.standard_normal(trials)
    agree = int((sgn(u - v) == sgn(u + v)).sum())
    p_hat = agree / trials
    stderr = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)
    return p_hat, stderr


def lemma1_norm_check(
    k: int,
    n_r: int,
    rho_values: Sequence[float],
    trials: int,
    rng: RngStream,
    cfg: NmlConfig = NmlConfig(),
    constellation: Optional[Constellation] = None,
) -> np.ndarray:
    """Fraction of converged relaxed-ML points with ``||x||^2 >= 0.99 K``.

    For each SNR the ball-constrained ascent is run on fresh QPSK
    transmissions (unless another constellation is supplied).  A converged
    point that stopped strictly inside the ball is lifted onto the sphere
    whenever that does not lower the log-likelihood: once every refined
    margin is positive the objective is flat to double precision, the
    gradient steps underflow, and the outward-scaled point is an equally
    good maximizer (radial scaling can only raise all-positive margins).
    Without the lift the reported norm would measure where the ascent
    stalled, not where the maximizer lies.  Non-converged runs are left
    out of the denominator; a grid point with no converged run yields
    NaN.  Trial (r, t) uses the child stream ``stream_id + r * trials + t``.
    """
    if k < 1 or n_r < 1:
        raise ValueError("k and n_r must be positive integers")
    if trials < 1:
        raise ValueError("trials must be positive")
    if constellation is None:
        constellation = make_constellation("psk", 4)
    out = np.empty(len(rho_values), dtype=np.float64)
    for r, rho in enumerate(rho_values):
        if not rho > 0:
            raise ValueError("rho values must be positive")
        sqrt2rho = math.sqrt(2.0 * rho)
        converged = 0
        saturated = 0
        for t in range(trials):
            sub = RngStream(rng.master_seed, rng.stream_id + r * trials + t)
            h = draw_std_complex_gaussian(sub, n_r * k).reshape(n_r, k)
            idx = draw_symbols(sub, constellation, k)
            x = indices_to_symbols(constellation, idx)
            noise = draw_std_complex_gaussian(sub, n_r)
            y = math.sqrt(rho) * (h @ x) + noise
            signs = np.concatenate([sgn(y.real), sgn(y.imag)])
            rows = sign_refine(expand_real(h), signs)
            res = pga.solve(
                rows,
                sqrt2rho=sqrt2rho,
                norm_bound=float(k),
                kappa=cfg.kappa,
                epsilon=cfg.epsilon,
                max_iterations=cfg.max_iterations,
            )
            if not res.converged:
                continue
            converged += 1
            norm_sq = float(res.x @ res.x)
            if 0.0 < norm_sq < float(k):
                shell = res.x * math.sqrt(k / norm_sq)
                f_shell = float(log_norm_cdf(sqrt2rho * (rows @ shell)).sum())
                if f_shell >= res.objective:
                    norm_sq = float(k)
            if norm_sq >= 0.99 * k:
                saturated += 1
        out[r] = saturated / converged if converged else math.nan
    return out
