"""Signal model: constellations, channels, one-bit quantization, and the
complex-to-real expansion used by every likelihood computation.

Conventions fixed here and relied on everywhere else:

* noise power is 1 and the transmit scale is ``sqrt(rho)``, so ``rho`` is
  the SNR (the per-user average symbol energy is 1);
* ``sgn(0) = +1``;
* real stacking order is "all real parts first, then all imaginary
  parts", for both symbol vectors and quantized observations;
* the real-expanded channel is a ``2 N_r x 2K`` matrix whose first
  ``N_r`` rows are ``[Re(g_n); -Im(g_n)]`` and last ``N_r`` rows are
  ``[Im(g_n); Re(g_n)]``, ``g_n`` being row ``n`` of the channel, so
  rows pair up with the stacked observation signs.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, draw_std_complex_gaussian

__all__ = [
    "Constellation",
    "make_constellation",
    "draw_rayleigh_channel",
    "draw_symbols",
    "transmit",
    "sgn",
    "one_bit_quantize",
    "expand_real",
    "sign_refine",
    "nearest_symbol",
    "nearest_symbols",
    "indices_to_symbols",
    "real_stack",
]


@dataclass(frozen=True, eq=False)
class Constellation:
    """A unit-average-energy symbol alphabet.

    Attributes
    ----------
    kind : str
        ``"psk"`` or ``"qam"``.
    order : int
        Number of points M; symbol indices run 0..M-1.
    points : ndarray
        Complex points, ``(1/M) sum |s_m|^2 == 1``.
    """

    kind: str
    order: int
    points: np.ndarray

    @property
    def labels(self):
        return np.arange(self.order)


def make_constellation(kind: str, order: int) -> Constellation:
    """Build an M-PSK or square M-QAM constellation.

    PSK points are ``exp(1j*(2*pi*m/M + pi/M))`` so that no point lies on
    an axis (QPSK comes out as the usual ``(+-1 +- 1j)/sqrt(2)``).  QAM
    points live on the odd-integer grid scaled to unit average energy,
    indexed as ``m = i*side + j`` with real level ``i`` and imaginary
    level ``j``, both ascending.
    """
    kind = kind.lower()
    if order < 2:
        raise ValueError("constellation order must be >= 2")
    if kind == "psk":
        m = np.arange(order)
        points = np.exp(1j * (2.0 * np.pi * m / order + np.pi / order))
    elif kind == "qam":
        side = round(np.sqrt(order))
        if side * side != order or side % 2 != 0:
            raise ValueError(
                "QAM order must be a perfect square with an even side, got %d"
                % order
            )
        levels = np.arange(-(side - 1), side, 2, dtype=np.float64)
        re, im = np.meshgrid(levels, levels, indexing="ij")
        scale = np.sqrt(np.mean(levels**2) * 2.0)
        points = (re + 1j * im).reshape(-1) / scale
    else:
        raise ValueError("unsupported constellation kind %r" % (kind,))
    return Constellation(kind=kind, order=order, points=points)


def draw_rayleigh_channel(rng: RngStream, n_r: int, k: int) -> np.ndarray:
    """IID CN(0, 1) channel matrix of shape (n_r, k).

    Consumes exactly ``n_r * k`` complex draws from ``rng``, filled
    row-major.
    """
    if n_r < 1 or k < 1:
        raise ValueError("channel dimensions must be positive")
    return draw_std_complex_gaussian(rng, n_r * k).reshape(n_r, k)


def draw_symbols(rng: RngStream, constellation: Constellation, count: int):
    """Uniform symbol indices for ``count`` users."""
    gen = rng.generator()
    return gen.integers(0, constellation.order, size=count, dtype=np.int64)


def sgn(v) -> np.ndarray:
    """Elementwise sign with ``sgn(0) = +1``, returned as float64 +-1."""
    return np.where(np.asarray(v, dtype=np.float64) >= 0.0, 1.0, -1.0)


def one_bit_quantize(y) -> np.ndarray:
    """Stacked one-bit ADC output of a complex vector.

    Returns a length ``2 N`` float64 vector of +-1: signs of the real
    parts first, then signs of the imaginary parts.
    """
    y = np.asarray(y, dtype=np.complex128)
    return np.concatenate([sgn(y.real), sgn(y.imag)])


def transmit(H, x, rho: float, rng: RngStream = None, noise=None):
    """One channel use: ``y = sqrt(rho) H x + n`` plus one-bit quantization.

    Parameters
    ----------
    H : ndarray
        Complex channel, shape (N_r, K).
    x : ndarray
        Transmitted symbol values (not indices), shape (K,).
    rho : float
        SNR (noise is CN(0, I)).
    rng : RngStream
        Source for the noise draw; may be omitted when ``noise`` is given.
    noise : ndarray, optional
        Explicit noise vector (a test hook; pass zeros for the noise-free
        case).

    Returns
    -------
    (ndarray, ndarray)
        The unquantized complex ``y`` (N_r,) and the stacked sign vector
        (2 N_r,).
    """
    H = np.asarray(H, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if H.ndim != 2 or x.shape != (H.shape[1],):
        raise ValueError("shape mismatch between channel and symbol vector")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or an explicit noise vector is required")
        noise = draw_std_complex_gaussian(rng, H.shape[0])
    else:
        noise = np.asarray(noise, dtype=np.complex128)
        if noise.shape != (H.shape[0],):
            raise ValueError("noise vector has wrong length")
    y = np.sqrt(rho) * (H @ x) + noise
    return y, one_bit_quantize(y)


def expand_real(H) -> np.ndarray:
    """Real expansion of a complex channel matrix.

    For ``H`` of shape (N_r, K) returns the ``2 N_r x 2K`` row matrix
    described in the module docstring; row ``n`` dotted with a stacked
    symbol vector gives ``Re(g_n^T x)`` and row ``N_r + n`` gives
    ``Im(g_n^T x)``.
    """
    H = np.asarray(H, dtype=np.complex128)
    hr, hi = H.real, H.imag
    top = np.hstack([hr, -hi])
    bot = np.hstack([hi, hr])
    return np.ascontiguousarray(np.vstack([top, bot]))


def sign_refine(G_R, q) -> np.ndarray:
    """Multiply each real-expanded row by the observed sign.

    After refinement the true transmitted vector has nonnegative margin
    on every row of a noise-free observation.  Applying the same signs
    twice restores the input.
    """
    G_R = np.asarray(G_R, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (G_R.shape[0],):
        raise ValueError("sign vector length does not match row count")
    if not np.all((q == 1.0) | (q == -1.0)):
        raise ValueError("signs must be exactly +-1")
    return np.ascontiguousarray(G_R * q[:, None])


def nearest_symbol(constellation: Constellation, z: complex) -> int:
    """Index of the Euclidean-nearest constellation point (ties -> lowest)."""
    if not np.isfinite(z):
        raise ValueError("z must be finite")
    return int(np.argmin(np.abs(constellation.points - z)))


def nearest_symbols(constellation: Constellation, z) -> np.ndarray:
    """Vectorized nearest-symbol decision, one index per entry of ``z``."""
    z = np.asarray(z, dtype=np.complex128)
    d = np.abs(z[:, None] - constellation.points[None, :])
    return np.argmin(d, axis=1)


def indices_to_symbols(constellation: Constellation, indices) -> np.ndarray:
    return constellation.points[np.asarray(indices, dtype=np.int64)]


def real_stack(x) -> np.ndarray:
    """Stack a complex vector as [real parts; imaginary parts]."""
    x = np.asarray(x, dtype=np.complex128)
    return np.concatenate([x.real, x.imag])
