"""Synchrosqueezed Morlet wavelet transform on a log-frequency grid.

Frequencies are spaced ``2**(1/n_v)`` apart and anchored at the Nyquist
frequency, so every signal sampled at the same rate shares one grid (up to
its lowest octave).  Scales map to frequencies through the Morlet center
frequency, ``a = w0 / (2 pi f)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import _kernels

DEFAULT_W0 = 6.0
DEFAULT_NV = 32
DEFAULT_GAMMA_REL = 1e-8


class SswtError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FreqGrid:
    f: np.ndarray
    n_v: int
    K: int
    dt: float

    @property
    def n_a(self):
        return len(self.f)

    @property
    def f_top(self):
        return 0.5 / self.dt

    def top_index(self):
        """Bin index counted down from the Nyquist bin (shared across trips)."""
        return (self.n_a - 1) - np.arange(self.n_a)

    def nearest_bin(self, freq):
        """Nearest bin in log2 distance; -1 where out of range or non-positive."""
        freq = np.asarray(freq, dtype=float)
        out = np.full(freq.shape, -1, dtype=np.int64)
        pos = freq > 0
        k = np.rint((self.n_a - 1) + self.n_v * np.log2(freq[pos] / self.f_top)).astype(np.int64)
        k[(k < 0) | (k >= self.n_a)] = -1
        out[pos] = k
        return out


def make_grid(K, dt, n_v=DEFAULT_NV):
    """Log grid from ``1/(K dt)`` up to Nyquist with ``n_v`` voices per octave.

    ``n_a = floor(log2(K/2) * n_v) + 1``; for K a power of two this is
    exactly ``log2(K/2) * n_v + 1`` bins.
    """
    if K < 16:
        raise SswtError("need at least 16 samples")
    if n_v < 4:
        raise SswtError("need at least 4 voices per octave")
    if dt <= 0:
        raise SswtError("dt must be positive")
    n_oct = math.log2(K / 2)
    n_a = int(math.floor(n_oct * n_v + 1e-9)) + 1
    l = np.arange(n_a)
    f = (0.5 / dt) * 2.0 ** ((l - (n_a - 1)) / n_v)
    return FreqGrid(f=f, n_v=n_v, K=K, dt=dt)


def scales(grid, w0=DEFAULT_W0):
    return w0 / (2 * np.pi * grid.f)


def _morlet_hat(aw, w0):
    # analytic Morlet, peak value 2: a real tone A cos(2 pi f t) gives |W| = A
    out = np.zeros_like(aw)
    pos = aw > 0
    out[pos] = 2.0 * np.exp(-0.5 * (aw[pos] - w0) ** 2)
    return out


def _padded(x):
    K = len(x)
    n = sfft.next_fast_len(3 * K)
    left = (n - K) // 2
    xp = np.pad(x, (left, n - K - left), mode="reflect")
    return xp, left


def cwt_morlet(x, grid, w0=DEFAULT_W0, derivative=False):
    """Continuous wavelet transform with 1/a normalization.

    Returns W (n_a, K); with ``derivative=True`` also dW/db, computed by
    multiplying by ``i * xi`` in the Fourier domain.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != grid.K:
        raise SswtError("signal length must match the grid")
    if not np.all(np.isfinite(x)):
        raise SswtError("signal contains NaN or Inf")
    xp, left = _padded(x)
    n = len(xp)
    X = sfft.fft(xp)
    xi = 2 * np.pi * sfft.fftfreq(n, grid.dt)
    a = scales(grid, w0)
    psi = _morlet_hat(a[:, None] * xi[None, :], w0)
    prod = X[None, :] * psi
    W = sfft.ifft(prod, axis=1)[:, left:left + grid.K]
    if not derivative:
        return W
    dW = sfft.ifft(prod * (1j * xi)[None, :], axis=1)[:, left:left + grid.K]
    return W, dW


def default_gamma(W, rel=DEFAULT_GAMMA_REL):
    m = float(np.max(np.abs(W))) if W.size else 0.0
    return rel * m


def phase_transform(W, dW, gamma):
    """Instantaneous frequency in Hz; NaN where |W| <= gamma."""
    absW = np.abs(W)
    ok = absW > gamma
    omega = np.full(W.shape, np.nan)
    omega[ok] = np.imag(dW[ok] / W[ok]) / (2 * np.pi)
    return omega


def scale_weight(grid):
    """a^-1 da for log-spaced scales."""
    return np.full(grid.n_a, math.log(2.0) / grid.n_v)


def synchrosqueeze(W, omega, grid, gamma):
    """Reassign CWT coefficients to the frequency bin nearest their phase transform."""
    ok = np.isfinite(omega) & (np.abs(W) > gamma)
    bins = np.full(W.shape, -1, dtype=np.int64)
    bins[ok] = grid.nearest_bin(omega[ok])
    return _kernels.squeeze_accumulate(
        np.ascontiguousarray(W, dtype=np.complex128), bins, scale_weight(grid), grid.n_a
    )


def cone_mask(grid, w0=DEFAULT_W0):
    """True where a cell is farther than one e-folding width sqrt(2)*a from both edges."""
    a = scales(grid, w0)
    b = np.arange(grid.K) * grid.dt
    edge = np.minimum(b, b[-1] - b)
    return edge[None, :] >= np.sqrt(2.0) * a[:, None]


@dataclass(frozen=True, eq=False)
class TfrGrid:
    W: np.ndarray
    omega: np.ndarray
    T: np.ndarray
    grid: FreqGrid
    gamma: float
    valid: np.ndarray  # cone-of-influence mask over (freq, time)


def sswt(x, dt, n_v=DEFAULT_NV, w0=DEFAULT_W0, gamma=None, gamma_rel=DEFAULT_GAMMA_REL):
    """Synchrosqueezed transform of one uniformly sampled series."""
    grid = make_grid(len(x), dt, n_v)
    W, dW = cwt_morlet(x, grid, w0, derivative=True)
    g = default_gamma(W, gamma_rel) if gamma is None else float(gamma)
    omega = phase_transform(W, dW, g)
    T = synchrosqueeze(W, omega, grid, g)
    return TfrGrid(W=W, omega=omega, T=T, grid=grid, gamma=g, valid=cone_mask(grid, w0))


def write_abs_csv(tfr, path):
    """Dense |T| dump: first column frequency, one column per time sample."""
    data = np.column_stack([tfr.grid.f, np.abs(tfr.T)])
    header = "f," + ",".join(f"t{j}" for j in range(tfr.grid.K))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.9g")
