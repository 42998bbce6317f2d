"""Numpy implementations of the inner loops.

Every accumulation adds contributions to each output cell in the same order
as the compiled loops, so both backends give bit-identical results.
"""
import numpy as np
from scipy.signal import find_peaks


def squeeze_accumulate(W, bins, weight, n_out):
    """T[bins[a, b], b] += W[a, b] * weight[a] for every bins[a, b] >= 0."""
    T = np.zeros((n_out, W.shape[1]), dtype=np.complex128)
    a, b = np.nonzero(bins >= 0)
    vals = W[a, b].real * weight[a] + 1j * (W[a, b].imag * weight[a])
    np.add.at(T, (bins[a, b], b), vals)
    return T


def column_peaks(A):
    """Strict local maxima along axis 0; flat tops report their leftmost row.

    Returns (rows, cols) ordered by column, then row.
    """
    rows, cols = [], []
    for b in range(A.shape[1]):
        _, props = find_peaks(A[:, b], plateau_size=(None, None))
        left = props["left_edges"]
        rows.append(left)
        cols.append(np.full(len(left), b))
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64)


def segment_accumulate(bins, r, w, s1, ds, M, half, n_bins):
    """P[bins[p], m] += w[p] for every segment m with s_m - half <= r[p] < s_m + half."""
    P = np.zeros((n_bins, M))
    if len(r) == 0:
        return P
    m0 = np.clip(np.floor((r - half - s1) / ds).astype(np.int64), 0, None)
    m1 = np.clip(np.ceil((r + half - s1) / ds).astype(np.int64), None, M - 1)
    span = np.clip(m1 - m0 + 1, 0, None)
    p = np.repeat(np.arange(len(r)), span)
    starts = np.repeat(np.cumsum(span) - span, span)
    m = m0[p] + (np.arange(len(p)) - starts)
    s = s1 + m * ds
    keep = (s - half <= r[p]) & (r[p] < s + half)
    np.add.at(P, (bins[p[keep]], m[keep]), w[p[keep]])
    return P
