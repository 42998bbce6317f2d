"""Statistically significant piecewise ridges of |T|."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True, eq=False)
class RidgeSet:
    """Retained ridge points of one trip (parallel arrays).

    ``bin`` indexes the trip's FreqGrid; ``t_index`` is the time column.
    ``empty_input`` flags a trip that produced no peaks at all.
    """

    trip_id: str
    t_index: np.ndarray
    bin: np.ndarray
    f: np.ndarray
    prominence: np.ndarray
    alpha: float
    threshold: float = math.inf
    n_peaks: int = 0
    empty_input: bool = False

    def __len__(self):
        return len(self.t_index)


def column_peaks(column):
    """Strict local maxima of one column as (index, amplitude) pairs."""
    col = np.asarray(column, dtype=float)
    rows, _ = _kernels.column_peaks(np.ascontiguousarray(col[:, None]))
    return [(int(i), float(col[i])) for i in rows]


def tfr_peaks(absT, valid=None):
    """All column peaks of |T|, dropping those in masked (boundary) cells.

    Returns (rows, cols, values) ordered by column then frequency bin.
    """
    A = np.ascontiguousarray(absT, dtype=float)
    rows, cols = _kernels.column_peaks(A)
    if valid is not None:
        keep = valid[rows, cols]
        rows, cols = rows[keep], cols[keep]
    return rows, cols, A[rows, cols]


def quantile_threshold(values, alpha):
    """Smallest retained value: the ceil(alpha * n)-th largest."""
    if not (0 < alpha <= 0.5):
        raise ValueError("alpha must be in (0, 0.5]")
    n = len(values)
    if n == 0:
        return math.inf
    k = max(1, math.ceil(alpha * n - 1e-9))
    return float(np.partition(values, n - k)[n - k])


def threshold_ridges(rows, cols, values, alpha, freqs=None, trip_id=""):
    """Keep peaks in the upper alpha fraction of the trip's pooled peak population.

    Ties at the threshold are kept, so up to ``ceil(alpha * n)`` plus ties survive.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        z = np.zeros(0, dtype=np.int64)
        return RidgeSet(trip_id, z, z, np.zeros(0), np.zeros(0), alpha, math.inf, 0, True)
    thr = quantile_threshold(values, alpha)
    keep = values >= thr
    rows, cols = np.asarray(rows)[keep], np.asarray(cols)[keep]
    f = np.asarray(freqs)[rows] if freqs is not None else np.full(len(rows), np.nan)
    return RidgeSet(
        trip_id=trip_id, t_index=cols, bin=rows, f=f, prominence=values[keep],
        alpha=alpha, threshold=thr, n_peaks=n,
    )


def extract_ridges(tfr, alpha=0.05, trip_id=""):
    """Column peaks of |T| inside the cone of influence, thresholded per trip."""
    rows, cols, vals = tfr_peaks(np.abs(tfr.T), tfr.valid)
    return threshold_ridges(rows, cols, vals, alpha, tfr.grid.f, trip_id)


def write_ridges_csv(ridges_with_r, path):
    """Rows of trip_id, t_index, r, f, prominence."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trip_id,t_index,r,f,prominence\n")
        for rs, r in ridges_with_r:
            for j, rr, ff, pp in zip(rs.t_index, r, rs.f, rs.prominence):
                fh.write(f"{rs.trip_id},{int(j)},{rr:.6f},{ff:.9g},{pp:.9g}\n")
