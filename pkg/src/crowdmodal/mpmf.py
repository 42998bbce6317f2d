"""Spatial aggregation of ridge points and KDE extraction of the most probable modal frequencies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geo import GeoError, position_at


class MpmfError(ValueError):
    pass


@dataclass(frozen=True)
class Segmentation:
    """Overlapping bridge intervals of width ``c`` with centers ``delta_s`` apart."""

    L: float
    delta_s: float
    c: float
    M: int

    @property
    def c_o(self):
        return self.c - self.delta_s

    @property
    def half(self):
        return self.c / 2.0

    @property
    def centers(self):
        return self.delta_s / 2.0 + self.delta_s * np.arange(self.M)

    def limits(self):
        """(lower, upper) bounds of every segment; membership is lower <= r < upper."""
        s = self.centers
        return s - self.half, s + self.half

    def members(self, r):
        """Boolean membership matrix (len(r), M)."""
        lo, hi = self.limits()
        r = np.asarray(r, dtype=float)[:, None]
        return (lo[None, :] <= r) & (r < hi[None, :])


def build_segments(L, delta_s, c):
    if not (L > 0 and delta_s > 0):
        raise MpmfError("L and delta_s must be positive")
    if c < delta_s:
        raise MpmfError(f"segment width c={c} is below the spacing delta_s={delta_s} (negative overlap)")
    if delta_s > L or c > L:
        raise MpmfError("delta_s and c must not exceed L")
    M = int(math.floor(L / delta_s + 1e-9))
    return Segmentation(L=float(L), delta_s=float(delta_s), c=float(c), M=M)


@dataclass(frozen=True, eq=False)
class SpatialRidges:
    """Ridge points of one trip placed on the bridge.

    ``top_bin`` counts grid bins down from the Nyquist bin, which is the
    index shared by every trip sampled at the same rate.
    """

    trip_id: str
    t_index: np.ndarray
    top_bin: np.ndarray
    r: np.ndarray
    prominence: np.ndarray
    f_top: float
    n_v: int
    flagged: str = ""

    def __len__(self):
        return len(self.r)

    def scaled(self, k):
        return SpatialRidges(self.trip_id, self.t_index, self.top_bin, self.r,
                             self.prominence * k, self.f_top, self.n_v, self.flagged)


def remap_to_space(ridges, track, t_axis, grid, L):
    """Attach bridge positions to ridge points via the trip's cleaned track.

    Points whose time is outside the track or whose position falls outside
    [0, L] are dropped.  A trip left with no points is flagged.
    """
    t = np.asarray(t_axis, dtype=float)[ridges.t_index]
    t0, t1 = track.t_range
    inside_t = (t >= t0) & (t <= t1)
    r = np.full(len(t), np.nan)
    if inside_t.any():
        try:
            r[inside_t] = np.atleast_1d(position_at(track, t[inside_t]))
        except GeoError:
            pass
    keep = np.isfinite(r) & (r >= 0.0) & (r <= L)
    top = (grid.n_a - 1) - ridges.bin[keep]
    flag = "" if keep.any() else "no ridge points on the bridge"
    return SpatialRidges(
        trip_id=ridges.trip_id,
        t_index=np.asarray(ridges.t_index[keep], dtype=np.int64),
        top_bin=np.asarray(top, dtype=np.int64),
        r=r[keep],
        prominence=np.asarray(ridges.prominence[keep], dtype=float),
        f_top=grid.f_top,
        n_v=grid.n_v,
        flagged=flag,
    )


@dataclass(frozen=True, eq=False)
class Aggregate:
    """P_N over an ascending frequency axis (rows) and segments (columns)."""

    P: np.ndarray
    f: np.ndarray
    seg: Segmentation
    n_points: np.ndarray = field(default=None)


def _shared_axis(spatial):
    f_top = {s.f_top for s in spatial}
    n_v = {s.n_v for s in spatial}
    if len(f_top) > 1 or len(n_v) > 1:
        raise MpmfError("trips disagree on sampling rate or voices per octave")
    return f_top.pop(), n_v.pop()


def aggregate(spatial, seg, n_bins=None):
    """Sum prominences per (frequency bin, segment) over every trip.

    Each trip is accumulated on its own, in (t_index, bin) order, and the
    per-trip grids are added in trip_id order. The result does not depend on
    the order trips are supplied in, and identical trips add exactly.
    """
    spatial = [s for s in spatial if len(s)]
    if not spatial:
        raise MpmfError("no ridge points to aggregate")
    f_top, n_v = _shared_axis(spatial)
    spatial = sorted(spatial, key=lambda s: s.trip_id)
    if n_bins is None:
        n_bins = int(max(s.top_bin.max() for s in spatial)) + 1
    P = np.zeros((n_bins, seg.M))
    counts = np.zeros(seg.M, dtype=np.int64)
    for s in spatial:
        order = np.lexsort((s.top_bin, s.t_index))
        r = np.ascontiguousarray(s.r[order])
        rows = np.ascontiguousarray((n_bins - 1) - s.top_bin[order], dtype=np.int64)
        P += _kernels.segment_accumulate(rows, r, np.ascontiguousarray(s.prominence[order]),
                                         seg.delta_s / 2.0, seg.delta_s, seg.M, seg.half, n_bins)
        counts += seg.members(r).sum(axis=0)
    f = f_top * 2.0 ** (-((n_bins - 1) - np.arange(n_bins)) / n_v)
    return Aggregate(P=P, f=f, seg=seg, n_points=counts)


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Per-segment top frequencies and their concatenation ``f_hat_s``."""

    agg: Aggregate
    N_R: int
    per_segment: list  # list of (bin indices, f values, P values)

    @property
    def f_hat_s(self):
        if not self.per_segment:
            return np.zeros(0)
        return np.concatenate([f for _, f, _ in self.per_segment])

    def rows(self):
        """(segment, rank, f, P) tuples, segments numbered from 1."""
        out = []
        for m, (_, f, p) in enumerate(self.per_segment):
            for k, (ff, pp) in enumerate(zip(f, p)):
                out.append((m + 1, k + 1, float(ff), float(pp)))
        return out


def top_candidates(agg, N_R):
    """The N_R largest nonzero bins per segment; ties go to the lower frequency."""
    if N_R < 1:
        raise MpmfError("N_R must be >= 1")
    P = agg.P
    idx = np.arange(P.shape[0])
    per = []
    for m in range(P.shape[1]):
        col = P[:, m]
        order = np.lexsort((idx, -col))
        order = order[col[order] > 0][:N_R]
        per.append((order, agg.f[order], col[order]))
    return CandidateSet(agg=agg, N_R=N_R, per_segment=per)


@dataclass(frozen=True, eq=False)
class Pdf:
    f: np.ndarray
    density: np.ndarray
    bandwidth: float


def bandwidth_rule(f_range, percent=1.0):
    return (f_range[1] - f_range[0]) * percent / 100.0


def kde_pdf(f_hat_s, f_range, bandwidth=None, n_grid=2000):
    """Gaussian KDE on a uniform grid, normalized to unit trapezoid area over the range."""
    x = np.asarray(f_hat_s, dtype=float)
    if x.size == 0:
        raise MpmfError("no frequency candidates")
    lo, hi = float(f_range[0]), float(f_range[1])
    if not hi > lo:
        raise MpmfError("empty frequency range")
    h = bandwidth_rule((lo, hi)) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise MpmfError("bandwidth must be positive")
    grid = np.linspace(lo, hi, n_grid)
    dens = np.zeros(n_grid)
    for chunk in np.array_split(np.sort(x), max(1, x.size // 256)):
        z = (grid[:, None] - chunk[None, :]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * h * math.sqrt(2 * math.pi)
    area = np.trapezoid(dens, grid)
    if area > 0:
        dens = dens / area
    return Pdf(f=grid, density=dens, bandwidth=h)


@dataclass(frozen=True, eq=False)
class MpmfReport:
    pdf: Pdf
    peaks: list  # (f, density, cdf_significance), ascending f
    mpmfs: list  # subset of peaks, ascending f
    threshold: float
    flagged: str = ""

    @property
    def bandwidth(self):
        return self.pdf.bandwidth

    def ranked(self):
        """Peaks by descending density."""
        return sorted(self.peaks, key=lambda p: (-p[1], p[0]))

    def top(self, k=1):
        return [p[0] for p in self.ranked()[:k]]

    def to_dict(self):
        return {
            "bandwidth": self.bandwidth,
            "threshold": self.threshold,
            "flagged": self.flagged,
            "peaks": [{"f": round(f, 9), "density": round(d, 9), "cdf": round(s, 9)} for f, d, s in self.peaks],
            "mpmfs": [round(f, 9) for f, _, _ in self.mpmfs],
        }


def strict_maxima(y):
    y = np.asarray(y)
    if len(y) < 3:
        return np.zeros(0, dtype=np.int64)
    return np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:]))[0] + 1


def pick_mpmfs(pdf, threshold=0.1):
    """Peaks of the density and those whose height ranks in the top ``threshold`` of grid densities."""
    if not (0 < threshold < 1):
        raise MpmfError("threshold must be in (0, 1)")
    d = pdf.density
    idx = strict_maxima(d)
    srt = np.sort(d)
    sig = np.searchsorted(srt, d[idx], side="right") / len(d)
    peaks = [(float(pdf.f[i]), float(d[i]), float(s)) for i, s in zip(idx, sig)]
    chosen = [p for p in peaks if p[2] >= 1 - threshold - 1e-12]
    return MpmfReport(pdf=pdf, peaks=peaks, mpmfs=chosen, threshold=threshold,
                      flagged="" if peaks else "density has no local maxima")


def relative_error(estimate, truth):
    """Relative error of ``estimate`` against the nearest truth frequency."""
    truth = np.asarray(truth, dtype=float)
    k = int(np.argmin(np.abs(truth - estimate)))
    return abs(estimate - truth[k]) / truth[k]


def write_candidates_csv(cands, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("segment,rank,f,P\n")
        for m, k, f, p in cands.rows():
            fh.write(f"{m},{k},{f:.9g},{p:.9g}\n")


def write_pdf_csv(pdf, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("f,density\n")
        for f, d in zip(pdf.f, pdf.density):
            fh.write(f"{f:.9g},{d:.9g}\n")
