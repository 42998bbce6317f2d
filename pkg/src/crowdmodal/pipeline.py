"""Per-trip processing and corpus-level MPMF extraction, plus the subset-robustness harness."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geo, mpmf, preprocess, ridge, sswt
from .trips import TripValidationError

log = logging.getLogger("crowdmodal")


@dataclass(frozen=True)
class AnalysisConfig:
    f_cut: float = 0.5
    resample_fs: float = 100.0
    filter_order: int = 8
    n_v: int = 32
    w0: float = 6.0
    gamma_rel: float = 1e-8
    alpha: float = 0.05
    N_R: int = 5
    delta_s: float | None = None  # default L/129
    c: float | None = None  # default L/5
    bandwidth_pct: float = 1.0
    cdf_threshold: float = 0.1
    n_grid: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.alpha <= 0.5):
            raise ValueError("alpha must be in (0, 0.5]")
        if self.N_R < 1:
            raise ValueError("N_R must be >= 1")
        if not (0 < self.cdf_threshold < 1):
            raise ValueError("cdf_threshold must be in (0, 1)")
        if self.bandwidth_pct <= 0:
            raise ValueError("bandwidth_pct must be positive")

    @property
    def filter(self):
        return preprocess.FilterSpec(f_cut=self.f_cut, resample_fs=self.resample_fs, order=self.filter_order)

    def segmentation(self, L):
        ds = L / 129 if self.delta_s is None else self.delta_s
        c = L / 5 if self.c is None else self.c
        return mpmf.build_segments(L, ds, c)

    @property
    def f_range(self):
        return (0.0, self.f_cut)

    @property
    def bandwidth(self):
        return mpmf.bandwidth_rule(self.f_range, self.bandwidth_pct)


@dataclass(frozen=True, eq=False)
class TripStage:
    """Per-trip outcome: spatial ridge points, or the reason the trip was dropped."""

    trip_id: str
    spatial: mpmf.SpatialRidges | None
    error: str = ""
    n_peaks: int = 0

    @property
    def ok(self):
        return self.spatial is not None and len(self.spatial) > 0


def process_trip(trip, frame, cfg):
    """Vertical signal, filtering, SSWT, ridge thresholding and remapping for one trip."""
    try:
        track = geo.clean_track(geo.to_bridge_coords(trip.gps, frame), frame)
        trace = preprocess.preprocess_trip(trip, cfg.filter)
        tfr = sswt.sswt(trace.x, 1.0 / trace.fs, n_v=cfg.n_v, w0=cfg.w0, gamma_rel=cfg.gamma_rel)
        rs = ridge.extract_ridges(tfr, cfg.alpha, trip.trip_id)
        sp = mpmf.remap_to_space(rs, track, trace.t, tfr.grid, frame.length_L)
    except (geo.GeoError, preprocess.PreprocessError, sswt.SswtError, TripValidationError) as exc:
        return TripStage(trip.trip_id, None, f"{type(exc).__name__}: {exc}")
    if not len(sp):
        return TripStage(trip.trip_id, sp, sp.flagged or "no ridge points", rs.n_peaks)
    return TripStage(trip.trip_id, sp, "", rs.n_peaks)


def _process_star(args):
    return process_trip(*args)


def process_trips(trips, frame, cfg, workers=1):
    """Per-trip stages sorted by trip id; the result does not depend on ``workers``."""
    jobs = [(t, frame, cfg) for t in sorted(trips, key=lambda t: t.trip_id)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_process_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [process_trip(*j) for j in jobs]


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    agg: mpmf.Aggregate
    candidates: mpmf.CandidateSet
    report: mpmf.MpmfReport
    used: list = field(default_factory=list)


def analyze_stages(stages, frame, cfg):
    """Segment aggregation, KDE and MPMF selection over the usable trip stages."""
    good = [s.spatial for s in stages if s.ok]
    if not good:
        raise mpmf.MpmfError("no usable trips")
    seg = cfg.segmentation(frame.length_L)
    agg = mpmf.aggregate(good, seg)
    cands = mpmf.top_candidates(agg, cfg.N_R)
    fs = cands.f_hat_s
    if fs.size == 0:
        raise mpmf.MpmfError("no frequency candidates in any segment")
    pdf = mpmf.kde_pdf(fs, cfg.f_range, cfg.bandwidth, cfg.n_grid)
    rep = mpmf.pick_mpmfs(pdf, cfg.cdf_threshold)
    return AnalysisResult(agg, cands, rep, sorted(s.trip_id for s in good))


def analyze(trips, frame, cfg, workers=1):
    stages = process_trips(trips, frame, cfg, workers)
    for s in stages:
        if not s.ok:
            log.warning("trip %s excluded: %s", s.trip_id, s.error)
    return analyze_stages(stages, frame, cfg), stages


# -- robustness -------------------------------------------------------------

def mode_errors(report, truth, k=None):
    """Relative error per truth frequency, using the nearest of the top-k peaks.

    ``k`` defaults to the number of truth frequencies.  NaN when there are no peaks.
    """
    truth = np.asarray(truth, dtype=float)
    top = np.array(report.top(len(truth) if k is None else k))
    if top.size == 0:
        return np.full(len(truth), np.nan)
    return np.array([np.min(np.abs(top - f)) / f for f in truth])


def top_error(report, truth):
    """Error of the single highest peak against the nearest truth frequency."""
    top = report.top(1)
    return mpmf.relative_error(top[0], truth) if top else math.nan


@dataclass(frozen=True)
class RobustnessRow:
    N_S: int
    mean_error: float
    frac_under_5pct: float
    failures: int
    mode_mean: tuple = ()
    mode_frac: tuple = ()


def subset_error_curve(stages, frame, cfg, truth, sizes, repeats, seed=0, modes=None):
    """Error of the top MPMF on random trip subsets.

    ``stages`` are per-trip results from ``process_trips``, so each draw only
    redoes aggregation, candidate selection and the KDE.  ``modes`` (truth
    frequencies) adds per-mode errors from the nearest of the top peaks.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    stages = sorted(stages, key=lambda s: s.trip_id)
    n = len(stages)
    for s in sizes:
        if not (1 <= s <= n):
            raise ValueError(f"subset size {s} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    modes = list(modes or [])
    rows = []
    for N_S in sizes:
        errs, merrs, fails = [], [], 0
        for _ in range(repeats):
            pick = rng.choice(n, size=N_S, replace=False)
            try:
                res = analyze_stages([stages[i] for i in sorted(pick)], frame, cfg)
            except mpmf.MpmfError:
                fails += 1
                continue
            e = top_error(res.report, truth)
            if math.isnan(e):
                fails += 1
                continue
            errs.append(e)
            if modes:
                merrs.append(mode_errors(res.report, modes))
        errs = np.array(errs)
        mean = float(errs.mean()) if errs.size else math.nan
        frac = float((errs < 0.05).mean()) if errs.size else math.nan
        if modes and merrs:
            me = np.array(merrs)
            mm = tuple(float(np.nanmean(me[:, j])) for j in range(len(modes)))
            mf = tuple(float(np.mean(me[:, j] < 0.05)) for j in range(len(modes)))
        else:
            mm = mf = ()
        rows.append(RobustnessRow(N_S, mean, frac, fails, mm, mf))
    return rows


def write_robustness_csv(rows, path, modes=None):
    modes = list(modes or [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        head = ["N_S", "mean_error", "frac_under_5pct", "failures"]
        for j in range(len(modes)):
            head += [f"m{j + 1}_mean_error", f"m{j + 1}_frac_under_5pct"]
        fh.write(",".join(head) + "\n")
        for r in rows:
            vals = [str(r.N_S), f"{r.mean_error:.9g}", f"{r.frac_under_5pct:.9g}", str(r.failures)]
            for a, b in zip(r.mode_mean, r.mode_frac):
                vals += [f"{a:.9g}", f"{b:.9g}"]
            fh.write(",".join(vals) + "\n")
