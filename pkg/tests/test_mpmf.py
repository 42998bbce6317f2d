import math
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdmodal import geo, mpmf, pipeline, preprocess, presets, ridge, simulator, sswt
from crowdmodal.geo import BridgeTrack
from crowdmodal.mpmf import MpmfError, SpatialRidges, aggregate, build_segments, kde_pdf, pick_mpmfs

LONG = [0.106, 0.132]


# -- segmentation -----------------------------------------------------------

def test_long_span_segmentation():
    seg = build_segments(1280.0, 1280.0 / 129, 1280.0 / 5)
    assert seg.M == 129
    assert seg.c == pytest.approx(256.0)
    assert seg.c_o == pytest.approx(256.0 - 1280.0 / 129)
    assert seg.centers[0] == pytest.approx(1280.0 / 258)


def test_zero_overlap():
    seg = build_segments(100.0, 10.0, 10.0)
    assert seg.c_o == 0.0


def test_short_span_segmentation():
    seg = build_segments(28.0, 2.0, 7.0)
    assert seg.M == 14
    lo, hi = seg.limits()
    assert np.allclose(hi - lo, 7.0)


def test_negative_overlap_rejected():
    with pytest.raises(MpmfError):
        build_segments(100.0, 10.0, 5.0)


@given(st.floats(10, 5000), st.integers(1, 300), st.floats(1, 8))
def test_segmentation_invariants(L, M, ratio):
    ds = L / M
    c = min(ratio * ds, L)
    seg = build_segments(L, ds, c)
    assert seg.M == M
    assert seg.c_o >= 0
    assert np.allclose(np.diff(seg.centers), ds)
    lo, hi = seg.limits()
    assert lo[0] == pytest.approx(seg.centers[0] - c / 2) and hi[-1] == pytest.approx(seg.centers[-1] + c / 2)
    # union has no holes since c >= delta_s
    assert np.all(lo[1:] <= hi[:-1] + 1e-9)


# -- remapping --------------------------------------------------------------

def _grid(n=64):
    return sswt.make_grid(n, 1.0, 8)


def _ridges(t_index, bins, prom=None):
    t_index = np.asarray(t_index, dtype=np.int64)
    bins = np.asarray(bins, dtype=np.int64)
    prom = np.ones(len(t_index)) if prom is None else np.asarray(prom, float)
    return ridge.RidgeSet("x", t_index, bins, np.zeros(len(bins)), prom, 0.05, n_peaks=len(bins))


def test_remap_constant_speed():
    v = 12.0
    t = np.arange(64, dtype=float)
    track = BridgeTrack(r=v * t, t_gps=t, valid_mask=np.ones(64, bool))
    sp = mpmf.remap_to_space(_ridges([0, 5, 10, 50], [3, 3, 3, 3]), track, t, _grid(), 1000.0)
    assert np.allclose(sp.r, [0.0, 60.0, 120.0, 600.0])
    assert np.array_equal(sp.top_bin, np.full(4, _grid().n_a - 1 - 3))


def test_remap_drops_off_span():
    t = np.arange(64, dtype=float)
    track = BridgeTrack(r=-500 + 10 * t, t_gps=t, valid_mask=np.ones(64, bool))
    sp = mpmf.remap_to_space(_ridges([0, 10], [1, 2]), track, t, _grid(), 1000.0)
    assert len(sp) == 0 and sp.flagged


def test_remap_simulated_tone_covers_span():
    cfg = presets.ggb_sim(seed=2)
    # the approach must outlast the cone of influence so that the edge columns are on the span
    cfg = replace(cfg, modal=simulator.modal_model([0.132], ["V-S"], presets.GGB_L, amplitudes=[0.01]),
                  snr_db=30.0, approach=400.0)
    frame, an = presets.ggb_frame(), presets.ggb_analysis()
    trip, truth = simulator.simulate_trip(cfg, 0)
    track = geo.clean_track(geo.to_bridge_coords(trip.gps, frame), frame)
    trace = preprocess.preprocess_trip(trip, an.filter)
    tfr = sswt.sswt(trace.x, 1.0 / trace.fs, n_v=an.n_v, w0=an.w0)
    rows, cols, vals = ridge.tfr_peaks(np.abs(tfr.T), tfr.valid)
    # strongest peak of every column; the quantile cut would drop the weak ends near the towers
    best = {}
    for i, c, v in zip(rows, cols, vals):
        if c not in best or v > best[c][1]:
            best[c] = (i, v)
    cs = np.array(sorted(best))
    rs = ridge.RidgeSet("x", cs, np.array([best[c][0] for c in cs]), tfr.grid.f[[best[c][0] for c in cs]],
                        np.array([best[c][1] for c in cs]), 0.5, n_peaks=len(cs))
    sp = mpmf.remap_to_space(rs, track, trace.t, tfr.grid, frame.length_L)
    r = np.sort(sp.r)
    v, fs_out = truth["speed"], 2 * an.f_cut
    assert r[0] < 2 * v / fs_out and r[-1] > frame.length_L - 2 * v / fs_out
    assert np.max(np.diff(r)) < 2 * v / fs_out


# -- aggregation ------------------------------------------------------------

def _spatial(trip_id, r, bins, prom, t_index=None, f_top=0.5, n_v=32):
    n = len(r)
    t_index = np.arange(n) if t_index is None else t_index
    return SpatialRidges(trip_id, np.asarray(t_index, np.int64), np.asarray(bins, np.int64),
                         np.asarray(r, float), np.asarray(prom, float), f_top, n_v)


def test_point_counted_in_every_overlapping_segment():
    seg = build_segments(100.0, 10.0, 30.0)
    agg = aggregate([_spatial("a", [47.0], [0], [2.0])], seg)
    k = int(seg.members(np.array([47.0])).sum())
    assert k == 3
    assert np.count_nonzero(agg.P) == k and agg.P.sum() == 2.0 * k


def test_two_identical_trips_double():
    seg = build_segments(100.0, 10.0, 30.0)
    rng = np.random.default_rng(0)
    r, b, p = rng.uniform(0, 100, 50), rng.integers(0, 20, 50), rng.exponential(1, 50)
    one = aggregate([_spatial("a", r, b, p)], seg, n_bins=20)
    two = aggregate([_spatial("a", r, b, p), _spatial("b", r, b, p)], seg, n_bins=20)
    assert np.array_equal(two.P, 2 * one.P)


def test_aggregate_requires_points():
    with pytest.raises(MpmfError):
        aggregate([_spatial("a", [], [], [])], build_segments(10.0, 1.0, 2.0))


def test_aggregate_rejects_mixed_grids():
    seg = build_segments(10.0, 1.0, 2.0)
    with pytest.raises(MpmfError):
        aggregate([_spatial("a", [1.0], [0], [1.0]), _spatial("b", [1.0], [0], [1.0], f_top=12.5)], seg)


def _trip_sets(draw_seed, n_trips, dyadic=True):
    rng = np.random.default_rng(draw_seed)
    out = []
    for i in range(n_trips):
        n = int(rng.integers(1, 40))
        p = rng.integers(1, 64, n) / 8.0 if dyadic else rng.exponential(1.0, n)
        out.append(_spatial(f"trip{i:03d}", rng.uniform(-5, 105, n), rng.integers(0, 30, n), p))
    return out


@given(st.integers(0, 2**31 - 1), st.integers(2, 12), st.data())
def test_additivity_disjoint_union(seed, n, data):
    trips = _trip_sets(seed, n)
    cut = data.draw(st.integers(1, n - 1))
    idx = data.draw(st.permutations(range(n)))
    A = [trips[i] for i in idx[:cut]]
    B = [trips[i] for i in idx[cut:]]
    seg = build_segments(100.0, 5.0, 15.0)
    whole = aggregate(trips, seg, n_bins=30).P
    parts = aggregate(A, seg, n_bins=30).P + aggregate(B, seg, n_bins=30).P
    assert np.array_equal(whole, parts)


def test_additivity_general_prominences():
    trips = _trip_sets(5, 10, dyadic=False)
    seg = build_segments(100.0, 5.0, 15.0)
    whole = aggregate(trips, seg, n_bins=30).P
    parts = aggregate(trips[::2], seg, n_bins=30).P + aggregate(trips[1::2], seg, n_bins=30).P
    assert np.allclose(whole, parts, rtol=1e-12, atol=0)


def _analysis(spatial, seg, N_R=5, f_range=(0, 0.5)):
    agg = aggregate(spatial, seg)
    c = mpmf.top_candidates(agg, N_R)
    pdf = kde_pdf(c.f_hat_s, f_range)
    return agg, c, pdf, pick_mpmfs(pdf)


@given(st.integers(0, 2**31 - 1), st.randoms())
def test_permutation_invariance(seed, rnd):
    trips = _trip_sets(seed, 8, dyadic=False)
    shuffled = list(trips)
    rnd.shuffle(shuffled)
    seg = build_segments(100.0, 5.0, 15.0)
    a, ca, pa, ra = _analysis(trips, seg)
    b, cb, pb, rb = _analysis(shuffled, seg)
    assert np.array_equal(a.P, b.P)
    assert sorted(ca.f_hat_s) == sorted(cb.f_hat_s)
    assert np.array_equal(pa.density, pb.density)
    assert ra.mpmfs == rb.mpmfs


@given(st.integers(0, 2**31 - 1), st.integers(-30, 30))
def test_scale_invariance_powers_of_two(seed, e):
    trips = _trip_sets(seed, 6, dyadic=False)
    k = 2.0 ** e
    seg = build_segments(100.0, 5.0, 15.0)
    _, ca, pa, ra = _analysis(trips, seg)
    _, cb, pb, rb = _analysis([t.scaled(k) for t in trips], seg)
    assert [list(i) for i, _, _ in ca.per_segment] == [list(i) for i, _, _ in cb.per_segment]
    assert np.array_equal(pa.density, pb.density) and ra.mpmfs == rb.mpmfs


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100))
def test_scale_invariance_general_factor(seed, k):
    # continuous prominences: exact ties, which rounding could reorder, do not occur
    trips = _trip_sets(seed, 6, dyadic=False)
    seg = build_segments(100.0, 5.0, 15.0)
    _, ca, pa, ra = _analysis(trips, seg)
    _, cb, pb, rb = _analysis([t.scaled(k) for t in trips], seg)
    assert [list(i) for i, _, _ in ca.per_segment] == [list(i) for i, _, _ in cb.per_segment]
    assert ra.mpmfs == rb.mpmfs


@given(st.integers(0, 2**31 - 1), st.floats(5, 50), st.floats(0, 40))
def test_overlap_monotonicity(seed, c1, extra):
    trips = _trip_sets(seed, 4)
    a = aggregate(trips, build_segments(100.0, 5.0, c1)).n_points
    b = aggregate(trips, build_segments(100.0, 5.0, min(c1 + extra, 100.0))).n_points
    assert np.all(b >= a)


# -- candidates -------------------------------------------------------------

def test_single_tone_top1():
    seg = build_segments(100.0, 10.0, 20.0)
    rng = np.random.default_rng(3)
    r = rng.uniform(0, 100, 400)
    bins = np.where(rng.random(400) < 0.8, 7, rng.integers(0, 30, 400))
    agg = aggregate([_spatial("a", r, bins, np.ones(400))], seg, n_bins=30)
    c = mpmf.top_candidates(agg, 1)
    tone_row = 29 - 7
    assert all(list(ix) == [tone_row] for ix, _, _ in c.per_segment)


def test_candidate_count_bound():
    trips = _trip_sets(1, 20)
    seg = build_segments(1280.0, 1280 / 129, 256.0)
    trips = [replace(t, r=t.r * 12.8) for t in trips]
    c = mpmf.top_candidates(aggregate(trips, seg), 5)
    assert len(c.f_hat_s) <= 645 and seg.M == 129


def test_ties_break_to_lower_frequency():
    seg = build_segments(10.0, 10.0, 10.0)
    agg = aggregate([_spatial("a", [5.0, 5.0, 5.0], [2, 6, 4], [1.0, 1.0, 1.0])], seg, n_bins=8)
    c = mpmf.top_candidates(agg, 2)
    rows = list(c.per_segment[0][0])
    assert rows == [7 - 6, 7 - 4]
    assert c.per_segment[0][1][0] < c.per_segment[0][1][1]


def test_sparse_segment_contributes_fewer():
    seg = build_segments(20.0, 10.0, 10.0)
    agg = aggregate([_spatial("a", [2.0, 3.0, 15.0], [1, 2, 3], [1.0, 2.0, 3.0])], seg, n_bins=5)
    c = mpmf.top_candidates(agg, 5)
    assert [len(f) for _, f, _ in c.per_segment] == [2, 1]
    assert len(c.f_hat_s) == 3 and np.all(c.f_hat_s > 0)


def test_candidates_are_grid_frequencies():
    trips = _trip_sets(2, 5)
    agg = aggregate(trips, build_segments(100.0, 5.0, 15.0))
    c = mpmf.top_candidates(agg, 5)
    assert np.all(np.isin(c.f_hat_s, agg.f)) and np.all((c.f_hat_s > 0) & (c.f_hat_s <= 0.5))


# -- simulator oracles --------------------------------------------------------

def _two_mode_cfg(snr):
    modal = simulator.modal_model(LONG, ["V-A", "V-S"], presets.GGB_L,
                                  amplitudes=[w * presets.ACCEL_UNIT for w in presets.GGB_WEIGHTS[:2]])
    return replace(presets.ggb_sim(seed=0, snr_db=snr), modal=modal)


@pytest.fixture(scope="module")
def long_span_result():
    made = simulator.simulate_corpus(_two_mode_cfg(12.0), 100)
    res, _ = pipeline.analyze([m[0] for m in made], presets.ggb_frame(), presets.ggb_analysis())
    f = res.agg.f
    true_rows = np.array([int(np.argmin(np.abs(np.log2(f / x)))) for x in LONG])
    return res, true_rows


def test_segment_argmax_at_true_mode(long_span_result):
    res, rows = long_span_result
    # known failure: the moving sensor spreads each mode over neighbouring bins
    am = res.agg.P.argmax(axis=0)
    assert np.mean(np.isin(am, rows)) >= 0.9


def test_both_modes_in_candidate_lists(long_span_result):
    res, rows = long_span_result
    # known failure, same cause as above
    hit = [set(rows[:2]) <= set(ix.tolist()) for ix, _, _ in res.candidates.per_segment]
    assert np.mean(hit) >= 0.95


@pytest.mark.parametrize("snr", [6.0, 12.0])
def test_end_to_end_two_mode_recovery(snr):
    made = simulator.simulate_corpus(_two_mode_cfg(snr), 100)
    res, _ = pipeline.analyze([m[0] for m in made], presets.ggb_frame(), presets.ggb_analysis())
    err = pipeline.mode_errors(res.report, LONG)
    assert np.all(err <= 0.05), err


# -- density and peaks ------------------------------------------------------

def test_bandwidth_rule():
    assert mpmf.bandwidth_rule((0.0, 0.5)) == pytest.approx(0.005)


def test_kde_single_value():
    pdf = kde_pdf(np.full(50, 0.2), (0, 0.5))
    i = int(np.argmax(pdf.density))
    assert abs(pdf.f[i] - 0.2) <= pdf.f[1] - pdf.f[0]
    d, half = pdf.density, pdf.density.max() / 2
    up = np.flatnonzero(d >= half)
    lo, hi = up[0], up[-1]
    # interpolate the half-maximum crossings between grid points
    left = np.interp(half, [d[lo - 1], d[lo]], [pdf.f[lo - 1], pdf.f[lo]])
    right = np.interp(half, [d[hi + 1], d[hi]], [pdf.f[hi + 1], pdf.f[hi]])
    fwhm = right - left
    assert fwhm == pytest.approx(2 * math.sqrt(2 * math.log(2)) * 0.005, rel=0.02)
    assert len(mpmf.strict_maxima(pdf.density)) == 1


def test_kde_normalized():
    rng = np.random.default_rng(4)
    pdf = kde_pdf(rng.uniform(0.05, 0.45, 300), (0, 0.5))
    assert np.trapezoid(pdf.density, pdf.f) == pytest.approx(1.0, abs=1e-3)
    assert len(pdf.f) == 2000


def test_kde_empty():
    with pytest.raises(MpmfError):
        kde_pdf([], (0, 0.5))


def test_kde_two_clusters():
    h = 0.005
    rng = np.random.default_rng(5)
    a = 0.15 + 1e-5 * rng.standard_normal(100)
    b = 0.15 + 10 * h + 1e-5 * rng.standard_normal(100)
    rep = pick_mpmfs(kde_pdf(np.concatenate([a, b]), (0, 0.5), h))
    f = sorted(p[0] for p in rep.peaks)
    assert len(f) == 2
    assert abs(f[0] - a.mean()) <= h / 10 and abs(f[1] - b.mean()) <= h / 10


def test_unimodal_one_mpmf():
    rng = np.random.default_rng(6)
    pdf = kde_pdf(rng.normal(0.25, 0.02, 2000), (0, 0.5))
    rep = pick_mpmfs(pdf)
    assert len(rep.mpmfs) == 1
    assert rep.mpmfs[0][0] == pytest.approx(0.25, abs=0.005)
    assert rep.mpmfs[0][2] == 1.0


def test_five_prominent_clusters_selected():
    rng = np.random.default_rng(7)
    strong = np.concatenate([c + 0.001 * rng.standard_normal(60) for c in (0.11, 0.17, 0.23, 0.30, 0.37)])
    weak = np.concatenate([c + 0.001 * rng.standard_normal(6) for c in (0.05, 0.42, 0.46)])
    rep = pick_mpmfs(kde_pdf(np.concatenate([strong, weak]), (0, 0.5)), 0.1)
    assert len(rep.mpmfs) == 5
    assert np.allclose(sorted(p[0] for p in rep.mpmfs), [0.11, 0.17, 0.23, 0.30, 0.37], atol=0.002)


def test_no_maxima_flagged():
    pdf = mpmf.Pdf(np.linspace(0, 1, 10), np.linspace(1, 0, 10), 0.1)
    rep = pick_mpmfs(pdf)
    assert rep.peaks == [] and rep.flagged


def test_threshold_bounds():
    pdf = kde_pdf([0.2], (0, 0.5))
    for t in (0.0, 1.0):
        with pytest.raises(MpmfError):
            pick_mpmfs(pdf, t)


def test_report_invariants_and_dict():
    rng = np.random.default_rng(8)
    rep = pick_mpmfs(kde_pdf(rng.uniform(0, 0.5, 200), (0, 0.5)), 0.2)
    d = rep.pdf.density
    for f, dens, sig in rep.peaks:
        i = int(np.flatnonzero(rep.pdf.f == f)[0])
        assert d[i] > d[i - 1] and d[i] > d[i + 1] and 0 <= sig <= 1
    assert all(p in rep.peaks and p[2] >= 0.8 - 1e-12 for p in rep.mpmfs)
    doc = rep.to_dict()
    assert set(doc) == {"bandwidth", "threshold", "flagged", "peaks", "mpmfs"}


def test_relative_error_nearest():
    assert mpmf.relative_error(0.13, LONG) == pytest.approx(0.002 / 0.132)


def test_writers(tmp_path):
    trips = _trip_sets(9, 3)
    agg = aggregate(trips, build_segments(100.0, 5.0, 15.0))
    c = mpmf.top_candidates(agg, 2)
    mpmf.write_candidates_csv(c, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "segment,rank,f,P" and len(lines) == len(c.f_hat_s) + 1
    mpmf.write_pdf_csv(kde_pdf(c.f_hat_s, (0, 0.5)), tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().count("\n") == 2001
