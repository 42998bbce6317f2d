"""Time the compiled and numpy kernel backends on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on both backends, outputs are checked for bit equality,
and the best wall time of ``--repeat`` runs is reported.
"""
import argparse
import time

import numpy as np

from crowdmodal import sswt
from crowdmodal._kernels import BACKENDS


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    # one long-span trip at 1 Hz: 1024 samples, 289 bins
    x = rng.standard_normal(1024) + np.cos(2 * np.pi * 0.13 * np.arange(1024))
    grid = sswt.make_grid(1024, 1.0, 32)
    W, dW = sswt.cwt_morlet(x, grid, derivative=True)
    g = sswt.default_gamma(W)
    om = sswt.phase_transform(W, dW, g)
    bins = np.full(W.shape, -1, dtype=np.int64)
    ok = np.isfinite(om)
    bins[ok] = grid.nearest_bin(om[ok])
    weight = sswt.scale_weight(grid)
    A = np.abs(sswt.synchrosqueeze(W, om, grid, g))
    # corpus aggregation: 100 trips x 600 ridge points
    n = 60000
    seg = dict(s1=1280 / 258, ds=1280 / 129, M=129, half=128.0, n_bins=289)
    pts = (rng.integers(0, 289, n).astype(np.int64), rng.uniform(0, 1280, n), rng.exponential(1.0, n))
    return {
        "squeeze_accumulate": (np.ascontiguousarray(W), bins, weight, grid.n_a),
        "column_peaks": (np.ascontiguousarray(A),),
        "segment_accumulate": pts + (seg["s1"], seg["ds"], seg["M"], seg["half"], seg["n_bins"]),
    }


def _best(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    inputs = _inputs()
    names = sorted(BACKENDS)
    print(f"backends: {', '.join(names)}")
    print(f"{'kernel':<20}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}  identical")
    for kernel, kargs in inputs.items():
        times, outs = {}, {}
        for n in names:
            times[n], outs[n] = _best(getattr(BACKENDS[n], kernel), kargs, args.repeat)
        row = f"{kernel:<20}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
            row += f"  {_same(outs['python'], outs['cython'])}"
        print(row)


if __name__ == "__main__":
    main()
