"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, config, mpmf, pipeline, reliability, simulator, trips
from . import geo, preprocess, sswt

log = logging.getLogger("crowdmodal")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _KVFormatter(logging.Formatter):
    def format(self, record):
        return f"level={record.levelname.lower()} logger={record.name} msg={json.dumps(record.getMessage())}"


def _setup_logging(verbose):
    h = logging.StreamHandler(sys.stderr)
    h.setFormatter(_KVFormatter())
    root = logging.getLogger("crowdmodal")
    root.handlers[:] = [h]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out, command, args, inputs, extra=None):
    started = getattr(args, "_started", None) or _dt.datetime.now(_dt.timezone.utc)
    man = {
        "command": command,
        "config": str(args.config) if args.config else None,
        "config_hash": config.file_hash(args.config),
        "seed": args.seed,
        "workers": args.workers,
        "inputs": [{"path": str(p), "sha256": _sha(p)} for p in inputs],
        "tool_version": __version__,
        "started": started.isoformat(timespec="seconds"),
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        man.update(extra)
    _dump_json(man, Path(out) / "manifest.json")


def _out_dir(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_trips(directory):
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"trips directory not found: {d}")
    loaded, diags = trips.load_corpus(d)
    for path, msg in diags:
        log.warning("skipping %s: %s", path, msg)
    if not loaded:
        raise UsageError(f"no trips in {d}")
    files = []
    for p in trips.trip_files(d):
        files += [p] + [s for s in [trips.sidecar_path(p)] if s.is_file()]
    return loaded, files


def _analysis_cfg(args):
    cp = config.read(args.config)
    frame, cfg = config.analysis_config(cp)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return frame, cfg


# -- commands ---------------------------------------------------------------

def cmd_analyze(args):
    frame, cfg = _analysis_cfg(args)
    loaded, files = _load_trips(args.trips)
    out = _out_dir(args, "analysis_out")
    res, stages = pipeline.analyze(loaded, frame, cfg, workers=args.workers)
    mpmf.write_candidates_csv(res.candidates, out / "candidates.csv")
    mpmf.write_pdf_csv(res.report.pdf, out / "pdf.csv")
    doc = res.report.to_dict()
    doc["trips_used"] = res.used
    doc["trips_excluded"] = {s.trip_id: s.error for s in stages if not s.ok}
    _dump_json(doc, out / "mpmf.json")
    write_manifest(out, "analyze", args, files, {"bridge": frame.name, "n_trips": len(loaded)})
    log.info("MPMFs: %s", ", ".join(f"{f:.4f}" for f, _, _ in res.report.mpmfs) or "none")
    return EXIT_OK


def _write_corpus(cfg, n, directory, workers):
    directory.mkdir(parents=True, exist_ok=True)
    made = simulator.simulate_corpus(cfg, n, workers=workers)
    for trip, truth in made:
        trips.save_trip(trip, directory)
    _dump_json(simulator.corpus_truth(cfg, made), directory / "truth.json")
    return made


def cmd_simulate(args):
    cp = config.read(args.config)
    cfg, n, sweep = config.sim_config(cp, seed=args.seed)
    if args.n is not None:
        n = args.n
    if args.snr_sweep:
        sweep = config.floats(args.snr_sweep)
    out = _out_dir(args, "corpus")
    if sweep:
        for snr in sweep:
            sub = out / f"snr_{snr:g}"
            _write_corpus(cfg.with_snr(snr), n, sub, args.workers)
            log.info("wrote %d trips to %s", n, sub)
    else:
        _write_corpus(cfg, n, out, args.workers)
        log.info("wrote %d trips to %s", n, out)
    inputs = [args.config] if args.config else []
    write_manifest(out, "simulate", args, inputs, {"n_trips": n, "snr_sweep": list(sweep)})
    return EXIT_OK


def _sizes(text, n):
    if text:
        try:
            return [int(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --sizes {text!r}") from None
    base = [1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90]
    return [s for s in base if s <= n]


def cmd_robustness(args):
    truth_path = Path(args.truth) if args.truth else Path(args.trips) / "truth.json"
    if not truth_path.is_file():
        raise UsageError(f"truth file not found: {truth_path}")
    try:
        truth_doc = json.loads(truth_path.read_text(encoding="utf-8"))
        truth = [float(m["freq"]) for m in truth_doc["modes"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed truth file {truth_path}: {exc}") from None
    frame, cfg = _analysis_cfg(args)
    loaded, files = _load_trips(args.trips)
    stages = pipeline.process_trips(loaded, frame, cfg, workers=args.workers)
    sizes = _sizes(args.sizes, len(stages))
    if not sizes or max(sizes) > len(stages) or min(sizes) < 1:
        raise UsageError(f"subset sizes must lie in [1, {len(stages)}]")
    modes = truth[: args.modes] if args.modes else []
    seed = cfg.seed if args.seed is None else args.seed
    rows = pipeline.subset_error_curve(stages, frame, cfg, truth, sizes, args.repeats, seed=seed, modes=modes)
    out = _out_dir(args, "robustness_out")
    pipeline.write_robustness_csv(rows, out / "robustness.csv", modes)
    means = [r.mean_error for r in rows]
    trend = bool(means[-1] <= means[0]) if len(means) > 1 else True
    write_manifest(out, "robustness", args, files + [truth_path],
                   {"sizes": sizes, "repeats": args.repeats, "decreasing_trend": trend})
    log.info("error at N_S=%d: %.4f; at N_S=%d: %.4f", rows[0].N_S, means[0], rows[-1].N_S, means[-1])
    return EXIT_OK


def cmd_reliability(args):
    cp = config.read(args.config)
    archs, pol, n, seed, horizon, dt = config.reliability_config(cp)
    if args.seed is not None:
        seed = args.seed
    if args.n is not None:
        n = args.n
    out = _out_dir(args, "reliability_out")
    lives = {}
    table = {}
    for arch in archs:
        res = reliability.compare_policies(arch, n, seed=seed, horizon=horizon, dt=dt, base=pol)
        k = arch.kind.value
        lives[k] = {p: {"expected_life": r.expected_life, "mean_life": r.mean_life, "extent": r.extent}
                    for p, r in res.items()}
        lives[k]["gain_crowdsourced"] = res["crowdsourced"].expected_life - res["no_pi"].expected_life
        lives[k]["gain_traditional"] = res["traditional"].expected_life - res["no_pi"].expected_life
        for p, r in res.items():
            table[f"{k}_{p}"] = r
    reliability.write_profiles_csv(table, out / "profiles.csv")
    _dump_json({"n": n, "seed": seed, "horizon": horizon, "archetypes": lives}, out / "lives.json")
    inputs = [args.config] if args.config else []
    write_manifest(out, "reliability", args, inputs)
    for k, v in lives.items():
        log.info("%s: crowdsourced gain %.2f years", k, v["gain_crowdsourced"])
    return EXIT_OK


def cmd_inspect(args):
    path = Path(args.trip)
    if not path.is_file():
        raise UsageError(f"trip file not found: {path}")
    try:
        trip = trips.load_trip(path)
    except (trips.TripFormatError, trips.TripValidationError) as exc:
        raise UsageError(str(exc)) from None
    s = trips.summarize(trip, path)
    info = {
        "trip_id": s.trip_id, "n_samples": s.n_samples, "duration_s": round(s.duration, 6),
        "mean_rate_hz": round(s.mean_rate, 6), "n_gps": s.n_gps,
        "controllability": s.controllability, "has_rotation": s.has_rotation,
        "speed": trip.speed, "orientation_source": trip.meta.orientation_source.value,
    }
    if args.config or args.bridge:
        frame, cfg = _analysis_cfg(args)
        try:
            track = geo.clean_track(geo.to_bridge_coords(trip.gps, frame), frame)
            info["track_fixes"] = int(len(track))
            info["track_r_range"] = [round(float(track.r.min()), 3), round(float(track.r.max()), 3)]
            info["monotone"] = track.monotone
        except geo.GeoError as exc:
            info["track_error"] = str(exc)
        try:
            tr = preprocess.preprocess_trip(trip, cfg.filter)
            tfr = sswt.sswt(tr.x, 1.0 / tr.fs, n_v=cfg.n_v, w0=cfg.w0, gamma_rel=cfg.gamma_rel)
            info["tfr_bins"] = tfr.grid.n_a
            info["tfr_columns"] = tfr.grid.K
            A = np.abs(tfr.T) * tfr.valid
            info["dominant_hz"] = round(float(tfr.grid.f[int(np.argmax(A.sum(axis=1)))]), 6)
            if args.out:
                out = _out_dir(args, ".")
                sswt.write_abs_csv(tfr, out / f"{trip.trip_id}_tfr.csv")
        except (preprocess.PreprocessError, sswt.SswtError) as exc:
            info["preprocess_error"] = str(exc)
    json.dump(info, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _globals(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="INI configuration file")
    p.add_argument("--seed", type=int, default=d, help="override the configured seed")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes (results do not depend on it)")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    p = argparse.ArgumentParser(prog="crowdmodal", description="Bridge modal frequencies from crowdsourced trips.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    a = sub.add_parser("analyze", help="extract MPMFs from a trip directory")
    a.add_argument("trips", help="directory of trip CSV/JSON pairs")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="generate a simulated corpus")
    s.add_argument("--n", type=int, help="number of trips (overrides the config)")
    s.add_argument("--snr-sweep", help="comma-separated SNRs in dB; one subdirectory each")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("robustness", help="error versus number of trips")
    r.add_argument("trips")
    r.add_argument("--truth", help="truth.json (default: <trips>/truth.json)")
    r.add_argument("--sizes", help="comma-separated subset sizes")
    r.add_argument("--repeats", type=int, default=100)
    r.add_argument("--modes", type=int, default=2, help="report per-mode errors for the first k truth modes")
    r.set_defaults(func=cmd_robustness)

    rl = sub.add_parser("reliability", help="service-life Monte Carlo")
    rl.add_argument("--n", type=int, help="realizations (overrides the config)")
    rl.set_defaults(func=cmd_reliability)

    i = sub.add_parser("inspect", help="summarize one trip file")
    i.add_argument("trip")
    i.add_argument("--bridge", action="store_true", help="also project onto the configured bridge")
    i.set_defaults(func=cmd_inspect)

    for sp in (a, s, r, rl, i):
        _globals(sp, suppress=True)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    args._started = _dt.datetime.now(_dt.timezone.utc)
    if args.workers < 1:
        log.error("--workers must be >= 1")
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, config.ConfigError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (mpmf.MpmfError, simulator.SimulationError, reliability.ReliabilityError,
            preprocess.PreprocessError, geo.GeoError, sswt.SswtError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
