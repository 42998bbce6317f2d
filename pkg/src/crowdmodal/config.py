"""INI configuration files for analysis, simulation and reliability runs.

Each file may name a built-in ``preset`` (``ggb`` or ``short``); keys given
in the file override the preset.  Lengths for ``delta_s`` and ``c`` accept
plain meters or fractions of the span such as ``L/129`` or ``3L/20``.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import replace
from pathlib import Path

from . import presets
from .geo import BridgeFrame, GeoError
from .pipeline import AnalysisConfig
from .reliability import ArchetypeConfig, PolicyConfig, ReliabilityError
from .simulator import RoadProfile, SimConfig, SimulationError, VehicleDistribution, modal_model


class ConfigError(ValueError):
    pass


def read(path):
    """Parse an INI file; a missing or malformed file raises ConfigError."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is None:
        return cp
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cp.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return cp


def file_hash(path):
    if path is None:
        return hashlib.sha256(b"").hexdigest()
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


_LEN = re.compile(r"^\s*(?:(\d*\.?\d+)\s*\*?\s*)?L\s*(?:/\s*(\d*\.?\d+))?\s*$")


def parse_length(text, L):
    """'12.5', 'L/129', '3L/20', '0.2*L' -> meters."""
    s = str(text).strip()
    try:
        return float(s)
    except ValueError:
        pass
    m = _LEN.match(s)
    if not m:
        raise ConfigError(f"cannot parse length {text!r}")
    num = float(m.group(1)) if m.group(1) else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * L / den


def floats(text):
    try:
        return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        if conv is bool:
            return cp.getboolean(section, key)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: invalid value {raw!r}") from None


def _preset(cp, section="bridge"):
    name = _get(cp, section, "preset", str, "ggb").strip().lower()
    if name not in presets.PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose one of {sorted(presets.PRESETS)}")
    return name


def bridge_frame(cp):
    name = _preset(cp)
    frame = presets.PRESETS[name][0]()
    if not cp.has_section("bridge"):
        return frame
    try:
        a = _get(cp, "bridge", "point_a", floats)
        b = _get(cp, "bridge", "point_b", floats)
        L = _get(cp, "bridge", "length", float)
        margin = _get(cp, "bridge", "margin", float, frame.margin)
        if a or b or L:
            if not (a and b and L):
                raise ConfigError("[bridge] needs point_a, point_b and length together")
            return BridgeFrame(tuple(a), tuple(b), L, margin=margin, name=_get(cp, "bridge", "name", str, "custom"))
        if margin != frame.margin:
            return BridgeFrame(frame.point_a, frame.point_b, frame.length_L, margin=margin, name=frame.name)
    except GeoError as exc:
        raise ConfigError(f"[bridge] {exc}") from None
    return frame


_ANALYSIS_KEYS = {
    "f_cut": float, "resample_fs": float, "filter_order": int, "n_v": int, "w0": float,
    "gamma_rel": float, "alpha": float, "N_R": int, "bandwidth_pct": float,
    "cdf_threshold": float, "n_grid": int, "seed": int,
}


def analysis_config(cp, frame=None):
    """(BridgeFrame, AnalysisConfig) from the [bridge] and [analysis] sections."""
    frame = frame or bridge_frame(cp)
    base = presets.PRESETS[_preset(cp)][2]()
    kw = {}
    if cp.has_section("analysis"):
        for key, conv in _ANALYSIS_KEYS.items():
            v = _get(cp, "analysis", key.lower(), conv)
            if v is not None:
                kw[key] = v
        for key in ("delta_s", "c"):
            v = _get(cp, "analysis", key)
            if v is not None:
                kw[key] = parse_length(v, frame.length_L)
        unknown = set(cp.options("analysis")) - {k.lower() for k in _ANALYSIS_KEYS} - {"delta_s", "c"}
        if unknown:
            raise ConfigError(f"[analysis] unknown keys: {sorted(unknown)}")
    try:
        cfg = replace(base, **kw)
        cfg.segmentation(frame.length_L)
    except ValueError as exc:
        raise ConfigError(f"[analysis] {exc}") from None
    return frame, cfg


def sim_config(cp, seed=None):
    """(SimConfig, n_trips, snr_sweep) from [bridge], [modes], [vehicle] and [simulation]."""
    name = _preset(cp)
    frame = bridge_frame(cp)
    base = presets.PRESETS[name][1]()
    try:
        modal = base.modal
        if cp.has_section("modes"):
            freqs = _get(cp, "modes", "freqs", floats)
            if freqs:
                tags = [t.strip() for t in _get(cp, "modes", "tags", str, "").split(",") if t.strip()]
                tags = tags or ["V-S"] * len(freqs)
                w = _get(cp, "modes", "weights", floats) or (1.0,) * len(freqs)
                if not (len(tags) == len(w) == len(freqs)):
                    raise ConfigError("[modes] freqs, tags and weights must have equal length")
                zeta = _get(cp, "modes", "zeta", floats) or (0.01,)
                zeta = zeta[0] if len(zeta) == 1 else list(zeta)
                modal = modal_model(freqs, tags, frame.length_L, zeta=zeta,
                                    amplitudes=[x * presets.ACCEL_UNIT for x in w],
                                    delta=_get(cp, "modes", "delta", float, modal.delta))
            elif _get(cp, "modes", "zeta", floats):
                z = _get(cp, "modes", "zeta", floats)[0]
                modal = modal_model([m.freq for m in modal.modes], [m.tag for m in modal.modes], frame.length_L,
                                    zeta=z, amplitudes=[m.amplitude for m in modal.modes], delta=modal.delta)
        modal = replace(modal, L=frame.length_L) if modal.L != frame.length_L else modal
        veh = base.vehicles
        if cp.has_section("vehicle"):
            veh = VehicleDistribution(**{k: _get(cp, "vehicle", k, float, getattr(veh, k))
                                         for k in ("ms", "mu", "ks", "cs", "kt", "log_sigma")})
        kw = {}
        if cp.has_section("simulation"):
            s = "simulation"
            for key, conv in (("approach", float), ("intensity", float), ("snr_db", float), ("fs", float),
                              ("jitter", float), ("gps_fs", float), ("gps_sigma", float),
                              ("bridge_fs", float), ("seed", int)):
                v = _get(cp, s, key, conv)
                if v is not None:
                    kw[key] = v
            if cp.has_option(s, "snr_band"):
                raw = cp.get(s, "snr_band").strip().lower()
                kw["snr_band"] = None if raw in ("", "none", "full") else float(raw)
            sp = _get(cp, s, "speeds_kph", floats)
            if sp:
                kw["speeds_kph"] = sp
            road = _get(cp, s, "road_profile")
            if road:
                kw["road"] = RoadProfile.from_csv(road)
            rng_flag = _get(cp, s, "speed_range", bool)
            if rng_flag is not None:
                kw["speed_range"] = rng_flag
        if seed is not None:
            kw["seed"] = int(seed)
        cfg = replace(base, modal=modal, frame=frame, vehicles=veh, **kw)
    except (SimulationError, GeoError, TypeError) as exc:
        raise ConfigError(f"simulation config: {exc}") from None
    n = _get(cp, "simulation", "n_trips", int, 102 if name == "ggb" else 280) if cp.has_section("simulation") else (102 if name == "ggb" else 280)
    sweep = _get(cp, "simulation", "snr_sweep", floats) if cp.has_section("simulation") else None
    if n < 0:
        raise ConfigError("n_trips must be non-negative")
    return cfg, n, sweep or ()


def reliability_config(cp):
    """(archetype kinds, dict of ArchetypeConfig overrides, PolicyConfig, n, seed, horizon, dt)."""
    s = "reliability"
    try:
        kinds = _get(cp, s, "archetype", str, "new,typical_43yr")
        kinds = [k.strip() for k in kinds.split(",") if k.strip()]
        over = {}
        if cp.has_section("distributions"):
            for key in ("rate", "improvement", "beta0"):
                v = _get(cp, "distributions", key, floats)
                if v is not None:
                    if len(v) != 2:
                        raise ConfigError(f"[distributions] {key} needs two bounds")
                    over[key] = v
        archs = [ArchetypeConfig.preset(k, **dict(over)) for k in kinds]
        p = "policy"
        pol = PolicyConfig(
            pi_interval=_get(cp, p, "pi_interval", float, 15.0),
            apr=_get(cp, p, "apr", float, 0.06),
            service_limit=_get(cp, p, "service_limit", float, 4.6),
            extent=_get(cp, p, "extent", float, None),
        )
        n = _get(cp, s, "n", int, 10000)
        seed = _get(cp, s, "seed", int, 0)
        horizon = _get(cp, s, "horizon", float, 120.0)
        dt = _get(cp, s, "dt", float, 0.1)
    except (ReliabilityError, ValueError) as exc:
        raise ConfigError(f"reliability config: {exc}") from None
    if n < 1 or horizon <= 0 or dt <= 0:
        raise ConfigError("reliability config: n, horizon and dt must be positive")
    return archs, pol, n, seed, horizon, dt
