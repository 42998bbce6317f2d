"""Ground-truth trip corpora from a modal bridge model and a quarter-car ride.

The bridge is a sum of sinusoidal modes, each modal coordinate driven by the
projection of a white space-time load through a damped oscillator.  The
vehicle does not feed back into the bridge: its tire follows the bridge
displacement at the moving contact point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, signal
from scipy.interpolate import CubicSpline

from .geo import BridgeFrame
from .trips import Controllability, GpsTrack, OrientationSource, TripMeta, TripRecord

GRAVITY = 9.80665


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Mode:
    """One bridge mode.  ``amplitude`` is the target acceleration RMS (m/s^2) at an antinode under unit load intensity."""

    freq: float
    zeta: float = 0.01
    wavelength: float = 0.0
    phase: float = 0.0
    tag: str = ""
    amplitude: float = 0.01


@dataclass(frozen=True)
class ModalModel:
    modes: tuple
    L: float
    delta: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        f = [m.freq for m in self.modes]
        if any(b <= a for a, b in zip(f, f[1:])):
            raise SimulationError("modal frequencies must be strictly increasing")
        for m in self.modes:
            if not (0 < m.zeta < 0.2):
                raise SimulationError(f"damping ratio {m.zeta} outside (0, 0.2)")
            if m.freq <= 0 or m.wavelength <= 0:
                raise SimulationError("frequencies and wavelengths must be positive")
        if self.L <= 0 or self.delta <= 0:
            raise SimulationError("L and delta must be positive")

    @property
    def D(self):
        return len(self.modes)

    @property
    def freqs(self):
        return np.array([m.freq for m in self.modes])

    @property
    def nodes(self):
        n = int(math.floor(self.L / self.delta + 1e-9))
        return self.delta * np.arange(n + 1)

    def shapes(self, r):
        """Mode shapes (D, len(r)); zero off the span."""
        r = np.asarray(r, dtype=float)
        lam = np.array([m.wavelength for m in self.modes])[:, None]
        ph = np.array([m.phase for m in self.modes])[:, None]
        out = np.sin(2 * np.pi * r[None, :] / lam + ph)
        out[:, (r < 0) | (r > self.L)] = 0.0
        return out


def half_wave_counts(tags):
    """Half-wave number per mode from symmetry tags such as ``V-S`` or ``T-A``.

    Within each family (letter before the dash) modes take, in order, the
    smallest unused count of the right parity: odd for symmetric, even for
    antisymmetric.
    """
    used = {}
    out = []
    for tag in tags:
        fam, _, sym = tag.partition("-")
        sym = sym.upper() or "S"
        taken = used.setdefault(fam, set())
        n = 1 if sym == "S" else 2
        while n in taken:
            n += 2
        taken.add(n)
        out.append(n)
    return out


def modal_model(freqs, tags, L, zeta=0.01, amplitudes=None, delta=10.0):
    """Modes with wavelength 2L/n and zero phase, n from ``half_wave_counts``."""
    n = half_wave_counts(tags)
    amps = [0.01] * len(freqs) if amplitudes is None else list(amplitudes)
    zetas = [zeta] * len(freqs) if np.isscalar(zeta) else list(zeta)
    modes = [
        Mode(freq=float(f), zeta=float(z), wavelength=2.0 * L / k, phase=0.0, tag=t, amplitude=float(a))
        for f, z, k, t, a in zip(freqs, zetas, n, tags, amps)
    ]
    return ModalModel(modes=tuple(modes), L=float(L), delta=float(delta))


# -- bridge -----------------------------------------------------------------

def _oscillators(model, fs):
    """Exact ZOH discretization of q'' + 2 zeta W q' + W^2 q = p for every mode."""
    Ad, Bd = [], []
    for m in model.modes:
        w = 2 * np.pi * m.freq
        A = np.array([[0.0, 1.0], [-w * w, -2 * m.zeta * w]])
        B = np.array([[0.0], [1.0]])
        a, b, *_ = signal.cont2discrete((A, B, np.eye(2), np.zeros((2, 1))), 1.0 / fs, method="zoh")
        Ad.append(a)
        Bd.append(b[:, 0])
    return np.array(Ad), np.array(Bd)


def _force_variance(model):
    """Variance of each modal force under a unit-variance white load per node."""
    return (model.shapes(model.nodes) ** 2).sum(axis=1)


def stationary_covariance(model, fs, intensity=1.0):
    """Stationary state covariance (D, 2, 2) of the discrete modal oscillators."""
    Ad, Bd = _oscillators(model, fs)
    pv = _force_variance(model) * intensity**2
    return np.array([
        linalg.solve_discrete_lyapunov(a, pv[d] * np.outer(b, b)) for d, (a, b) in enumerate(zip(Ad, Bd))
    ])


def modal_scale(model, fs):
    """Factor per mode turning q into displacement so antinode acceleration RMS = amplitude at unit intensity."""
    cov = stationary_covariance(model, fs, 1.0)
    sq = np.sqrt(cov[:, 0, 0])
    w2 = (2 * np.pi * model.freqs) ** 2
    amp = np.array([m.amplitude for m in model.modes])
    return amp / (w2 * sq)


@dataclass(frozen=True)
class LoadRealization:
    """White load samples (nodes, steps) held constant over each step of the bridge grid."""

    samples: np.ndarray
    fs: float
    intensity: float = 1.0


def white_load(model, duration, fs, rng, intensity=1.0):
    n = int(math.ceil(duration * fs)) + 1
    return LoadRealization(intensity * rng.standard_normal((len(model.nodes), n)), fs, intensity)


@dataclass(frozen=True, eq=False)
class ModalResponse:
    """Modal coordinates on a uniform time grid; evaluates the displacement field anywhere."""

    model: ModalModel
    t: np.ndarray
    q: np.ndarray  # (D, n) displacement-scaled modal coordinates
    _spline: CubicSpline = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicSpline(self.t, self.q, axis=1))

    def modal(self, t, nu=0):
        return self._spline(np.asarray(t, float), nu)

    def displacement(self, r, t, nu=0):
        """u(r, t) at paired points; ``nu`` time derivatives of the modal part."""
        return (self.model.shapes(r) * self.modal(t, nu)).sum(axis=0)

    def field(self, r_grid, t=None):
        qq = self.q if t is None else self.modal(t)
        return self.model.shapes(r_grid).T @ qq


def bridge_response(model, load, x0=None):
    """Integrate every mode under ``load``; returns a ModalResponse.

    ``x0`` is an optional initial state (D, 2) of the unscaled oscillators.
    The integration is exact for the piecewise-constant load.
    """
    fs = load.fs
    fmax = model.freqs.max()
    if fs <= 4 * fmax:
        raise SimulationError(f"bridge sampling rate {fs} Hz must exceed 4x the top mode {fmax} Hz")
    Ad, Bd = _oscillators(model, fs)
    p = model.shapes(model.nodes) @ load.samples  # (D, n)
    n = p.shape[1]
    x = np.zeros((model.D, 2)) if x0 is None else np.array(x0, dtype=float)
    q = np.empty((model.D, n))
    for k in range(n):
        q[:, k] = x[:, 0]
        x = np.einsum("dij,dj->di", Ad, x) + Bd * p[:, k:k + 1]
    q *= modal_scale(model, fs)[:, None]
    return ModalResponse(model=model, t=np.arange(n) / fs, q=q)


def stationary_state(model, fs, rng, intensity=1.0):
    cov = stationary_covariance(model, fs, intensity)
    return np.array([rng.multivariate_normal(np.zeros(2), c, method="cholesky") for c in cov])


# -- vehicle ----------------------------------------------------------------

@dataclass(frozen=True)
class QuarterCar:
    ms: float
    mu: float
    ks: float
    cs: float
    kt: float

    def __post_init__(self):
        for k in ("ms", "mu", "ks", "cs", "kt"):
            v = getattr(self, k)
            if not (v > 0 and math.isfinite(v)):
                raise SimulationError(f"vehicle parameter {k} must be positive")

    def natural_frequencies(self):
        """Undamped (bounce, wheel-hop) frequencies in Hz."""
        M = np.diag([self.ms, self.mu])
        K = np.array([[self.ks, -self.ks], [-self.ks, self.ks + self.kt]])
        w2 = np.sort(linalg.eigvalsh(K, M))
        return np.sqrt(w2) / (2 * np.pi)

    @property
    def bounce_frequency(self):
        return float(self.natural_frequencies()[0])

    def state_space(self):
        ms, mu, ks, cs, kt = self.ms, self.mu, self.ks, self.cs, self.kt
        A = np.array([
            [0, 1, 0, 0],
            [-ks / ms, -cs / ms, ks / ms, cs / ms],
            [0, 0, 0, 1],
            [ks / mu, cs / mu, -(ks + kt) / mu, -cs / mu],
        ], dtype=float)
        B = np.array([[0], [0], [0], [kt / mu]], dtype=float)
        C = A[1:2, :]
        D = np.zeros((1, 1))
        return A, B, C, D


@dataclass(frozen=True)
class VehicleDistribution:
    """Log-normal parameters: medians and a common log standard deviation."""

    ms: float = 1200.0
    mu: float = 100.0
    ks: float = 100e3
    cs: float = 5e3
    kt: float = 400e3
    log_sigma: float = 0.2

    def __post_init__(self):
        if self.log_sigma < 0:
            raise SimulationError("log_sigma must be non-negative")
        QuarterCar(self.ms, self.mu, self.ks, self.cs, self.kt)


def sample_vehicle(dist, rng):
    keys = ("ms", "mu", "ks", "cs", "kt")
    z = rng.standard_normal(len(keys))
    vals = {k: getattr(dist, k) * math.exp(dist.log_sigma * zi) for k, zi in zip(keys, z)}
    return QuarterCar(**vals)


def ride_filter(car, fs):
    """(b, a) of the sprung-acceleration response to tire base displacement, first-order hold."""
    A, B, C, D = car.state_space()
    ad, bd, cd, dd, _ = signal.cont2discrete((A, B, C, D), 1.0 / fs, method="foh")
    b, a = signal.ss2tf(ad, bd, cd, dd)
    return b[0], a


@dataclass(frozen=True)
class RoadProfile:
    """Road surface height (m) at stations ``r`` (m), linear in between and zero outside."""

    r: tuple
    z: tuple

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        z = tuple(float(x) for x in self.z)
        if len(r) != len(z) or len(r) < 2 or any(b <= a for a, b in zip(r, r[1:])):
            raise SimulationError("road profile needs >= 2 stations in increasing order")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "z", z)

    def __call__(self, x):
        return np.interp(x, self.r, self.z, left=0.0, right=0.0)

    @classmethod
    def from_csv(cls, path):
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise SimulationError(f"cannot read road profile {path}: {exc}") from None
        return cls(tuple(data[:, 0]), tuple(data[:, 1]))


def vehicle_ride(response, car, v, fs, duration=None, r0=0.0, road=None):
    """Sprung-mass acceleration of a car crossing at constant speed ``v``.

    The car is at ``r0 + v t``; returns (t, accel, r) on a uniform grid at
    ``fs``.  The car starts at rest, so ``r0`` should be off the span.
    ``road`` adds a surface profile to the tire input.
    """
    if v <= 0:
        raise SimulationError("speed must be positive")
    L = response.model.L
    if duration is None:
        duration = (L - r0) / v
    if duration > response.t[-1] + 1e-9:
        raise SimulationError("trip is longer than the simulated bridge response")
    n = int(math.floor(duration * fs + 1e-9)) + 1
    t = np.arange(n) / fs
    r = r0 + v * t
    zb = response.displacement(r, t)
    if road is not None:
        zb = zb + road(r)
    b, a = ride_filter(car, fs)
    return t, signal.lfilter(b, a, zb), r


# -- sensor -----------------------------------------------------------------

def add_noise(x, snr_db, rng, band=None, fs=None):
    """Additive white Gaussian noise at ``snr_db``.

    By default the SNR refers to the full series variance.  With ``band`` and
    ``fs`` the noise is scaled so that the SNR holds inside ``[0, band]`` Hz,
    which keeps the SNR meaningful after low-pass filtering.
    """
    x = np.asarray(x, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    var = float(np.var(x))
    if not var > 0:
        raise SimulationError("signal has zero variance; SNR undefined")
    nv = var / 10 ** (snr_db / 10)
    if band is not None:
        if fs is None or not (0 < band <= fs / 2):
            raise SimulationError("band-referenced SNR needs 0 < band <= fs/2")
        nv *= (fs / 2) / band
    return x + math.sqrt(nv) * rng.standard_normal(x.shape)


@dataclass(frozen=True)
class SimConfig:
    modal: ModalModel
    frame: BridgeFrame
    vehicles: VehicleDistribution = VehicleDistribution()
    speeds_kph: tuple = (32.0, 40.0, 48.0, 56.0, 64.0)
    speed_range: bool = False  # True: uniform on [min, max] of speeds_kph
    approach: float = 64.0
    intensity: float = 1.0
    snr_db: float = 12.0
    snr_band: float | None = 0.5
    fs: float = 100.0
    jitter: float = 0.002
    gps_fs: float = 1.0
    gps_sigma: float = 4.3
    bridge_fs: float | None = None
    road: RoadProfile | None = None  # off by default: decoupled, smooth-road model
    seed: int = 0
    name: str = "sim"

    def __post_init__(self):
        if abs(self.modal.L - self.frame.length_L) > 1e-9 * self.frame.length_L:
            raise SimulationError("modal model and bridge frame disagree on L")
        if not self.speeds_kph or min(self.speeds_kph) <= 0:
            raise SimulationError("speeds must be positive")
        if self.jitter < 0 or self.jitter >= 0.5 / self.fs:
            raise SimulationError("jitter must be below half the sample period")
        if self.approach < 0 or self.gps_sigma < 0:
            raise SimulationError("approach and gps_sigma must be non-negative")

    def bridge_rate(self):
        if self.bridge_fs:
            return float(self.bridge_fs)
        return float(min(self.fs, max(20.0 * self.modal.freqs.max(), 5.0)))

    def with_snr(self, snr_db):
        return replace(self, snr_db=float(snr_db))


def trip_rng(seed, index):
    """Per-trip generator; the same (seed, index) always yields the same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _speed(cfg, rng):
    s = cfg.speeds_kph
    kph = rng.uniform(min(s), max(s)) if cfg.speed_range else s[int(rng.integers(len(s)))]
    return float(kph) / 3.6


def simulate_trip(cfg, index):
    """One trip and its truth record."""
    rng = trip_rng(cfg.seed, index)
    v = _speed(cfg, rng)
    car = sample_vehicle(cfg.vehicles, rng)
    L = cfg.modal.L
    duration = (L + 2 * cfg.approach) / v
    bfs = cfg.bridge_rate()
    x0 = stationary_state(cfg.modal, bfs, rng, cfg.intensity)
    load = white_load(cfg.modal, duration + 2.0 / bfs, bfs, rng, cfg.intensity)
    resp = bridge_response(cfg.modal, load, x0)
    tu, acc, _ = vehicle_ride(resp, car, v, cfg.fs, duration, r0=-cfg.approach, road=cfg.road)

    n = len(tu)
    ts = tu + rng.uniform(-cfg.jitter, cfg.jitter, n)
    ts[0], ts[-1] = tu[0], tu[-1]
    a_s = CubicSpline(tu, acc)(ts)
    az = add_noise(a_s, cfg.snr_db, rng, cfg.snr_band, cfg.fs) if np.var(a_s) > 0 else a_s
    nvar = float(np.var(az - a_s))
    lateral = math.sqrt(nvar) * rng.standard_normal((n, 2))
    accel = np.column_stack([lateral, GRAVITY + az])

    n_gps = int(math.floor(duration * cfg.gps_fs + 1e-9)) + 1
    tg = np.arange(n_gps) / cfg.gps_fs
    rg = -cfg.approach + v * tg + cfg.gps_sigma * rng.standard_normal(n_gps)
    off = cfg.gps_sigma * rng.standard_normal(n_gps)
    lat, lon = cfg.frame.latlon_at(rg, off)
    gps = GpsTrack(t=tg, lat=lat, lon=lon, err=np.full(n_gps, cfg.gps_sigma))

    trip_id = f"{cfg.name}{index:04d}"
    meta = TripMeta(
        phone_model="simulated", vehicle_model="quarter-car", target_speed=v,
        controllability=Controllability.CONTROLLED, orientation_source=OrientationSource.KNOWN_UPRIGHT,
    )
    trip = TripRecord(trip_id=trip_id, t=ts, accel=accel, gps=gps, speed=v, meta=meta)
    truth = {
        "speed": v,
        "vehicle": {k: getattr(car, k) for k in ("ms", "mu", "ks", "cs", "kt")},
        "bounce_hz": car.bounce_frequency,
        "snr_db": cfg.snr_db,
    }
    return trip, truth


def simulate_corpus(cfg, n_trips, workers=1):
    """``n_trips`` independent trips; identical for any worker count."""
    if n_trips < 0:
        raise SimulationError("n_trips must be non-negative")
    if workers > 1 and n_trips > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(simulate_trip, [cfg] * n_trips, range(n_trips)))
    return [simulate_trip(cfg, i) for i in range(n_trips)]


def corpus_truth(cfg, trips):
    """Corpus-level truth document."""
    return {
        "modes": [
            {"freq": m.freq, "zeta": m.zeta, "wavelength": m.wavelength, "phase": m.phase,
             "tag": m.tag, "amplitude": m.amplitude}
            for m in cfg.modal.modes
        ],
        "L": cfg.modal.L,
        "snr_db": cfg.snr_db,
        "snr_band": cfg.snr_band,
        "seed": cfg.seed,
        "trips": {trip.trip_id: truth for trip, truth in trips},
    }
