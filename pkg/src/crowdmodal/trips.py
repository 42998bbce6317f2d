"""Trip data model and on-disk format.

A trip is one bridge crossing recorded by a phone: a ``<trip>.csv`` file with
header ``t,ax,ay,az`` (optionally followed by ``qx,qy,qz``, the vector part of
the device rotation quaternion) and a ``<trip>.json`` sidecar holding the
trip id, the GPS track and metadata.  All quantities are SI; latitude and
longitude are in degrees.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

CSV_HEADER = ("t", "ax", "ay", "az")
ROTATION_HEADER = ("qx", "qy", "qz")
FLOAT_FORMAT = "%.12g"
GPS_TIME_SLACK = 2.0


class TripFormatError(ValueError):
    """Malformed trip file; ``line`` is the 1-based line number in the file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class TripValidationError(ValueError):
    """Trip content violates an invariant; ``row`` is the 1-based data row."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class Controllability(str, Enum):
    CONTROLLED = "controlled"
    PARTIALLY_CONTROLLED = "partially_controlled"
    UNCONTROLLED = "uncontrolled"


class OrientationSource(str, Enum):
    KNOWN_UPRIGHT = "known_upright"
    ROTATION_VECTOR = "rotation_vector"
    UNKNOWN = "unknown"


def _frozen(a, dtype=float, ndim=1):
    a = np.array(a, dtype=dtype, copy=True)
    if a.ndim != ndim:
        raise TripValidationError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TripMeta:
    phone_model: str | None = None
    vehicle_model: str | None = None
    target_speed: float | None = None
    controllability: Controllability = Controllability.UNCONTROLLED
    orientation_source: OrientationSource = OrientationSource.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "controllability", Controllability(self.controllability))
        object.__setattr__(
            self, "orientation_source", OrientationSource(self.orientation_source)
        )

    def to_dict(self):
        return {
            "phone_model": self.phone_model,
            "vehicle_model": self.vehicle_model,
            "target_speed": self.target_speed,
            "controllability": self.controllability.value,
            "orientation_source": self.orientation_source.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            phone_model=d.get("phone_model"),
            vehicle_model=d.get("vehicle_model"),
            target_speed=d.get("target_speed"),
            controllability=d.get("controllability", "uncontrolled"),
            orientation_source=d.get("orientation_source", "unknown"),
        )


@dataclass(frozen=True, eq=False)
class GpsTrack:
    """GPS fixes: time (s), latitude/longitude (deg), reported error (m)."""

    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    err: np.ndarray

    def __post_init__(self):
        for name in ("t", "lat", "lon", "err"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t)
        if not (len(self.lat) == len(self.lon) == len(self.err) == n):
            raise TripValidationError("GPS arrays must have equal length")

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True, eq=False)
class TripRecord:
    """One bridge crossing.

    ``accel`` has shape (n, 3).  ``rotation`` is either None or an (n, 3)
    array with the vector part of the unit device-to-world quaternion.
    """

    trip_id: str
    t: np.ndarray
    accel: np.ndarray
    gps: GpsTrack
    speed: float | None = None
    meta: TripMeta = field(default_factory=TripMeta)
    rotation: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "accel", _frozen(self.accel, ndim=2))
        if self.rotation is not None:
            object.__setattr__(self, "rotation", _frozen(self.rotation, ndim=2))
        self.validate()

    def validate(self):
        t = self.t
        if len(t) < 2:
            raise TripValidationError("trip needs at least 2 samples")
        if self.accel.shape != (len(t), 3):
            raise TripValidationError(
                f"accel shape {self.accel.shape} does not match {len(t)} samples"
            )
        if self.rotation is not None and self.rotation.shape != (len(t), 3):
            raise TripValidationError("rotation shape does not match samples")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(self.accel)):
            bad = np.flatnonzero(~np.isfinite(t) | ~np.all(np.isfinite(self.accel), axis=1))
            raise TripValidationError("non-finite sample", row=int(bad[0]) + 1)
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise TripValidationError(
                "time is not strictly increasing", row=int(np.flatnonzero(dt <= 0)[0]) + 2
            )
        gps = self.gps
        if len(gps) == 0:
            raise TripValidationError("empty GPS track")
        if np.any(gps.err < 0):
            raise TripValidationError("negative GPS error")
        if gps.t.min() < t[0] - GPS_TIME_SLACK or gps.t.max() > t[-1] + GPS_TIME_SLACK:
            raise TripValidationError("GPS times outside the acceleration record")
        if self.speed is not None and not (math.isfinite(self.speed) and self.speed >= 0):
            raise TripValidationError("speed must be finite and non-negative")

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    def sidecar(self):
        g = self.gps
        return {
            "trip_id": self.trip_id,
            "speed": self.speed,
            "meta": self.meta.to_dict(),
            "gps": [
                {"t": float(ti), "lat": float(la), "lon": float(lo), "err": float(e)}
                for ti, la, lo, e in zip(g.t, g.lat, g.lon, g.err)
            ],
        }

    def same_as(self, other, rtol=1e-9):
        """Field-wise comparison to within text precision."""
        if self.trip_id != other.trip_id or self.meta != other.meta:
            return False
        if (self.speed is None) != (other.speed is None):
            return False
        if self.speed is not None and not math.isclose(self.speed, other.speed, rel_tol=rtol):
            return False
        if (self.rotation is None) != (other.rotation is None):
            return False
        pairs = [(self.t, other.t), (self.accel, other.accel)]
        pairs += [(getattr(self.gps, k), getattr(other.gps, k)) for k in ("t", "lat", "lon", "err")]
        if self.rotation is not None:
            pairs.append((self.rotation, other.rotation))
        return all(a.shape == b.shape and np.allclose(a, b, rtol=rtol, atol=0) for a, b in pairs)


@dataclass(frozen=True)
class TripSummary:
    trip_id: str
    path: str
    n_samples: int
    duration: float
    mean_rate: float
    n_gps: int
    controllability: str
    has_rotation: bool


@dataclass
class Catalog:
    summaries: list
    diagnostics: list  # (path, message)

    def __len__(self):
        return len(self.summaries)

    def __iter__(self):
        return iter(self.summaries)


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def _parse_csv(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TripFormatError("empty file", path, 1)
    header = tuple(h.strip() for h in lines[0].split(","))
    if header not in (CSV_HEADER, CSV_HEADER + ROTATION_HEADER):
        raise TripFormatError(f"unexpected header {','.join(header)}", path, 1)
    ncol = len(header)
    body = [ln for ln in lines[1:]]
    while body and not body[-1].strip():
        body.pop()
    data = np.empty((len(body), ncol))
    for i, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != ncol:
            raise TripFormatError(f"expected {ncol} fields, got {len(parts)}", path, i + 2)
        try:
            data[i] = [float(p) for p in parts]
        except ValueError:
            raise TripFormatError(f"unparseable number in {ln!r}", path, i + 2) from None
    return header, data


def load_trip(path):
    """Read a trip CSV and its JSON sidecar into a validated TripRecord."""
    path = Path(path)
    header, data = _parse_csv(path)
    side = sidecar_path(path)
    try:
        with open(side, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise TripFormatError("missing sidecar", side) from None
    except json.JSONDecodeError as exc:
        raise TripFormatError(f"bad sidecar JSON: {exc.msg}", side, exc.lineno) from None
    pts = meta.get("gps") or []
    try:
        gps = GpsTrack(
            t=[p["t"] for p in pts],
            lat=[p["lat"] for p in pts],
            lon=[p["lon"] for p in pts],
            err=[p.get("err", 0.0) for p in pts],
        )
    except (KeyError, TypeError) as exc:
        raise TripFormatError(f"bad GPS entry: {exc}", side) from None
    rotation = data[:, 4:7] if len(header) == 7 else None
    return TripRecord(
        trip_id=str(meta.get("trip_id", path.stem)),
        t=data[:, 0],
        accel=data[:, 1:4],
        gps=gps,
        speed=meta.get("speed"),
        meta=TripMeta.from_dict(meta.get("meta") or {}),
        rotation=rotation,
    )


def save_trip(trip, directory, extra=None):
    """Write ``<trip_id>.csv`` and ``<trip_id>.json`` into ``directory``.

    ``extra`` is merged into the sidecar (the simulator stores truth there).
    Returns the CSV path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{trip.trip_id}.csv"
    cols = [trip.t[:, None], trip.accel]
    header = list(CSV_HEADER)
    if trip.rotation is not None:
        cols.append(trip.rotation)
        header += ROTATION_HEADER
    table = np.hstack(cols)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, table, fmt=FLOAT_FORMAT, delimiter=",")
    side = trip.sidecar()
    if extra:
        side.update(extra)
    with open(sidecar_path(csv_path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(side, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return csv_path


def summarize(trip, path=""):
    return TripSummary(
        trip_id=trip.trip_id,
        path=str(path),
        n_samples=len(trip.t),
        duration=trip.duration,
        mean_rate=(len(trip.t) - 1) / trip.duration,
        n_gps=len(trip.gps),
        controllability=trip.meta.controllability.value,
        has_rotation=trip.rotation is not None,
    )


def trip_files(directory):
    return sorted(Path(directory).glob("*.csv"))


def catalog(directory):
    """Summarize every parseable trip in ``directory``; failures become diagnostics."""
    summaries, diagnostics = [], []
    for p in trip_files(directory):
        try:
            summaries.append(summarize(load_trip(p), p))
        except (TripFormatError, TripValidationError, OSError) as exc:
            diagnostics.append((str(p), str(exc)))
    return Catalog(summaries, diagnostics)


def load_corpus(directory):
    """Load all valid trips of a directory; returns (trips, diagnostics)."""
    trips, diagnostics = [], []
    for p in trip_files(directory):
        try:
            trips.append(load_trip(p))
        except (TripFormatError, TripValidationError, OSError) as exc:
            diagnostics.append((str(p), str(exc)))
    return trips, diagnostics
