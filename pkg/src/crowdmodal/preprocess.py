"""Vertical acceleration series from raw phone logs.

Quaternion convention: ``q = (w, x, y, z)`` rotates device-frame vectors
into the world frame, ``v_world = q * v_device * conj(q)`` (Hamilton
product).  With this convention a 90 degree rotation about +x maps the
device vector (0, 0, 1) to (0, -1, 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .trips import OrientationSource


class PreprocessError(ValueError):
    pass


class OrientationError(PreprocessError):
    pass


class TooShortError(PreprocessError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    f_cut: float = 0.5
    transition: float | None = None
    resample_fs: float = 100.0
    order: int = 8

    def __post_init__(self):
        if not (0 < self.f_cut < self.resample_fs / 2):
            raise PreprocessError("need 0 < f_cut < resample_fs / 2")

    @property
    def out_fs(self):
        return 2.0 * self.f_cut


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n == 0 or not math.isfinite(n):
            raise PreprocessError("quaternion must have finite nonzero norm")
        for k in "wxyz":
            object.__setattr__(self, k, getattr(self, k) / n)

    @classmethod
    def from_axis_angle(cls, axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(angle / 2)
        return cls(math.cos(angle / 2), *(s * axis))

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def rotate(self, v):
        return rotate_vectors(self.as_array()[None, :], np.asarray(v, float)[None, :])[0]


def quaternions_from_rotation_vector(vec, tol=1e-6):
    """Unit quaternions (n, 4) from their vector parts (n, 3), taking w >= 0."""
    vec = np.asarray(vec, dtype=float)
    s = np.sum(vec**2, axis=1)
    if np.any(s > 1 + tol):
        raise PreprocessError("rotation vector norm exceeds 1")
    w = np.sqrt(np.clip(1 - s, 0, None))
    return np.column_stack([w, vec])


def rotate_vectors(q, v):
    """Rotate vectors ``v`` (n, 3) by unit quaternions ``q`` (n, 4)."""
    w = q[:, :1]
    u = q[:, 1:]
    t = 2 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def resample_uniform(t, x, fs_target):
    """Linear interpolation of jittered samples onto a uniform grid from t[0]."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) < 2:
        raise PreprocessError("need at least 2 samples")
    if len(x) != len(t):
        raise PreprocessError("t and x must have equal length")
    dt = np.diff(t)
    if np.any(dt == 0):
        raise PreprocessError("duplicate timestamps")
    if np.any(dt < 0):
        raise PreprocessError("timestamps not increasing")
    n = int(math.floor((t[-1] - t[0]) * fs_target + 1e-9)) + 1
    tu = t[0] + np.arange(n) / fs_target
    if x.ndim == 1:
        return tu, np.interp(tu, t, x)
    return tu, np.column_stack([np.interp(tu, t, x[:, k]) for k in range(x.shape[1])])


def gravity_axis_channel(accel):
    """Channel best aligned with gravity (largest |mean|), sign-corrected, mean removed."""
    accel = np.asarray(accel, dtype=float)
    m = accel.mean(axis=0)
    k = int(np.argmax(np.abs(m)))
    z = accel[:, k] * math.copysign(1.0, m[k])
    return z - z.mean()


def _rotation_onto_z(g):
    """Rotation matrix taking unit vector ``g`` onto +z."""
    g = g / np.linalg.norm(g)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(g, z)
    c = float(g @ z)
    if np.linalg.norm(v) < 1e-12:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1 + c)


def reorient_gravity(accel, fs, gps_speed_track=None, min_duration=10.0, lowpass_hz=0.05):
    """Vertical component of an arbitrarily oriented accelerometer record.

    The gravity direction is the mean of the 0.05 Hz low-passed acceleration;
    the record is rotated so it points along +z and the mean-removed z
    channel is returned.  ``gps_speed_track`` is accepted for interface
    compatibility and not used by this estimator.
    """
    accel = np.asarray(accel, dtype=float)
    if accel.ndim != 2 or accel.shape[1] != 3:
        raise PreprocessError("accel must have shape (n, 3)")
    if len(accel) < min_duration * fs:
        raise TooShortError(f"need at least {min_duration} s of data")
    if lowpass_hz < fs / 2 and len(accel) > 30:
        sos = signal.butter(2, lowpass_hz, fs=fs, output="sos")
        g = signal.sosfiltfilt(sos, accel, axis=0).mean(axis=0)
    else:
        g = accel.mean(axis=0)
    if np.linalg.norm(g) < 1e-3:
        raise OrientationError("mean acceleration vanishes; cannot find gravity")
    z = accel @ _rotation_onto_z(g)[2]
    return z - z.mean()


def reorient_quaternion(accel, q, tol=1e-6):
    """World-frame vertical (mean removed) from device accel and unit quaternions (n, 4)."""
    accel = np.asarray(accel, dtype=float)
    q = np.asarray(q, dtype=float)
    if q.shape != (len(accel), 4):
        raise PreprocessError("one quaternion per sample required")
    if np.any(np.abs(np.linalg.norm(q, axis=1) - 1) > tol):
        raise PreprocessError("quaternions are not unit norm")
    z = rotate_vectors(q, accel)[:, 2]
    return z - z.mean()


def _design(spec, fs):
    return signal.butter(spec.order, spec.f_cut, fs=fs, output="sos")


def min_length(spec, fs):
    """Shortest series accepted by ``lowpass_decimate``: four filter pad lengths."""
    sos = _design(spec, fs)
    return 4 * 3 * (2 * len(sos) + 1)


def lowpass_decimate(x, fs, spec):
    """Zero-phase Butterworth low-pass at f_cut, then decimation to 2 * f_cut.

    Returns ``(y, fs_out)``; sample j of ``y`` sits at the input time of
    sample ``j * q`` with ``q = fs / (2 f_cut)``.
    """
    x = np.asarray(x, dtype=float)
    if fs < 4 * spec.f_cut:
        raise PreprocessError("input rate must be at least 4 * f_cut")
    q = fs / spec.out_fs
    if abs(q - round(q)) > 1e-9:
        raise PreprocessError("input rate must be an integer multiple of 2 * f_cut")
    q = int(round(q))
    if len(x) < min_length(spec, fs):
        raise TooShortError(f"series of {len(x)} samples is too short to filter")
    y = signal.sosfiltfilt(_design(spec, fs), x)
    return y[::q].copy(), spec.out_fs


@dataclass(frozen=True, eq=False)
class VerticalTrace:
    trip_id: str
    fs: float
    x: np.ndarray
    t: np.ndarray
    r: np.ndarray | None = None


def vertical_signal(trip, fs):
    """Resample a trip to ``fs`` and extract the vertical channel per its metadata."""
    tu, acc = resample_uniform(trip.t, trip.accel, fs)
    src = trip.meta.orientation_source
    if src == OrientationSource.KNOWN_UPRIGHT:
        return tu, gravity_axis_channel(acc)
    if src == OrientationSource.ROTATION_VECTOR:
        if trip.rotation is None:
            raise OrientationError("trip declares rotation_vector but has no rotation data")
        # nearest-sample alignment of the quaternion stream onto the uniform grid
        idx = np.clip(np.searchsorted(trip.t, tu), 1, len(trip.t) - 1)
        left = (tu - trip.t[idx - 1]) < (trip.t[idx] - tu)
        idx = np.where(left, idx - 1, idx)
        q = quaternions_from_rotation_vector(trip.rotation[idx])
        return tu, reorient_quaternion(acc, q)
    return tu, reorient_gravity(acc, fs)


def preprocess_trip(trip, spec):
    """Full per-trip preprocessing: returns a VerticalTrace at 2 * f_cut."""
    tu, z = vertical_signal(trip, spec.resample_fs)
    y, fs_out = lowpass_decimate(z, spec.resample_fs, spec)
    q = int(round(spec.resample_fs / fs_out))
    return VerticalTrace(trip_id=trip.trip_id, fs=fs_out, x=y, t=tu[::q].copy())
