"""GPS to one-dimensional bridge coordinates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import median_filter

EARTH_RADIUS = 6_371_000.0


class GeoError(ValueError):
    pass


class UnusableTripError(GeoError):
    """Too few valid GPS fixes to place the trip on the bridge."""


def _check_coords(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(~np.isfinite(lat)) or np.any(np.abs(lat) > 90):
        raise GeoError("latitude outside [-90, 90]")
    if np.any(~np.isfinite(lon)) or np.any(np.abs(lon) > 180):
        raise GeoError("longitude outside [-180, 180]")
    return lat, lon


def haversine(p1, p2):
    """Great-circle distance in meters between two (lat, lon) points in degrees.

    Broadcasts over array inputs.
    """
    lat1, lon1 = _check_coords(p1[0], p1[1])
    lat2, lon2 = _check_coords(p2[0], p2[1])
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    d = 2 * EARTH_RADIUS * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class BridgeFrame:
    """Reference frame of a span from ``point_a`` (r = 0) to ``point_b`` (r = L).

    ``bbox`` holds rectangles ``(lat_min, lat_max, lon_min, lon_max)``; a fix
    is on the bridge if it lies in any of them.  ``margin`` is the along-axis
    tolerance beyond each end, as a fraction of L.
    """

    point_a: tuple
    point_b: tuple
    length_L: float
    bbox: tuple = ()
    margin: float = 0.1
    name: str = ""
    _plane: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _check_coords([self.point_a[0], self.point_b[0]], [self.point_a[1], self.point_b[1]])
        if self.length_L <= 0:
            raise GeoError("bridge length must be positive")
        d = haversine(self.point_a, self.point_b)
        if abs(d - self.length_L) > 0.01 * self.length_L:
            raise GeoError(
                f"endpoint distance {d:.1f} m differs from L={self.length_L} m by more than 1%"
            )
        if not self.bbox:
            object.__setattr__(self, "bbox", (self._default_bbox(),))
        else:
            object.__setattr__(self, "bbox", tuple(tuple(map(float, b)) for b in self.bbox))
        for p in (self.point_a, self.point_b):
            if not self.in_bbox(np.array([p[0]]), np.array([p[1]]))[0]:
                raise GeoError("bounding box must contain both endpoints")
        lat0 = math.radians(0.5 * (self.point_a[0] + self.point_b[0]))
        ax, ay = self._xy_raw(self.point_b[0], self.point_b[1], math.cos(lat0))
        norm = math.hypot(ax, ay)
        object.__setattr__(self, "_plane", (math.cos(lat0), ax / norm, ay / norm, norm))

    def _default_bbox(self, pad_fraction=None):
        pad = (self.margin if pad_fraction is None else pad_fraction) * self.length_L
        pad = max(pad, 1.0)
        lats = (self.point_a[0], self.point_b[0])
        lons = (self.point_a[1], self.point_b[1])
        dlat = math.degrees(pad / EARTH_RADIUS)
        coslat = math.cos(math.radians(0.5 * sum(lats)))
        dlon = math.degrees(pad / (EARTH_RADIUS * coslat))
        return (min(lats) - dlat, max(lats) + dlat, min(lons) - dlon, max(lons) + dlon)

    def _xy_raw(self, lat, lon, coslat):
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        x = EARTH_RADIUS * np.radians(lon - self.point_a[1]) * coslat
        y = EARTH_RADIUS * np.radians(lat - self.point_a[0])
        return x, y

    def local_xy(self, lat, lon):
        """Equirectangular east/north meters relative to point A."""
        return self._xy_raw(lat, lon, self._plane[0])

    @property
    def axis(self):
        return self._plane[1], self._plane[2]

    def in_bbox(self, lat, lon):
        inside = np.zeros(np.shape(lat), dtype=bool)
        for la0, la1, lo0, lo1 in self.bbox:
            inside |= (lat >= la0) & (lat <= la1) & (lon >= lo0) & (lon <= lo1)
        return inside

    def latlon_at(self, r, offset=0.0):
        """Inverse map: along-axis r and left-of-axis offset (m) to (lat, lon)."""
        coslat, ux, uy, norm = self._plane
        rr = np.asarray(r, dtype=float) * norm / self.length_L
        off = np.asarray(offset, dtype=float)
        x = rr * ux - off * uy
        y = rr * uy + off * ux
        lat = self.point_a[0] + np.degrees(y / EARTH_RADIUS)
        lon = self.point_a[1] + np.degrees(x / (EARTH_RADIUS * coslat))
        return lat, lon

    def reversed(self):
        return replace(self, point_a=self.point_b, point_b=self.point_a, _plane=None)


@dataclass(frozen=True, eq=False)
class BridgeTrack:
    """Along-axis position r (m) per GPS fix, with a validity mask."""

    r: np.ndarray
    t_gps: np.ndarray
    valid_mask: np.ndarray
    err: np.ndarray | None = None
    monotone: bool = True

    def __len__(self):
        return len(self.t_gps)

    @property
    def t_range(self):
        return float(self.t_gps[0]), float(self.t_gps[-1])


def to_bridge_coords(gps, frame):
    """Project GPS fixes onto the A->B axis; off-bbox fixes start out invalid."""
    if len(gps.t) == 0:
        raise GeoError("empty GPS track")
    lat, lon = _check_coords(gps.lat, gps.lon)
    x, y = frame.local_xy(lat, lon)
    _, ux, uy, norm = frame._plane
    r = (x * ux + y * uy) * (frame.length_L / norm)
    order = np.argsort(gps.t, kind="stable")
    valid = frame.in_bbox(lat, lon)
    return BridgeTrack(
        r=r[order], t_gps=np.asarray(gps.t, float)[order], valid_mask=valid[order],
        err=np.asarray(gps.err, float)[order],
    )


def _fill(t, r, valid):
    return np.interp(t, t[valid], r[valid])


def _trim(track, valid):
    idx = np.flatnonzero(valid)
    if len(idx) < 2:
        raise UnusableTripError(f"only {len(idx)} valid GPS fixes on the span")
    s = slice(idx[0], idx[-1] + 1)
    err = None if track.err is None else track.err[s]
    return BridgeTrack(r=track.r[s], t_gps=track.t_gps[s], valid_mask=valid[s], err=err)


def clean_track(track, frame, outlier_sigma=3.0, min_threshold=10.0, window=5):
    """Discard off-span and inconsistent fixes, interpolate interior gaps.

    A fix is invalid if it was outside the bounding box, lies beyond
    ``frame.margin * L`` past either end, or deviates from a running median of
    its neighbors by more than ``max(outlier_sigma * median(err), min_threshold)``.
    Leading and trailing invalid fixes are dropped; interior ones are replaced
    by linear interpolation in time.  Iterates to a fixed point, so applying
    it twice is the same as applying it once.
    """
    L = frame.length_L
    lo, hi = -frame.margin * L, (1 + frame.margin) * L
    if track.err is not None and len(track.err) and np.any(track.err > 0):
        thr = max(outlier_sigma * float(np.median(track.err)), min_threshold)
    else:
        thr = min_threshold
    valid = track.valid_mask & (track.r >= lo) & (track.r <= hi)
    cur = _trim(track, valid)
    for _ in range(len(track) + 1):
        valid = cur.valid_mask.copy()
        filled = _fill(cur.t_gps, cur.r, valid)
        if len(filled) >= 3:
            resid = filled - median_filter(filled, size=min(window, len(filled)), mode="nearest")
            bad = valid & (np.abs(resid) > thr)
        else:
            bad = np.zeros_like(valid)
        if not bad.any() and valid.all():
            cur = BridgeTrack(r=filled, t_gps=cur.t_gps, valid_mask=valid, err=cur.err)
            break
        valid &= ~bad
        nxt = _trim(BridgeTrack(r=cur.r, t_gps=cur.t_gps, valid_mask=valid, err=cur.err), valid)
        cur = BridgeTrack(
            r=_fill(nxt.t_gps, nxt.r, nxt.valid_mask), t_gps=nxt.t_gps,
            valid_mask=np.ones(len(nxt), dtype=bool), err=nxt.err,
        )
    monotone = bool(np.all(np.diff(cur.r) >= 0) or np.all(np.diff(cur.r) <= 0))
    return replace(cur, monotone=monotone)


def position_at(track, t):
    """Bridge position at time(s) ``t`` by linear interpolation between fixes."""
    t = np.asarray(t, dtype=float)
    t0, t1 = track.t_range
    eps = 1e-9 * max(1.0, abs(t0), abs(t1))
    if np.any(t < t0 - eps) or np.any(t > t1 + eps):
        raise GeoError(f"time outside GPS track range [{t0}, {t1}]")
    tv = track.t_gps[track.valid_mask]
    rv = track.r[track.valid_mask]
    out = np.interp(t, tv, rv)
    return float(out) if out.ndim == 0 else out
