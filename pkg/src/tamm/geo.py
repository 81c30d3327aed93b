"""Planar geometry helpers: projection, bearings, point-to-polyline projection."""
from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6371008.8


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A position in the local planar frame (meters), optionally with its WGS84 source."""

    x: float
    y: float
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection centred on (lat0, lon0).

    Exact inverse, so round trips are limited only by float rounding.
    """

    lat0: float
    lon0: float

    @property
    def _kx(self) -> float:
        return math.radians(1.0) * EARTH_RADIUS_M * math.cos(math.radians(self.lat0))

    @property
    def _ky(self) -> float:
        return math.radians(1.0) * EARTH_RADIUS_M

    def to_xy(self, lat: float, lon: float) -> tuple[float, float]:
        return ((lon - self.lon0) * self._kx, (lat - self.lat0) * self._ky)

    def to_latlon(self, x: float, y: float) -> tuple[float, float]:
        return (self.lat0 + y / self._ky, self.lon0 + x / self._kx)

    def point(self, lat: float, lon: float) -> GeoPoint:
        x, y = self.to_xy(lat, lon)
        return GeoPoint(x, y, lat=lat, lon=lon)


def distance(a: GeoPoint, b: GeoPoint) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Bearing from a to b in degrees, 0 = north, clockwise, in [0, 360)."""
    return normalize_heading(math.degrees(math.atan2(b.x - a.x, b.y - a.y)))


def normalize_heading(h: float) -> float:
    h = math.fmod(h, 360.0)
    if h < 0.0:
        h += 360.0
    # fmod of tiny negatives can round up to exactly 360
    return 0.0 if h >= 360.0 else h


def angular_difference(a: float, b: float) -> float:
    """Smallest absolute difference between two headings, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def polyline_length(points) -> float:
    return sum(distance(p, q) for p, q in zip(points, points[1:]))


@dataclass(frozen=True, slots=True)
class PolylineProjection:
    point: GeoPoint
    distance: float  # from the query point to `point`
    offset: float  # arc length from the first vertex
    index: int  # sub-segment holding `point`


def project_onto_polyline(points, p: GeoPoint) -> PolylineProjection:
    """Closest point of a polyline to ``p`` (clamped to the polyline ends)."""
    best = None
    walked = 0.0
    for i, (a, b) in enumerate(zip(points, points[1:])):
        dx, dy = b.x - a.x, b.y - a.y
        seg2 = dx * dx + dy * dy
        seg_len = math.sqrt(seg2)
        if seg2 == 0.0:
            t = 0.0
        else:
            t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / seg2
            t = min(1.0, max(0.0, t))
        qx, qy = a.x + t * dx, a.y + t * dy
        d = math.hypot(p.x - qx, p.y - qy)
        if best is None or d < best[0]:
            best = (d, walked + t * seg_len, i, qx, qy)
        walked += seg_len
    d, offset, i, qx, qy = best
    return PolylineProjection(GeoPoint(qx, qy), d, offset, i)


def cut_polyline(points, offset: float):
    """Split a polyline at arc length ``offset``; returns (head, tail, cut point)."""
    walked = 0.0
    for i, (a, b) in enumerate(zip(points, points[1:])):
        seg_len = distance(a, b)
        if walked + seg_len >= offset or i == len(points) - 2:
            t = 0.0 if seg_len == 0.0 else min(1.0, max(0.0, (offset - walked) / seg_len))
            c = GeoPoint(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
            head = list(points[: i + 1]) + [c]
            tail = [c] + list(points[i + 1 :])
            return head, tail, c
        walked += seg_len
    raise ValueError("polyline needs at least two vertices")
