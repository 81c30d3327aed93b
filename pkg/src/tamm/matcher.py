"""Gravity-model point-to-segment matching."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .geo import GeoPoint, angular_difference, bearing, normalize_heading, project_onto_polyline
from .roadnet import RoadNetwork, k_nearest_segments

DEFAULT_K = 8


class MatchError(ValueError):
    pass


@dataclass(frozen=True)
class GpsFix:
    timestamp: float
    position: GeoPoint
    speed: float | None = None
    heading: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError(f"non-finite timestamp {self.timestamp}")
        if self.speed is not None and not (self.speed >= 0.0 and math.isfinite(self.speed)):
            raise ValueError(f"speed must be finite and >= 0, got {self.speed}")
        if self.heading is not None:
            if not math.isfinite(self.heading):
                raise ValueError(f"non-finite heading {self.heading}")
            object.__setattr__(self, "heading", normalize_heading(self.heading))


@dataclass(frozen=True)
class Candidate:
    segment: int
    dist: float
    ang: float
    w_d: float
    w_theta: float
    gf: float


@dataclass(frozen=True)
class MatchedPoint:
    fix: GpsFix
    segment: int
    weight: float
    projection: GeoPoint


def derive_headings(fixes):
    """Fill missing headings with the bearing to the next fix.

    The last fix takes the previous bearing.  Recorded headings are kept.
    """
    fixes = list(fixes)
    if all(f.heading is not None for f in fixes):
        return fixes
    if len(fixes) < 2:
        raise MatchError("cannot derive a heading from a single fix")
    bearings = [bearing(a.position, b.position) for a, b in zip(fixes, fixes[1:])]
    bearings.append(bearings[-1])
    return [f if f.heading is not None else replace(f, heading=h) for f, h in zip(fixes, bearings)]


def gravity_candidates(net: RoadNetwork, fix: GpsFix, k: int = DEFAULT_K) -> list[Candidate]:
    if fix.heading is None:
        raise MatchError("fix has no heading; run derive_headings first")
    near = k_nearest_segments(net, fix.position, k)
    ids = [sid for sid, _ in near]
    dists = np.array([d for _, d in near])
    angs = np.array([angular_difference(net.segments[s].heading, fix.heading) for s in ids])
    w_d, w_t, gf = kernels.gravity_weights(dists, angs)
    return [
        Candidate(sid, float(dists[i]), float(angs[i]), float(w_d[i]), float(w_t[i]), float(gf[i]))
        for i, sid in enumerate(ids)
    ]


def best_candidate(cands: list[Candidate]) -> Candidate:
    """Argmax of gf; ties go to the nearer, then the lower segment id."""
    return min(cands, key=lambda c: (-c.gf, c.dist, c.segment))


def match_point(net: RoadNetwork, fix: GpsFix, k: int = DEFAULT_K) -> MatchedPoint:
    win = best_candidate(gravity_candidates(net, fix, k))
    proj = project_onto_polyline(net.segments[win.segment].polyline, fix.position)
    return MatchedPoint(fix=fix, segment=win.segment, weight=win.gf, projection=proj.point)
