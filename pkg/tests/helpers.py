"""Small-network builders shared by the test modules."""
from __future__ import annotations

import math

import numpy as np

from tamm.geo import GeoPoint, Projection
from tamm.matcher import GpsFix
from tamm.pipeline import Trajectory
from tamm.roadnet import RoadNetwork, RoadSegment

PROJ = Projection(43.7167, 10.4)


def P(x, y):
    return GeoPoint(float(x), float(y))


def build_network(nodes, edges, projection=PROJ):
    """``nodes``: {id: (x, y)}; ``edges``: iterable of (sid, a, b, speed[, class[, via]]).

    ``via`` is an optional list of interior (x, y) vertices.
    """
    pts = {n: P(*xy) for n, xy in nodes.items()}
    segs = {}
    for e in edges:
        sid, a, b, speed = e[:4]
        cls = e[4] if len(e) > 4 else "road"
        via = [P(*v) for v in e[5]] if len(e) > 5 else []
        segs[sid] = RoadSegment(sid, a, b, (pts[a], *via, pts[b]), cls, float(speed), float(speed))
    return RoadNetwork(pts, segs, projection)


def two_way(edges):
    """Add the reverse of each (sid, a, b, speed, cls) edge with id ``sid + 1000``."""
    out = []
    for e in edges:
        out.append(e)
        out.append((e[0] + 1000, e[2], e[1], *e[3:]))
    return out


def straight_road(n_segments=3, length=100.0, speed=10.0):
    """West-to-east chain 0 -> 1 -> ... with segment ids 1..n."""
    nodes = {i: (i * length, 0.0) for i in range(n_segments + 1)}
    edges = [(i + 1, i, i + 1, speed) for i in range(n_segments)]
    return build_network(nodes, edges)


def random_graph(rng: np.random.Generator, n_nodes: int, p_edge: float, speeds=(5.0, 10.0, 20.0)):
    """Random directed geometric graph on ``n_nodes`` nodes in a 1 km square."""
    xy = rng.uniform(0.0, 1000.0, size=(n_nodes, 2))
    nodes = {i: (float(xy[i, 0]), float(xy[i, 1])) for i in range(n_nodes)}
    edges = []
    sid = 1
    for a in range(n_nodes):
        for b in range(n_nodes):
            if a != b and rng.uniform() < p_edge and np.hypot(*(xy[a] - xy[b])) > 1.0:
                edges.append((sid, a, b, float(rng.choice(speeds))))
                sid += 1
    return build_network(nodes, edges)


def trajectory(points, t0=0.0, dt=60.0, tid="t", speed=None, heading=None):
    fixes = [GpsFix(t0 + i * dt, P(*xy), speed, heading) for i, xy in enumerate(points)]
    return Trajectory(tid, "u", fixes)


def two_route_network():
    """600 m arterial in two blocks at 10 m/s (60 s) and a parallel street 50 m to
    the north with four blocks, at a speed that makes it take 72 s."""
    d, h, x = 600.0, 50.0, 100.0
    detour = 2 * math.hypot(x, h) + (d - 2 * x)
    v2 = detour / 72.0
    nodes = {0: (0, 0), 1: (300, 0), 2: (600, 0), 10: (x, h), 11: (200, h), 12: (300, h), 13: (400, h), 14: (d - x, h)}
    edges = [(1, 0, 1, 10.0), (2, 1, 2, 10.0), (3, 0, 10, v2), (4, 10, 11, v2), (5, 11, 12, v2), (6, 12, 13, v2), (7, 13, 14, v2), (8, 14, 2, v2)]
    return build_network(nodes, edges)


def gadget_chain(n_gadgets):
    """Arterial along y = 0 split every 300 m (10 m/s); every 600 m a parallel
    street 50 m north (up-leg, four blocks, down-leg) that takes 72 s.

    Arterial segment ids are < 100; parallel-street ids are >= 100.
    """
    d, h, x = 600.0, 50.0, 100.0
    v2 = (2 * math.hypot(x, h) + (d - 2 * x)) / 72.0
    nodes = {i: (300.0 * i, 0.0) for i in range(2 * n_gadgets + 1)}
    edges = [(i + 1, i, i + 1, 10.0) for i in range(2 * n_gadgets)]
    sid = 100
    for g in range(n_gadgets):
        x0 = d * g
        base = 1000 + 10 * g
        pts = [(x0 + x, h), (x0 + 200, h), (x0 + 300, h), (x0 + 400, h), (x0 + d - x, h)]
        for j, p in enumerate(pts):
            nodes[base + j] = p
        chain = [2 * g] + [base + j for j in range(5)] + [2 * g + 2]
        for a, b in zip(chain, chain[1:]):
            edges.append((sid, a, b, v2))
            sid += 1
    return build_network(nodes, edges)
