"""Independent reference implementations used as test oracles.

Nothing here calls into the package's numeric code paths: distances come
from shapely, weights from exact rational arithmetic, paths from exhaustive
enumeration or scipy's csgraph Dijkstra.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from shapely.geometry import LineString, Point


# -- timecost ---------------------------------------------------------------------


def timecost_closed_form(length, speed, alpha_deg, linespeed):
    """length * |cos(alpha) * speed / linespeed - 1|."""
    return length * abs(math.cos(math.radians(alpha_deg)) * speed / linespeed - 1.0)


def angle_between(h1, h2):
    """Smallest angle between two compass headings via unit vectors."""
    a, b = math.radians(h1), math.radians(h2)
    c = math.sin(a) * math.sin(b) + math.cos(a) * math.cos(b)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


# -- k nearest --------------------------------------------------------------------


def knn_scan(net, x, y, k):
    """Exhaustive k-NN with shapely distances; ties by id.

    Distances equal to 1e-9 m count as ties: a street and its reverse twin are
    the same line, but shapely may differ in the last bit between them.
    """
    pt = Point(x, y)
    ds = [(LineString([p.xy for p in seg.polyline]).distance(pt), sid) for sid, seg in net.segments.items()]
    ds.sort(key=lambda t: (round(t[0], 9), t[1]))
    return [(sid, d) for d, sid in ds[:k]]


# -- gravity ----------------------------------------------------------------------


def gravity_exact(dists, angs):
    """(w_d, w_theta, gf) as Fractions; degenerate zero sums give weight 1."""
    dists = [Fraction(d) for d in dists]
    angs = [Fraction(a) for a in angs]
    sd, sa = sum(dists), sum(angs)
    w_d = [Fraction(1) if sd == 0 else 1 - d / sd for d in dists]
    w_t = [Fraction(1) if sa == 0 else 1 - a / sa for a in angs]
    return w_d, w_t, [a * b for a, b in zip(w_d, w_t)]


# -- paths ------------------------------------------------------------------------


def simple_paths(graph, source, target, max_edges=40):
    """Every simple path source -> target as a list of edge objects."""
    out = []
    stack = [(source, [], {source})]
    while stack:
        node, edges, seen = stack.pop()
        if node == target:
            out.append(edges)
            continue
        if len(edges) >= max_edges:
            continue
        for e in graph.out_edges(node):
            if e.to_node not in seen:
                stack.append((e.to_node, edges + [e], seen | {e.to_node}))
    return out


def best_static(graph, source, target, cost):
    """Least-cost simple path under a static per-edge cost (ties: hops, then ids)."""
    if source == target:
        return 0.0, []
    best = None
    for path in simple_paths(graph, source, target):
        key = (math.fsum(cost(e) for e in path), len(path), [e.id for e in path])
        if best is None or key < best:
            best = key
    return (None, None) if best is None else (best[0], best[2])


def sequential_timecost(graph, path, gps_time, heading, global_ls, target_xy, eps=1.0):
    """Time-aware cost of ``path`` evaluated edge by edge with the remaining-time rule.

    Before each edge the unexplained GPS time is ``gps_time`` minus the travel
    time so far minus this edge's time; above ``eps`` seconds the edge's goal
    speed is the straight distance from its start node to the target over that
    time, otherwise the pair's global speed.  Timecost uses the closed form.
    """
    total, elapsed = [], 0.0
    tx, ty = target_xy
    for e in path:
        elapsed += e.length / e.speed
        left = gps_time - elapsed
        p = graph.node_point(e.from_node)
        ls = math.hypot(tx - p.x, ty - p.y) / left if left > eps else 0.0
        if not ls > 0.0:
            ls = global_ls
        alpha = angle_between(e.heading, heading)
        total.append(timecost_closed_form(e.length, e.speed, alpha, ls))
    return math.fsum(total)


def best_time_aware(graph, q, cutoff_factor=10.0):
    """(cost, hops, edge ids) of the least sequential-timecost simple path for a
    pair query, among paths no slower than ``cutoff_factor`` times the GPS time."""
    tp = graph.node_point(q.target)
    best = None
    for path in simple_paths(graph, q.source, q.target):
        if math.fsum(e.travel_time for e in path) > cutoff_factor * q.gps_travel_time:
            continue
        c = sequential_timecost(graph, path, q.gps_travel_time, q.heading_ab, q.linespeed, tp.xy)
        key = (c, len(path), [e.id for e in path])
        if best is None or key < best:
            best = key
    return best


def csgraph_costs(net, source, weight):
    """Single-source least costs with scipy (weight(seg) per directed edge)."""
    ids = sorted(net.nodes)
    pos = {n: i for i, n in enumerate(ids)}
    best = {}
    for seg in net.segments.values():
        key = (pos[seg.from_node], pos[seg.to_node])
        w = weight(seg)
        if key not in best or w < best[key]:
            best[key] = w
    rows = [k[0] for k in best]
    cols = [k[1] for k in best]
    m = csr_matrix((list(best.values()), (rows, cols)), shape=(len(ids), len(ids)))
    d = dijkstra(m, directed=True, indices=pos[source])
    return {n: float(d[pos[n]]) for n in ids if np.isfinite(d[pos[n]])}


# -- enrichment -------------------------------------------------------------------


def weighted_mean_exact(pairs):
    """Weighted mean of (weight, speed) pairs in exact arithmetic."""
    num = sum(Fraction(w) * Fraction(s) for w, s in pairs)
    den = sum(Fraction(w) for w, _ in pairs)
    return num / den
