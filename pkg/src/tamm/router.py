"""Timecost edge evaluation, time-aware Dijkstra and the shortest/fastest baselines.

All three searches share one label-setting engine so they agree on tie
handling: equal accumulated cost prefers fewer edges, then the
lexicographically smaller edge-id sequence.
"""
from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geo import angular_difference, bearing, distance

# adaptive linespeed is used only while more than this much GPS time remains
TIMELEFT_EPS_S = 1.0
# abandon a time-aware search once a path uses this multiple of the GPS time
CUTOFF_FACTOR = 10.0


class SearchCounter:
    """Process-wide count of priority-queue searches started."""

    def __init__(self):
        self._lock = threading.Lock()
        self.searches = 0

    def bump(self):
        with self._lock:
            self.searches += 1


counter = SearchCounter()


def timecost(seg, heading: float, linespeed: float) -> float:
    """How badly ``seg`` fits a straight-line trip at ``linespeed`` along ``heading``.

    The segment length is projected on the trip direction; the time needed to
    cover that projection at ``linespeed`` gives the length the segment would
    have at its own typical speed.  Cost is the absolute gap to the real
    length.  Counter-heading segments (alpha > 90) get a negative projection
    and therefore a cost above their length.
    """
    if not linespeed > 0.0:
        raise ValueError(f"linespeed must be > 0, got {linespeed}")
    if not seg.travel_time > 0.0:
        raise ValueError(f"segment {seg.id} has zero travel time")
    alpha = angular_difference(seg.heading, heading)
    length_projected = seg.length * math.cos(math.radians(alpha))
    time_expected = length_projected / linespeed
    length_expected = seg.length * time_expected / seg.travel_time
    return abs(length_expected - seg.length)


def timecosts(length, travel_time, alpha_deg, linespeed):
    """Vectorised :func:`timecost` over arrays of segment lengths, times, angles and linespeeds."""
    arrs = [np.ascontiguousarray(a, dtype=float) for a in np.broadcast_arrays(length, travel_time, alpha_deg, linespeed)]
    if np.any(arrs[3] <= 0.0) or np.any(arrs[1] <= 0.0):
        raise ValueError("linespeed and travel_time must be > 0")
    return kernels.timecost_batch(*arrs)


@dataclass(frozen=True)
class PairQuery:
    source: int
    target: int
    gps_travel_time: float
    straight_line: float
    heading_ab: float
    linespeed: float = field(init=False)

    def __post_init__(self):
        if not self.gps_travel_time > 0.0:
            raise ValueError(f"gps_travel_time must be > 0, got {self.gps_travel_time}")
        object.__setattr__(self, "linespeed", self.straight_line / self.gps_travel_time)
        if not math.isfinite(self.linespeed):
            raise ValueError("non-finite linespeed")

    @classmethod
    def between(cls, graph, source: int, target: int, gps_travel_time: float) -> "PairQuery":
        a, b = graph.node_point(source), graph.node_point(target)
        return cls(source, target, gps_travel_time, distance(a, b), bearing(a, b))


@dataclass
class MatchedPath:
    """A walk through the (overlay) graph.

    ``segments`` are base segment ids (split pieces report their parent);
    ``edges`` are the ids actually traversed.  ``cost`` is the search
    objective accumulated along the path: timecost for the time-aware search,
    metres for shortest, seconds for fastest.
    """

    found: bool
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    segments: list = field(default_factory=list)
    edge_times: list = field(default_factory=list)
    cost: float = 0.0
    straight_line: float = 0.0
    expanded: int = 0

    @property
    def travel_time(self) -> float:
        return math.fsum(self.edge_times)

    @property
    def total_timecost(self) -> float:
        return self.cost

    @property
    def lspeed(self) -> float:
        t = self.travel_time
        return self.straight_line / t if t > 0 else 0.0


class _Label:
    __slots__ = ("cost", "hops", "time", "edge", "parent")

    def __init__(self, cost, hops, time, edge, parent):
        self.cost = cost
        self.hops = hops
        self.time = time
        self.edge = edge
        self.parent = parent


def _edge_ids(label):
    out = []
    while label.edge is not None:
        out.append(label.edge.id)
        label = label.parent
    out.reverse()
    return out


def _search(graph, source, target, edge_cost, straight_line):
    """Label-setting best-first search.

    ``edge_cost(label, edge)`` returns the cost of extending ``label`` by
    ``edge`` or None to prune it.
    """
    counter.bump()
    if source == target:
        return MatchedPath(found=True, nodes=[source], straight_line=straight_line)
    labels = {source: _Label(0.0, 0, 0.0, None, None)}
    heap = [(0.0, 0, 0, source)]
    seq = 1
    settled = set()
    while heap:
        c, h, _, n = heapq.heappop(heap)
        if n in settled:
            continue
        lab = labels[n]
        if c != lab.cost or h != lab.hops:
            continue
        settled.add(n)
        if n == target:
            return _reconstruct(lab, n, straight_line, len(settled))
        for e in graph.out_edges(n):
            v = e.to_node
            if v in settled:
                continue
            w = edge_cost(lab, e)
            if w is None:
                continue
            nc, nh = c + w, h + 1
            old = labels.get(v)
            if old is not None:
                if nc > old.cost or (nc == old.cost and nh > old.hops):
                    continue
                if nc == old.cost and nh == old.hops:
                    cand = _edge_ids(lab) + [e.id]
                    if cand >= _edge_ids(old):
                        continue
            labels[v] = _Label(nc, nh, lab.time + e.travel_time, e, lab)
            heapq.heappush(heap, (nc, nh, seq, v))
            seq += 1
    return MatchedPath(found=False, straight_line=straight_line, expanded=len(settled))


def _reconstruct(label, node, straight_line, expanded):
    edges = []
    nodes = [node]
    cost = label.cost
    while label.edge is not None:
        edges.append(label.edge)
        nodes.append(label.edge.from_node)
        label = label.parent
    edges.reverse()
    nodes.reverse()
    return MatchedPath(
        found=True,
        nodes=nodes,
        edges=[e.id for e in edges],
        segments=[e.base_id for e in edges],
        edge_times=[e.travel_time for e in edges],
        cost=cost,
        straight_line=straight_line,
        expanded=expanded,
    )


def adaptive_linespeed(q: PairQuery, node_to_target: float, timeleft: float) -> float:
    """Goal linespeed for an edge given the GPS time still unexplained.

    With more than ``TIMELEFT_EPS_S`` left, the remaining straight-line
    distance is spread over the remaining time; otherwise the pair's global
    linespeed applies.
    """
    if timeleft > TIMELEFT_EPS_S:
        ls = node_to_target / timeleft
        if ls > 0.0:
            return ls
    return q.linespeed


def time_aware_dijkstra(graph, q: PairQuery, cutoff_factor: float = CUTOFF_FACTOR) -> MatchedPath:
    """Least-timecost path from ``q.source`` to ``q.target``."""
    tp = graph.node_point(q.target)
    tx, ty = tp.x, tp.y
    limit = cutoff_factor * q.gps_travel_time
    cache = {}

    def edge_cost(lab, e):
        t_sv = lab.time + e.travel_time
        if t_sv > limit:
            return None
        n = e.from_node
        d = cache.get(n)
        if d is None:
            p = graph.node_point(n)
            d = cache[n] = math.hypot(tx - p.x, ty - p.y)
        ls = adaptive_linespeed(q, d, q.gps_travel_time - t_sv)
        return timecost(e, q.heading_ab, ls)

    return _search(graph, q.source, q.target, edge_cost, q.straight_line)


def _straight(graph, source, target):
    return distance(graph.node_point(source), graph.node_point(target))


def shortest_path(graph, source: int, target: int) -> MatchedPath:
    return _search(graph, source, target, lambda lab, e: e.length, _straight(graph, source, target))


def fastest_path(graph, source: int, target: int) -> MatchedPath:
    return _search(graph, source, target, lambda lab, e: e.travel_time, _straight(graph, source, target))


HEURISTICS = ("time_aware", "shortest", "fastest")


def run_heuristic(name: str, graph, q: PairQuery) -> MatchedPath:
    if name == "time_aware":
        return time_aware_dijkstra(graph, q)
    if name == "shortest":
        return shortest_path(graph, q.source, q.target)
    if name == "fastest":
        return fastest_path(graph, q.source, q.target)
    raise ValueError(f"unknown heuristic {name!r}; expected one of {HEURISTICS}")


def least_cost_path(graph, source: int, target: int, edge_cost) -> MatchedPath:
    """Generic search with a static per-edge cost ``edge_cost(edge)``."""
    return _search(graph, source, target, lambda lab, e: edge_cost(e), _straight(graph, source, target))
