"""Directed road network: segments, geometry, k-nearest queries and split overlays."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import shapely.wkt
from shapely.geometry import LineString

from .geo import (
    GeoPoint,
    Projection,
    bearing,
    cut_polyline,
    distance,
    polyline_length,
    project_onto_polyline,
)
from .spatial import PackedRTree

log = logging.getLogger(__name__)

NETWORK_HEADER = ["segment_id", "from_node", "to_node", "road_class", "speed_limit_mps", "wkt"]
NODE_TOLERANCE_M = 0.5
# cuts closer than this to an existing node reuse the node
SPLIT_EPS_M = 1e-6


class NetworkFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RoadSegment:
    """A directed road segment.  ``length``, ``heading`` and ``travel_time`` are derived."""

    id: int
    from_node: int
    to_node: int
    polyline: tuple[GeoPoint, ...]
    road_class: str
    speed_limit: float
    speed: float
    # base segment this piece was cut from; None for base segments
    parent: int | None = None
    length: float = field(init=False)
    heading: float = field(init=False)
    travel_time: float = field(init=False)

    def __post_init__(self):
        if len(self.polyline) < 2:
            raise ValueError(f"segment {self.id}: polyline needs >= 2 vertices")
        if not self.speed > 0.0:
            raise ValueError(f"segment {self.id}: speed must be > 0, got {self.speed}")
        length = polyline_length(self.polyline)
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "heading", bearing(self.polyline[0], self.polyline[-1]))
        object.__setattr__(self, "travel_time", length / self.speed)

    @property
    def base_id(self) -> int:
        return self.id if self.parent is None else self.parent

    def with_speed(self, speed: float) -> "RoadSegment":
        if speed == self.speed:
            return self
        return replace(self, speed=speed)


class RoadNetwork:
    """Immutable directed road graph with a lazily built spatial index."""

    def __init__(self, nodes: dict[int, GeoPoint], segments: dict[int, RoadSegment], projection: Projection | None = None):
        self.nodes = dict(nodes)
        self.segments = dict(segments)
        self.projection = projection
        adjacency: dict[int, list[int]] = {n: [] for n in self.nodes}
        for sid in sorted(self.segments):
            seg = self.segments[sid]
            for n in (seg.from_node, seg.to_node):
                if n not in self.nodes:
                    raise NetworkFormatError(f"segment {sid} references missing node {n}")
            adjacency[seg.from_node].append(sid)
        self.adjacency = adjacency
        self._out = {n: tuple(self.segments[s] for s in sids) for n, sids in adjacency.items()}
        self._index: PackedRTree | None = None

    def __len__(self):
        return len(self.segments)

    # graph protocol shared with SplitOverlay
    def out_edges(self, node: int):
        return self._out.get(node, ())

    def node_point(self, node: int) -> GeoPoint:
        return self.nodes[node]

    def segment(self, sid: int) -> RoadSegment:
        return self.segments[sid]

    @property
    def index(self) -> PackedRTree:
        if self._index is None:
            ids = sorted(self.segments)
            polylines = [[p.xy for p in self.segments[s].polyline] for s in ids]
            self._index = PackedRTree(ids, polylines)
        return self._index

    def with_segments(self, segments: dict[int, RoadSegment]) -> "RoadNetwork":
        """Copy with replaced segment records; the spatial index is shared when geometry is unchanged."""
        net = RoadNetwork(self.nodes, segments, self.projection)
        if segments.keys() == self.segments.keys() and all(
            segments[s].polyline is self.segments[s].polyline for s in segments
        ):
            net._index = self._index
        return net


def k_nearest_segments(net: RoadNetwork, p: GeoPoint, k: int = 8) -> list[tuple[int, float]]:
    """The ``min(k, |E|)`` segments closest to ``p``, ascending by distance then id."""
    if not net.segments:
        raise ValueError("k-nearest query on an empty network")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return net.index.nearest(p.x, p.y, k)


# -- loading -------------------------------------------------------------------


def _parse_linestring(text: str) -> list[tuple[float, float]]:
    geom = shapely.wkt.loads(text)
    if not isinstance(geom, LineString):
        raise ValueError(f"expected LINESTRING, got {geom.geom_type}")
    coords = [(float(c[0]), float(c[1])) for c in geom.coords]
    if len(coords) < 2:
        raise ValueError("LINESTRING needs at least two vertices")
    return coords


def load_network(source) -> RoadNetwork:
    """Read the network CSV (``segment_id,from_node,to_node,road_class,speed_limit_mps,wkt``)."""
    path = Path(source)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != NETWORK_HEADER:
            raise NetworkFormatError(f"{path}: line 1: expected header {','.join(NETWORK_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(NETWORK_HEADER):
                raise NetworkFormatError(f"{path}: line {lineno}: expected {len(NETWORK_HEADER)} fields, got {len(row)}")
            rec = dict(zip(NETWORK_HEADER, row))
            parsed = {}
            for name, conv in (("segment_id", int), ("from_node", int), ("to_node", int), ("speed_limit_mps", float), ("wkt", _parse_linestring)):
                try:
                    parsed[name] = conv(rec[name].strip())
                except Exception as exc:
                    raise NetworkFormatError(f"{path}: line {lineno}: bad field '{name}': {exc}") from None
            if not (parsed["speed_limit_mps"] > 0 and math.isfinite(parsed["speed_limit_mps"])):
                raise NetworkFormatError(f"{path}: line {lineno}: bad field 'speed_limit_mps': must be > 0")
            parsed["road_class"] = rec["road_class"].strip()
            parsed["lineno"] = lineno
            rows.append(parsed)
    return _build(rows, str(path))


def _build(rows, origin: str) -> RoadNetwork:
    seen = set()
    for r in rows:
        if r["segment_id"] in seen:
            raise NetworkFormatError(f"{origin}: line {r['lineno']}: duplicate segment id {r['segment_id']}")
        seen.add(r["segment_id"])

    # node coordinates come from polyline end vertices
    node_ll: dict[int, tuple[float, float]] = {}
    for r in rows:
        (lon_a, lat_a), (lon_b, lat_b) = r["wkt"][0], r["wkt"][-1]
        for nid, ll in ((r["from_node"], (lat_a, lon_a)), (r["to_node"], (lat_b, lon_b))):
            node_ll.setdefault(nid, ll)
    if node_ll:
        lat0 = sum(v[0] for v in node_ll.values()) / len(node_ll)
        lon0 = sum(v[1] for v in node_ll.values()) / len(node_ll)
    else:
        lat0 = lon0 = 0.0
    proj = Projection(lat0, lon0)
    nodes = {nid: proj.point(lat, lon) for nid, (lat, lon) in node_ll.items()}

    segments = {}
    for r in rows:
        pts = tuple(proj.point(lat, lon) for lon, lat in r["wkt"])
        for nid, pt in ((r["from_node"], pts[0]), (r["to_node"], pts[-1])):
            if distance(nodes[nid], pt) > NODE_TOLERANCE_M:
                raise NetworkFormatError(
                    f"{origin}: line {r['lineno']}: node {nid} position disagrees with earlier use by "
                    f"{distance(nodes[nid], pt):.2f} m"
                )
        # snap ends onto the shared node coordinates
        pts = (nodes[r["from_node"]],) + pts[1:-1] + (nodes[r["to_node"]],)
        if polyline_length(pts) <= 0.0:
            log.warning("%s: line %d: zero-length segment %d dropped", origin, r["lineno"], r["segment_id"])
            continue
        segments[r["segment_id"]] = RoadSegment(
            id=r["segment_id"],
            from_node=r["from_node"],
            to_node=r["to_node"],
            polyline=pts,
            road_class=r["road_class"],
            speed_limit=r["speed_limit_mps"],
            speed=r["speed_limit_mps"],
        )
    return RoadNetwork(nodes, segments, proj)


def write_network(net: RoadNetwork, dest) -> None:
    """Write ``net`` in the network CSV format (lon/lat via its projection)."""
    if net.projection is None:
        raise ValueError("network has no projection; cannot write WGS84 coordinates")
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NETWORK_HEADER)
        for sid in sorted(net.segments):
            seg = net.segments[sid]
            coords = []
            for p in seg.polyline:
                lat, lon = net.projection.to_latlon(p.x, p.y)
                coords.append(f"{lon:.10f} {lat:.10f}")
            w.writerow([sid, seg.from_node, seg.to_node, seg.road_class, repr(seg.speed_limit), f"LINESTRING ({', '.join(coords)})"])


# -- split overlay ---------------------------------------------------------------


class SplitOverlay:
    """Per-query view of a network with some segments cut at projection points.

    The base network is never modified.  New nodes and pieces get negative ids;
    pieces remember their base segment in ``parent``.
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self._cuts: dict[int, list[tuple[float, int]]] = {}
        self._points: dict[int, GeoPoint] = {}
        self._pieces: dict[int, list[RoadSegment]] = {}
        self._out: dict[int, tuple[RoadSegment, ...]] = {}
        self._next_node = -1
        self._next_seg = -1

    def out_edges(self, node: int):
        if node in self._out:
            return self._out[node]
        return self.net.out_edges(node)

    def node_point(self, node: int) -> GeoPoint:
        if node < 0:
            return self._points[node]
        return self.net.nodes[node]

    def pieces(self, sid: int) -> list[RoadSegment]:
        return list(self._pieces.get(sid, [self.net.segments[sid]]))

    def split(self, sid: int, p: GeoPoint) -> int:
        """Cut segment ``sid`` at the projection of ``p``; returns the node id there."""
        seg = self.net.segments[sid]
        proj = project_onto_polyline(seg.polyline, p)
        offset = proj.offset
        if offset <= SPLIT_EPS_M:
            return seg.from_node
        if offset >= seg.length - SPLIT_EPS_M:
            return seg.to_node
        cuts = self._cuts.setdefault(sid, [])
        for off, nid in cuts:
            if abs(off - offset) <= SPLIT_EPS_M:
                return nid
        nid = self._next_node
        self._next_node -= 1
        cuts.append((offset, nid))
        cuts.sort()
        self._points[nid] = proj.point
        self._rebuild(seg)
        return nid

    def _rebuild(self, seg: RoadSegment) -> None:
        cuts = self._cuts[seg.id]
        pieces = []
        rest = list(seg.polyline)
        start_node = seg.from_node
        consumed = 0.0
        for off, nid in cuts:
            head, rest, c = cut_polyline(rest, off - consumed)
            head[-1] = self._points[nid]
            rest[0] = self._points[nid]
            consumed = off
            pieces.append(self._piece(seg, start_node, nid, head))
            start_node = nid
        pieces.append(self._piece(seg, start_node, seg.to_node, rest))
        self._pieces[seg.id] = pieces

        # rewire outgoing lists: the base from_node loses seg, gains the first piece
        base_out = [e for e in self.out_edges(seg.from_node) if e.base_id != seg.id]
        base_out.append(pieces[0])
        self._out[seg.from_node] = tuple(sorted(base_out, key=_edge_sort_key))
        for pc in pieces[1:]:
            self._out[pc.from_node] = (pc,)

    def _piece(self, seg, a, b, pts) -> RoadSegment:
        sid = self._next_seg
        self._next_seg -= 1
        return RoadSegment(
            id=sid,
            from_node=a,
            to_node=b,
            polyline=tuple(pts),
            road_class=seg.road_class,
            speed_limit=seg.speed_limit,
            speed=seg.speed,
            parent=seg.id,
        )


def _edge_sort_key(e: RoadSegment):
    return (e.base_id, e.id)


def split_at_projection(net: RoadNetwork | SplitOverlay, seg: int, p: GeoPoint):
    """Split ``seg`` at ``p``'s projection in an overlay; returns (node id, overlay)."""
    overlay = net if isinstance(net, SplitOverlay) else SplitOverlay(net)
    return overlay.split(seg, p), overlay
