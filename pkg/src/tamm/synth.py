"""Synthetic grid worlds with simulated drivers, noisy low-rate fixes and ground truth."""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GeoPoint, Projection
from .matcher import GpsFix
from .pipeline import Trajectory
from .roadnet import RoadNetwork, RoadSegment
from .router import least_cost_path

DEFAULT_SPEED_CLASSES = {"primary": 20.0, "secondary": 13.0, "residential": 8.0}
ORIGIN_LATLON = (43.7167, 10.4000)
EPOCH = 1_300_000_000.0

log = logging.getLogger(__name__)


@dataclass
class SynthConfig:
    seed: int = 0
    grid_n: int = 10
    spacing_m: float = 100.0
    speed_classes: dict = field(default_factory=lambda: dict(DEFAULT_SPEED_CLASSES))
    # uniform perturbation of node positions, as a fraction of spacing; keeps
    # shortest paths unique
    node_jitter: float = 0.1
    n_trajectories: int = 100
    sampling_s: float = 60.0
    noise_m: float = 10.0
    detour_fraction: float = 0.3
    fastest_fraction: float = 0.35
    min_trip_m: float = 0.0
    min_fixes: int = 2
    heading_jitter_deg: float = 18.0
    speed_jitter: float = 0.1


@dataclass
class SynthTrip:
    profile: str  # shortest | fastest | detour
    route: list[int]  # segment ids in travel order
    true_segments: list[int]  # segment under each fix
    route_index: list[int]  # position in ``route`` of each fix
    fix_offsets: list[float]  # metres travelled at each fix


@dataclass
class SynthWorld:
    network: RoadNetwork
    trajectories: list[Trajectory]
    truth: dict[str, list[int]]
    trips: dict[str, SynthTrip]
    config: SynthConfig


def line_class(i: int, classes: list[str]) -> str:
    """Class of the i-th grid line: every 2**(K-1)-th line is the fastest, and so on."""
    k = len(classes)
    if i == 0:
        return classes[0]
    tz = (i & -i).bit_length() - 1
    return classes[max(0, k - 1 - tz)]


def grid_network(cfg: SynthConfig, rng: np.random.Generator | None = None) -> RoadNetwork:
    """Bidirectional ``grid_n`` x ``grid_n`` street grid centred on the origin."""
    if cfg.grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    n, s = cfg.grid_n, cfg.spacing_m
    classes = sorted(cfg.speed_classes, key=lambda c: -cfg.speed_classes[c])
    proj = Projection(*ORIGIN_LATLON)
    half = (n - 1) / 2.0
    jitter = np.zeros((n * n, 2))
    if rng is not None and cfg.node_jitter > 0:
        jitter = rng.uniform(-cfg.node_jitter * s, cfg.node_jitter * s, size=(n * n, 2))
        jitter -= jitter.mean(axis=0)  # keep the centroid on the projection origin
    nodes = {}
    for r in range(n):
        for c in range(n):
            nid = r * n + c
            x = (c - half) * s + float(jitter[nid, 0])
            y = (r - half) * s + float(jitter[nid, 1])
            lat, lon = proj.to_latlon(x, y)
            nodes[nid] = GeoPoint(x, y, lat=lat, lon=lon)

    segments = {}
    sid = 1

    def add(a, b, cls):
        nonlocal sid
        v = cfg.speed_classes[cls]
        segments[sid] = RoadSegment(sid, a, b, (nodes[a], nodes[b]), cls, v, v)
        sid += 1

    for r in range(n):  # east-west streets
        cls = line_class(r, classes)
        for c in range(n - 1):
            a, b = r * n + c, r * n + c + 1
            add(a, b, cls)
            add(b, a, cls)
    for c in range(n):  # north-south streets
        cls = line_class(c, classes)
        for r in range(n - 1):
            a, b = r * n + c, (r + 1) * n + c
            add(a, b, cls)
            add(b, a, cls)
    return RoadNetwork(nodes, segments, proj)


def _route(net, rng, profile, o, d, n, cfg):
    eps = rng.uniform(0.0, 1e-3, size=max(net.segments) + 1)
    if profile == "shortest":
        cost = lambda e: e.length * (1.0 + eps[e.id])  # noqa: E731
    else:
        cost = lambda e: e.travel_time * (1.0 + eps[e.id])  # noqa: E731
    if profile != "detour":
        return least_cost_path(net, o, d, cost).edges
    # detour: pass through a waypoint near the bounding box of the trip
    ro, co = divmod(o, n)
    rd, cd = divmod(d, n)
    r = int(rng.integers(max(0, min(ro, rd) - 2), min(n - 1, max(ro, rd) + 2) + 1))
    c = int(rng.integers(max(0, min(co, cd) - 2), min(n - 1, max(co, cd) + 2) + 1))
    w = r * n + c
    if w in (o, d):
        return None
    first = least_cost_path(net, o, w, cost).edges
    second = least_cost_path(net, w, d, cost).edges
    direct = set(least_cost_path(net, o, d, cost).edges)
    if not (set(first) | set(second)) - direct:
        return None
    return first + second


def _simulate(net, route, rng, cfg, start_time):
    segs = [net.segments[s] for s in route]
    cum_t = [0.0]
    cum_d = [0.0]
    for sg in segs:
        cum_t.append(cum_t[-1] + sg.travel_time)
        cum_d.append(cum_d[-1] + sg.length)
    total = cum_t[-1]
    phase = float(rng.uniform(0.0, cfg.sampling_s))
    times = np.arange(phase, total, cfg.sampling_s)
    fixes, idx, offsets = [], [], []
    for t in times:
        i = min(bisect.bisect_right(cum_t, t) - 1, len(segs) - 1)
        sg = segs[i]
        frac = (t - cum_t[i]) / sg.travel_time
        a, b = sg.polyline[0], sg.polyline[-1]
        x = a.x + frac * (b.x - a.x)
        y = a.y + frac * (b.y - a.y)
        nx, ny = rng.normal(0.0, cfg.noise_m, size=2) if cfg.noise_m > 0 else (0.0, 0.0)
        heading = sg.heading + float(rng.uniform(-cfg.heading_jitter_deg, cfg.heading_jitter_deg))
        speed = sg.speed * float(rng.uniform(1.0 - cfg.speed_jitter, 1.0 + cfg.speed_jitter))
        fixes.append(GpsFix(start_time + float(t), GeoPoint(x + float(nx), y + float(ny)), speed, heading))
        idx.append(i)
        offsets.append(cum_d[i] + frac * sg.length)
    return fixes, idx, offsets


def synth_world(seed: int = 0, grid_n: int = 10, spacing_m: float = 100.0, speed_classes=None, **kw) -> SynthWorld:
    """Build a grid world and simulated trips, deterministic per seed.

    Drivers follow one of three profiles: shortest route, fastest route, or a
    fastest route bent through a random waypoint (detour).  Ground truth is
    the traversed segment sequence from the first to the last fix.
    """
    cfg = SynthConfig(seed=seed, grid_n=grid_n, spacing_m=spacing_m, **kw)
    if speed_classes is not None:
        cfg.speed_classes = dict(speed_classes)
    rng = np.random.default_rng(seed)
    net = grid_network(cfg, rng)
    n = cfg.grid_n
    trajs, truth, trips = [], {}, {}
    attempts = 0
    while len(trajs) < cfg.n_trajectories:
        attempts += 1
        if attempts > 50 * cfg.n_trajectories + 100:
            log.warning(
                "generated %d of %d trajectories: trips on this grid are too short for %d fixes at %.0f s sampling",
                len(trajs), cfg.n_trajectories, max(2, cfg.min_fixes), cfg.sampling_s,
            )
            break
        u = float(rng.uniform())
        if u < cfg.detour_fraction:
            profile = "detour"
        elif u < cfg.detour_fraction + cfg.fastest_fraction:
            profile = "fastest"
        else:
            profile = "shortest"
        o, d = (int(v) for v in rng.integers(0, n * n, size=2))
        if o == d:
            continue
        po, pd = net.nodes[o], net.nodes[d]
        if math.hypot(po.x - pd.x, po.y - pd.y) < cfg.min_trip_m:
            continue
        route = _route(net, rng, profile, o, d, n, cfg)
        if not route:
            continue
        tid = str(len(trajs))
        start = EPOCH + 3600.0 * len(trajs)
        fixes, idx, offsets = _simulate(net, route, rng, cfg, start)
        if len(fixes) < max(2, cfg.min_fixes):
            continue
        trajs.append(Trajectory(tid, str(len(trajs) % 50), fixes))
        truth[tid] = route[idx[0] : idx[-1] + 1]
        trips[tid] = SynthTrip(profile, route, [route[i] for i in idx], idx, offsets)
    return SynthWorld(net, trajs, truth, trips, cfg)
