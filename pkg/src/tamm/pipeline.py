"""End-to-end trajectory matching: headings, point matching, per-pair path reconstruction."""
from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .geo import distance
from .matcher import DEFAULT_K, GpsFix, MatchedPoint, MatchError, derive_headings, match_point
from .roadnet import RoadNetwork, SplitOverlay
from .router import HEURISTICS, MatchedPath, PairQuery, run_heuristic

log = logging.getLogger(__name__)

STAY_DISTANCE_M = 10.0


def normalize_heuristic(name: str) -> str:
    h = name.replace("-", "_").lower()
    if h not in HEURISTICS:
        raise ValueError(f"unknown heuristic {name!r}; expected one of time-aware, shortest, fastest")
    return h


@dataclass
class Trajectory:
    id: str
    user_id: str
    fixes: list[GpsFix]

    def __post_init__(self):
        for a, b in zip(self.fixes, self.fixes[1:]):
            if not b.timestamp > a.timestamp:
                raise ValueError(f"trajectory {self.id}: timestamps must be strictly increasing")


@dataclass
class PairStats:
    gps_time: float
    path_time: float | None
    flag: str  # ok | stay | no_path

    @property
    def delta(self) -> float | None:
        return None if self.path_time is None else self.gps_time - self.path_time


@dataclass
class MatchedTrajectory:
    trajectory_id: str
    heuristic: str
    matched_points: list[MatchedPoint]
    pair_paths: list[MatchedPath]
    stats: list[PairStats] = field(default_factory=list)

    @property
    def searches(self) -> int:
        return sum(1 for s in self.stats if s.flag != "stay")


@dataclass
class RejectedTrajectory:
    trajectory_id: str
    reason: str


def match_points(net: RoadNetwork, traj: Trajectory, k: int = DEFAULT_K) -> list[MatchedPoint]:
    if not traj.fixes:
        raise MatchError(f"trajectory {traj.id} has no fixes")
    fixes = derive_headings(traj.fixes)
    return [match_point(net, f, k) for f in fixes]


def reconstruct_pair(net: RoadNetwork, a: MatchedPoint, b: MatchedPoint, heuristic: str):
    """Path between two matched points; returns (MatchedPath, PairStats)."""
    gps_time = b.fix.timestamp - a.fix.timestamp
    if distance(a.fix.position, b.fix.position) < STAY_DISTANCE_M:
        return MatchedPath(found=True), PairStats(gps_time, 0.0, "stay")
    overlay = SplitOverlay(net)
    source = overlay.split(a.segment, a.projection)
    target = overlay.split(b.segment, b.projection)
    q = PairQuery.between(overlay, source, target, gps_time)
    path = run_heuristic(heuristic, overlay, q)
    if not path.found:
        return path, PairStats(gps_time, None, "no_path")
    return path, PairStats(gps_time, path.travel_time, "ok")


def match_trajectory(
    net: RoadNetwork,
    traj: Trajectory,
    heuristic: str = "time_aware",
    k: int = DEFAULT_K,
    matched_points: list[MatchedPoint] | None = None,
) -> MatchedTrajectory:
    """Match ``traj`` on ``net`` (whose speeds should already carry the speed model).

    Consecutive pairs are reconstructed independently, each on its own split
    overlay.  Pairs closer than ``STAY_DISTANCE_M`` get an empty path flagged
    ``stay``; unreachable pairs are kept with flag ``no_path``.
    """
    heuristic = normalize_heuristic(heuristic)
    mps = matched_points if matched_points is not None else match_points(net, traj, k)
    paths, stats = [], []
    for a, b in zip(mps, mps[1:]):
        path, st = reconstruct_pair(net, a, b, heuristic)
        paths.append(path)
        stats.append(st)
    return MatchedTrajectory(traj.id, heuristic, mps, paths, stats)


_worker_state: dict = {}


def _init_worker(state):
    _worker_state.clear()
    _worker_state.update(state)


def _call_in_worker(item):
    return _worker_state["fn"](item, **_worker_state["kwargs"])


def ordered_map(fn, items, workers: int = 1, chunksize: int = 8, **kwargs):
    """``fn(item, **kwargs)`` over ``items`` on up to ``workers`` processes, in input order.

    ``kwargs`` (typically the network) are handed to each worker once, at
    start-up; with the fork start method they are inherited, not pickled.
    """
    if workers <= 1:
        for item in items:
            yield fn(item, **kwargs)
        return
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    state = {"fn": fn, "kwargs": kwargs}
    with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker, initargs=(state,)) as pool:
        yield from pool.map(_call_in_worker, items, chunksize=chunksize)


def _safe_match(traj, net, heuristic, k):
    try:
        return match_trajectory(net, traj, heuristic, k)
    except (MatchError, ValueError) as exc:
        log.warning("trajectory %s rejected: %s", traj.id, exc)
        return RejectedTrajectory(traj.id, str(exc))


def batch_match(net: RoadNetwork, trajectories, heuristic: str = "time_aware", workers: int = 1, k: int = DEFAULT_K):
    """Match a stream of trajectories, yielding results in input order.

    Failures become ``RejectedTrajectory`` records instead of stopping the batch.
    Output does not depend on ``workers``.
    """
    heuristic = normalize_heuristic(heuristic)
    net.index  # build the spatial index once, before any worker is forked
    yield from ordered_map(_safe_match, trajectories, workers, net=net, heuristic=heuristic, k=k)
