"""Evaluation: ground-truth accuracy, middle-point test, temporal alignment."""
from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .matcher import DEFAULT_K
from .matcher import MatchError
from .pipeline import MatchedTrajectory, Trajectory, match_points, match_trajectory, normalize_heuristic, ordered_map
from .synth import SynthConfig, SynthWorld, synth_world  # noqa: F401  (re-exported)

ALIGNMENT_BIN_S = 30.0


def matched_segments(mt: MatchedTrajectory) -> set[int]:
    """Base segment ids touched by a matched trajectory (paths and matched points)."""
    segs = {mp.segment for mp in mt.matched_points}
    for p in mt.pair_paths:
        if p is not None and p.found:
            segs.update(p.segments)
    return segs


def accuracy(mt: MatchedTrajectory, truth) -> float:
    """Share of ground-truth segments present in the match (set based)."""
    truth = set(truth)
    if not truth:
        raise ValueError(f"empty ground truth for trajectory {mt.trajectory_id}")
    return len(matched_segments(mt) & truth) / len(truth)


def hidden_indices(n: int) -> list[int]:
    """Middle fix of each consecutive triplet: 0-based odd indices with a successor."""
    return [i for i in range(1, n - 1, 2)]


@dataclass
class MidpointResult:
    hidden: int
    hits: int

    @property
    def score(self) -> float | None:
        return self.hits / self.hidden if self.hidden else None


def middle_point_detail(net, traj: Trajectory, heuristic: str, k: int = DEFAULT_K, full_points=None) -> MidpointResult | None:
    n = len(traj.fixes)
    if n < 3:
        return None
    full = full_points if full_points is not None else match_points(net, traj, k)
    hidden = hidden_indices(n)
    hidden_set = set(hidden)
    kept = [i for i in range(n) if i not in hidden_set]
    half = Trajectory(traj.id, traj.user_id, [traj.fixes[i] for i in kept])
    mt = match_trajectory(net, half, heuristic, k)
    pos = {orig: j for j, orig in enumerate(kept)}
    hits = 0
    for i in hidden:
        j = pos[i - 1]
        path, st = mt.pair_paths[j], mt.stats[j]
        if st.flag == "stay":
            covered = {mt.matched_points[j].segment, mt.matched_points[j + 1].segment}
        elif path.found:
            covered = set(path.segments)
        else:
            covered = set()
        hits += full[i].segment in covered
    return MidpointResult(len(hidden), hits)


def middle_point_test(net, traj: Trajectory, heuristic: str, k: int = DEFAULT_K, full_points=None) -> float | None:
    """Hide every triplet's middle fix, re-match at half rate, and score coverage.

    Returns the fraction of hidden fixes whose full-rate gravity segment lies on
    the reconstructed path spanning them, or None for trajectories with fewer
    than three fixes.
    """
    res = middle_point_detail(net, traj, heuristic, k, full_points)
    return None if res is None else res.score


@dataclass
class MidpointSummary:
    """Middle-point results of one heuristic over a trajectory set.

    ``score`` pools all hidden fixes; ``mean_trajectory_score`` averages the
    per-trajectory scores.  Trajectories with fewer than three fixes are
    counted in ``skipped``.
    """

    heuristic: str
    trajectories: int = 0
    skipped: int = 0
    hidden: int = 0
    hits: int = 0
    per_trajectory: list = field(default_factory=list)

    @property
    def score(self) -> float | None:
        return self.hits / self.hidden if self.hidden else None

    @property
    def mean_trajectory_score(self) -> float | None:
        return statistics.fmean(self.per_trajectory) if self.per_trajectory else None

    def as_dict(self) -> dict:
        return {
            "score": self.score,
            "mean_trajectory_score": self.mean_trajectory_score,
            "trajectories": self.trajectories,
            "skipped": self.skipped,
            "hidden": self.hidden,
            "hits": self.hits,
        }


def _midpoint_one(traj, net, heuristics, k):
    if len(traj.fixes) < 3:
        return {h: None for h in heuristics}
    try:
        full = match_points(net, traj, k)
        return {h: middle_point_detail(net, traj, h, k, full) for h in heuristics}
    except (MatchError, ValueError):
        return {h: None for h in heuristics}


def midpoint_suite(net, trajectories, heuristics=("time_aware", "shortest", "fastest"), k: int = DEFAULT_K, workers: int = 1) -> dict[str, MidpointSummary]:
    """Run the middle-point test for several heuristics; full-rate matching is shared."""
    heuristics = [normalize_heuristic(h) for h in heuristics]
    out = {h: MidpointSummary(h) for h in heuristics}
    net.index
    for res in ordered_map(_midpoint_one, trajectories, workers, net=net, heuristics=heuristics, k=k):
        for h, r in res.items():
            s = out[h]
            s.trajectories += 1
            if r is None or r.score is None:
                s.skipped += 1
                continue
            s.hidden += r.hidden
            s.hits += r.hits
            s.per_trajectory.append(r.score)
    return out


@dataclass
class AlignmentBin:
    start: float
    mean_path_time: float
    std: float
    count: int


@dataclass
class AlignmentReport:
    bins: list[AlignmentBin] = field(default_factory=list)
    mean_delta_pct: float = math.nan
    pairs: int = 0


def alignment_pairs(results):
    """(gps_time, path_time) for every pair with a reconstructed path."""
    for mt in results:
        if not isinstance(mt, MatchedTrajectory):
            continue
        for st in mt.stats:
            if st.flag == "ok":
                yield st.gps_time, st.path_time


def alignment_report(pairs_or_results, bin_width: float = ALIGNMENT_BIN_S) -> AlignmentReport:
    """Bin pairs by GPS time and summarise path-time agreement.

    Accepts MatchedTrajectory objects or plain (gps_time, path_time) tuples.
    Stay and no-path pairs carry no path time and are left out.
    """
    items = list(pairs_or_results)
    if items and isinstance(items[0], tuple):
        pairs = items
    else:
        pairs = list(alignment_pairs(items))
    if not pairs:
        return AlignmentReport()
    groups: dict[int, list[float]] = {}
    for g, p in pairs:
        groups.setdefault(int(g // bin_width), []).append(p)
    bins = [
        AlignmentBin(b * bin_width, statistics.fmean(v), statistics.pstdev(v), len(v))
        for b, v in sorted(groups.items())
    ]
    delta = statistics.fmean(abs(p - g) / g * 100.0 for g, p in pairs)
    return AlignmentReport(bins, delta, len(pairs))


def write_alignment_csv(report: AlignmentReport, dest) -> None:
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_start_s", "mean_path_time_s", "std_s", "count"])
        for b in report.bins:
            w.writerow([repr(b.start), repr(b.mean_path_time), repr(b.std), b.count])


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    return v


def write_summary(summary: dict, dest) -> None:
    Path(dest).write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
