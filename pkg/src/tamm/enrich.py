"""Per-segment speed estimation from matched fixes, with class-constrained spreading."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .roadnet import RoadNetwork

OBSERVED = "observed"
SPREAD = "spread"
DEFAULT = "default"
PROVENANCES = (OBSERVED, SPREAD, DEFAULT)

# stationary fixes below this speed are not evidence of segment speed
MIN_MOVING_SPEED = 0.5

MODEL_HEADER = ["segment_id", "speed_mps", "support", "provenance"]


@dataclass(frozen=True)
class SpeedObservation:
    segment: int
    weight: float
    speed: float


@dataclass(frozen=True)
class SegmentSpeed:
    speed: float
    support: int
    provenance: str


class SpeedModel:
    """Running weighted sums per segment; ``entries`` holds finalized speeds.

    Accumulation is a commutative reduction, so partial models built on
    separate workers can be combined with :meth:`merge`.
    """

    def __init__(self):
        self.sums: dict[int, list] = {}  # segment -> [sum w*s, sum w, count]
        self.entries: dict[int, SegmentSpeed] = {}
        self.rounds = 0  # BFS rounds used by the last spread

    def accumulate(self, obs: SpeedObservation) -> "SpeedModel":
        if obs.weight < 0:
            raise ValueError(f"negative weight {obs.weight}")
        if obs.speed < MIN_MOVING_SPEED or obs.weight == 0.0:
            return self
        acc = self.sums.setdefault(obs.segment, [0.0, 0.0, 0])
        acc[0] += obs.weight * obs.speed
        acc[1] += obs.weight
        acc[2] += 1
        return self

    def merge(self, other: "SpeedModel") -> "SpeedModel":
        for sid, (ws, w, n) in other.sums.items():
            acc = self.sums.setdefault(sid, [0.0, 0.0, 0])
            acc[0] += ws
            acc[1] += w
            acc[2] += n
        return self

    def finalize(self) -> "SpeedModel":
        """Turn sums into observed speeds (segments with zero total weight stay unobserved)."""
        for sid, (ws, w, n) in self.sums.items():
            if w > 0.0:
                self.entries[sid] = SegmentSpeed(ws / w, n, OBSERVED)
        return self

    def speed(self, sid: int) -> float:
        return self.entries[sid].speed

    def provenance_counts(self) -> dict[str, int]:
        c = Counter(e.provenance for e in self.entries.values())
        return {p: c.get(p, 0) for p in PROVENANCES}


def accumulate(model: SpeedModel, obs: SpeedObservation) -> SpeedModel:
    return model.accumulate(obs)


def _neighbors(net: RoadNetwork) -> dict[int, list[int]]:
    """Segments sharing an end node, regardless of direction."""
    touching: dict[int, list[int]] = {n: [] for n in net.nodes}
    for sid in sorted(net.segments):
        seg = net.segments[sid]
        touching[seg.from_node].append(sid)
        if seg.to_node != seg.from_node:
            touching[seg.to_node].append(sid)
    out = {}
    for sid, seg in net.segments.items():
        nb = set(touching[seg.from_node]) | set(touching[seg.to_node])
        nb.discard(sid)
        out[sid] = sorted(nb)
    return out


def spread_speeds(net: RoadNetwork, model: SpeedModel) -> SpeedModel:
    """Propagate observed speeds to unobserved segments of the same class.

    Level-synchronous BFS: in each round every unassigned segment with at least
    one assigned same-class neighbour takes the mean of those neighbours'
    speeds, all computed from the state at the start of the round.  Whatever
    remains unreached falls back to its speed limit.
    """
    model.finalize()
    neighbors = _neighbors(net)
    assigned = {sid: e.speed for sid, e in model.entries.items() if sid in net.segments}
    frontier = True
    rounds = 0
    while frontier:
        rounds += 1
        frontier = {}
        for sid in sorted(net.segments):
            if sid in assigned:
                continue
            cls = net.segments[sid].road_class
            speeds = [assigned[n] for n in neighbors[sid] if n in assigned and net.segments[n].road_class == cls]
            if speeds:
                frontier[sid] = math.fsum(speeds) / len(speeds)
        for sid, v in frontier.items():
            assigned[sid] = v
            model.entries[sid] = SegmentSpeed(v, 0, SPREAD)
        if rounds > len(net.segments) + 1:  # pragma: no cover - cannot happen, each round assigns >= 1
            raise RuntimeError("speed spreading did not terminate")
    for sid, seg in net.segments.items():
        if sid not in model.entries:
            model.entries[sid] = SegmentSpeed(seg.speed_limit, 0, DEFAULT)
    model.rounds = rounds - 1
    return model


def apply_model(net: RoadNetwork, model: SpeedModel) -> RoadNetwork:
    """Network copy whose segment speeds (and travel times) come from ``model``."""
    missing = [sid for sid in sorted(net.segments) if sid not in model.entries]
    if missing:
        raise KeyError(f"speed model has no entry for segment {missing[0]}")
    segs = {sid: seg.with_speed(model.entries[sid].speed) for sid, seg in net.segments.items()}
    return net.with_segments(segs)


def observations(matched_points):
    """Speed observations from matched points; fixes without speed are skipped."""
    for mp in matched_points:
        if mp.fix.speed is None:
            continue
        yield SpeedObservation(mp.segment, mp.weight, mp.fix.speed)


def write_model(model: SpeedModel, dest) -> None:
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MODEL_HEADER)
        for sid in sorted(model.entries):
            e = model.entries[sid]
            w.writerow([sid, repr(e.speed), e.support, e.provenance])


def read_model(source) -> SpeedModel:
    path = Path(source)
    model = SpeedModel()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MODEL_HEADER:
            raise ValueError(f"{path}: line 1: expected header {','.join(MODEL_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sid, speed, support, prov = int(row[0]), float(row[1]), int(row[2]), row[3]
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if prov not in PROVENANCES or not speed > 0:
                raise ValueError(f"{path}: line {lineno}: bad provenance or speed")
            model.entries[sid] = SegmentSpeed(speed, support, prov)
    return model
