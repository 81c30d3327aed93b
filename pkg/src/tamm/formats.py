"""CSV readers and writers for trajectories, ground truth and matched output."""
from __future__ import annotations

import csv
import math
from itertools import groupby
from pathlib import Path

from .geo import Projection
from .matcher import GpsFix

TRAJECTORY_HEADER = ["user_id", "traj_id", "timestamp_s", "lat", "lon", "speed_mps", "heading_deg"]
TRUTH_HEADER = ["traj_id", "seq", "segment_id"]
MATCHED_HEADER = ["traj_id", "pair_index", "gps_time_s", "path_time_s", "heuristic", "segment_ids", "flag"]


class TrajectoryFormatError(ValueError):
    pass


def id_key(value: str):
    """Sort key putting numeric ids in numeric order before other ids."""
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


def _opt_float(text: str):
    text = text.strip()
    return None if text == "" else float(text)


def read_trajectories(source, projection: Projection):
    """Yield ``Trajectory`` objects from the trajectory CSV, validating order."""
    from .pipeline import Trajectory

    path = Path(source)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        if [h.strip() for h in header] != TRAJECTORY_HEADER:
            raise TrajectoryFormatError(f"{path}: line 1: expected header {','.join(TRAJECTORY_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(TRAJECTORY_HEADER):
                raise TrajectoryFormatError(f"{path}: line {lineno}: expected {len(TRAJECTORY_HEADER)} fields")
            rec = dict(zip(TRAJECTORY_HEADER, (c.strip() for c in row)))
            try:
                ts, lat, lon = float(rec["timestamp_s"]), float(rec["lat"]), float(rec["lon"])
                speed, heading = _opt_float(rec["speed_mps"]), _opt_float(rec["heading_deg"])
                if not all(math.isfinite(v) for v in (ts, lat, lon)):
                    raise ValueError("non-finite value")
            except ValueError as exc:
                raise TrajectoryFormatError(f"{path}: line {lineno}: {exc}") from None
            rows.append((lineno, rec["user_id"], rec["traj_id"], ts, lat, lon, speed, heading))

    prev_key = None
    for traj_id, group in groupby(rows, key=lambda r: r[2]):
        group = list(group)
        key = id_key(traj_id)
        if prev_key is not None and key <= prev_key:
            raise TrajectoryFormatError(f"{path}: line {group[0][0]}: trajectories not sorted by traj_id at {traj_id!r}")
        prev_key = key
        fixes = []
        for lineno, _user, _tid, ts, lat, lon, speed, heading in group:
            if fixes and ts <= fixes[-1].timestamp:
                raise TrajectoryFormatError(f"{path}: line {lineno}: timestamps not strictly increasing in {traj_id!r}")
            try:
                fixes.append(GpsFix(ts, projection.point(lat, lon), speed, heading))
            except ValueError as exc:
                raise TrajectoryFormatError(f"{path}: line {lineno}: {exc}") from None
        yield Trajectory(traj_id, group[0][1], fixes)


def write_trajectories(trajs, dest, projection: Projection) -> None:
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t in trajs:
            for f in t.fixes:
                lat, lon = projection.to_latlon(f.position.x, f.position.y)
                w.writerow([
                    t.user_id,
                    t.id,
                    repr(f.timestamp),
                    f"{lat:.10f}",
                    f"{lon:.10f}",
                    "" if f.speed is None else repr(f.speed),
                    "" if f.heading is None else repr(f.heading),
                ])


def write_truth(truth: dict, dest) -> None:
    with Path(dest).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for tid in sorted(truth, key=id_key):
            for i, sid in enumerate(truth[tid]):
                w.writerow([tid, i, sid])


def read_truth(source) -> dict[str, list[int]]:
    path = Path(source)
    out: dict[str, list[int]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != TRUTH_HEADER:
            raise ValueError(f"{path}: line 1: expected header {','.join(TRUTH_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.setdefault(row[0], []).append(int(row[2]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out


def matched_rows(mt):
    """Output records for one ``MatchedTrajectory``."""
    for i, (path, st) in enumerate(zip(mt.pair_paths, mt.stats)):
        if st.flag == "stay":
            seg_ids = ""
        elif path is None or not path.found:
            seg_ids = ""
        else:
            seg_ids = ";".join(str(s) for s in path.segments)
        path_time = "" if st.path_time is None else repr(st.path_time)
        yield [mt.trajectory_id, i, repr(st.gps_time), path_time, mt.heuristic, seg_ids, st.flag]


def write_matched(results, fh) -> int:
    """Write matched records to an open text file; returns the number of pairs written."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MATCHED_HEADER)
    n = 0
    for mt in results:
        for row in matched_rows(mt):
            w.writerow(row)
            n += 1
    return n


def read_matched(source):
    """Rows of a matched output file as dicts with parsed numbers."""
    path = Path(source)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MATCHED_HEADER:
            raise ValueError(f"{path}: line 1: expected header {','.join(MATCHED_HEADER)}")
        for rec in reader:
            yield {
                "traj_id": rec["traj_id"],
                "pair_index": int(rec["pair_index"]),
                "gps_time": float(rec["gps_time_s"]),
                "path_time": None if rec["path_time_s"] == "" else float(rec["path_time_s"]),
                "heuristic": rec["heuristic"],
                "segments": [int(s) for s in rec["segment_ids"].split(";")] if rec["segment_ids"] else [],
                "flag": rec["flag"],
            }
