import io
import math

import numpy as np
import pytest

from tamm import router
from tamm.enrich import apply_model, observations, spread_speeds, SpeedModel
from tamm.formats import write_matched
from tamm.geo import distance
from tamm.matcher import GpsFix
from tamm.pipeline import (
    STAY_DISTANCE_M,
    MatchedTrajectory,
    RejectedTrajectory,
    Trajectory,
    batch_match,
    match_trajectory,
    match_points,
    normalize_heuristic,
)
from tamm.synth import synth_world

from helpers import P, gadget_chain, straight_road, trajectory


def test_two_fixes_on_one_segment():
    net = straight_road(1, length=200.0, speed=10.0)
    mt = match_trajectory(net, trajectory([(20, 2), (180, -3)], dt=16.0))
    assert [mp.segment for mp in mt.matched_points] == [1, 1]
    (path,), (st,) = mt.pair_paths, mt.stats
    assert st.flag == "ok"
    assert path.segments == [1]
    assert st.path_time == pytest.approx(16.0)
    assert st.delta == pytest.approx(0.0, abs=1e-9)


def test_stationary_pair_is_a_stay():
    net = straight_road(2)
    before = router.counter.searches
    mt = match_trajectory(net, trajectory([(50, 0), (55, 0)], dt=60.0, heading=90.0))
    assert mt.stats[0].flag == "stay" and mt.stats[0].path_time == 0.0
    assert mt.pair_paths[0].segments == []
    assert mt.matched_points[0].segment == mt.matched_points[1].segment
    assert router.counter.searches == before
    assert mt.searches == 0


def test_unreachable_pair_is_flagged_no_path():
    net = straight_road(2)
    mt = match_trajectory(net, trajectory([(150, 0), (50, 0)], heading=90.0))
    assert mt.stats[0].flag == "no_path" and mt.stats[0].path_time is None


def test_heuristic_names():
    assert normalize_heuristic("time-aware") == "time_aware"
    assert normalize_heuristic("Shortest") == "shortest"
    with pytest.raises(ValueError):
        normalize_heuristic("astar")


# -- detour trip -------------------------------------------------------------------


def test_ten_fix_detour_trip():
    """A driver on the 72 s parallel street, fixes every 78 s at the junctions."""
    net = gadget_chain(9)
    traj = trajectory([(600.0 * i, 0.0) for i in range(10)], dt=78.0, heading=90.0)
    ta = match_trajectory(net, traj, "time_aware")
    sp = match_trajectory(net, traj, "shortest")
    assert len(ta.pair_paths) == 9
    for pa, pb in zip(ta.pair_paths, sp.pair_paths):
        assert any(s >= 100 for s in pa.segments)
        assert all(s < 100 for s in pb.segments)
    for st in ta.stats:
        assert st.path_time == pytest.approx(72.0)
    for st in sp.stats:
        assert st.path_time == pytest.approx(60.0)


# -- batches -----------------------------------------------------------------------


def _enriched_world(**kw):
    w = synth_world(**kw)
    m = SpeedModel()
    for tr in w.trajectories:
        for ob in observations(match_points(w.network, tr)):
            m.accumulate(ob)
    return w, apply_model(w.network, spread_speeds(w.network, m.finalize()))


def _csv(results):
    buf = io.StringIO()
    write_matched([r for r in results if isinstance(r, MatchedTrajectory)], buf)
    return buf.getvalue()


def test_batch_is_identical_across_worker_counts():
    w, net = _enriched_world(seed=3, grid_n=8, n_trajectories=100, sampling_s=30.0)
    serial = list(batch_match(net, w.trajectories, "time_aware", workers=1))
    parallel = list(batch_match(net, w.trajectories, "time_aware", workers=8))
    assert [r.trajectory_id for r in parallel] == [t.id for t in w.trajectories]
    assert _csv(serial) == _csv(parallel)
    assert len(_csv(serial).splitlines()) > 100


def test_empty_stream():
    assert list(batch_match(straight_road(1), [], workers=1)) == []
    assert list(batch_match(straight_road(1), iter([]), workers=4)) == []


def test_bad_trajectories_are_rejected_not_fatal():
    net = straight_road(2)
    good = trajectory([(20, 0), (180, 0)], dt=16.0, tid="good")
    lone = Trajectory("lone", "u", [GpsFix(0.0, P(10, 0))])  # no heading can be derived
    empty = Trajectory("empty", "u", [])
    out = list(batch_match(net, [lone, good, empty]))
    assert isinstance(out[0], RejectedTrajectory) and "lone" == out[0].trajectory_id
    assert isinstance(out[1], MatchedTrajectory)
    assert isinstance(out[2], RejectedTrajectory)


def test_one_search_per_non_stay_pair_on_48_segment_grid():
    w, net = _enriched_world(seed=11, grid_n=4, n_trajectories=1000, sampling_s=10.0, noise_m=5.0)
    assert len(net.segments) == 48
    expected = 0
    for t in w.trajectories:
        stays = sum(distance(a.position, b.position) < STAY_DISTANCE_M for a, b in zip(t.fixes, t.fixes[1:]))
        expected += len(t.fixes) - 1 - stays
    before = router.counter.searches
    results = list(batch_match(net, w.trajectories, "time_aware", workers=1))
    assert router.counter.searches - before == expected
    assert sum(r.searches for r in results) == expected


def test_path_time_is_sum_of_traversed_edge_times():
    w, net = _enriched_world(seed=5, grid_n=6, n_trajectories=30, sampling_s=20.0)
    checked = 0
    for mt in batch_match(net, w.trajectories, "time_aware"):
        for path, st in zip(mt.pair_paths, mt.stats):
            if st.flag != "ok":
                continue
            assert st.path_time == math.fsum(path.edge_times)
            assert len(path.edge_times) == len(path.edges) == len(path.segments)
            # whole base segments inside the path take exactly their enriched travel time
            for e, s, t in zip(path.edges, path.segments, path.edge_times):
                if e > 0:
                    assert e == s and t == net.segments[s].travel_time
            checked += 1
    assert checked >= 30


def test_pipeline_leaves_network_untouched():
    w, net = _enriched_world(seed=2, grid_n=5, n_trajectories=10, sampling_s=20.0)
    before = dict(net.segments)
    list(batch_match(net, w.trajectories))
    assert net.segments == before and all(s > 0 for s in net.segments)
