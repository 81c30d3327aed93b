"""Time-aware map matching for low-sampling-rate GPS trajectories.

Fixes are snapped to segments with a gravity model (distance and heading
shares over the k nearest segments); the path between consecutive fixes is
the least-timecost route, where timecost measures how far each segment is
from explaining the pair's GPS travel time.
"""

__version__ = "0.1.0"

from .geo import GeoPoint, Projection  # noqa: E402
from .matcher import GpsFix, MatchedPoint, match_point  # noqa: E402
from .pipeline import MatchedTrajectory, Trajectory, batch_match, match_trajectory  # noqa: E402
from .roadnet import RoadNetwork, RoadSegment, load_network  # noqa: E402
from .router import MatchedPath, PairQuery, time_aware_dijkstra, timecost  # noqa: E402

__all__ = [
    "GeoPoint",
    "GpsFix",
    "MatchedPath",
    "MatchedPoint",
    "MatchedTrajectory",
    "PairQuery",
    "Projection",
    "RoadNetwork",
    "RoadSegment",
    "Trajectory",
    "batch_match",
    "load_network",
    "match_point",
    "match_trajectory",
    "time_aware_dijkstra",
    "timecost",
]
