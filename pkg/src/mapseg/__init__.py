"""Minimal map-segment mining and topometric localization toolkit."""

from .core import (
    MapSegment,
    Multicut,
    ObjectBox,
    Partition,
    PointTrajectory,
    PoseLog,
    TrajectoryGraph,
    partition_to_multicut,
    validate_graph,
)
from .multicut import (
    EdgeGraph,
    SolveResult,
    components_of,
    is_feasible,
    objective_of,
    solve_exact,
    solve_gaec,
)

__version__ = "0.1.0"
