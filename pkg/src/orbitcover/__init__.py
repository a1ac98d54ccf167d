"""Coverage control for constant-speed unicycle robot teams on convex regions.

A deterministic simulation library and CLI: convex-polygon geometry kernel,
Voronoi partitioning with adjacency, barrier-weighted coverage costs and
their gradients, saturated steering control, a conventional gradient-flow
baseline, and a synchronous message-passing realization of the controller.
"""

from . import errors
from .geometry import ConvexPolygon, ConvexRegion, DensityField, EdgeKernel, halfplane_intersect, polygon_moments, edge_kernel, shrink_region
from .voronoi import CellMoments, Configuration, VoronoiPartition, cell_moments, compute_partition, is_loc
from .coverage import (
    ControlParams,
    GradientBundle,
    centroid_jacobian,
    conventional_gradient,
    coverage_cost_h,
    coverage_cost_v,
    coverage_gradient,
    fd_gradient_oracle,
    gradient_bundle,
    off_loc_cost,
    off_loc_gradient,
)
from .dynamics import AgentState, SimTrace, StepRecord, control_input, sigmoid, simulate, step_conventional, step_csur, virtual_center
from .distributed import AgentMessage, NodeState, local_gradient, publish_state, synchronous_round
from .scenarios import AgentSpec, ParamSpec, Scenario, load_scenario, save_scenario
from .report import RunReport, check, emit_outputs, run

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
