"""raycell: ray-based mmWave small-cell network simulator."""

__version__ = "0.1.0"

from .scene import (
    Building,
    CellSite,
    ObstructionBox,
    Scene,
    UserTerminal,
    VegBlock,
    drop_users,
    generate_manhattan,
    load_scene,
    dump_scene,
    segment_obstacles,
    validate_topology,
)
from .raytrace import (
    PathContribution,
    RayTracer,
    TraceConfig,
    fspl,
    knife_edge_loss,
    relative_power,
    trace_paths,
    vegetation_excess_loss,
)
from .radio import (
    AntennaPattern,
    LinkBudget,
    McsTable,
    PATTERN_15DEG,
    PATTERN_22DEG,
    beam_grid,
    best_beam,
    default_mcs_table,
    noise_floor,
    pattern_gain,
    received_power,
    select_mcs,
    tx_power_for_eirp,
)
from .simnet import (
    SimConfig,
    SimulationReport,
    attach_users,
    compare_antennas,
    compute_system_state,
    run_campaign,
    run_iteration,
)
from .scenariolab import (
    BinnedStats,
    coverage_grid,
    distance_binned_stats,
    filter_vegetation,
    insert_obstruction,
    obstruction_study,
)
