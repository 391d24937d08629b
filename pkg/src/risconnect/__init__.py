"""Simulation and optimization of RIS-assisted UAV network connectivity."""

from .channel import (
    ChannelRealization,
    FadingParams,
    NoDirectLink,
    PhaseProfile,
    channel_quality,
    optimal_phases,
    pathloss_los_uav,
    pathloss_ref,
    pathloss_umi,
    quantize_phases,
    rate,
    sample_nakagami,
    sample_realization,
    snr_approx,
    snr_direct,
    snr_exact,
    snr_uav_uav,
)
from .deploy import DeploymentResult, SAParams, neighbor, objective, sa_optimize
from .experiments import (
    ExperimentResult,
    Scheme,
    SchemeNotApplicable,
    emit,
    load_result,
    run_connectivity_vs_K,
    run_connectivity_vs_N,
    run_fig2,
    run_rate_vs_gamma0,
    run_rate_vs_zeta,
    run_scheme,
)
from .graph import (
    NetworkGraph,
    add_ris_edges,
    algebraic_connectivity,
    build_graph,
    laplacian,
    reliability,
)
from .partition import (
    DegenerateChannelError,
    PartitionSolution,
    check_feasibility,
    rho_x_remainder,
    rho_y_closed_form,
    solve_partition,
)
from .scenario import (
    Box,
    ConfigError,
    Position3D,
    ScenarioConfig,
    default_scenario,
    distance,
    dump_scenario,
    load_scenario,
    make_rng,
    place_uavs_random,
)

__version__ = "0.1.0"
