"""Aggregation-based PageRank.

Group web pages by a sparsity criterion on their external links, compute
an approximate PageRank from a reduced-order recursion with a-priori
1-norm error bounds, and simulate the randomized gossip scheme that
computes the per-group totals distributedly.
"""

from .aggregation import (
    AggregatedSystem,
    AssumptionReport,
    BlockTransforms,
    Decomposition,
    Partition,
    build_aggregated_system,
    decompose_link_matrix,
    lift_from_group_coords,
    load_groups,
    node_parameters,
    project_to_group_coords,
    refine_partition,
    save_groups,
    verify_assumption,
)
from .baseline import ConvergenceError, PageRankResult, power_method
from .gossip import (
    GossipConfig,
    ProbabilityReport,
    SimulationTrace,
    default_update_probabilities,
    fit_loglog_slope,
    full_subsets,
    gossip_step,
    mean_matrices,
    modified_damping,
    rate_bound,
    realize_link_matrix,
    simulate_gossip,
    singleton_subsets,
    validate_update_probabilities,
)
from .graph import (
    EdgeIdRangeError,
    EdgeListParseError,
    IsolatedNodeError,
    WebGraph,
    link_matrix,
    load_edge_list,
    parse_edge_list,
    repair_dangling,
    serialize_edge_list,
)
from .harness import (
    BlockWebSpec,
    ExperimentReport,
    GenerationError,
    delta_sweep,
    generate_block_web,
    initial_block_partition,
    run_experiment,
    standard_block_spec,
)
from .reduced import (
    ErrorBoundReport,
    ReducedResult,
    aggregated_pagerank_exact,
    delta_for_error_bound,
    deviation_solve_operator,
    error_bound_from_delta,
    error_bound_report,
    group_mean_error_bound,
    run_reduced_scheme,
)

__version__ = "0.1.0"
