"""Approximate spanning centrality for all edges of an undirected graph."""

from .baselines import (
    SpanningTree,
    monte_carlo_scores,
    monte_carlo_walk_count,
    spanning_tree_count,
    spanning_tree_scores,
    tree_edge_counts,
    wilson_spanning_tree,
)
from .graph import (
    EdgeListError,
    ErgodicityReport,
    Graph,
    GraphStructureError,
    generate_erdos_renyi,
    generate_ergodic_erdos_renyi,
    load_edge_list,
    require_ergodic,
    save_edge_list,
    validate_ergodic,
)
from .hybrid import (
    WalkBudget,
    WalkSumBounds,
    candidate_rho,
    estimator_range_bound,
    hoeffding_sample_count,
    hybrid_scores,
    random_walk,
    sample_remainder,
    should_switch_to_walks,
    walk_sum_bounds,
)
from .scores import EdgeScores, ScoreComparison, compare_score_tables, read_score_table
from .spectral import (
    DenseDistribution,
    EigensolverError,
    SpectralBasis,
    compute_spectral_basis,
    exact_scores_power,
    exact_scores_pseudoinverse,
    read_spectral_cache,
    toward_source,
    transition_power_row,
    write_spectral_cache,
)
from .traversal import (
    TraversalState,
    start_state,
    traversal_g_values,
    traverse_step,
    truncated_traversal_scores,
)
from .truncation import (
    TruncationTable,
    compute_truncation_table,
    edge_truncation_length,
    global_truncation_length,
    truncation_lengths,
)

__version__ = "0.1.0"
