"""Learning high-dimensional functions in tree-based tensor formats."""

from .bases import LegendreBasis, basis_eval, leaf_patterns
from .linalg import SvdResult, dematricize, matricize, mode_multiply, truncated_svd
from .network import (
    TreeTensorNetwork,
    add,
    alpha_orthogonalize,
    assemble_full,
    evaluate,
    load,
    norm,
    orthogonalize,
    permute_representation,
    random_network,
    save,
    singular_spectrum,
    storage_complexity,
    truncate,
)
from .adaptation import (
    AdaptConfig,
    IterationRecord,
    adaptive_fit,
    rank_adaptive_fit,
    select_rank_increase,
    tree_optimize,
)
from .benchmarks import (
    ExperimentSpec,
    optimal_tree_indicator,
    run_experiment,
    run_trial,
    sample_data,
    test_function,
)
from .estimator import TreeTensorRegressor
from .learning import (
    AlsConfig,
    RiskEstimate,
    TrainingData,
    als_fit,
    corrected_loo_risk,
    loo_risk,
    node_design_matrix,
    risks,
    solve_with_pattern_selection,
)
from .tree import (
    DimensionTree,
    PermutationMove,
    build_tree,
    draw_move_sequence,
    is_admissible,
    node_relations,
    permute_topology,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AlsConfig",
    "DimensionTree",
    "ExperimentSpec",
    "IterationRecord",
    "RiskEstimate",
    "TrainingData",
    "TreeTensorRegressor",
    "adaptive_fit",
    "als_fit",
    "corrected_loo_risk",
    "loo_risk",
    "node_design_matrix",
    "optimal_tree_indicator",
    "rank_adaptive_fit",
    "risks",
    "run_experiment",
    "run_trial",
    "sample_data",
    "select_rank_increase",
    "solve_with_pattern_selection",
    "test_function",
    "tree_optimize",
    "LegendreBasis",
    "PermutationMove",
    "SvdResult",
    "TreeTensorNetwork",
    "add",
    "alpha_orthogonalize",
    "assemble_full",
    "basis_eval",
    "build_tree",
    "dematricize",
    "draw_move_sequence",
    "evaluate",
    "is_admissible",
    "leaf_patterns",
    "load",
    "matricize",
    "mode_multiply",
    "node_relations",
    "norm",
    "orthogonalize",
    "permute_representation",
    "permute_topology",
    "random_network",
    "save",
    "singular_spectrum",
    "storage_complexity",
    "truncate",
    "truncated_svd",
]
