"""Cluster recovery in block Markov chains."""

__version__ = "0.1.0"

from .estimators import BlockMarkovClustering, ClusterImprovement, SpectralClustering
from .improve import estimate_parameters, improve, improvement_step, objective
from .info import (
    check_zero_condition,
    feasibility_raster,
    find_balanced_perturbation,
    information_pair,
    information_quantity,
    perturbation_functional,
)
from .metrics import baseline_rates, misclassification
from .model import (
    PRESETS,
    BmcModel,
    Partition,
    StateKernel,
    build_transition_matrix,
    load_model,
    mixing_time_bound,
    solve_stationary_block,
    solve_stationary_exact,
)
from .simulate import (
    CountMatrix,
    Trajectory,
    count_matrix,
    expected_count_matrix,
    simulate_counts,
    simulate_trajectory,
)
from .spectral import neighborhood_radius, rank_k_approx, spectral_cluster, spectral_noise_norm, trim

__all__ = [
    "BlockMarkovClustering",
    "BmcModel",
    "ClusterImprovement",
    "CountMatrix",
    "PRESETS",
    "Partition",
    "SpectralClustering",
    "StateKernel",
    "Trajectory",
    "baseline_rates",
    "build_transition_matrix",
    "check_zero_condition",
    "count_matrix",
    "estimate_parameters",
    "expected_count_matrix",
    "feasibility_raster",
    "find_balanced_perturbation",
    "improve",
    "improvement_step",
    "information_pair",
    "information_quantity",
    "load_model",
    "misclassification",
    "mixing_time_bound",
    "neighborhood_radius",
    "objective",
    "perturbation_functional",
    "rank_k_approx",
    "simulate_counts",
    "simulate_trajectory",
    "solve_stationary_block",
    "solve_stationary_exact",
    "spectral_cluster",
    "spectral_noise_norm",
    "trim",
]
