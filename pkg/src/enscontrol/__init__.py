"""Stochastic ensemble approximation and control of discrete-time LTI systems.

The package samples vectors and matrices into singleton-support
realizations, combines the realizations into estimates with uniform,
batch least-squares or streaming weights, synthesizes one-step and
tracking controls from sampled ensembles, checks simplex-constrained
reachability, and verifies exponential deviation bounds by Monte Carlo.
"""

__version__ = "0.1.0"

from .averaging import (
    EmptySampleSetError,
    EnsembleEstimate,
    NonConvergenceError,
    ShapeMismatchError,
    alse_general_weights,
    alse_vector_weights,
    ensemble_estimate,
    project_simplex,
    slse_step,
    uniform_weights,
    weighted_sum,
)
from .bounds import (
    BoundSpec,
    VarianceBoundInputs,
    component_deviation_frequencies,
    control_variance_bound,
    empirical_deviation_curve,
    norm_constants,
    one_step_error_bound,
    state_variance_bound,
    weighted_hoeffding_bound,
)
from .control import (
    StreamingState,
    TrajectoryResult,
    combine_controls_uniform,
    ensemble_control,
    one_step_control,
    per_sample_controls,
    pseudo_inverse,
    streaming_control,
    track_trajectory,
)
from .ensemble import (
    DltiSystem,
    SampleMatrix,
    SampleVector,
    ZeroMassError,
    draw_ensemble,
    gamma_mat,
    gamma_vec,
    sample_matrix,
    sample_vector,
)
from .matio import ParseError, RaggedRowsError, load_matrix, load_vector, save_matrix, save_vector
from .reachability import (
    NotColumnStochasticError,
    ReachabilityReport,
    ReachResult,
    controllability_matrix,
    empirical_approx_reachability,
    project_ones_complement,
    reachable_in_k,
    simplex_reachability_check,
)
from .rng import RngStream

__all__ = [
    "BoundSpec",
    "DltiSystem",
    "EmptySampleSetError",
    "EnsembleEstimate",
    "NonConvergenceError",
    "NotColumnStochasticError",
    "ParseError",
    "RaggedRowsError",
    "ReachResult",
    "ReachabilityReport",
    "RngStream",
    "SampleMatrix",
    "SampleVector",
    "ShapeMismatchError",
    "StreamingState",
    "TrajectoryResult",
    "VarianceBoundInputs",
    "ZeroMassError",
    "alse_general_weights",
    "alse_vector_weights",
    "combine_controls_uniform",
    "component_deviation_frequencies",
    "control_variance_bound",
    "controllability_matrix",
    "draw_ensemble",
    "empirical_approx_reachability",
    "empirical_deviation_curve",
    "ensemble_control",
    "ensemble_estimate",
    "gamma_mat",
    "gamma_vec",
    "load_matrix",
    "load_vector",
    "norm_constants",
    "one_step_control",
    "one_step_error_bound",
    "per_sample_controls",
    "project_ones_complement",
    "project_simplex",
    "pseudo_inverse",
    "reachable_in_k",
    "sample_matrix",
    "sample_vector",
    "save_matrix",
    "save_vector",
    "simplex_reachability_check",
    "slse_step",
    "state_variance_bound",
    "streaming_control",
    "track_trajectory",
    "uniform_weights",
    "weighted_hoeffding_bound",
    "weighted_sum",
]
