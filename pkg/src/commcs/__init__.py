"""Compound Monte Carlo value estimation toolkit.

Implements an unbiased compound value estimator that mixes a state's own
Monte Carlo estimate with its sampled successor's, choosing the mixing
coefficient only when a plug-in variance comparison proves a strict
reduction.  Ships with a synthetic tree-MDP harness, tabular verifier
training, and a CLI for dataset annotation and validation sweeps.
"""

from .binomial import (
    RolloutRecord,
    VarianceReport,
    fisher_and_crlb,
    mc_estimate,
    mc_variance,
    sample_rollouts,
)
from .compound import (
    CoefficientCandidates,
    DEFAULT_CANDIDATES,
    RefinedLabel,
    STATIC_COEFFICIENT_SET,
    StepStatistics,
    compound_estimate,
    compound_variance_general,
    compound_variance_two_term,
    refine_annotations,
    select_coefficient,
    select_coefficients_batch,
)
from .distribution import (
    CategoricalValueDistribution,
    GaussianSpec,
    MomentPair,
    NormalizationError,
    bin_centers,
    discrete_moments,
    exact_dv1_from_children,
    expectation,
    project_density,
    project_gaussian,
)
from .mdp import (
    GeneratorConfig,
    MdpSizeError,
    MdpState,
    StepAnnotation,
    SyntheticMdp,
    TrajectoryAnnotation,
    annotate_trajectory,
    descendant_distribution,
    exact_dv1,
    exact_values,
    generate,
    mdp_from_json,
    mdp_to_json,
    rollout,
    sample_path,
)
from .rng import derive_rng
from .verifier import (
    ConfigError,
    TabularVerifier,
    TrainConfig,
    TrainReport,
    build_target,
    score_trajectory,
    state_key,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "RolloutRecord",
    "VarianceReport",
    "fisher_and_crlb",
    "mc_estimate",
    "mc_variance",
    "sample_rollouts",
    "CoefficientCandidates",
    "DEFAULT_CANDIDATES",
    "RefinedLabel",
    "STATIC_COEFFICIENT_SET",
    "StepStatistics",
    "compound_estimate",
    "compound_variance_general",
    "compound_variance_two_term",
    "refine_annotations",
    "select_coefficient",
    "select_coefficients_batch",
    "CategoricalValueDistribution",
    "GaussianSpec",
    "MomentPair",
    "NormalizationError",
    "bin_centers",
    "discrete_moments",
    "exact_dv1_from_children",
    "expectation",
    "project_density",
    "project_gaussian",
    "GeneratorConfig",
    "MdpSizeError",
    "MdpState",
    "StepAnnotation",
    "SyntheticMdp",
    "TrajectoryAnnotation",
    "annotate_trajectory",
    "descendant_distribution",
    "exact_dv1",
    "exact_values",
    "generate",
    "mdp_from_json",
    "mdp_to_json",
    "rollout",
    "sample_path",
    "derive_rng",
    "ConfigError",
    "TabularVerifier",
    "TrainConfig",
    "TrainReport",
    "build_target",
    "score_trajectory",
    "state_key",
    "train",
    "__version__",
]
