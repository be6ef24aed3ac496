"""Bayesian non-parametric monotonic ordinal regression.

Monotone ordinal regression surfaces built from marked point processes over
the non-empty covariate subsets, fitted by reversible-jump MCMC, with
simulation scenarios, posterior diagnostics, and a proportional-odds
baseline for comparison.
"""

from .geometry import (
    BoundsInterval,
    Configuration,
    MarkSpace,
    OriginPoint,
    SubspaceId,
    SupportPoint,
    dominates,
    enumerate_subspaces,
    evaluate_lambda,
    level_bounds,
    position_bounds,
    sample_mark_vector,
    validate,
)
from .likelihood import (
    Dataset,
    LinkSpec,
    ModelSpec,
    ParametricState,
    SurvivalCache,
    category_probs,
    log_likelihood,
    survival,
)
from .sampler import SampleRecord, SamplerConfig, run_chain
from .simulate import ScenarioSpec, TruthOracle, make_scenario, truth_probs

__version__ = "0.1.0"

__all__ = [
    "BoundsInterval",
    "Configuration",
    "Dataset",
    "LinkSpec",
    "MarkSpace",
    "ModelSpec",
    "OriginPoint",
    "ParametricState",
    "SampleRecord",
    "SamplerConfig",
    "ScenarioSpec",
    "SubspaceId",
    "SupportPoint",
    "SurvivalCache",
    "TruthOracle",
    "category_probs",
    "dominates",
    "enumerate_subspaces",
    "evaluate_lambda",
    "level_bounds",
    "log_likelihood",
    "make_scenario",
    "position_bounds",
    "run_chain",
    "sample_mark_vector",
    "survival",
    "truth_probs",
    "validate",
]
