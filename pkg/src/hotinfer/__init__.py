"""Confidence intervals for high-dimensional linear regression.

Coefficients are de-biased along directions built by hybrid
orthogonalization: exact projection against a screened set of strong
columns followed by a weighted lasso against the rest.
"""

from .data import Dataset, OracleTruth, load_csv, standardize
from .estimators import HOLPScreener, HOTRegressor, LDPERegressor, ScaledLasso, SISScreener
from .exceptions import HotInferError
from .inference import (
    InferenceConfig,
    InferenceReport,
    InferenceResult,
    confidence_interval,
    decomposition,
    hot_alternative_estimate,
    hot_estimate,
    infer_all,
    ldpe_estimate,
)
from .orthogonalization import (
    Tuning,
    exact_orthogonalize,
    hybrid_direction,
    ldpe_direction,
    partial_penalized_direction,
)
from .screening import ScreenSet, holp_rank, screen, sis_rank, user_screen
from .simulation import ApproxSparse, SimConfig, SparseUniform, run_replications
from .solvers import PenaltySpec, gic_tune, quantile_lambda, scaled_lasso, weighted_lasso

__version__ = "0.1.0"

__all__ = [
    "ApproxSparse", "Dataset", "HOLPScreener", "HOTRegressor", "HotInferError", "InferenceConfig",
    "InferenceReport", "InferenceResult", "LDPERegressor", "OracleTruth", "PenaltySpec",
    "SISScreener", "ScaledLasso", "ScreenSet", "SimConfig", "SparseUniform", "Tuning",
    "confidence_interval", "decomposition", "exact_orthogonalize", "gic_tune", "holp_rank",
    "hot_alternative_estimate", "hot_estimate", "hybrid_direction", "infer_all", "ldpe_direction",
    "ldpe_estimate", "load_csv", "partial_penalized_direction", "quantile_lambda",
    "run_replications", "scaled_lasso", "screen", "sis_rank", "standardize", "user_screen",
    "weighted_lasso",
]
