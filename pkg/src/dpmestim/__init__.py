"""Differentially private M-estimation with locally calibrated noise."""

from .model import (
    Dataset,
    Domain,
    FitResult,
    GlmLoss,
    LipschitzConstants,
    fit,
    hessian_extremes,
    hypercube,
    l2_ball,
    lipschitz_constants,
    logistic_loss,
    robust_log_loss,
)
from .privacy import BudgetLedger, PrivacyParams, gaussian_sigma
from .release import ReleaseOutcome, release_functional, release_theta_generic, release_theta_qsc

__all__ = [
    "BudgetLedger",
    "Dataset",
    "Domain",
    "FitResult",
    "GlmLoss",
    "LipschitzConstants",
    "PrivacyParams",
    "ReleaseOutcome",
    "fit",
    "gaussian_sigma",
    "hessian_extremes",
    "hypercube",
    "l2_ball",
    "lipschitz_constants",
    "logistic_loss",
    "release_functional",
    "release_theta_generic",
    "release_theta_qsc",
    "robust_log_loss",
]
