"""Private lower and upper bounds on extreme Hessian eigenvalues."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Dataset, FitResult, GlmLoss, fit, lipschitz_constants
from .privacy import PrivacyParams, k_steps, sample_laplace
from .recursions import (
    DEFAULT_CAP_ITERS,
    Recursion,
    check_condition_C1,
    hitting_time,
    invert_composition,
    make_generic_min_recursion,
    make_qsc_max_recursion,
    make_qsc_min_recursion,
)


@dataclass(frozen=True)
class EigenRelease:
    n_hat: float
    lambda_hat: float
    saturated: bool
    budget: PrivacyParams
    exponent: int = 0


def exponent(n_hat: float, p: PrivacyParams) -> int:
    """Composition depth floor(N_hat - k)_+ used for inversion."""
    return max(0, math.floor(n_hat - k_steps(p)))


def release_from_recursion(
    R: Recursion,
    statistic: float,
    p: PrivacyParams,
    rng,
    hi: float,
    cap_iters: int = DEFAULT_CAP_ITERS,
) -> EigenRelease:
    """Laplace-noised hitting time followed by inversion of R^m."""
    N = hitting_time(R, statistic, cap_iters)
    n_hat = N + sample_laplace(1 / p.epsilon, rng)
    m = exponent(n_hat, p)
    value, at_bracket = invert_composition(R, m, hi)
    if R.direction == "increasing":
        value = min(value, R.cap)
    saturated = N >= cap_iters or m == 0 or at_bracket
    return EigenRelease(n_hat, value, saturated, p, m)


def _fit(data, loss, lambda_reg, fitted, theta0=None):
    return fitted if fitted is not None else fit(data, loss, lambda_reg, theta0)


def release_lambda_min_generic(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float,
    p: PrivacyParams,
    rng,
    fitted: FitResult | None = None,
) -> EigenRelease:
    """Private lower bound on lambda_min + lambda_reg for a smooth loss."""
    res = _fit(data, loss, lambda_reg, fitted)
    L = lipschitz_constants(loss, data.domain, data.d)
    R = make_generic_min_recursion(L, data.n, lambda_reg)
    return release_from_recursion(R, res.lambda_min, p, rng, L.L1 + lambda_reg)


def release_lambda_min_qsc(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float,
    p: PrivacyParams,
    rng,
    fitted: FitResult | None = None,
) -> EigenRelease:
    """Private lower bound on the unregularized lambda_min of a q.s.c. GLM."""
    res = _fit(data, loss, lambda_reg, fitted)
    L = lipschitz_constants(loss, data.domain, data.d)
    R = make_qsc_min_recursion(loss, L, data.n, lambda_reg)
    stat = max(res.lambda_min_unreg, 0.0)
    return release_from_recursion(R, stat, p, rng, L.L1 + lambda_reg)


def release_lambda_max(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float,
    lambda_hat_min: float,
    p: PrivacyParams,
    rng,
    fitted: FitResult | None = None,
) -> EigenRelease:
    """Private upper bound on the unregularized lambda_max given a private lambda_min bound."""
    res = _fit(data, loss, lambda_reg, fitted)
    L = lipschitz_constants(loss, data.domain, data.d)
    n = data.n
    if lambda_hat_min + lambda_reg <= 0 or not check_condition_C1(
        lambda_hat_min, lambda_reg, loss, L, n
    ):
        # keep the noise stream aligned with the unsaturated path
        n_hat = sample_laplace(1 / p.epsilon, rng)
        return EigenRelease(n_hat, L.L1, True, p, 0)
    R = make_qsc_max_recursion(lambda_hat_min + lambda_reg, loss, L, n)
    stat = min(res.lambda_max_unreg, L.L1)
    return release_from_recursion(R, stat, p, rng, L.L1 + lambda_reg)
