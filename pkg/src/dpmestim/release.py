"""Local output perturbation for parameters and linear functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import ndtri

from .eigen_release import release_lambda_max, release_lambda_min_generic, release_lambda_min_qsc
from .model import (
    Dataset,
    DomainError,
    FitResult,
    GlmLoss,
    LipschitzConstants,
    PreconditionError,
    fit,
    lipschitz_constants,
)
from .privacy import (
    CONDITIONAL,
    TEST_RELEASE,
    BudgetLedger,
    LedgerEntry,
    PrivacyParams,
    gaussian_sigma,
)
from .recursions import (
    check_condition_C1,
    check_condition_C2,
    make_qsc_min_recursion,
    t_param_change,
)


@dataclass(frozen=True)
class ReleaseOutcome:
    """A released value, or None for the refusal symbol."""

    value: float | np.ndarray | None
    noise_std: float
    ledger: BudgetLedger
    sigma_bar: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_bottom(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class RatioConstants:
    t_change: float
    r: float
    a_tilde: float
    gamma: float
    gamma_prime: float
    kappa1: float
    kappa2: float
    kappa: float
    lambda0: float
    lambda1: float
    recurse_lambda0: float
    valid: bool


# ---------------------------------------------------------------------------
# sensitivities


def _dual(pnorm: float) -> float:
    if math.isinf(pnorm):
        return 1.0
    if pnorm < 2:
        raise ValueError("gradient-set norm must satisfy p >= 2")
    return pnorm / (pnorm - 1)


def _gradient_radius(pnorm: float, L0: float, d: int) -> float:
    """Radius of the gradient set {|g|_p <= d^(1/p - 1/2) L0}."""
    inv_p = 0.0 if math.isinf(pnorm) else 1.0 / pnorm
    return d ** (inv_p - 0.5) * L0


def _solve_pd(H: np.ndarray, b: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(H)
    if w[0] <= 1e-14 * max(1.0, abs(w[-1])):
        raise DomainError("Hessian is singular")
    return np.linalg.solve(H, b)


def directional_sensitivity(
    H: np.ndarray, u: np.ndarray, pnorm: float, L0: float, n: int, d: int
) -> float:
    """Delta(P_n, u) = (2/n) sup_{g in G_p} u' H^{-1} g."""
    v = _solve_pd(H, np.asarray(u, dtype=float))
    return 2 * _gradient_radius(pnorm, L0, d) / n * float(np.linalg.norm(v, ord=_dual(pnorm)))


def parameter_sensitivity(H: np.ndarray, pnorm: float, L0: float, n: int, d: int) -> float:
    """Delta(P_n) = (2/n) sup_{g in G_p} |H^{-1} g|_2.

    Exact for p = 2 and, up to d = 16, for p = inf by vertex enumeration;
    otherwise an operator-norm upper bound.
    """
    c = _gradient_radius(pnorm, L0, d)
    w = np.linalg.eigvalsh(H)
    if w[0] <= 1e-14 * max(1.0, abs(w[-1])):
        raise DomainError("Hessian is singular")
    if pnorm == 2:
        return 2 * c / (n * w[0])
    if math.isinf(pnorm) and d <= 16:
        Hinv = np.linalg.inv(H)
        V = np.array(list(product((-1.0, 1.0), repeat=d - 1)))
        V = np.hstack([np.ones((len(V), 1)), V])
        return 2 * c / n * float(np.max(np.linalg.norm(V @ Hinv, axis=1)))
    inv_p = 0.0 if math.isinf(pnorm) else 1.0 / pnorm
    return 2 * c * d ** (0.5 - inv_p) / (n * w[0])


# ---------------------------------------------------------------------------
# ratio certification


def ratio_constants(
    lambda0: float,
    lambda1: float,
    loss: GlmLoss,
    L: LipschitzConstants,
    n: int,
    lambda_reg: float = 0.0,
) -> RatioConstants:
    """Constants bounding sigma_bar(P_n) / sigma_bar(P_n') from lambda0 <= lambda_min + lambda_reg."""
    if lambda0 <= 0 or not check_condition_C1(lambda0 - lambda_reg, lambda_reg, loss, L, n):
        raise PreconditionError("condition C1 must hold at lambda0")
    a, r, hpp = loss.alpha, L.radius2, loss.hpp_sup
    t = t_param_change(lambda0, a, r, L.L0, n)
    shrink = max(1 - a * r * t, 0.0)
    a_tilde = hpp * r**2 / (shrink * n * lambda0) if shrink > 0 else math.inf
    gamma = a * r * t
    R = make_qsc_min_recursion(loss, L, n, lambda_reg)
    # one-step lower bound on lambda_min(P_n') + lambda_reg
    rec = R(lambda0 - lambda_reg) + lambda_reg
    try:
        gamma_prime = a * r * t_param_change(rec, a, r, L.L0, n) if rec > 0 else math.inf
    except DomainError:
        gamma_prime = math.inf
    kappa1 = 1 / shrink - 1 if shrink > 0 else math.inf
    if shrink > 0 and a_tilde < 1:
        kappa2 = hpp / (n * (1 - a_tilde) * shrink**2)
    else:
        kappa2 = math.inf
    valid = a_tilde < 1 and gamma < 1 and gamma_prime < 1
    return RatioConstants(
        t, r, a_tilde, gamma, gamma_prime, kappa1, kappa2, lambda1 / lambda0, lambda0, lambda1, rec, valid
    )


def ratio_condition_lhs(rc: RatioConstants, pnorm: float, d: int) -> float:
    if not rc.valid:
        return math.inf
    k, g, gp = rc.kappa, rc.gamma, rc.gamma_prime
    if pnorm == 2:
        spread = k * (rc.kappa1 + rc.kappa2 * rc.r)
        first_num = 1 + k * g / (1 - g)
        tail = rc.lambda1 / rc.recurse_lambda0 * gp / (1 - gp)
    else:
        dp = d if math.isinf(pnorm) else d ** (1 - 2 / pnorm)
        sq = math.sqrt(dp)
        spread = sq * k * rc.kappa1 + 2 * dp * rc.kappa2 / rc.lambda0
        first_num = 1 + sq * k * g / (1 - g)
        tail = sq * rc.lambda1 / rc.recurse_lambda0 * gp / (1 - gp)
    if spread >= 1:
        return math.inf
    return max(first_num / (1 - spread), 1 + spread + tail) ** 2 - 1


def ratio_condition_rhs(epsilon: float, delta: float) -> float:
    z = -float(ndtri(delta / 2))
    return 2 * epsilon / (1 + z * z)


def check_ratio_condition(p: PrivacyParams, rc: RatioConstants, pnorm: float, d: int) -> bool:
    return ratio_condition_lhs(rc, pnorm, d) <= ratio_condition_rhs(p.epsilon, p.delta)


def sigma_bar(
    fitted: FitResult, u: np.ndarray, pnorm: float, loss: GlmLoss, L: LipschitzConstants, n: int
) -> float:
    """Certified bound on |u'(theta(P_n) - theta(P_n'))| over neighbors."""
    lam = fitted.lambda_min
    d = len(u)
    if not check_condition_C1(fitted.lambda_min_unreg, fitted.lambda_reg, loss, L, n):
        raise PreconditionError("condition C1 fails at the fitted lambda_min")
    gamma = loss.alpha * t_param_change(lam, loss.alpha, L.radius2, L.L0, n) * L.radius2
    if gamma >= 1:
        raise DomainError("gamma >= 1")
    delta = directional_sensitivity(fitted.hessian, u, pnorm, L.L0, n, d)
    return delta + 2 * L.L0 / (n * lam) * gamma / (1 - gamma)


# ---------------------------------------------------------------------------
# mechanisms


def _gaussian_entry(label, p):
    return LedgerEntry(label, p.epsilon, p.delta)


def release_theta_generic(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float,
    theta0,
    p: PrivacyParams,
    rng,
    fitted: FitResult | None = None,
) -> ReleaseOutcome:
    """Full-parameter release for smooth losses via a private lambda_min bound."""
    res = fitted if fitted is not None else fit(data, loss, lambda_reg, theta0)
    L = lipschitz_constants(loss, data.domain, data.d)
    n = data.n
    half = p.scaled(0.5)
    z = rng.standard_normal(data.d)
    lam = release_lambda_min_generic(data, loss, lambda_reg, half, rng, fitted=res)
    ledger = BudgetLedger(
        (
            LedgerEntry("lambda_min", half.epsilon, 0.0, gamma=half.delta),
            _gaussian_entry("gaussian", half),
        )
    )
    lh = lam.lambda_hat
    diag = {"lambda_min_hat": lh, "c2": check_condition_C2(lh, 0.0, L, n)}
    if not diag["c2"]:
        return ReleaseOutcome(None, 0.0, ledger, diagnostics=diag)
    a = 8 * L.L0 * L.L2 / n
    # (lh - sqrt(lh^2 - a)) / (2 L2), rationalized so that L2 = 0 is allowed
    W = 4 * L.L0 / (n * (lh + math.sqrt(max(lh * lh - a, 0.0))))
    std = W * gaussian_sigma(half)
    return ReleaseOutcome(res.theta + std * np.asarray(z), std, ledger, diagnostics=diag)


def release_theta_qsc(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float,
    theta0,
    p: PrivacyParams,
    rng,
    fitted: FitResult | None = None,
) -> ReleaseOutcome:
    """Full-parameter release for q.s.c. GLMs with noise scaled by t(lambda_hat + lambda_reg)."""
    res = fitted if fitted is not None else fit(data, loss, lambda_reg, theta0)
    L = lipschitz_constants(loss, data.domain, data.d)
    n = data.n
    z = rng.standard_normal(data.d)
    lam = release_lambda_min_qsc(data, loss, lambda_reg, p, rng, fitted=res)
    ledger = BudgetLedger(
        (
            LedgerEntry("lambda_min", p.epsilon, 0.0, gamma=p.delta),
            _gaussian_entry("gaussian", p),
        )
    )
    lh = lam.lambda_hat
    mu = lh + lambda_reg
    diag = {"lambda_min_hat": lh, "c1": check_condition_C1(lh, lambda_reg, loss, L, n)}
    if mu <= 0 or not diag["c1"]:
        return ReleaseOutcome(None, 0.0, ledger, diagnostics=diag)
    t = t_param_change(mu, loss.alpha, L.radius2, L.L0, n)
    std = t * gaussian_sigma(p)
    return ReleaseOutcome(res.theta + std * np.asarray(z), std, ledger, diagnostics=diag)


def functional_ledger(p: PrivacyParams) -> BudgetLedger:
    e, d = p.epsilon, p.delta
    return BudgetLedger(
        (
            LedgerEntry("lambda_min", e, 0.0, gamma=d),
            LedgerEntry("lambda_max", e, 0.0),
            LedgerEntry("gaussian", e, (1 + math.exp(e)) * d, rule=TEST_RELEASE),
        )
    )


def release_functional(
    data: Dataset,
    loss: GlmLoss,
    u,
    lambda_reg: float,
    theta0,
    p: PrivacyParams,
    pnorm: float | None,
    rng,
    fitted: FitResult | None = None,
) -> ReleaseOutcome:
    """Release u'theta(P_n) with noise scaled to a ratio-certified modulus bound."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1) > 1e-9:
        raise PreconditionError("u must be a unit vector")
    if pnorm is None:
        pnorm = data.domain.default_pnorm
    res = fitted if fitted is not None else fit(data, loss, lambda_reg, theta0)
    L = lipschitz_constants(loss, data.domain, data.d)
    n, d = data.n, data.d
    z = rng.standard_normal()
    lo = release_lambda_min_qsc(data, loss, lambda_reg, p, rng, fitted=res)
    hi = release_lambda_max(data, loss, lambda_reg, lo.lambda_hat, p, rng, fitted=res)
    ledger = functional_ledger(p)
    lam0 = lo.lambda_hat + lambda_reg
    lam1 = hi.lambda_hat + lambda_reg
    diag = {
        "lambda_min_hat": lo.lambda_hat,
        "lambda_max_hat": hi.lambda_hat,
        "c1": lam0 > 0 and check_condition_C1(lo.lambda_hat, lambda_reg, loss, L, n),
        "ratio": False,
    }
    if not diag["c1"]:
        return ReleaseOutcome(None, 0.0, ledger, diagnostics=diag)
    rc = ratio_constants(lam0, lam1, loss, L, n, lambda_reg)
    diag["ratio_lhs"] = ratio_condition_lhs(rc, pnorm, d)
    diag["ratio_rhs"] = ratio_condition_rhs(p.epsilon, p.delta)
    diag["ratio"] = diag["ratio_lhs"] <= diag["ratio_rhs"]
    if not diag["ratio"]:
        return ReleaseOutcome(None, 0.0, ledger, diagnostics=diag)
    try:
        sb = sigma_bar(res, u, pnorm, loss, L, n)
    except (PreconditionError, DomainError):
        # only reachable when lambda_hat overshoots lambda_min
        return ReleaseOutcome(None, 0.0, ledger, diagnostics=diag)
    std = gaussian_sigma(p) * sb
    return ReleaseOutcome(float(u @ res.theta) + std * z, std, ledger, sb, diag)
