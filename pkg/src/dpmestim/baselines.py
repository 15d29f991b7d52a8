"""Comparison mechanisms: objective and naive output perturbation, an
idealized non-private release, and a simplified DP-SGD."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, FitResult, GlmLoss, fit, lipschitz_constants
from .privacy import BudgetLedger, LedgerEntry, PrivacyParams, gaussian_sigma
from .release import ReleaseOutcome, directional_sensitivity, parameter_sensitivity

NAIVE_LAMBDA_REG = 1e-2


def objective_lambda_reg(L1: float, n: int, epsilon: float) -> float:
    return 4 * L1 / (n * epsilon)


def objective_noise_var(r: float, n: int, p: PrivacyParams) -> float:
    # the stated variance formula, kept as written
    b = 2 * math.log(4 / p.delta)
    return 2 * r / (n * p.epsilon) * (math.sqrt(b) + math.sqrt(2 * p.epsilon + b))


def objective_perturbation(data: Dataset, loss: GlmLoss, theta0, p: PrivacyParams, rng) -> ReleaseOutcome:
    L = lipschitz_constants(loss, data.domain, data.d)
    lam = objective_lambda_reg(L.L1, data.n, p.epsilon)
    std = math.sqrt(objective_noise_var(L.radius2, data.n, p))
    W = std * np.asarray(rng.standard_normal(data.d), dtype=float)
    res = fit(data, loss, lam, theta0, tilt=W)
    ledger = BudgetLedger((LedgerEntry("objective", p.epsilon, p.delta),))
    return ReleaseOutcome(res.theta, std, ledger, diagnostics={"lambda_reg": lam})


def naive_output_perturbation(data: Dataset, loss: GlmLoss, p: PrivacyParams, rng) -> ReleaseOutcome:
    L = lipschitz_constants(loss, data.domain, data.d)
    z = np.asarray(rng.standard_normal(data.d), dtype=float)
    res = fit(data, loss, NAIVE_LAMBDA_REG)
    std = 2 * L.L0 / (data.n * NAIVE_LAMBDA_REG) * gaussian_sigma(p)
    ledger = BudgetLedger((LedgerEntry("naive", p.epsilon, p.delta),))
    return ReleaseOutcome(res.theta + std * z, std, ledger)


def nonprivate_idealized(
    data: Dataset,
    loss: GlmLoss,
    u,
    lambda_reg: float,
    p: PrivacyParams,
    rng,
    pnorm: float | None = None,
    theta0=None,
    fitted: FitResult | None = None,
) -> ReleaseOutcome:
    """Noise at the local sensitivity itself; not private, a lower reference."""
    if pnorm is None:
        pnorm = data.domain.default_pnorm
    res = fitted if fitted is not None else fit(data, loss, lambda_reg, theta0)
    L = lipschitz_constants(loss, data.domain, data.d)
    sigma = gaussian_sigma(p)
    ledger = BudgetLedger((LedgerEntry("nonprivate", p.epsilon, p.delta),))
    if u is None:
        z = np.asarray(rng.standard_normal(data.d), dtype=float)
        std = parameter_sensitivity(res.hessian, pnorm, L.L0, data.n, data.d) * sigma
        return ReleaseOutcome(res.theta + std * z, std, ledger)
    u = np.asarray(u, dtype=float)
    z = float(rng.standard_normal())
    std = directional_sensitivity(res.hessian, u, pnorm, L.L0, data.n, data.d) * sigma
    return ReleaseOutcome(float(u @ res.theta) + std * z, std, ledger)


@dataclass(frozen=True)
class SGDConfig:
    """DP-SGD settings; None picks the default from n and the constants."""

    batch: int | None = None
    steps: int = 100
    clip: float | None = None
    lr: float | None = None
    noise_multiplier: float | None = None


def dpsgd(
    data: Dataset, loss: GlmLoss, p: PrivacyParams, hyper: SGDConfig, rng, theta0=None
) -> ReleaseOutcome:
    """Clipped minibatch SGD with Gaussian noise; per-step budget (eps/T, delta/T)."""
    L = lipschitz_constants(loss, data.domain, data.d)
    n, d, T = data.n, data.d, hyper.steps
    b = hyper.batch if hyper.batch is not None else max(1, n // 10)
    clip = hyper.clip if hyper.clip is not None else L.L0
    lr = hyper.lr if hyper.lr is not None else 1 / L.L1
    step_p = PrivacyParams(p.epsilon / T, p.delta / T)
    mult = gaussian_sigma(step_p) if hyper.noise_multiplier is None else hyper.noise_multiplier
    # replacing one row moves the clipped-gradient sum by at most 2 clip
    std = 2 * clip * mult / b
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    entries = []
    for _ in range(T):
        idx = rng.choice(n, size=b, replace=False) if b < n else np.arange(n)
        X, y = data.X[idx], data.y[idx]
        _, h1, _, _ = loss.derivs(X @ theta, y)
        G = h1[:, None] * X
        norms = np.linalg.norm(G, axis=1)
        G *= np.minimum(1.0, clip / np.maximum(norms, 1e-300))[:, None]
        g = G.mean(axis=0) + std * rng.standard_normal(d)
        theta = theta - lr * g
        entries.append(LedgerEntry("sgd_step", step_p.epsilon, step_p.delta))
    return ReleaseOutcome(theta, std, BudgetLedger(tuple(entries)))
