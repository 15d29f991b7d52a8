"""Noise primitives, Gaussian calibration and budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be finite and positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def scaled(self, factor: float) -> "PrivacyParams":
        return PrivacyParams(self.epsilon * factor, self.delta * factor)


def normal_cdf(x: float) -> float:
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * math.erfc(-x / SQRT2)


def gaussian_residual(sigma: float, epsilon: float) -> float:
    """Phi(-sigma eps - 1/(2 sigma)) + Phi(-sigma eps + 1/(2 sigma))."""
    return normal_cdf(-sigma * epsilon - 0.5 / sigma) + normal_cdf(-sigma * epsilon + 0.5 / sigma)


def sigma_naive(p: PrivacyParams) -> float:
    a = 2 * math.log(2 / p.delta)
    return (math.sqrt(a) + math.sqrt(a + 2 * p.epsilon)) / (2 * p.epsilon)


def gaussian_sigma(p: PrivacyParams, rtol: float = 1e-12) -> float:
    """Smallest sigma whose Gaussian mechanism (sensitivity 1) is (eps, delta)-DP."""
    lo, hi = 1e-6, sigma_naive(p)
    if gaussian_residual(lo, p.epsilon) <= p.delta:
        return lo
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if gaussian_residual(mid, p.epsilon) <= p.delta:
            hi = mid
        else:
            lo = mid
    assert gaussian_residual(hi, p.epsilon) <= p.delta < gaussian_residual(lo, p.epsilon)
    return hi


def k_steps(p: PrivacyParams) -> float:
    return math.log(1 / (2 * p.delta)) / p.epsilon


# ---------------------------------------------------------------------------
# sampling


class NullNoise:
    """Noise source returning zeros; derandomizes a mechanism for testing."""

    def laplace(self, loc=0.0, scale=1.0, size=None):
        return 0.0 if size is None else np.zeros(size)

    def standard_normal(self, size=None):
        return 0.0 if size is None else np.zeros(size)


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_laplace(scale: float, rng) -> float:
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    return scale * float(rng.laplace(0.0, 1.0))


def sample_gaussian(std: float, rng) -> float:
    if std < 0:
        raise ValueError("std must be nonnegative")
    return std * float(rng.standard_normal())


def sample_gaussian_vector(std: float, d: int, rng) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be nonnegative")
    return std * np.asarray(rng.standard_normal(d), dtype=float)


# ---------------------------------------------------------------------------
# accounting

CONDITIONAL = "conditional"
TEST_RELEASE = "test-release"


@dataclass(frozen=True)
class LedgerEntry:
    """One mechanism in a composition.

    ``gamma`` is the failure mass of a conditional guarantee. A ``test-release``
    entry is a release gated on everything composed before it.
    """

    label: str
    epsilon: float
    delta: float
    gamma: float = 0.0
    rule: str = CONDITIONAL


@dataclass(frozen=True)
class BudgetLedger:
    entries: tuple[LedgerEntry, ...] = ()

    @property
    def totals(self) -> tuple[float, float]:
        eps, delta = 0.0, 0.0
        for e in self.entries:
            if e.rule == TEST_RELEASE:
                eps, delta = eps + e.epsilon, math.exp(eps) * delta + e.delta + e.gamma
            else:
                eps, delta = eps + e.epsilon, delta + e.delta + e.gamma
        return eps, delta

    @property
    def raw_sum(self) -> tuple[float, float]:
        return (
            sum(e.epsilon for e in self.entries),
            sum(e.delta + e.gamma for e in self.entries),
        )


def compose(ledger: BudgetLedger, entry: LedgerEntry) -> BudgetLedger:
    if entry.rule not in (CONDITIONAL, TEST_RELEASE):
        raise ValueError(f"unknown composition rule {entry.rule!r}")
    return BudgetLedger(ledger.entries + (entry,))
