"""GLM losses, datasets, the regularized M-estimator and matrix helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np
from scipy import linalg
from scipy.special import expit


class DomainError(ValueError):
    """Input outside the domain where a quantity is defined."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class ConvergenceError(RuntimeError):
    """The solver hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, theta: np.ndarray, grad_norm: float):
        super().__init__(message)
        self.theta = theta
        self.grad_norm = grad_norm


# ---------------------------------------------------------------------------
# covariate domains


@dataclass(frozen=True)
class Domain:
    """Bounded covariate domain.

    ``kind`` is one of ``"hypercube"`` ([-radius, radius]^d), ``"l2ball"``
    or ``"lpball"`` (ball of the given radius in the p-norm, p >= 2).
    """

    kind: str = "hypercube"
    radius: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("hypercube", "l2ball", "lpball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not math.isfinite(self.radius) or self.radius < 0:
            raise DomainError("domain radius must be finite and nonnegative")
        if self.kind == "lpball" and self.p < 2:
            raise ValueError("lp-ball domains need p >= 2")

    def radius2(self, d: int) -> float:
        """Euclidean radius of the domain in dimension d."""
        if self.kind == "hypercube":
            return self.radius * math.sqrt(d)
        if self.kind == "l2ball":
            return self.radius
        if math.isinf(self.p):
            return self.radius * math.sqrt(d)
        return self.radius * d ** (0.5 - 1.0 / self.p)

    def contains(self, X: np.ndarray, atol: float = 1e-12) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.kind == "hypercube":
            return np.all(np.abs(X) <= self.radius + atol, axis=1)
        p = 2.0 if self.kind == "l2ball" else self.p
        return np.linalg.norm(X, ord=p, axis=1) <= self.radius * (1 + atol) + atol

    @property
    def default_pnorm(self) -> float:
        """Gradient-set norm matching the domain geometry."""
        return math.inf if self.kind == "hypercube" else 2.0


def hypercube(r: float = 1.0) -> Domain:
    return Domain("hypercube", r)


def l2_ball(radius: float) -> Domain:
    return Domain("l2ball", radius)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    domain: Domain = field(default_factory=hypercube)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("expected X of shape (n, d) and y of shape (n,)")
        if X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DomainError("non-finite entries in dataset")
        inside = self.domain.contains(X)
        if not np.all(inside):
            i = int(np.flatnonzero(~inside)[0])
            raise DomainError(f"row {i} lies outside the covariate domain")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def replace_row(self, i: int, x: np.ndarray, y: float) -> "Dataset":
        """Neighboring dataset with row i swapped for (x, y)."""
        X = self.X.copy()
        Y = self.y.copy()
        X[i] = x
        Y[i] = y
        return replace(self, X=X, y=Y)


def neighbors(data: Dataset, candidates: list[tuple[np.ndarray, float]]) -> Iterator[Dataset]:
    """Every single-row replacement of data by a candidate row."""
    for i in range(data.n):
        for x, y in candidates:
            yield data.replace_row(i, x, y)


# ---------------------------------------------------------------------------
# losses

Derivs = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


def _robust_derivs(t, y):
    s = np.asarray(t, dtype=float) - np.asarray(y, dtype=float)
    a = np.abs(s)
    e = np.exp(-a)
    h = a + 2.0 * np.log1p(e)
    h1 = np.tanh(s / 2)
    h2 = 2.0 * e / (1.0 + e) ** 2
    h3 = -h2 * h1
    return h, h1, h2, h3


def _logistic_derivs(t, y):
    y = np.asarray(y, dtype=float)
    s = y * np.asarray(t, dtype=float)
    h = np.logaddexp(0.0, -s)
    p = expit(s)
    q = expit(-s)
    h1 = -y * q
    h2 = p * q
    h3 = y * h2 * (q - p)
    return h, h1, h2, h3


@dataclass(frozen=True)
class GlmLoss:
    """Link loss h(t, y) evaluated at t = <theta, x>.

    ``alpha`` and ``rho`` are the linear quasi-self-concordance constants used
    in the stability conditions: kappa(s) <= alpha*s whenever s <= (1-rho)/alpha.
    ``qsc_rate`` is c in kappa(s) = exp(c*s) - 1, i.e. |h'''| <= c*h''.
    """

    kind: str
    derivs: Derivs
    h1_sup: float
    hpp_sup: float
    h3_sup: float
    alpha: float = 1.234
    rho: float = 0.5
    qsc_rate: float = 1.0
    binary: bool = False

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    def kappa(self, s: float) -> float:
        return math.expm1(self.qsc_rate * s)

    def check_responses(self, y: np.ndarray) -> None:
        if self.binary and not np.all(np.isin(y, (-1.0, 1.0))):
            raise DomainError(f"{self.kind} responses must be in {{-1, +1}}")


def robust_log_loss(alpha: float = 1.234, rho: float = 0.5) -> GlmLoss:
    return GlmLoss("robust", _robust_derivs, 1.0, 0.5, 1 / (3 * math.sqrt(3)), alpha, rho)


def logistic_loss(alpha: float = 1.234, rho: float = 0.5) -> GlmLoss:
    return GlmLoss(
        "logistic", _logistic_derivs, 1.0, 0.25, 1 / (6 * math.sqrt(3)), alpha, rho, binary=True
    )


def make_loss(kind: str, **kw) -> GlmLoss:
    if kind in ("robust", "robust-log"):
        return robust_log_loss(**kw)
    if kind == "logistic":
        return logistic_loss(**kw)
    raise ValueError(f"unknown loss {kind!r}")


def h_derivatives(loss: GlmLoss, t, y):
    """Return (h, h', h'', h''') with respect to t."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("t must be finite")
    loss.check_responses(np.atleast_1d(np.asarray(y, dtype=float)))
    out = loss.derivs(t, y)
    if t.ndim == 0:
        return tuple(float(v) for v in out)
    return out


@dataclass(frozen=True)
class LipschitzConstants:
    L0: float
    L1: float
    L2: float
    radius2: float


def lipschitz_constants(loss: GlmLoss, domain: Domain, d: int) -> LipschitzConstants:
    r = domain.radius2(d)
    if not math.isfinite(r):
        raise DomainError("unbounded covariate domain")
    return LipschitzConstants(loss.h1_sup * r, loss.hpp_sup * r**2, loss.h3_sup * r**3, r)


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitResult:
    theta: np.ndarray
    hessian: np.ndarray
    lambda_min: float
    lambda_min_unreg: float
    lambda_max_unreg: float
    grad_norm: float
    lambda_reg: float
    theta0: np.ndarray
    iterations: int = 0

    @property
    def lambda_max(self) -> float:
        return self.lambda_max_unreg + self.lambda_reg


def _objective(data, loss, theta, lambda_reg, theta0, tilt):
    h, h1, h2, _ = loss.derivs(data.X @ theta, data.y)
    diff = theta - theta0
    f = h.mean() + 0.5 * lambda_reg * diff @ diff + tilt @ theta
    g = data.X.T @ h1 / data.n + lambda_reg * diff + tilt
    return f, g, h2


def _hessian(X, h2, lambda_reg):
    H = (X.T * h2) @ X / X.shape[0]
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] += lambda_reg
    return H


def hessian_extremes(data: Dataset, loss: GlmLoss, theta, lambda_reg: float):
    """Regularized Hessian and its extreme eigenvalues."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    _, _, h2, _ = loss.derivs(data.X @ theta, data.y)
    H = _hessian(data.X, h2, lambda_reg)
    w = np.linalg.eigvalsh(H)
    return H, float(w[0]), float(w[-1])


def _newton_direction(H, g):
    try:
        c = linalg.cho_factor(H, check_finite=False)
        if np.min(np.abs(np.diag(c[0]))) ** 2 > 1e-13 * np.trace(H):
            return -linalg.cho_solve(c, g, check_finite=False)
    except linalg.LinAlgError:
        pass
    p, *_ = np.linalg.lstsq(H, -g, rcond=1e-12)
    return p


def fit(
    data: Dataset,
    loss: GlmLoss,
    lambda_reg: float = 0.0,
    theta0=None,
    tol: float = 1e-9,
    max_iter: int = 500,
    tilt=None,
) -> FitResult:
    """Minimize P_n h(<theta,x>, y) + lambda_reg/2 |theta - theta0|^2 + tilt'theta.

    Damped Newton with Armijo backtracking; falls back to a gradient step
    when the Newton direction is not a descent direction.
    """
    if lambda_reg < 0 or tol <= 0:
        raise PreconditionError("need lambda_reg >= 0 and tol > 0")
    loss.check_responses(data.y)
    d = data.d
    theta0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    tilt = np.zeros(d) if tilt is None else np.asarray(tilt, dtype=float)
    theta = theta0.copy()
    # crude curvature bound for gradient steps
    lip = loss.hpp_sup * np.max(np.sum(data.X**2, axis=1)) + lambda_reg + 1e-12

    f, g, h2 = _objective(data, loss, theta, lambda_reg, theta0, tilt)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol:
        if it >= max_iter:
            raise ConvergenceError(f"no convergence after {max_iter} iterations", theta, gnorm)
        it += 1
        H = _hessian(data.X, h2, lambda_reg)
        p = _newton_direction(H, g)
        slope = g @ p
        if not np.all(np.isfinite(p)) or slope >= 0:
            p = -g / lip
            slope = g @ p
        step = 1.0
        for _ in range(60):
            cand = theta + step * p
            fc, gc, h2c = _objective(data, loss, cand, lambda_reg, theta0, tilt)
            if fc <= f + 1e-4 * step * slope or np.linalg.norm(gc) < gnorm:
                break
            step *= 0.5
        else:
            raise ConvergenceError("line search failed", theta, gnorm)
        theta, f, g, h2 = cand, fc, gc, h2c
        gnorm = float(np.linalg.norm(g))

    H = _hessian(data.X, h2, lambda_reg)
    w = np.linalg.eigvalsh(H)
    return FitResult(
        theta=theta,
        hessian=H,
        lambda_min=float(w[0]),
        lambda_min_unreg=float(w[0]) - lambda_reg,
        lambda_max_unreg=float(w[-1]) - lambda_reg,
        grad_norm=gnorm,
        lambda_reg=float(lambda_reg),
        theta0=theta0,
        iterations=it,
    )


# ---------------------------------------------------------------------------
# matrix helpers


def psd_parts(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a symmetric matrix into its PSD and NSD parts."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    pos = (V * np.maximum(w, 0)) @ V.T
    neg = (V * np.minimum(w, 0)) @ V.T
    return pos, neg


def sup_trace_box(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> float:
    """Upper bound on sup{tr(XC) : A <= X <= B} over symmetric X."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    gap = np.linalg.eigvalsh(0.5 * ((B - A) + (B - A).T))
    scale = max(1.0, float(np.max(np.abs(gap))))
    if gap[0] < -1e-10 * scale:
        raise PreconditionError("need A <= B in the semidefinite order")
    pos, neg = psd_parts(C + C.T)
    return 0.5 * float(np.sum(B * pos) + np.sum(A * neg))
