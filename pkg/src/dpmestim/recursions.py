"""Accelerating recursions, hitting times and the stability conditions.

A decreasing recursion R satisfies R(lam) <= lam, is nondecreasing, and is
accelerating: lam - R(lam) >= lam' - R(lam') for lam <= lam' whenever
R(lam) > floor. Its hitting time of the floor changes by at most one
between neighboring samples, which is what the Laplace noise is calibrated to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .model import DomainError, GlmLoss, LipschitzConstants, PreconditionError

DEFAULT_CAP_ITERS = 10**7


@dataclass(frozen=True)
class Recursion:
    map: Callable[[float], float]
    floor: float
    direction: str = "decreasing"
    cap: float | None = None
    domain_guard: Callable[[float], bool] = lambda lam: True

    def __post_init__(self):
        if self.direction not in ("decreasing", "increasing"):
            raise ValueError("direction must be 'decreasing' or 'increasing'")
        if self.direction == "increasing" and self.cap is None:
            raise ValueError("increasing recursions need a cap")

    def __call__(self, lam: float) -> float:
        return self.map(lam)

    def reached(self, lam: float) -> bool:
        if self.direction == "decreasing":
            return lam <= self.floor
        return lam >= self.cap


# ---------------------------------------------------------------------------
# parameter change and conditions


def t_param_change(lam: float, alpha: float, r: float, L0: float, n: int) -> float:
    """Parameter-change bound t(lam) = [1 - sqrt(1 - 8 alpha r L0/(lam n))]/(2 alpha r)."""
    if lam <= 0:
        raise DomainError("t(lam) needs lam > 0")
    a = 8 * alpha * r * L0 / (lam * n)
    if a > 1:
        if a > 1 + 1e-12:
            raise DomainError("t(lam) undefined: 8 alpha r L0 / (lam n) > 1")
        a = 1.0
    # rationalized form, exact at alpha*r = 0
    return 4 * L0 / (lam * n * (1 + math.sqrt(1 - a)))


def c1_threshold(loss: GlmLoss, L: LipschitzConstants, n: int) -> float:
    rho = loss.rho
    return 4 * L.L0 * loss.alpha * L.radius2 / (rho * (1 - rho) * n) + L.L1 / (rho * n)


def check_condition_C1(
    lambda_min: float, lambda_reg: float, loss: GlmLoss, L: LipschitzConstants, n: int
) -> bool:
    return lambda_min + lambda_reg / loss.rho >= c1_threshold(loss, L, n)


def c2_threshold(L: LipschitzConstants, n: int) -> float:
    return max(3 * L.L1 / n, math.sqrt(12 * L.L0 * L.L2 / n))


def check_condition_C2(lambda_min: float, lambda_reg: float, L: LipschitzConstants, n: int) -> bool:
    return lambda_min + lambda_reg >= c2_threshold(L, n)


# ---------------------------------------------------------------------------
# constructors


def make_sqrt_recursion(a: float, b: float, floor: float) -> Recursion:
    """R(lam) = lam/2 [1 + sqrt(1 - a/lam^2)] - b on lam^2 > a, else floor."""

    def guard(lam):
        return lam > 0 and lam * lam > a

    def R(lam):
        if not guard(lam):
            return floor
        return max(0.5 * lam * (1 + math.sqrt(1 - a / (lam * lam))) - b, floor)

    return Recursion(R, floor, domain_guard=guard)


def make_exp_recursion(a: float, b: float, c: float, lambda0: float, floor: float) -> Recursion:
    """R(lam) = lam [2 - exp(b (1 - sqrt(1 - a/(lam + lambda0))))] - c on lam + lambda0 > a.

    Accelerating for lambda0 = 0. With lambda0 > 0 the per-step decrement
    lam*(exp(.) - 1) can grow with lam when lam is small relative to lambda0.
    """
    if min(a, b, c) < 0:
        raise PreconditionError("a, b, c must be nonnegative")

    def guard(lam):
        return lam + lambda0 > a and lam + lambda0 > 0

    def R(lam):
        if not guard(lam):
            return floor
        e = math.exp(b * (1 - math.sqrt(1 - a / (lam + lambda0))))
        return max(lam * (2 - e) - c, floor)

    return Recursion(R, floor, domain_guard=guard)


def make_generic_min_recursion(L: LipschitzConstants, n: int, lambda_reg: float) -> Recursion:
    """Recursion for lambda_min + lambda_reg under a Lipschitz Hessian."""
    if n < 1:
        raise PreconditionError("n must be positive")
    return make_sqrt_recursion(8 * L.L0 * L.L2 / n, L.L1 / n, lambda_reg)


def make_qsc_min_recursion(
    loss: GlmLoss, L: LipschitzConstants, n: int, lambda_reg: float
) -> Recursion:
    """Recursion for the unregularized lambda_min of a q.s.c. GLM.

    Per-step decrement is (lam + lambda_reg) kappa(r t(lam + lambda_reg)) + L1/n.
    This dominates lam kappa(r t(lam + lambda_reg)) + L1/n and is nonincreasing
    in lam, so the map stays accelerating when lambda_reg > 0.
    """
    r = L.radius2

    def guard(lam):
        return lam + lambda_reg > 0 and check_condition_C1(lam, lambda_reg, loss, L, n)

    def R(lam):
        if not guard(lam):
            return 0.0
        mu = lam + lambda_reg
        try:
            t = t_param_change(mu, loss.alpha, r, L.L0, n)
        except DomainError:
            return 0.0
        return max(lam - mu * loss.kappa(r * t) - L.L1 / n, 0.0)

    return Recursion(R, 0.0, domain_guard=guard)


def make_qsc_max_recursion(
    lambda_hat: float, loss: GlmLoss, L: LipschitzConstants, n: int
) -> Recursion:
    """Increasing recursion for lambda_max; lambda_hat lower-bounds lambda_min + lambda_reg."""
    if lambda_hat <= 0:
        raise PreconditionError("lambda_hat must be positive")
    r = L.radius2
    m = loss.kappa(t_param_change(lambda_hat, loss.alpha, r, L.L0, n) * r)
    cap = L.L1
    step = L.L1 / n

    def R(lam):
        return min(lam * (1 + m) + step, cap)

    return Recursion(R, 0.0, direction="increasing", cap=cap)


# ---------------------------------------------------------------------------
# iteration, hitting time and inversion


def iterate(R: Recursion, lam: float, k: int) -> float:
    if k < 0:
        raise PreconditionError("k must be nonnegative")
    for _ in range(k):
        nxt = R(lam)
        if nxt == lam:
            break
        lam = nxt
    return lam


def hitting_time(R: Recursion, lam: float, cap_iters: int = DEFAULT_CAP_ITERS) -> int:
    """Smallest N with R^N(lam) at the floor (or cap); cap_iters if never reached."""
    if cap_iters <= 0:
        raise PreconditionError("cap_iters must be positive")
    N = 0
    while not R.reached(lam):
        if N >= cap_iters:
            return cap_iters
        nxt = R(lam)
        if nxt == lam:
            return cap_iters
        lam = nxt
        N += 1
    return N


def _bisect(pred, lo, hi, tol):
    """Shrink [lo, hi] with pred(lo) true and pred(hi) false; returns both ends."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _illinois(g, a, fa, b, fb, tau, left_closed):
    """Shrink a sign bracket of g to width tau by Illinois false position.

    Points with g == 0 join the left end when left_closed, else the right end.
    """
    side = 0
    while b - a > tau:
        x = (a * fb - b * fa) / (fb - fa)
        if not a < x < b:
            x = 0.5 * (a + b)
        fx = g(x)
        if fx < 0 or (fx == 0 and left_closed):
            a, fa = x, fx
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = x, fx
            if side == 1:
                fa *= 0.5
            side = 1
    return a, fa, b, fb


def _step_inverse(R: Recursion, gamma: float, r_gamma, lo: float, hi: float, tau: float):
    """One generalized inverse of R at gamma, rounded to the safe side.

    Decreasing: largest lam in [lo, hi] with R(lam) <= gamma.
    Increasing: smallest lam in [lo, hi] with R(lam) >= gamma.
    r_gamma is R(gamma) if already known. Returns (lam, R(lam)), or None
    when the whole interval qualifies (the bracket end saturates).
    """
    dec = R.direction == "decreasing"
    edge = R.floor if dec else R.cap
    if gamma == edge:
        # R is flat at the edge, so only bisection finds the end of the flat part
        if dec:
            if R(hi) <= gamma:
                return None
            x = _bisect(lambda v: R(v) <= gamma, lo, hi, tau)[0]
        else:
            if R(lo) >= gamma:
                return None
            x = _bisect(lambda v: R(v) < gamma, lo, hi, tau)[1]
        return x, R(x)

    def g(v):
        return R(v) - gamma

    # The step x - R(x) is monotone, so the root of x = gamma + step(x) is
    # bracketed by two fixed-point iterates started at gamma.
    rg = R(gamma) if r_gamma is None else r_gamma
    if dec:
        b = min(2 * gamma - rg, hi)
        fb = g(b)
        a = max(b - fb, lo)
        fa = g(a)
    else:
        a = max(2 * gamma - rg, lo)
        fa = g(a)
        b = min(a - fa, hi)
        fb = g(b)
    if not (a <= b and fa <= 0 <= fb):
        a, b = lo, hi
        fa, fb = g(a), g(b)
        if dec and fb <= 0 or not dec and fa >= 0:
            return None
    if dec:
        if fb == 0:
            return b, gamma
        a, fa, _, _ = _illinois(g, a, fa, b, fb, tau, left_closed=True)
        return a, fa + gamma
    if fa == 0:
        return a, gamma
    _, _, b, fb = _illinois(g, a, fa, b, fb, tau, left_closed=False)
    return b, fb + gamma


def invert_composition(
    R: Recursion, m: int, hi: float, tol: float | None = None
) -> tuple[float, bool]:
    """Generalized inverse of R^m at the floor (or cap).

    Decreasing: returns lam* = sup{lam >= floor : R^m(lam) <= floor}, rounded
    down to within tol. Increasing: returns inf{lam >= floor : R^m(lam) >= cap},
    rounded up. The flag is True when the bracket end was returned.

    The inverse of R^m is the m-fold inverse of R, so each step is one
    scalar root find with tolerance tol/(m+1). An accelerating R has slope at
    least one, so its inverse is 1-Lipschitz and step errors add up to less
    than tol. A forward check guards the result; on failure it falls back to
    bisection on R^m directly.
    """
    if m < 0:
        raise PreconditionError("m must be nonnegative")
    dec = R.direction == "decreasing"
    lo = R.floor
    if not dec:
        hi = R.cap
    if tol is None:
        tol = 1e-10 * max(hi - lo, 1e-300)
    if m == 0:
        return (lo if dec else hi), False

    tau = tol / (m + 1)
    gamma, r_gamma = (R.floor if dec else R.cap), None
    try:
        for _ in range(m):
            if dec:
                step = _step_inverse(R, gamma, r_gamma, max(lo, min(gamma, hi)), hi, tau)
            else:
                step = _step_inverse(R, gamma, r_gamma, lo, min(max(gamma, lo), hi), tau)
            if step is None:
                return (hi, True) if dec else (lo, True)
            gamma, r_gamma = step
        ok = iterate(R, gamma, m) <= R.floor if dec else iterate(R, gamma, m) >= R.cap
    except (ArithmeticError, ValueError):
        ok = False
    if ok:
        return gamma, False
    if dec:
        if iterate(R, hi, m) <= R.floor:
            return hi, True
        return _bisect(lambda x: iterate(R, x, m) <= R.floor, lo, hi, tol)[0], False
    if iterate(R, lo, m) >= R.cap:
        return lo, True
    return _bisect(lambda x: iterate(R, x, m) < R.cap, lo, hi, tol)[1], False
