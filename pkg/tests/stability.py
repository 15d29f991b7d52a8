"""Neighbor-stability invariants shared by the unit and acceptance suites."""

import math

import numpy as np

from dpmestim.model import fit, hessian_extremes, lipschitz_constants
from dpmestim.recursions import check_condition_C1, check_condition_C2, t_param_change
from dpmestim.release import ratio_constants, sigma_bar

SLACK = 1e-9


class Base:
    """Fit-level quantities of P_n reused across all neighbors."""

    def __init__(self, data, loss, lambda_reg, u):
        self.data, self.loss, self.reg, self.u = data, loss, lambda_reg, u
        self.res = fit(data, loss, lambda_reg, tol=1e-12)
        self.L = L = lipschitz_constants(loss, data.domain, data.d)
        n, lam = data.n, self.res.lambda_min
        self.c1 = check_condition_C1(self.res.lambda_min_unreg, lambda_reg, loss, L, n)
        self.c2 = check_condition_C2(self.res.lambda_min_unreg, lambda_reg, L, n)
        self.t = t_param_change(lam, loss.alpha, L.radius2, L.L0, n) if self.c1 else math.nan
        self.H0inv = np.linalg.inv(self.res.hessian)
        if self.c1:
            self.sb = sigma_bar(self.res, u, 2, loss, L, n)
            self.rc = ratio_constants(lam, self.res.lambda_max, loss, L, n, lambda_reg)


def sample_neighbor(data, rng):
    i = int(rng.integers(data.n))
    d = data.d
    x = rng.choice([-1.0, 1.0], d) if rng.random() < 0.5 else rng.uniform(-1, 1, d)
    y = float(rng.choice([-50.0, 50.0])) if rng.random() < 0.5 else float(rng.normal())
    return i, data.replace_row(i, x, y)


def check_neighbor(b: Base, i, nb):
    """Return {invariant name: (lhs, rhs)} pairs; each must satisfy lhs <= rhs."""
    loss, L, n, reg = b.loss, b.L, b.data.n, b.reg
    r2 = fit(nb, loss, reg, tol=1e-12)
    dtheta = np.linalg.norm(b.res.theta - r2.theta)
    lam = b.res.lambda_min
    out = {}
    if b.c2:
        a = 8 * L.L0 * L.L2 / n
        root = math.sqrt(1 - a / lam**2)
        out["param_basic"] = (dtheta, 12 * L.L0 / (n * lam))
        out["param_double"] = (dtheta, lam * (1 - root) / (2 * L.L2))
        out["eig_generic_lo"] = (lam / 2 * (1 + root) - L.L1 / n, r2.lambda_min)
        out["eig_generic_hi"] = (r2.lambda_min, lam / 2 * (3 - root) + L.L1 / n)
    if b.c1:
        kap = loss.kappa(b.t * L.radius2)
        out["param_qsc"] = (dtheta, b.t)
        for name, old, new in (
            ("eig_qsc_min", b.res.lambda_min_unreg, r2.lambda_min_unreg),
            ("eig_qsc_max", b.res.lambda_max_unreg, r2.lambda_max_unreg),
        ):
            out[name] = (abs(new - old), old * kap + L.L1 / n)
        out["sigma_bar"] = (abs(b.u @ (b.res.theta - r2.theta)), b.sb)
        out.update(_ratio_checks(b, r2))
        out.update(_self_similarity(b, i, nb, r2))
    return out


def _ratio_checks(b, r2):
    loss, L, n = b.loss, b.L, b.data.n
    if not check_condition_C1(r2.lambda_min_unreg, b.reg, loss, L, n):
        return {"ratio_c1_neighbor": (1.0, 0.0)}
    rc = b.rc
    sb2 = sigma_bar(r2, b.u, 2, loss, L, n)
    ratio = b.sb / sb2
    k, g, gp = rc.kappa, rc.gamma, rc.gamma_prime
    spread = k * (rc.kappa1 + rc.kappa2 * rc.r)
    upper = (1 + k * g / (1 - g)) / (1 - spread)
    lower = 1 / (1 + spread + k * rc.lambda0 / rc.recurse_lambda0 * gp / (1 - gp))
    return {"ratio_upper": (ratio, upper), "ratio_lower": (lower, ratio)}


def _self_similarity(b, i, nb, r2):
    loss, L, n = b.loss, b.L, b.data.n
    ar_t = loss.alpha * L.radius2 * b.t
    a_tilde = loss.hpp_sup / (1 - ar_t) / b.res.lambda_min * L.radius2**2 / n
    if a_tilde >= 1:
        return {"a_tilde": (a_tilde, 1.0)}
    H0i, H1i = b.H0inv, np.linalg.inv(r2.hessian)
    c = loss.hpp_sup / (n * (1 - a_tilde))
    x_old, x_new = b.data.X[i], nb.X[i]
    v_old, v_new = H0i @ x_old, H0i @ x_new
    upper = H0i / (1 - ar_t) + c / (1 - ar_t) ** 2 * np.outer(v_old, v_old)
    lower = H0i / (1 + ar_t) - c / (1 + ar_t) ** 2 * np.outer(v_new, v_new)
    scale = np.linalg.norm(H0i, 2)
    return {
        "hessian_upper": (-np.linalg.eigvalsh(upper - H1i)[0], SLACK * scale),
        "hessian_lower": (-np.linalg.eigvalsh(H1i - lower)[0], SLACK * scale),
    }


def violations(checks):
    return {k: v for k, v in checks.items() if not v[0] <= v[1] + SLACK * max(1.0, abs(v[1]))}
