"""Log-smoothness calculus: conjugate derivatives, inequality oracles, rates.

A function f is L-log smooth when |f'(x) - f'(y)| <= f'(x) f'(y) |x - y| / L.
For the loss u -> -y log(u) this holds with L = y and the Fenchel conjugate is
f*(v) = -y - y log(-v / y) on v < 0, for which every bound below is tight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .objectives import ProblemData

__all__ = [
    "RateReport",
    "fstar_derivs",
    "log_loss_conjugate",
    "check_log_smooth",
    "gradient_pair_bound",
    "bregman_lower_bound",
    "barycentre_bound",
    "barycentre_ratio",
    "barycentre_ratio_floor",
    "sigma_ratio",
    "sigma_coeffs",
    "importance_distribution",
]


def fstar_derivs(a: float, y: float) -> tuple[float, float, float]:
    """Value and first two derivatives of the log-loss conjugate at v = -a.

    For f(u) = -y log u the conjugate is f*(v) = -y - y log(-v/y); its second
    derivative equals y / v^2, saturating the lower bound L v^{-2} with L = y.
    """
    a = float(a)
    y = float(y)
    if a <= 0 or y <= 0:
        raise ValueError("fstar_derivs requires a > 0 and y > 0")
    value = -y - y * np.log(a / y)
    first = y / a  # f*'(-a) = -y / v at v = -a
    second = y / (a * a)
    return value, first, second


def log_loss_conjugate(L: float) -> tuple[Callable, Callable, Callable]:
    """Conjugate of u -> -L log(u) as (value, gradient, hessian) callables on v < 0."""
    if L <= 0:
        raise ValueError("L must be positive")

    def value(v):
        return -L - L * np.log(-np.asarray(v, dtype=float) / L)

    def grad(v):
        return -L / np.asarray(v, dtype=float)

    def hess(v):
        v = np.asarray(v, dtype=float)
        return L / (v * v)

    return value, grad, hess


def check_log_smooth(
    first_deriv: Callable[[float], float],
    L: float,
    grid: np.ndarray,
    rel_tol: float = 1e-8,
) -> bool:
    """Check L-log smoothness of f from its first derivative on a grid.

    Verifies the defining pairwise inequality
    |f'(x) - f'(y)| <= f'(x) f'(y) |x - y| / L over all grid pairs, and the
    second-order form f'' <= f'^2 / L through central finite differences at
    grid midpoints.  Both checks allow ``rel_tol`` relative slack since the
    log loss meets them with equality.  Raises on non-monotone samples.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size < 3:
        raise ValueError("grid must contain at least three points")
    fp = np.array([float(first_deriv(t)) for t in grid])
    diffs = np.diff(fp)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("first derivative samples are not strictly monotone")

    # Pairwise Definition check.
    dfp = np.abs(fp[:, None] - fp[None, :])
    rhs = np.abs(fp[:, None] * fp[None, :]) * np.abs(grid[:, None] - grid[None, :]) / L
    if np.any(dfp > rhs * (1.0 + rel_tol) + 1e-300):
        return False

    # Second-order check at midpoints, kept inside the grid hull.  The FD
    # bias is O(h^2 / m^2) relative, so h must sit well under sqrt(rel_tol).
    mids = 0.5 * (grid[:-1] + grid[1:])
    spacing = float(np.mean(np.diff(grid)))
    for m in mids:
        h = 1e-5 * max(abs(m), spacing)
        lo, hi = m - h, m + h
        if lo < grid[0] or hi > grid[-1]:
            continue
        second = (float(first_deriv(hi)) - float(first_deriv(lo))) / (2.0 * h)
        bound = float(first_deriv(m)) ** 2 / L
        if second > bound * (1.0 + rel_tol) + 1e-300:
            return False
    return True


def gradient_pair_bound(
    fstar_grad: Callable, x: float, y: float, L: float
) -> tuple[float, float]:
    """First-order conjugate bound: lhs = (f*'(x)-f*'(y))(x-y), rhs = L (x-y)^2/(xy)."""
    x, y = float(x), float(y)
    if x * y <= 0:
        raise ValueError("x and y must be nonzero and of the same sign")
    lhs = (float(fstar_grad(x)) - float(fstar_grad(y))) * (x - y)
    rhs = L * (x - y) ** 2 / (x * y)
    return lhs, rhs


def bregman_lower_bound(
    fstar: Callable,
    fstar_grad: Callable,
    x: float,
    y: float,
    L: float,
) -> tuple[float, float]:
    """Bregman divergence of f* against its log-smooth floor.

    Returns (lhs, rhs) with lhs = f*(x) - f*(y) - f*'(y)(x - y) and
    rhs = L (x/y - 1 - log(x/y)); lhs >= rhs for any conjugate of an
    L-log-smooth function, with equality for the pure log loss.
    """
    x, y = float(x), float(y)
    if y == 0 or x * y <= 0:
        raise ValueError("x and y must be nonzero and of the same sign")
    if L <= 0:
        raise ValueError("L must be positive")
    lhs = float(fstar(x)) - float(fstar(y)) - float(fstar_grad(y)) * (x - y)
    r = x / y
    rhs = L * (r - 1.0 - np.log(r))
    return lhs, float(rhs)


def barycentre_bound(
    fstar: Callable,
    x: float,
    y: float,
    s: float,
    L: float,
) -> tuple[float, float]:
    """Barycentre gap of f* against its log-smooth floor.

    Returns (lhs, rhs) with lhs = s f*(x) + (1-s) f*(y) - f*(y + s(x-y)) and
    rhs = L (log(1 - s + s x/y) - s log(x/y)); equality for the pure log loss
    and degenerate zeros at s = 0 and s = 1.
    """
    x, y, s = float(x), float(y), float(s)
    if y == 0 or x * y <= 0:
        raise ValueError("x and y must be nonzero and of the same sign")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if L <= 0:
        raise ValueError("L must be positive")
    lhs = s * float(fstar(x)) + (1.0 - s) * float(fstar(y)) - float(
        fstar(y + s * (x - y))
    )
    r = x / y
    rhs = L * (np.log(1.0 - s + s * r) - s * np.log(r))
    return lhs, float(rhs)


def barycentre_ratio(s, z):
    """(log((1-s) + s/z) + s log z) / (1 - z)^2, non-increasing in z on (0, inf)."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    num = np.log((1.0 - s) + s / z) + s * np.log(z)
    return num / (1.0 - z) ** 2


def barycentre_ratio_floor(s, z):
    """Lower bound s (1-s) (1/z - 1 + log z) valid for z >= 1."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    return s * (1.0 - s) * (1.0 / z - 1.0 + np.log(z))


def sigma_ratio(R):
    """(R - 1)^2 / (1/R + log R - 1) with its analytic limit 2 at R = 1."""
    R = np.asarray(R, dtype=float)
    out = np.empty_like(R)
    eps = R - 1.0
    near = np.abs(eps) < 1e-9
    # Small-eps expansion: denominator = eps^2/2 - 2 eps^3/3 + O(eps^4).
    out[near] = 2.0 + (8.0 / 3.0) * eps[near]
    far = ~near
    if np.any(far):
        Rf = R[far]
        denom = np.log1p(eps[far]) - eps[far] / Rf
        out[far] = (Rf - 1.0) ** 2 / denom
    return out


@dataclass
class RateReport:
    """Per-sample rate certificate quantities.

    ``sigma`` follows the log-smooth analysis, ``sigma_sc`` the comparison
    rate from restricted strong convexity, ``rho`` the optimal sampling law
    and ``sigma_bar`` its harmonic-mean aggregate rate.
    """

    beta: np.ndarray
    alpha_star: np.ndarray
    R: np.ndarray
    sigma: np.ndarray
    sigma_sc: np.ndarray
    rho: np.ndarray
    sigma_bar: float

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "R": self.R.tolist(),
            "sigma": self.sigma.tolist(),
            "sigma_sc": self.sigma_sc.tolist(),
            "rho": self.rho.tolist(),
            "sigma_bar": self.sigma_bar,
        }


def sigma_coeffs(
    data: ProblemData, alpha_star: np.ndarray, beta: np.ndarray
) -> RateReport:
    """Rate constants sigma_i from dual bounds beta_i >= alpha_i^* > 0.

    With R_i = beta_i / alpha_i^* and L_i = y_i,

        sigma_i    = 1 / (1 + ||x_i||^2 alpha_i*^2 / (2 lam n L_i)
                          * (R_i - 1)^2 / (1/R_i + log R_i - 1))
        sigma_sc,i = 1 / (1 + ||x_i||^2 alpha_i*^2 R_i^2 / (lam n L_i))

    and sigma_i >= sigma_sc,i always.  The importance-sampling law rho and
    its harmonic mean sigma_bar are filled in as well.
    """
    alpha_star = np.asarray(alpha_star, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if alpha_star.shape != (data.n,) or beta.shape != (data.n,):
        raise ValueError("alpha_star and beta must have one entry per sample")
    if np.any(alpha_star <= 0):
        raise ValueError("alpha_star entries must be positive")
    if np.any(beta < alpha_star):
        raise ValueError("beta must dominate alpha_star entrywise")
    row_sq = np.einsum("ij,ij->i", data.features, data.features)
    R = beta / alpha_star
    scale = row_sq * alpha_star**2 / (data.lam * data.n * data.labels)
    sigma = 1.0 / (1.0 + 0.5 * scale * sigma_ratio(R))
    sigma_sc = 1.0 / (1.0 + scale * R**2)
    rho, sigma_bar = importance_distribution(sigma)
    return RateReport(
        beta=beta,
        alpha_star=alpha_star,
        R=R,
        sigma=sigma,
        sigma_sc=sigma_sc,
        rho=rho,
        sigma_bar=sigma_bar,
    )


def importance_distribution(sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """Sampling law rho_i = sigma_i^{-1} / sum_j sigma_j^{-1} and harmonic mean.

    The aggregate rate sigma_bar = (mean of sigma_i^{-1})^{-1} always sits
    between min sigma_i and max sigma_i.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError("sigma must be a nonempty vector")
    if np.any(sigma <= 0):
        raise ValueError("sigma entries must be positive")
    inv = 1.0 / sigma
    total = float(np.sum(inv))
    rho = inv / total
    sigma_bar = sigma.size / total
    return rho, sigma_bar
