"""Shared instance builders for the test suite."""

import numpy as np

from logsdca import ProblemData, RegularizerSpec
from logsdca.poisson import poisson_prepare, poisson_simulate

RIDGE = RegularizerSpec()


def golden_instance() -> ProblemData:
    """1-d instance with alpha* = w* = 1 and P = D = 0.5."""
    return ProblemData(
        features=[[1.0]], labels=[1.0], psi=[0.0], lam=1.0, nonneg_gram=True
    )


def simulated_instance(
    n0: int = 200, d: int = 10, nnz: int = 5, seed: int = 0, scale: str = "minmax"
) -> ProblemData:
    raw, _ = poisson_simulate(n0, d, nnz, seed=seed)
    return poisson_prepare(raw, scale=scale)


def random_instance(n: int, d: int, seed: int, lam: float | None = None) -> ProblemData:
    """Small instance with nonnegative features and a nonempty polytope."""
    rng = np.random.default_rng(seed)
    X = np.abs(rng.standard_normal((n, d))) + 0.05
    y = rng.poisson(2.0, size=n) + 1.0
    psi = X.mean(axis=0)
    if lam is None:
        lam = float(np.mean(np.einsum("ij,ij->i", X, X))) / n
    return ProblemData(features=X, labels=y, psi=psi, lam=lam, nonneg_gram=True)


def random_positive_alpha(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.2, 3.0, size=n)
