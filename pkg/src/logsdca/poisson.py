"""Linear Poisson regression front-end: dataset preparation, simulation, IO.

Rows with zero labels never enter the loss sum; they are folded into the
linear shift psi, which is the sample mean of all rows taken over the count
of positive-label rows, while the penalty level is rescaled by n0/n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .objectives import ProblemData, check_nonneg_gram

__all__ = [
    "RawPoissonData",
    "poisson_prepare",
    "poisson_simulate",
    "default_reg_level",
    "minmax_scale",
    "load_poisson_file",
    "write_poisson_csv",
]

# Simulator defaults: not prescribed anywhere, documented here.
_FEASIBILITY_MARGIN = 1e-3
_MAX_WEIGHT_TRIES = 5000


@dataclass
class RawPoissonData:
    """Unprocessed count dataset: features, nonnegative integer labels, level lam0."""

    features: np.ndarray
    labels: np.ndarray
    lam0: float

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        self.lam0 = float(self.lam0)
        if self.features.ndim != 2:
            raise ValueError("features must be an n x d matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative")
        if not np.any(self.labels > 0):
            raise ValueError("at least one label must be positive")
        if self.lam0 <= 0:
            raise ValueError("lam0 must be positive")


def default_reg_level(features: np.ndarray) -> float:
    """Default penalty level mean_i ||x_i||^2 / n."""
    X = np.asarray(features, dtype=float)
    return float(np.mean(np.einsum("ij,ij->i", X, X))) / X.shape[0]


def minmax_scale(features: np.ndarray) -> np.ndarray:
    """Map every column affinely onto [0, 1]; constant columns become zero."""
    X = np.asarray(features, dtype=float)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    out = (X - lo) / span
    out[:, hi == lo] = 0.0
    return out


def poisson_prepare(raw: RawPoissonData, scale: str = "minmax") -> ProblemData:
    """Turn raw counts into a problem instance.

    Only positive-label rows carry losses; with n of them among n0 rows,
    psi = (1/n) * sum of all n0 rows and lam = (n0/n) * lam0, so the prepared
    objective equals (n0/n) times the raw penalized negative log-likelihood.
    Min-max scaling (the default) makes every entry nonnegative, which also
    certifies the nonnegative-Gram property the dual bounds need.
    """
    if scale not in ("minmax", "none"):
        raise ValueError(f"unknown scaling: {scale!r}")
    X = raw.features if scale == "none" else minmax_scale(raw.features)
    positive = raw.labels > 0
    n = int(np.count_nonzero(positive))
    n0 = raw.labels.size
    psi = X.sum(axis=0) / n
    lam = (n0 / n) * raw.lam0
    nonneg = True if scale == "minmax" else check_nonneg_gram(X)
    return ProblemData(
        features=X[positive],
        labels=raw.labels[positive],
        psi=psi,
        lam=lam,
        nonneg_gram=nonneg,
    )


def poisson_simulate(
    n0: int,
    d: int,
    nnz: int,
    seed: int = 0,
    lam0: float | None = None,
    margin: float = _FEASIBILITY_MARGIN,
    max_tries: int = _MAX_WEIGHT_TRIES,
) -> tuple[RawPoissonData, np.ndarray]:
    """Simulate a feasible Poisson regression dataset.

    Features are folded standard normal; the generating vector has ``nnz``
    standard-normal entries at random positions and is resampled until every
    intensity w^T x_i clears ``margin``, so the polytope is nonempty by
    construction.  Labels are Poisson draws at those intensities.  Returns
    the raw dataset together with the generating weights.
    """
    if nnz > d:
        raise ValueError("nnz cannot exceed the number of features")
    rng = np.random.default_rng(seed)
    X = np.abs(rng.standard_normal((n0, d)))
    w = None
    for _ in range(max_tries):
        trial = np.zeros(d)
        support = rng.choice(d, size=nnz, replace=False)
        trial[support] = rng.standard_normal(nnz)
        if float(np.min(X @ trial)) > margin:
            w = trial
            break
    if w is None:
        raise RuntimeError(
            f"could not find feasible generating weights in {max_tries} tries"
        )
    intensities = X @ w
    labels = rng.poisson(intensities).astype(float)
    if not np.any(labels > 0):
        # pathological draw; force one positive count at the largest intensity
        labels[int(np.argmax(intensities))] = 1.0
    if lam0 is None:
        lam0 = default_reg_level(X)
    return RawPoissonData(features=X, labels=labels, lam0=lam0), w


def write_poisson_csv(path, features: np.ndarray, labels: np.ndarray) -> None:
    """Write label-first CSV rows: y, x_1, ..., x_d."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1, 1)
    np.savetxt(path, np.hstack([y, X]), delimiter=",", fmt="%.17g")


def load_poisson_file(path, header: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Load (features, labels) from CSV (label first) or JSON {"y":..., "X":...}."""
    text_path = str(path)
    if text_path.endswith(".json"):
        with open(text_path) as fh:
            payload = json.load(fh)
        return np.asarray(payload["X"], dtype=float), np.asarray(
            payload["y"], dtype=float
        )
    table = np.loadtxt(text_path, delimiter=",", skiprows=1 if header else 0)
    table = np.atleast_2d(table)
    return table[:, 1:], table[:, 0]
