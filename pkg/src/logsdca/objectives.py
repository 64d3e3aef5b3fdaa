"""Primal/dual objectives for linear models with log losses.

The primal problem is

    min_w  psi^T w + (1/n) sum_i -y_i log(w^T x_i) + lam * (||w||^2 / 2 + h(w))

over the open polytope {w : w^T x_i > 0 for all i}, with h either absent or
an l1 penalty.  Its Fenchel dual is maximized over alpha in (0, inf)^n and
the two optima are linked by alpha_i = y_i / (w^T x_i) and w = prox_h(v(alpha)).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProblemData",
    "RegularizerSpec",
    "DualState",
    "Trace",
    "TraceRecord",
    "check_nonneg_gram",
    "in_polytope",
    "primal_objective",
    "dual_objective",
    "v_of_alpha",
    "prox_h",
    "gstar",
    "duality_gap",
    "kkt_residuals",
]

# Pairwise inner-product audits are exhaustive up to this many rows and
# randomized (1e5 sampled pairs) above it.
_EXHAUSTIVE_GRAM_LIMIT = 2000
_GRAM_AUDIT_PAIRS = 100_000


def check_nonneg_gram(features: np.ndarray, seed: int = 0) -> bool:
    """Audit whether all pairwise inner products x_i^T x_j are >= 0.

    Exhaustive for n <= 2000 rows, randomized pair sampling above.  A matrix
    with only nonnegative entries passes without forming any products.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if np.min(X) >= 0.0:
        return True
    n = X.shape[0]
    if n <= _EXHAUSTIVE_GRAM_LIMIT:
        return float(np.min(X @ X.T)) >= 0.0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=_GRAM_AUDIT_PAIRS)
    j = rng.integers(0, n, size=_GRAM_AUDIT_PAIRS)
    return float(np.min(np.einsum("kd,kd->k", X[i], X[j]))) >= 0.0


@dataclass
class ProblemData:
    """One problem instance: rows x_i, positive labels y_i, shift psi, level lam.

    Immutable after construction; safe to share across threads.  The
    ``nonneg_gram`` flag asserts that all pairwise row inner products are
    nonnegative (set it through :func:`check_nonneg_gram` or a constructor
    that guarantees nonnegative entries).
    """

    features: np.ndarray
    labels: np.ndarray
    psi: np.ndarray
    lam: float
    nonneg_gram: bool = False

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        self.lam = float(self.lam)
        if self.features.ndim != 2:
            raise ValueError("features must be an n x d matrix")
        n, d = self.features.shape
        if self.labels.shape != (n,):
            raise ValueError("labels must have one entry per feature row")
        if self.psi.shape != (d,):
            raise ValueError("psi must have one entry per feature column")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(self.psi)):
            raise ValueError("psi contains non-finite entries")
        if not np.all(self.labels > 0):
            raise ValueError("all labels must be positive")
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError("lam must be a positive real")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class RegularizerSpec:
    """Penalty h added on top of the always-present quadratic ||w||^2 / 2.

    ``penalty`` is "none" or "l1"; ``strength`` is the l1 level (>= 0).
    """

    penalty: str = "none"
    strength: float = 0.0

    def __post_init__(self) -> None:
        if self.penalty not in ("none", "l1"):
            raise ValueError(f"unknown penalty kind: {self.penalty!r}")
        self.strength = float(self.strength)
        if self.strength < 0:
            raise ValueError("l1 strength must be nonnegative")
        if self.penalty == "none":
            self.strength = 0.0

    @property
    def is_identity_prox(self) -> bool:
        return self.penalty == "none" or self.strength == 0.0


def in_polytope(w: np.ndarray, data: ProblemData) -> bool:
    """True iff w^T x_i > 0 strictly for every row i."""
    w = np.asarray(w, dtype=float)
    if w.shape != (data.d,):
        raise ValueError("w has wrong dimension")
    return float(np.min(data.features @ w)) > 0.0


def prox_h(v: np.ndarray, reg: RegularizerSpec) -> np.ndarray:
    """Proximal operator of h: identity for no penalty, soft threshold for l1."""
    v = np.asarray(v, dtype=float)
    if reg.is_identity_prox:
        return v.copy()
    return np.sign(v) * np.maximum(np.abs(v) - reg.strength, 0.0)


def gstar(v: np.ndarray, reg: RegularizerSpec) -> float:
    """Conjugate of g = ||.||^2/2 + h, evaluated through its maximizer prox_h(v)."""
    v = np.asarray(v, dtype=float)
    if reg.is_identity_prox:
        return 0.5 * float(v @ v)
    w = prox_h(v, reg)
    return float(w @ v - 0.5 * (w @ w) - reg.strength * np.sum(np.abs(w)))


def primal_objective(
    w: np.ndarray, data: ProblemData, reg: RegularizerSpec
) -> float | None:
    """Primal value at w, or None when w is outside the open polytope.

    Infeasibility is reported as a marker rather than an exception so that
    solver traces can record runs whose primal iterates are still undefined.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (data.d,):
        raise ValueError("w has wrong dimension")
    margins = data.features @ w
    if float(np.min(margins)) <= 0.0:
        return None
    penalty = 0.5 * float(w @ w)
    if not reg.is_identity_prox:
        penalty += reg.strength * float(np.sum(np.abs(w)))
    loss = -float(np.mean(data.labels * np.log(margins)))
    return float(data.psi @ w) + loss + data.lam * penalty


def v_of_alpha(alpha: np.ndarray, data: ProblemData) -> np.ndarray:
    """Dual-to-primal map v(alpha) = (1/(lam*n)) sum_i alpha_i x_i - psi/lam."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (data.n,):
        raise ValueError("alpha has wrong dimension")
    return (data.features.T @ alpha) / (data.lam * data.n) - data.psi / data.lam


def dual_objective(
    alpha: np.ndarray, data: ProblemData, reg: RegularizerSpec
) -> float:
    """Dual value (1/n) sum_i (y_i + y_i log(alpha_i/y_i)) - lam * g*(v(alpha))."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (data.n,):
        raise ValueError("alpha has wrong dimension")
    if float(np.min(alpha)) <= 0.0:
        raise ValueError("dual variables must be strictly positive")
    y = data.labels
    loss_term = float(np.mean(y + y * np.log(alpha / y)))
    return loss_term - data.lam * gstar(v_of_alpha(alpha, data), reg)


def duality_gap(
    w: np.ndarray,
    alpha: np.ndarray,
    data: ProblemData,
    reg: RegularizerSpec,
) -> float | None:
    """P(w) - D(alpha), or None while w is infeasible (gap undefined)."""
    p = primal_objective(w, data, reg)
    if p is None:
        return None
    return p - dual_objective(alpha, data, reg)


def kkt_residuals(
    w: np.ndarray,
    alpha: np.ndarray,
    data: ProblemData,
    reg: RegularizerSpec,
) -> tuple[np.ndarray, float]:
    """Stationarity residuals (|alpha_i - y_i/(w^T x_i)|, ||w - prox(v(alpha))||).

    Requires a feasible w; both residuals vanish exactly at the joint optimum.
    """
    w = np.asarray(w, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    margins = data.features @ w
    if float(np.min(margins)) <= 0.0:
        raise ValueError("w is outside the open polytope")
    r1 = np.abs(alpha - data.labels / margins)
    r2 = float(np.linalg.norm(w - prox_h(v_of_alpha(alpha, data), reg)))
    return r1, r2


@dataclass
class DualState:
    """Solver state: dual vector alpha, auxiliary v(alpha), primal w = prox(v).

    Single writer; alpha entries stay strictly positive and v is maintained
    incrementally (audited against full recomputation by the solver).
    """

    alpha: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_alpha(
        cls, alpha: np.ndarray, data: ProblemData, reg: RegularizerSpec
    ) -> "DualState":
        alpha = np.asarray(alpha, dtype=float).copy()
        if float(np.min(alpha)) <= 0.0:
            raise ValueError("dual variables must be strictly positive")
        v = v_of_alpha(alpha, data)
        return cls(alpha=alpha, v=v, w=prox_h(v, reg))

    def v_drift(self, data: ProblemData) -> float:
        """Relative deviation of the maintained v from full recomputation."""
        exact = v_of_alpha(self.alpha, data)
        scale = max(float(np.linalg.norm(exact)), 1.0)
        return float(np.linalg.norm(self.v - exact)) / scale


@dataclass
class TraceRecord:
    epoch: int
    time_s: float
    dual: float | None
    primal: float | None
    gap: float | None


@dataclass
class Trace:
    """Per-epoch progress records with undefined primal/gap kept as None."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("trace epochs must be strictly increasing")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def duals(self) -> list[float | None]:
        return [r.dual for r in self.records]

    def to_csv(self, path) -> None:
        """Write columns epoch,time_s,dual,primal,gap; blanks for undefined."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "time_s", "dual", "primal", "gap"])
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch,
                        f"{r.time_s:.6f}",
                        "" if r.dual is None else repr(r.dual),
                        "" if r.primal is None else repr(r.primal),
                        "" if r.gap is None else repr(r.gap),
                    ]
                )
