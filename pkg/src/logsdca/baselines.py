"""Batch reference solvers: damped Newton and Bregman descent (NoLips).

Both handle the ridge penalty only.  Newton keeps every iterate strictly
inside the polytope through its line search; NoLips runs multiplicative
Burg-entropy steps and is therefore confined to the positive orthant, which
is exactly the failure mode it is used to demonstrate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .objectives import (
    ProblemData,
    RegularizerSpec,
    Trace,
    TraceRecord,
    primal_objective,
)

__all__ = [
    "BaselineOptions",
    "BaselineResult",
    "newton_fit",
    "nolips_fit",
    "tune_nolips_step",
    "feasible_start",
    "primal_gradient",
    "primal_hessian",
]

_ARMIJO = 1e-4
_MAX_HALVINGS = 60


@dataclass
class BaselineOptions:
    """Iteration budget, tolerance, and the NoLips step size.

    ``tol`` bounds the gradient norm (Newton) or the relative objective
    decrease per iteration (NoLips).  ``step_size`` of None makes NoLips
    tune itself on a logarithmic grid first; zero is allowed and degenerates
    to no movement.
    """

    max_iters: int = 200
    tol: float = 1e-10
    step_size: float | None = None
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.step_size is not None and self.step_size < 0:
            raise ValueError("step_size must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class BaselineResult:
    w: np.ndarray
    trace: Trace
    converged: bool
    iterations: int


def _require_ridge(reg: RegularizerSpec) -> None:
    if not reg.is_identity_prox:
        raise ValueError("batch baselines handle the ridge penalty only")


def primal_gradient(w: np.ndarray, data: ProblemData) -> np.ndarray:
    margins = data.features @ w
    return (
        data.psi
        - (data.features.T @ (data.labels / margins)) / data.n
        + data.lam * w
    )


def primal_hessian(w: np.ndarray, data: ProblemData) -> np.ndarray:
    margins = data.features @ w
    scaled = data.features * (data.labels / margins**2)[:, None]
    return (data.features.T @ scaled) / data.n + data.lam * np.eye(data.d)


def feasible_start(data: ProblemData) -> np.ndarray:
    """Interior point along the all-ones direction, scaled to the mean label.

    Works whenever every row has a positive sum (always true for nonnegative
    feature matrices without zero rows); otherwise a start must be supplied.
    """
    s = data.features @ np.ones(data.d)
    if float(np.min(s)) <= 0.0:
        raise ValueError(
            "no feasible starting point along the all-ones direction; "
            "supply w0 explicitly"
        )
    scale = float(np.mean(data.labels)) / float(np.mean(s))
    return np.full(data.d, scale)


def newton_fit(
    data: ProblemData,
    reg: RegularizerSpec,
    opts: BaselineOptions,
    w0: np.ndarray | None = None,
) -> BaselineResult:
    """Damped Newton with a feasibility-preserving backtracking line search.

    Any step leaving the open polytope or failing the Armijo decrease is
    halved; stops once the gradient norm falls below tol.
    """
    _require_ridge(reg)
    w = feasible_start(data) if w0 is None else np.asarray(w0, dtype=float).copy()
    obj = primal_objective(w, data, reg)
    if obj is None:
        raise ValueError("starting point is outside the open polytope")

    trace = Trace()
    t0 = time.monotonic()
    trace.append(TraceRecord(0, 0.0, None, obj, None))
    converged = False
    it = 0
    while it < opts.max_iters:
        grad = primal_gradient(w, data)
        if float(np.linalg.norm(grad)) <= opts.tol:
            converged = True
            break
        H = primal_hessian(w, data)
        try:
            direction = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            direction = -grad
        slope = float(grad @ direction)
        if slope >= 0:
            direction = -grad
            slope = -float(grad @ grad)
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            cand = w + step * direction
            cand_obj = primal_objective(cand, data, reg)
            if cand_obj is not None and cand_obj <= obj + _ARMIJO * step * slope:
                w = cand
                obj = cand_obj
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        it += 1
        if it % opts.record_every == 0:
            trace.append(TraceRecord(it, time.monotonic() - t0, None, obj, None))
    if trace.records[-1].epoch < it:
        trace.append(TraceRecord(it, time.monotonic() - t0, None, obj, None))
    return BaselineResult(w=w, trace=trace, converged=converged, iterations=it)


def _nolips_step(
    w: np.ndarray,
    obj: float,
    data: ProblemData,
    reg: RegularizerSpec,
    step: float,
) -> tuple[np.ndarray, float, bool]:
    """One Burg-entropy Bregman step w_j <- w_j / (1 + t w_j grad_j).

    The step is halved while a coordinate would leave the positive orthant
    or the objective would increase; returns (w, objective, moved).
    """
    if step == 0.0:
        return w, obj, False
    grad = primal_gradient(w, data)
    t = step
    for _ in range(_MAX_HALVINGS):
        denom = 1.0 + t * w * grad
        if float(np.min(denom)) > 0.0:
            cand = w / denom
            cand_obj = primal_objective(cand, data, reg)
            if cand_obj is not None and cand_obj <= obj:
                return cand, cand_obj, True
        t *= 0.5
    return w, obj, False


def _positive_start(data: ProblemData, w0: np.ndarray | None) -> np.ndarray:
    if w0 is not None:
        w0 = np.asarray(w0, dtype=float).copy()
        if np.any(w0 <= 0):
            raise ValueError("NoLips requires a componentwise positive start")
        return w0
    return feasible_start(data)


def tune_nolips_step(
    data: ProblemData,
    reg: RegularizerSpec,
    iters: int = 300,
    w0: np.ndarray | None = None,
) -> float:
    """Pick the base step giving the best objective after ``iters`` iterations.

    Sweeps a logarithmic grid anchored at the relative-smoothness step
    1 / sum_i y_i, which is sound but far too small in practice.
    """
    _require_ridge(reg)
    start = _positive_start(data, w0)
    base = 1.0 / float(np.sum(data.labels))
    best_step = 0.0
    best_obj = np.inf
    for step in base * np.logspace(0, 6, 13):
        w = start.copy()
        obj = primal_objective(w, data, reg)
        for _ in range(iters):
            w, obj, moved = _nolips_step(w, obj, data, reg, float(step))
            if not moved:
                break
        if obj < best_obj:
            best_obj = obj
            best_step = float(step)
    return best_step


def nolips_fit(
    data: ProblemData,
    reg: RegularizerSpec,
    opts: BaselineOptions,
    w0: np.ndarray | None = None,
) -> BaselineResult:
    """Bregman descent with the Burg entropy reference -sum_j log(w_j).

    Iterates stay componentwise positive, so minimizers with negative
    entries are out of reach by construction.  Requires a nonnegative
    feature matrix so that the positive orthant is feasible.
    """
    _require_ridge(reg)
    if float(np.min(data.features)) < 0.0:
        raise ValueError("NoLips requires nonnegative feature entries")
    if float(np.min(data.features.sum(axis=1))) <= 0.0:
        raise ValueError("all-zero feature rows make the polytope empty")

    w = _positive_start(data, w0)
    step = opts.step_size
    if step is None:
        step = tune_nolips_step(data, reg, iters=min(300, opts.max_iters), w0=w)

    obj = primal_objective(w, data, reg)
    trace = Trace()
    t0 = time.monotonic()
    trace.append(TraceRecord(0, 0.0, None, obj, None))
    converged = False
    it = 0
    while it < opts.max_iters:
        prev_obj = obj
        w, obj, moved = _nolips_step(w, obj, data, reg, step)
        it += 1
        if it % opts.record_every == 0:
            trace.append(TraceRecord(it, time.monotonic() - t0, None, obj, None))
        if not moved or abs(prev_obj - obj) <= opts.tol * max(1.0, abs(obj)):
            converged = True
            break
    if trace.records[-1].epoch < it:
        trace.append(TraceRecord(it, time.monotonic() - t0, None, obj, None))
    return BaselineResult(w=w, trace=trace, converged=converged, iterations=it)
