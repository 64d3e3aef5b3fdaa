"""Shifted prox-SDCA for log losses, with Poisson and Hawkes front-ends."""

from .baselines import (
    BaselineOptions,
    BaselineResult,
    newton_fit,
    nolips_fit,
    tune_nolips_step,
)
from .hawkes import (
    HawkesData,
    HawkesModel,
    adjacency_metrics,
    fit_hawkes,
    hawkes_loglik,
    hawkes_simulate,
    hawkes_subproblems,
    hawkes_weights,
)
from .logsmooth import (
    RateReport,
    barycentre_bound,
    bregman_lower_bound,
    check_log_smooth,
    fstar_derivs,
    importance_distribution,
    sigma_coeffs,
)
from .objectives import (
    DualState,
    ProblemData,
    RegularizerSpec,
    Trace,
    dual_objective,
    duality_gap,
    in_polytope,
    kkt_residuals,
    primal_objective,
    prox_h,
    v_of_alpha,
)
from .poisson import (
    RawPoissonData,
    poisson_prepare,
    poisson_simulate,
)
from .sdca import (
    SolveOptions,
    SolveResult,
    beta_bounds,
    coordinate_update,
    heuristic_init,
    minibatch_update,
    solve,
)

__version__ = "0.1.0"
