"""Fokker-Planck dynamics of population games on strategy graphs.

Strategies are numbered ``1..n`` in edge lists, configuration files and
exported columns, and ``0..n-1`` in arrays.
"""
from ._core import BACKEND
from .agents import AgentEnsemble, mean_field_deviation, run_ensemble, step_ensemble
from .diagnostics import (
    compute_diagnostics,
    decay_rate_fit,
    dissipation_check,
    fisher_log_ratio,
    fit_exponential_decay,
    relative_entropy,
    relative_fisher,
)
from .dynamics import (
    AttractorReport,
    ClassifyOptions,
    Trajectory,
    classify_attractor,
    integrate,
    rhs,
    sweep_beta,
)
from .equilibrium import (
    GibbsMeasure,
    gibbs_map,
    jacobian_rhs,
    nearest_gibbs,
    solve_gibbs,
    stability_lambda,
    stability_lambda_direct,
    tangent_spectrum,
)
from .errors import NumericalError, OTGamesError, ValidationError
from .games import (
    GameModel,
    builtin,
    congestion,
    free_energy,
    hessian_noisy_potential,
    is_nash,
    noisy_payoff,
    noisy_potential,
    payoff,
)
from .graph import EdgeFlux, StrategyGraph, build_graph, complete_graph, divergence, gradient
from .metric import inner_product, upwind_weights

__version__ = "0.1.0"
