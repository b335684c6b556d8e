"""Relative entropy, relative Fisher information and entropy decay along trajectories.

For a potential game with noise ``beta > 0`` and a Gibbs measure ``rho_inf``
the relative entropy is ``H = beta * (Fbar(rho_inf) - Fbar(rho))`` where
``Fbar`` is the noisy potential. Along the flow ``dH/dt = -beta * I`` with

    I(rho) = sum over ordered edges (i, j) of [(fbar_j - fbar_i)_+]^2 rho_i.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import Trajectory
from .errors import (
    TrajectoryTooShortError,
    UnsupportedOperationError,
    ValidationError,
)
from .games import GameModel, _require_interior, free_energy, noisy_payoff, noisy_potential
from .graph import StrategyGraph

log = logging.getLogger(__name__)

H_FLOOR = 1e-14


def _require_beta(beta, what):
    if not beta > 0:
        raise UnsupportedOperationError(f"{what} needs beta > 0")


def relative_entropy(model: GameModel, rho, rho_inf, beta) -> float:
    """``beta * (Fbar(rho_inf) - Fbar(rho))``, nonnegative when ``rho_inf`` maximises ``Fbar``."""
    _require_beta(beta, "relative entropy")
    if not model.is_potential:
        raise UnsupportedOperationError(f"game {model.name!r} has no potential")
    rho = np.asarray(rho, dtype=float)
    rho_inf = np.asarray(rho_inf, dtype=float)
    _require_interior(rho)
    _require_interior(rho_inf, "reference state")
    return float(beta * (noisy_potential(model, rho_inf, beta) - noisy_potential(model, rho, beta)))


def relative_fisher(model: GameModel, graph: StrategyGraph, rho, beta) -> float:
    """Sum over ordered edges of ``[(fbar_j - fbar_i)_+]^2 * rho_i``.

    With this normalisation ``dH/dt = -beta * I`` exactly.
    """
    _require_beta(beta, "relative Fisher information")
    rho = np.asarray(rho, dtype=float)
    fbar = noisy_payoff(model, rho, beta)
    d = fbar[graph.edge_j] - fbar[graph.edge_i]
    # each unordered edge is active in at most one orientation
    src = np.where(d > 0, rho[graph.edge_i], rho[graph.edge_j])
    return float(np.sum(d * d * src))


def fisher_log_ratio(model: GameModel, graph: StrategyGraph, rho, beta) -> float:
    """Fisher information written with log-ratios ``log(rho_i / exp(F_i/beta))``.

    Those log-ratios equal ``-fbar_i / beta``, so this is
    ``relative_fisher / beta**2`` and does not satisfy ``dH/dt = -beta * I``.
    """
    return relative_fisher(model, graph, rho, beta) / beta**2


def _reference_state(traj: Trajectory, rho_inf):
    if rho_inf is not None:
        return np.asarray(rho_inf, dtype=float)
    from .equilibrium import nearest_gibbs, solve_gibbs

    measures = solve_gibbs(traj.model, traj.beta, rng=0)
    if not measures:
        raise ValidationError("no Gibbs measure found to use as reference state")
    chosen = nearest_gibbs(measures, traj.terminal)
    log.info("reference Gibbs measure %s (nearest of %d to the terminal state)",
             np.array2string(chosen.rho_star, precision=6), len(measures))
    return chosen.rho_star


def compute_diagnostics(traj: Trajectory, rho_inf=None) -> dict:
    """Fill ``traj.diagnostics`` with ``free_energy``, ``H`` and ``I`` columns.

    ``free_energy`` needs a potential; ``H`` needs a potential and
    ``beta > 0``; ``I`` needs ``beta > 0``. Undefined columns are NaN. When
    ``rho_inf`` is not given the Gibbs measure nearest to the terminal state
    is used and recorded in ``traj.meta["rho_inf"]``.
    """
    model, graph = traj.model, traj.graph
    if model is None or graph is None:
        raise ValidationError("trajectory has no game/graph attached")
    m = len(traj)
    fe = np.full(m, np.nan)
    h = np.full(m, np.nan)
    fisher = np.full(m, np.nan)
    beta = traj.beta
    interior = np.all(traj.states > 0, axis=1)
    if model.is_potential:
        for k in range(m):
            if beta == 0 or interior[k]:
                fe[k] = free_energy(model, traj.states[k], beta)
        if beta > 0:
            ref = _reference_state(traj, rho_inf)
            fe_ref = free_energy(model, ref, beta)
            # H = beta * (free energy(rho) - free energy(rho_inf))
            h = beta * (fe - fe_ref)
            traj.meta["rho_inf"] = [float(v) for v in ref]
    if beta > 0:
        for k in np.flatnonzero(interior):
            fisher[k] = relative_fisher(model, graph, traj.states[k], beta)
    traj.diagnostics = {"free_energy": fe, "H": h, "I": fisher}
    return traj.diagnostics


def dissipation_check(traj: Trajectory, rho_inf=None) -> float:
    """Largest relative mismatch ``|dH/dt + beta I| / (1 + |dH/dt|)``.

    ``dH/dt`` is a central difference on the output grid, so the residual
    shrinks quadratically with the sampling step.
    """
    _require_beta(traj.beta, "the dissipation check")
    if len(traj) < 3:
        raise TrajectoryTooShortError("dissipation check needs at least 3 samples")
    if traj.diagnostics is None or np.all(np.isnan(traj.diagnostics["H"])):
        compute_diagnostics(traj, rho_inf)
    h = traj.diagnostics["H"]
    fisher = traj.diagnostics["I"]
    if np.all(np.isnan(h)):
        raise UnsupportedOperationError("relative entropy is undefined for this trajectory")
    t = traj.times
    dh = (h[2:] - h[:-2]) / (t[2:] - t[:-2])
    res = np.abs(dh + traj.beta * fisher[1:-1]) / (1.0 + np.abs(dh))
    return float(np.nanmax(res))


@dataclass
class DecayFit:
    rate: float
    r_squared: float
    t_start: float
    t_end: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(rate=self.rate, r_squared=self.r_squared, t_start=self.t_start,
                    t_end=self.t_end, n_points=self.n_points)


def fit_exponential_decay(times, h, tail_fraction: float = 0.5,
                          h_floor: float = H_FLOOR) -> DecayFit:
    """Least-squares fit of ``log h = c - rate * t`` on the tail of the measurable part.

    Samples from the first one with ``h <= h_floor`` onward are dropped
    (they are dominated by round-off), then the final ``tail_fraction`` of
    what remains is fitted.
    """
    times = np.asarray(times, dtype=float)
    h = np.asarray(h, dtype=float)
    if not 0 < tail_fraction <= 1:
        raise ValidationError("tail_fraction must lie in (0, 1]")
    low = np.flatnonzero(~(h > h_floor))
    stop = int(low[0]) if low.size else h.size
    start = int(np.floor((1.0 - tail_fraction) * stop))
    t = times[start:stop]
    y = h[start:stop]
    if t.size < 3:
        raise TrajectoryTooShortError(
            f"only {t.size} samples with H above {h_floor:g} in the fit window"
        )
    logy = np.log(y)
    slope, icpt = np.polyfit(t, logy, 1)
    fitted = icpt + slope * t
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), r2, float(t[0]), float(t[-1]), int(t.size))


def decay_rate_fit(traj: Trajectory, tail_fraction: float = 0.5, rho_inf=None,
                   h_floor: float = H_FLOOR) -> DecayFit:
    """Exponential decay rate of the relative entropy along ``traj``."""
    if traj.diagnostics is None or np.all(np.isnan(traj.diagnostics["H"])):
        compute_diagnostics(traj, rho_inf)
    return fit_exponential_decay(traj.times, traj.diagnostics["H"], tail_fraction, h_floor)
