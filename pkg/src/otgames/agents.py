"""Finite-population simulation of the pairwise revision process.

Each of ``N`` players on strategy ``i`` switches to a neighbour ``j`` with
probability ``(fbar_j - fbar_i)_+ * h`` during a step of length ``h``, where
the noisy payoffs are evaluated at the empirical distribution. As ``N``
grows the empirical distribution follows the Fokker-Planck flow.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dynamics import Trajectory, output_grid
from .errors import StepTooLargeError, ValidationError
from .games import GameModel, check_beta, payoff
from .graph import StrategyGraph

STEP_FRACTION = 0.1
H_MAX = 1e-3
PROB_TOL = 1e-12


@dataclass(frozen=True)
class AgentEnsemble:
    counts: np.ndarray
    seed: Optional[int] = None
    time: float = 0.0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size < 2:
            raise ValidationError("counts must be a vector with at least 2 entries")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.round(counts)):
                raise ValidationError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        if counts.sum() == 0:
            raise ValidationError("ensemble needs N >= 1 players")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return self.counts.size

    @property
    def rho(self) -> np.ndarray:
        return self.counts / self.N

    @classmethod
    def from_state(cls, rho, N: int, seed: Optional[int] = None) -> "AgentEnsemble":
        """Round ``N * rho`` to integers by largest remainder, so the total is exactly ``N``."""
        if N < 1:
            raise ValidationError(f"N must be at least 1, got {N}")
        rho = np.asarray(rho, dtype=float)
        raw = N * rho
        counts = np.floor(raw).astype(np.int64)
        short = N - int(counts.sum())
        if short > 0:
            counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
        return cls(counts, seed)


def capped_noisy_payoff(model: GameModel, rho, beta, N: int) -> np.ndarray:
    """Noisy payoff with ``log rho_i`` replaced by ``log(max(rho_i, 1/(2N)))``."""
    f = payoff(model, rho)
    if beta == 0:
        return f
    return f - beta * np.log(np.maximum(rho, 0.5 / N))


def switch_rates(model: GameModel, graph: StrategyGraph, ensemble: AgentEnsemble, beta) -> np.ndarray:
    """Matrix of per-player rates ``r[i, j] = (fbar_j - fbar_i)_+`` on graph edges."""
    return _rates(model, graph, ensemble.counts, ensemble.N, beta)


def _rates(model, graph, counts, N, beta):
    fbar = capped_noisy_payoff(model, counts / N, beta, N)
    i, j = graph.edge_i, graph.edge_j
    d = fbar[j] - fbar[i]
    rates = np.zeros((graph.n, graph.n))
    rates[i, j] = np.maximum(d, 0.0)
    rates[j, i] = np.maximum(-d, 0.0)
    return rates


def default_step(rates, h_max: float = H_MAX) -> float:
    """``0.1 / (largest total exit rate)``, capped at ``h_max``."""
    top = float(rates.sum(axis=1).max())
    return h_max if top <= 0 else min(h_max, STEP_FRACTION / top)


def _draw(counts, rates, h, rng):
    probs = rates * h
    leave = probs.sum(axis=1)
    worst = int(np.argmax(leave))
    if leave[worst] > 1.0 + PROB_TOL:
        raise StepTooLargeError(
            f"step h = {h:.3g} gives strategy {worst + 1} a switching probability "
            f"{leave[worst]:.3g} > 1"
        )
    probs[np.diag_indices_from(probs)] = np.maximum(1.0 - leave, 0.0)
    assert probs.min() >= 0.0 and probs.max() <= 1.0 + PROB_TOL
    # one multinomial per strategy class; row i holds where class i's players go
    return rng.multinomial(counts, probs).sum(axis=0)


def step_ensemble(ensemble: AgentEnsemble, model: GameModel, graph: StrategyGraph, beta,
                  h: Optional[float] = None, rng=None, h_max: float = H_MAX) -> AgentEnsemble:
    """Advance every player by one revision step of length ``h``.

    Players of one strategy are exchangeable, so each class is resolved with
    a single multinomial draw. ``h`` defaults to :func:`default_step`.
    """
    if graph.n != ensemble.n or model.n != ensemble.n:
        raise ValidationError("ensemble, game and graph sizes differ")
    beta = check_beta(beta)
    rng = np.random.default_rng(ensemble.seed if rng is None else rng)
    rates = switch_rates(model, graph, ensemble, beta)
    if h is None:
        h = default_step(rates, h_max)
    if not h > 0:
        raise ValidationError(f"step must be positive, got {h}")
    counts = _draw(ensemble.counts, rates, h, rng)
    return replace(ensemble, counts=counts, time=ensemble.time + h)


def run_ensemble(ensemble: AgentEnsemble, model: GameModel, graph: StrategyGraph, beta,
                 t_end: float, h: Optional[float] = None, rng=None,
                 record_every: Optional[float] = None, h_max: float = H_MAX) -> Trajectory:
    """Simulate to ``t_end`` and record the empirical distribution on a uniform grid.

    ``record_every`` defaults to the ODE output spacing. Steps are shortened
    to land on each record time. With ``h=None`` the step adapts every
    iteration (see :func:`default_step`). All draws come from ``rng``, or
    from a generator seeded with ``ensemble.seed``.
    """
    beta = check_beta(beta)
    if not t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t_end}")
    rng = np.random.default_rng(ensemble.seed if rng is None else rng)
    times = output_grid(float(t_end), record_every)
    states = np.empty((times.size, ensemble.n))
    states[0] = ensemble.rho
    t = 0.0
    steps = 0
    counts = np.array(ensemble.counts)
    big_n = ensemble.N
    for k in range(1, times.size):
        while t < times[k]:
            rates = _rates(model, graph, counts, big_n, beta)
            step = default_step(rates, h_max) if h is None else h
            if t + step >= times[k] - 1e-12 * max(1.0, times[k]):
                step = times[k] - t
                t = times[k]
            else:
                t += step
            counts = _draw(counts, rates, step, rng)
            steps += 1
        states[k] = counts / big_n
    meta = dict(N=ensemble.N, seed=ensemble.seed, steps=steps, h=h, h_max=h_max)
    return Trajectory(times, states, beta, model.name, meta, model=model, graph=graph)


def mean_field_deviation(empirical: Trajectory, reference: Trajectory) -> float:
    """Sup over shared sample times of the sup-norm gap between two trajectories."""
    if empirical.times.shape != reference.times.shape or not np.allclose(
        empirical.times, reference.times, rtol=0, atol=1e-9
    ):
        raise ValidationError("trajectories are sampled on different grids")
    return float(np.max(np.abs(empirical.states - reference.states)))
