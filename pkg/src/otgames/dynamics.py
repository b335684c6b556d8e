"""Fokker-Planck dynamics of a population game on a strategy graph.

The vector field is

    drho_i/dt = sum_{j in N(i)} rho_j [Fbar_i - Fbar_j]_+ - rho_i [Fbar_j - Fbar_i]_+

with ``Fbar_i = F_i(rho) - beta log rho_i``. At ``beta = 0`` on the complete
graph it is the Smith dynamics.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core
from .errors import (
    BoundaryStateError,
    InvariantViolationError,
    NumericalError,
    OTGamesError,
    StepSizeUnderflowError,
    TrajectoryTooShortError,
    ValidationError,
)
from .games import GameModel, check_beta, check_state, is_interior, payoff
from .graph import StrategyGraph

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-9
STATE_FLOOR = 1e-12
MASS_TOL = 1e-9
NEG_TOL = 1e-12


def _check_dims(model: GameModel, graph: StrategyGraph):
    if model.n != graph.n:
        raise ValidationError(f"game has {model.n} strategies but graph has {graph.n}")


def rhs(model: GameModel, graph: StrategyGraph, rho, beta) -> np.ndarray:
    """Evaluate the Fokker-Planck vector field at ``rho``."""
    _check_dims(model, graph)
    rho = np.asarray(rho, dtype=float)
    if beta > 0 and not is_interior(rho):
        raise BoundaryStateError("rhs needs an interior state when beta > 0")
    f = payoff(model, rho)
    return _core.fp_rhs(rho, f, float(beta), graph.edge_i, graph.edge_j)


@dataclass
class Trajectory:
    """Sampled solution of the dynamics.

    ``states[k]`` is the state at ``times[k]``. ``diagnostics`` maps column
    names (``free_energy``, ``H``, ``I``) to arrays aligned with ``times``;
    NaN marks an undefined entry. ``model`` and ``graph`` are kept for
    in-process post-processing and are not serialised.
    """

    times: np.ndarray
    states: np.ndarray
    beta: float
    game: str = "custom"
    meta: dict = field(default_factory=dict)
    diagnostics: Optional[dict] = None
    model: Optional[GameModel] = field(default=None, repr=False)
    graph: Optional[StrategyGraph] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def ternary(self) -> np.ndarray:
        """Planar coordinates ``(rho_2 + rho_3/2, sqrt(3)/2 rho_3)`` for ``n == 3``."""
        if self.n != 3:
            raise ValidationError("ternary coordinates need exactly 3 strategies")
        x = self.states[:, 1] + 0.5 * self.states[:, 2]
        y = (np.sqrt(3.0) / 2.0) * self.states[:, 2]
        return np.column_stack([x, y])


def output_grid(t_end: float, dt_out: Optional[float] = None) -> np.ndarray:
    if dt_out is None:
        dt_out = min(0.01, t_end / 100.0)
    if dt_out <= 0:
        raise ValidationError("dt_out must be positive")
    steps = max(1, int(round(t_end / dt_out)))
    return np.linspace(0.0, t_end, steps + 1)


def integrate(model: GameModel, graph: StrategyGraph, rho0, beta, t_end: float,
              dt_out: Optional[float] = None, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, t_out=None, max_steps: int = 10_000_000,
              backend: Optional[str] = None) -> Trajectory:
    """Integrate from ``rho0`` to ``t_end`` with an adaptive Dormand-Prince 5(4) pair.

    Parameters
    ----------
    dt_out : float, optional
        Spacing of the uniform output grid (default ``min(0.01, t_end/100)``).
        The integrator lands exactly on every grid time.
    t_out : array, optional
        Explicit increasing output times starting at 0; overrides ``dt_out``.
    backend : {"cython", "python"}, optional
        Force a kernel implementation. Matrix games use the compiled loop
        when it is available; other payoffs always run in Python.

    Each accepted step is rescaled to unit mass and, for ``beta > 0``,
    floored at 1e-12 before the next log evaluation. At ``beta = 0`` the
    floor is 0 and trajectories may touch the boundary.
    """
    _check_dims(model, graph)
    beta = check_beta(beta)
    rho0 = check_state(rho0, model.n)
    if not is_interior(rho0):
        raise BoundaryStateError("initial state must be interior")
    if not t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t_end}")
    if t_out is None:
        t_out = output_grid(float(t_end), dt_out)
    else:
        t_out = np.asarray(t_out, dtype=float)
        if t_out[0] != 0.0 or np.any(np.diff(t_out) <= 0):
            raise ValidationError("t_out must start at 0 and increase strictly")
    floor = STATE_FLOOR if beta > 0 else 0.0

    use_compiled = model.matrix_payoff and (
        backend == "cython" or (backend is None and _core.is_compiled())
    )
    if backend == "cython" and not _core.is_compiled():
        raise ValidationError("compiled kernels are not available")
    if use_compiled:
        states, stats = _core.integrate_matrix(
            model.matrix, graph.edge_i, graph.edge_j, rho0, beta, t_out,
            rtol, atol, 0.0, floor, max_steps,
        )
        used = "cython"
    else:
        fp_rhs = _core._fallback.fp_rhs if backend == "python" else _core.fp_rhs
        if model.matrix_payoff:
            a = model.matrix

            def f(y):
                return fp_rhs(y, a @ y, beta, graph.edge_i, graph.edge_j)
        else:
            def f(y):
                return fp_rhs(y, payoff(model, y), beta, graph.edge_i, graph.edge_j)

        with np.errstate(invalid="ignore", divide="ignore"):
            states, stats = _core.dopri_integrate(f, rho0, t_out, rtol, atol, 0.0, floor,
                                                  max_steps)
        used = "python"

    if stats["status"] == _core.STATUS_UNDERFLOW:
        raise StepSizeUnderflowError(
            f"step size underflow at t = {stats['t_reached']:.6g}", stats["t_reached"]
        )
    if stats["status"] == _core.STATUS_MAX_STEPS:
        raise NumericalError(f"step budget exhausted at t = {stats['t_reached']:.6g}")
    if not np.all(np.isfinite(states)):
        raise InvariantViolationError("non-finite state in trajectory")
    mass_err = float(np.max(np.abs(states.sum(axis=1) - 1.0)))
    if mass_err > MASS_TOL or states.min() < -NEG_TOL:
        raise InvariantViolationError(
            f"simplex invariant violated (mass error {mass_err:.2e}, min {states.min():.2e})"
        )
    if stats["clamps"]:
        log.debug("%s beta=%g: floor clamp activated %d times", model.name, beta,
                  stats["clamps"])
    meta = dict(stats, backend=used, rtol=rtol, atol=atol, floor=floor,
                mass_error=mass_err)
    return Trajectory(t_out, states, beta, model.name, meta, model=model, graph=graph)


# -- long-run classification ------------------------------------------------

@dataclass
class AttractorReport:
    kind: str  # "equilibrium" | "limit_cycle" | "unresolved"
    point: Optional[np.ndarray] = None
    period: Optional[float] = None
    amplitude: Optional[np.ndarray] = None
    velocity: float = float("nan")
    diameter: float = float("nan")
    recurrence_distance: Optional[float] = None
    n_returns: int = 0

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "velocity": self.velocity,
            "diameter": self.diameter,
            "n_returns": self.n_returns,
        }
        if self.point is not None:
            out["point"] = [float(v) for v in self.point]
        if self.period is not None:
            out["period"] = self.period
        if self.amplitude is not None:
            out["amplitude"] = [float(v) for v in self.amplitude]
        if self.recurrence_distance is not None:
            out["recurrence_distance"] = self.recurrence_distance
        return out

    def summary(self) -> str:
        if self.kind == "equilibrium":
            pt = ", ".join(f"{v:.4g}" for v in self.point)
            return f"equilibrium near ({pt})"
        if self.kind == "limit_cycle":
            amp = ", ".join(f"{v:.3g}" for v in self.amplitude)
            return f"limit_cycle period ~ {self.period:.4g}, amplitude ({amp})"
        return f"unresolved (diameter {self.diameter:.3g}, velocity {self.velocity:.3g})"


@dataclass
class ClassifyOptions:
    tail_fraction: float = 0.25
    eq_velocity_tol: float = 1e-6
    eq_diameter_tol: float = 1e-4
    cycle_min_diameter: float = 1e-2
    recurrence_tol: float = 1e-3
    min_period: float = 1e-2
    min_returns: int = 3
    period_rtol: float = 0.1


def _segment_distance(p, a, b):
    """Sup-norm distance from ``p`` to segment ``ab`` (sampled at the Euclidean foot)."""
    ab = b - a
    denom = float(ab @ ab)
    s = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.max(np.abs(a + s * ab - p))), s


def _returns(times, pts, tol, leave):
    """Times at which the tail comes back within ``tol`` of its first point."""
    p0 = pts[0]
    away = False
    hits = []
    best = None
    for k in range(len(pts) - 1):
        dist, s = _segment_distance(p0, pts[k], pts[k + 1])
        if not away:
            if np.max(np.abs(pts[k + 1] - p0)) > leave:
                away = True
            continue
        if dist <= tol:
            t_hit = times[k] + s * (times[k + 1] - times[k])
            if best is None or dist < best[0]:
                best = (dist, t_hit)
        elif best is not None:
            hits.append(best)
            best = None
            away = np.max(np.abs(pts[k + 1] - p0)) > leave
    if best is not None:
        hits.append(best)
    return hits


def classify_attractor(traj: Trajectory, opts: Optional[ClassifyOptions] = None,
                       **kwargs) -> AttractorReport:
    """Classify the tail of ``traj`` as an equilibrium, a limit cycle or unresolved.

    Equilibrium: terminal speed ``|rhs|_inf`` and tail sup-norm diameter
    below their tolerances. Limit cycle: diameter at least
    ``cycle_min_diameter`` and at least ``min_returns`` returns to the first
    tail point, with periods within ``period_rtol`` of their median.
    """
    opts = opts or ClassifyOptions(**kwargs)
    m = len(traj)
    start = int(np.floor((1.0 - opts.tail_fraction) * (m - 1)))
    if m - start < 3:
        raise TrajectoryTooShortError(
            f"trajectory of {m} samples is too short for a {opts.tail_fraction:.0%} tail"
        )
    times = traj.times[start:]
    pts = traj.states[start:]
    ptp = np.ptp(pts, axis=0)
    diameter = float(ptp.max())
    if traj.model is not None and traj.graph is not None:
        velocity = float(np.max(np.abs(rhs(traj.model, traj.graph, pts[-1], traj.beta))))
    else:
        velocity = float(np.max(np.abs(pts[-1] - pts[-2])) / (times[-1] - times[-2]))

    if velocity <= opts.eq_velocity_tol and diameter <= opts.eq_diameter_tol:
        return AttractorReport("equilibrium", point=pts[-1].copy(), velocity=velocity,
                               diameter=diameter)
    if diameter >= opts.cycle_min_diameter:
        leave = max(10 * opts.recurrence_tol, 0.1 * diameter)
        hits = _returns(times, pts, opts.recurrence_tol, leave)
        ret_times = np.array([t for _, t in hits])
        periods = np.diff(np.concatenate([[times[0]], ret_times]))
        if len(hits) >= opts.min_returns and np.all(periods >= opts.min_period):
            med = float(np.median(periods))
            if np.max(np.abs(periods - med)) <= opts.period_rtol * med:
                return AttractorReport(
                    "limit_cycle", period=med, amplitude=ptp / 2.0, velocity=velocity,
                    diameter=diameter, recurrence_distance=max(d for d, _ in hits),
                    n_returns=len(hits),
                )
        return AttractorReport("unresolved", velocity=velocity, diameter=diameter,
                               n_returns=len(hits))
    return AttractorReport("unresolved", velocity=velocity, diameter=diameter)


# -- parameter sweeps -------------------------------------------------------

@dataclass
class SweepEntry:
    beta: float
    report: Optional[AttractorReport] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    entries: list
    brackets: list  # (beta_lo, beta_hi, kind_lo, kind_hi)

    @property
    def kinds(self):
        return [e.report.kind if e.report else "error" for e in self.entries]


def sweep_beta(model: GameModel, graph: StrategyGraph, rho0, betas, t_end: float,
               workers: Optional[int] = None, classify: Optional[ClassifyOptions] = None,
               **integrate_opts) -> SweepResult:
    """Integrate once per noise level and classify each long-run behaviour.

    Runs concurrently (compiled integrations release the GIL). A failure at
    one ``beta`` is recorded in its entry and does not stop the sweep.
    ``brackets`` lists consecutive noise levels whose classifications differ.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise ValidationError("beta list is empty")
    if any(b < 0 for b in betas) or any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValidationError("beta list must be nonnegative and sorted")

    def run(beta):
        try:
            traj = integrate(model, graph, rho0, beta, t_end, **integrate_opts)
            return SweepEntry(beta, classify_attractor(traj, classify))
        except OTGamesError as exc:
            return SweepEntry(beta, error=f"{type(exc).__name__}: {exc}")

    workers = workers or min(len(betas), os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run, betas))
    else:
        entries = [run(b) for b in betas]
    entries.sort(key=lambda e: e.beta)

    brackets = []
    ok = [e for e in entries if e.report is not None]
    for lo, hi in zip(ok, ok[1:]):
        if lo.report.kind != hi.report.kind:
            brackets.append((lo.beta, hi.beta, lo.report.kind, hi.report.kind))
    return SweepResult(entries, brackets)
