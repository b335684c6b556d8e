"""Gibbs measures and their stability.

A Gibbs measure is a fixed point ``rho_i = exp(F_i(rho)/beta) / K``. At a
Gibbs measure every noisy payoff is equal, so it is a rest point of the
dynamics on any connected strategy graph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .dynamics import rhs
from .errors import (
    DegenerateMetricError,
    SwitchingSurfaceError,
    UnsupportedOperationError,
    ValidationError,
)
from .games import (
    GameModel,
    hessian_noisy_potential,
    noisy_payoff,
    payoff,
    payoff_jacobian,
)
from .graph import EdgeFlux, StrategyGraph, divergence, gradient, laplacian
from .metric import inner_product, upwind_weights

log = logging.getLogger(__name__)


def _log_gibbs(f, beta):
    z = f / beta
    zmax = z.max()
    w = np.exp(z - zmax)
    s = w.sum()
    return w / s, zmax + np.log(s)


def gibbs_map(model: GameModel, rho, beta) -> np.ndarray:
    """``exp(F(rho)/beta)`` normalised to the simplex (max-shifted)."""
    if not beta > 0:
        raise UnsupportedOperationError("the Gibbs map needs beta > 0")
    g, _ = _log_gibbs(payoff(model, np.asarray(rho, dtype=float)), beta)
    return g


@dataclass
class GibbsMeasure:
    """Converged fixed point of the Gibbs map.

    ``log_normalization`` is ``log K``; ``K`` itself overflows for small
    ``beta``.
    """

    rho_star: np.ndarray
    beta: float
    residual: float
    log_normalization: float
    basin_count: int = 1
    lam: Optional[float] = None

    @property
    def normalization(self) -> float:
        return float(np.exp(self.log_normalization))

    def to_dict(self) -> dict:
        return {
            "rho_star": [float(v) for v in self.rho_star],
            "beta": self.beta,
            "residual": self.residual,
            "log_normalization": self.log_normalization,
            "basin_count": self.basin_count,
            "lambda": self.lam,
        }


@dataclass
class GibbsSolve:
    measures: list
    failures: list  # (start index, final residual)


ALPHA_MIN = 1e-3


def _batch_payoff(model):
    if model.matrix_payoff:
        at = np.asarray(model.matrix).T
        return lambda r: r @ at
    return lambda r: np.array([payoff(model, row) for row in r])


def _batch_log_gibbs(f, beta):
    z = f / beta
    zmax = z.max(axis=1, keepdims=True)
    w = np.exp(z - zmax)
    s = w.sum(axis=1, keepdims=True)
    return w / s, (zmax + np.log(s))[:, 0]


def _iterate(model, beta, rho, tol, max_iter, alpha):
    """Damped fixed-point iteration for a batch of starts (one per row).

    Returns final states, sup-norm residuals, ``log K`` and a converged mask.
    """
    fmap = _batch_payoff(model)
    rho = np.array(rho, dtype=float, ndmin=2)
    m = rho.shape[0]
    alpha = np.full(m, float(alpha))
    g, logk = _batch_log_gibbs(fmap(rho), beta)
    res = np.max(np.abs(rho - g), axis=1)
    act = np.flatnonzero(res > tol)
    for _ in range(max_iter):
        if act.size == 0:
            break
        a = alpha[act, None]
        new = (1.0 - a) * rho[act] + a * g[act]
        new /= new.sum(axis=1, keepdims=True)
        g_new, logk_new = _batch_log_gibbs(fmap(new), beta)
        res_new = np.max(np.abs(new - g_new), axis=1)
        up = res_new > res[act]
        alpha[act[up]] = np.maximum(0.5 * alpha[act[up]], ALPHA_MIN)
        rho[act], g[act], logk[act], res[act] = new, g_new, logk_new, res_new
        act = act[res_new > tol]
    return rho, res, logk, res <= tol


def solve_gibbs(model: GameModel, beta, num_starts: int = 64, tol: float = 1e-12,
                max_iter: int = 100_000, alpha: float = 0.5, cluster_radius: float = 1e-5,
                rng=None, return_failures: bool = False):
    """Find Gibbs measures by damped fixed-point iteration from random starts.

    Each start is drawn from Dirichlet(1, ..., 1) and iterated with
    ``rho <- (1 - alpha) rho + alpha G(rho)``; ``alpha`` is halved (per
    start, down to ``ALPHA_MIN``) whenever the sup-norm residual
    ``|rho - G(rho)|`` grows. All starts advance together as one batch.
    Converged points within ``cluster_radius`` (sup norm) of each other are
    reported once, with the number of starts that reached them. Starts that
    fail to converge are logged and skipped.

    Returns
    -------
    list of GibbsMeasure, or GibbsSolve if ``return_failures``
    """
    if not beta > 0:
        raise UnsupportedOperationError("Gibbs measures need beta > 0")
    if num_starts < 1:
        raise ValidationError("num_starts must be at least 1")
    rng = np.random.default_rng(rng)
    starts = rng.dirichlet(np.ones(model.n), size=num_starts)
    rho, res, logk, ok = _iterate(model, beta, starts, tol, int(max_iter), alpha)
    clusters: list[GibbsMeasure] = []
    failures = []
    for s in range(num_starts):
        if not ok[s]:
            log.warning("Gibbs start %d did not converge (residual %.3e)", s, res[s])
            failures.append((s, float(res[s])))
            continue
        for c in clusters:
            if np.max(np.abs(c.rho_star - rho[s])) <= cluster_radius:
                c.basin_count += 1
                break
        else:
            clusters.append(GibbsMeasure(rho[s].copy(), float(beta), float(res[s]), float(logk[s])))
    clusters.sort(key=lambda c: tuple(-c.rho_star))
    if return_failures:
        return GibbsSolve(clusters, failures)
    return clusters


def nearest_gibbs(measures, rho) -> GibbsMeasure:
    """Measure closest (sup norm) to ``rho``."""
    if not measures:
        raise ValidationError("no Gibbs measures to choose from")
    rho = np.asarray(rho)
    return min(measures, key=lambda m: float(np.max(np.abs(m.rho_star - rho))))


# -- stability functional ---------------------------------------------------

def _mean_zero_basis(n):
    return linalg.null_space(np.ones((1, n)))


def stability_lambda(model: GameModel, graph: StrategyGraph, rho, beta) -> float:
    """Smallest curvature of the free energy along transport directions.

    With ``L`` the metric Laplacian at ``rho`` (upwind weights, averaged at
    ties) and ``B phi = div(rho grad phi) = -L phi``, minimise
    ``-(B phi)^T Hess(noisy potential) (B phi)`` subject to
    ``phi^T L phi = 1``. Constant ``phi`` are projected out and the problem is
    solved as a generalised symmetric eigenproblem.
    """
    if not model.is_potential:
        raise UnsupportedOperationError(f"game {model.name!r} has no potential")
    rho = np.asarray(rho, dtype=float)
    hess = hessian_noisy_potential(model, rho, beta)
    fbar = noisy_payoff(model, rho, beta)
    lap = laplacian(graph, upwind_weights(graph, rho, fbar))
    q = -lap @ hess @ lap
    v = _mean_zero_basis(graph.n)
    lr = v.T @ lap @ v
    qr = v.T @ q @ v
    qr = 0.5 * (qr + qr.T)
    lr = 0.5 * (lr + lr.T)
    ev_l = linalg.eigvalsh(lr)
    if ev_l[0] <= 1e-14 * max(1.0, ev_l[-1]):
        raise DegenerateMetricError(
            "metric is degenerate (zero weight across a cut); lambda is undefined"
        )
    return float(linalg.eigh(qr, lr, eigvals_only=True)[0])


def stability_lambda_direct(model: GameModel, graph: StrategyGraph, rho, beta,
                            n_starts: int = 8, max_iter: int = 200_000, rng=0) -> float:
    """Minimise the same quotient by projected gradient descent.

    Independent of :func:`stability_lambda`: the objective and constraint
    are evaluated through :func:`gradient`, :func:`divergence` and
    :func:`inner_product`, and minimised iteratively on the constraint
    surface ``{phi : sum(phi) = 0, (grad phi, grad phi)_rho = 1}``.
    """
    rho = np.asarray(rho, dtype=float)
    n = graph.n
    hess = hessian_noisy_potential(model, rho, beta)
    fbar = noisy_payoff(model, rho, beta)
    weights = upwind_weights(graph, rho, fbar)

    def transport(phi):
        grad_phi = gradient(graph, phi)
        return divergence(graph, EdgeFlux(graph, weights * grad_phi.forward))

    def objective(phi):
        b = transport(phi)
        return float(-b @ hess @ b)

    def constraint(phi):
        return inner_product(graph, rho, phi, fbar)

    # both forms are quadratic; recover their matrices by polarisation
    eye = np.eye(n)
    qm = np.empty((n, n))
    cm = np.empty((n, n))
    for k in range(n):
        for l in range(n):
            qm[k, l] = 0.5 * (objective(eye[k] + eye[l]) - objective(eye[k]) - objective(eye[l]))
            cm[k, l] = 0.5 * (constraint(eye[k] + eye[l]) - constraint(eye[k])
                              - constraint(eye[l]))

    gen = np.random.default_rng(rng)
    step0 = 0.5 / max(np.abs(linalg.eigvalsh(qm)).max(), np.abs(linalg.eigvalsh(cm)).max(), 1e-12)
    best = np.inf
    for _ in range(n_starts):
        phi = gen.standard_normal(n)
        phi -= phi.mean()
        phi /= np.sqrt(phi @ cm @ phi)
        val = phi @ qm @ phi
        step = step0
        for _ in range(max_iter):
            grad = 2.0 * (qm @ phi - val * (cm @ phi))
            grad -= grad.mean()
            cand = phi - step * grad
            cand -= cand.mean()
            cand /= np.sqrt(cand @ cm @ cand)
            cval = cand @ qm @ cand
            if cval <= val:
                converged = val - cval <= 1e-15 * max(1.0, abs(val))
                phi, val = cand, cval
                step *= 1.2
                if converged:
                    break
            else:
                step *= 0.5
                if step < 1e-16 * step0:
                    break
        best = min(best, float(val))
    return best


# -- linearisation ----------------------------------------------------------

SWITCH_TOL = 1e-8


def jacobian_rhs(model: GameModel, graph: StrategyGraph, rho, beta, method: str = "fd",
                 step: float = 1e-6, switch_tol: float = SWITCH_TOL) -> np.ndarray:
    """Jacobian of the vector field.

    ``method="fd"`` takes central differences of :func:`rhs` with ``step``;
    ``method="exact"`` differentiates each edge flux in closed form (the
    payoff derivative is exact for matrix games). The upwind switch makes the
    field non-smooth on edges whose noisy payoffs tie, unless both endpoints
    carry equal mass (then the one-sided derivatives agree). Such points
    raise :class:`SwitchingSurfaceError`.
    """
    if method not in ("fd", "exact"):
        raise ValueError(f"unknown method {method!r}")
    rho = np.asarray(rho, dtype=float)
    fbar = noisy_payoff(model, rho, beta)
    i, j = graph.edge_i, graph.edge_j
    d = fbar[i] - fbar[j]
    near = np.abs(d) < switch_tol
    uneven = np.abs(rho[i] - rho[j]) > switch_tol
    if np.any(near & uneven):
        k = int(np.flatnonzero(near & uneven)[0])
        raise SwitchingSurfaceError(
            f"noisy payoffs tie on edge ({i[k] + 1}, {j[k] + 1}) with unequal masses; "
            "the vector field is not differentiable here"
        )
    n = graph.n
    if method == "fd":
        jac = np.empty((n, n))
        for c in range(n):
            e = np.zeros(n)
            e[c] = step
            jac[:, c] = (rhs(model, graph, rho + e, beta) - rhs(model, graph, rho - e, beta)) / (2 * step)
        return jac
    dfbar = payoff_jacobian(model, rho)
    if beta > 0:
        dfbar[np.diag_indices(n)] -= beta / rho
    jac = np.zeros((n, n))
    for e in range(graph.num_edges):
        a, b = i[e], j[e]
        dw = np.zeros(n)
        if near[e]:
            w = 0.5 * (rho[a] + rho[b])
            dw[a] = dw[b] = 0.5
        elif d[e] > 0:
            w = rho[b]
            dw[b] = 1.0
        else:
            w = rho[a]
            dw[a] = 1.0
        dflux = dw * d[e] + w * (dfbar[a] - dfbar[b])
        jac[a] += dflux
        jac[b] -= dflux
    return jac


def tangent_spectrum(jac) -> np.ndarray:
    """Eigenvalues of the Jacobian restricted to ``{sum(d rho) = 0}``."""
    jac = np.asarray(jac)
    v = _mean_zero_basis(jac.shape[0])
    return linalg.eigvals(v.T @ jac @ v)
