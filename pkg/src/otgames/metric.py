"""Upwind edge weights and the state-dependent inner product.

Only the infinitesimal quadratic form of the transport metric is provided;
geodesic distances between two states are not computed.
"""
from __future__ import annotations

import numpy as np

from ._core import TIE_BAND
from .graph import StrategyGraph, _node_function, laplacian


def upwind_weights(graph: StrategyGraph, rho, fbar, tie_band: float = TIE_BAND) -> np.ndarray:
    """Weight per canonical edge ``(i, j)``, ``i < j``.

    The mass comes from the endpoint with the *lower* noisy payoff:
    ``rho_j`` if ``fbar_j < fbar_i``, ``rho_i`` if ``fbar_j > fbar_i``, and
    the average when the two agree to within ``tie_band`` (exact equality
    always counts as a tie). Symmetric in ``(i, j)`` by construction.
    """
    rho = _node_function(graph, rho, "rho")
    fbar = _node_function(graph, fbar, "fbar")
    i, j = graph.edge_i, graph.edge_j
    d = fbar[i] - fbar[j]
    tie = (d == 0.0) | (np.abs(d) <= tie_band)
    return np.where(tie, 0.5 * (rho[i] + rho[j]), np.where(d > 0, rho[j], rho[i]))


def weight_matrix(graph: StrategyGraph, weights) -> np.ndarray:
    """Dense symmetric ``n x n`` view of per-edge weights (zero off the edge set)."""
    w = np.zeros((graph.n, graph.n))
    w[graph.edge_i, graph.edge_j] = weights
    w[graph.edge_j, graph.edge_i] = weights
    return w


def inner_product(graph: StrategyGraph, rho, phi, fbar) -> float:
    """``(grad phi, grad phi)_rho``.

    Half the sum over both orientations of every edge of
    ``(phi_i - phi_j)**2 * g_ij``, which equals the sum over unordered edges.
    """
    phi = _node_function(graph, phi, "phi")
    g = upwind_weights(graph, rho, fbar)
    diff = phi[graph.edge_i] - phi[graph.edge_j]
    return float(0.5 * np.sum(2.0 * g * diff * diff))


def metric_laplacian(graph: StrategyGraph, rho, fbar) -> np.ndarray:
    """Matrix ``L`` with ``phi @ L @ phi == inner_product(phi)``."""
    return laplacian(graph, upwind_weights(graph, rho, fbar))
