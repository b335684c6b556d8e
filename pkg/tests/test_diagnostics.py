import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otgames import games
from otgames.diagnostics import (
    compute_diagnostics,
    decay_rate_fit,
    dissipation_check,
    fisher_log_ratio,
    fit_exponential_decay,
    relative_entropy,
    relative_fisher,
)
from otgames.dynamics import Trajectory, integrate
from otgames.equilibrium import solve_gibbs, stability_lambda
from otgames.errors import (
    TrajectoryTooShortError,
    UnsupportedOperationError,
    ValidationError,
)
from otgames.games import GameModel
from otgames.graph import complete_graph

U3 = np.ones(3) / 3


def _entropy(p):
    return -sum(x * math.log(x) for x in p)


def test_relative_entropy_frozen_value(congestion3):
    rho = [0.5, 0.3, 0.2]
    beta = 0.5
    pot = lambda p: -0.5 * sum(x * x for x in p) + beta * _entropy(p)
    oracle = beta * (pot(U3) - pot(rho))
    assert oracle == pytest.approx(0.0289065, abs=1e-7)
    assert relative_entropy(congestion3, rho, U3, beta) == pytest.approx(oracle, rel=1e-13)
    assert relative_entropy(congestion3, U3, U3, beta) == 0.0


def test_relative_fisher_frozen_value(stag):
    # fbar = (2 + log 2, 1.5 + log 2): one active orientation, gap 1/2, source mass 1/2
    assert relative_fisher(stag, complete_graph(2), [0.5, 0.5], 1.0) == pytest.approx(0.125, abs=1e-15)
    assert fisher_log_ratio(stag, complete_graph(2), [0.5, 0.5], 0.5) == pytest.approx(
        relative_fisher(stag, complete_graph(2), [0.5, 0.5], 0.5) / 0.25)


def test_fisher_vanishes_at_gibbs(congestion3, triangle):
    assert relative_fisher(congestion3, triangle, U3, 0.5) == 0.0


def test_diagnostic_preconditions(rsp, congestion3, triangle):
    with pytest.raises(UnsupportedOperationError):
        relative_entropy(rsp, U3, U3, 0.1)
    with pytest.raises(UnsupportedOperationError):
        relative_entropy(congestion3, U3, U3, 0.0)
    with pytest.raises(UnsupportedOperationError):
        relative_fisher(congestion3, triangle, U3, 0.0)


def test_compute_diagnostics_columns(congestion3, triangle):
    tr = integrate(congestion3, triangle, [0.5, 0.3, 0.2], 0.5, 2.0, dt_out=0.1)
    d = compute_diagnostics(tr)
    assert set(d) == {"free_energy", "H", "I"}
    assert np.allclose(tr.meta["rho_inf"], U3, atol=1e-10)
    assert d["H"][0] == pytest.approx(0.0289065, abs=1e-7)
    assert np.all(np.diff(d["H"]) <= 0) and np.all(d["I"] >= 0)


def test_compute_diagnostics_non_potential(rsp, triangle):
    tr = integrate(rsp, triangle, [0.5, 0.3, 0.2], 0.1, 1.0)
    d = compute_diagnostics(tr)
    assert np.all(np.isnan(d["free_energy"])) and np.all(np.isnan(d["H"]))
    assert np.all(np.isfinite(d["I"]))


def test_compute_diagnostics_beta_zero(stag):
    tr = integrate(stag, complete_graph(2), [0.5, 0.5], 0.0, 1.0)
    d = compute_diagnostics(tr)
    assert np.all(np.isfinite(d["free_energy"]))
    assert np.all(np.isnan(d["H"])) and np.all(np.isnan(d["I"]))


def test_compute_diagnostics_needs_model():
    tr = Trajectory(np.arange(3.0), np.full((3, 2), 0.5), 0.1)
    with pytest.raises(ValidationError):
        compute_diagnostics(tr)


def test_dissipation_refines(congestion3, triangle):
    res = []
    for dt in (0.04, 0.02, 0.01):
        tr = integrate(congestion3, triangle, [0.5, 0.3, 0.2], 0.5, 3.0, dt_out=dt,
                       rtol=1e-12, atol=1e-12)
        res.append(dissipation_check(tr))
    assert res[2] <= 1e-3
    assert res[1] <= 0.5 * res[0] and res[2] <= 0.5 * res[1]


def test_dissipation_short(congestion3, triangle):
    tr = integrate(congestion3, triangle, [0.5, 0.3, 0.2], 0.5, 1.0, t_out=[0.0, 1.0])
    with pytest.raises(TrajectoryTooShortError):
        dissipation_check(tr)


def test_fit_synthetic_decay():
    t = np.linspace(0, 10, 201)
    fit = fit_exponential_decay(t, 0.7 * np.exp(-3 * t))
    assert fit.rate == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.t_end == 10.0


def test_fit_drops_roundoff_tail():
    t = np.linspace(0, 20, 401)
    h = np.exp(-3 * t)
    h[h < 1e-14] = 1e-17 * (1 + np.sin(t[h < 1e-14]))
    fit = fit_exponential_decay(t, h)
    assert fit.rate == pytest.approx(3.0, rel=1e-8)
    assert fit.t_end < 11


def test_fit_errors():
    with pytest.raises(TrajectoryTooShortError):
        fit_exponential_decay([0, 1, 2], [1.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        fit_exponential_decay([0, 1, 2], [1.0, 0.5, 0.2], tail_fraction=0)


def test_decay_rate_congestion(congestion3, triangle):
    tr = integrate(congestion3, triangle, [0.5, 0.3, 0.2], 0.5, 8.0, rtol=1e-12, atol=1e-14)
    fit = decay_rate_fit(tr)
    lam = stability_lambda(congestion3, triangle, U3, 0.5)
    assert fit.rate == pytest.approx(5.0, rel=1e-3)
    assert fit.rate >= 2 * (lam - 0.05)
    assert fit.r_squared >= 0.999


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.05, 2.0))
def test_entropy_nonnegative_and_fisher_nonnegative(n, seed, beta):
    rng = np.random.default_rng(seed)
    b = rng.uniform(-1, 1, (n, n))
    m = GameModel.from_matrix(-(b @ b.T))
    ref = solve_gibbs(m, beta, num_starts=4, rng=seed)[0].rho_star
    rho = rng.dirichlet(np.ones(n))
    assert relative_entropy(m, rho, ref, beta) >= -1e-12
    assert relative_fisher(m, complete_graph(n), rho, beta) >= 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.05, 2.0))
def test_entropy_derivative_identity(n, seed, beta):
    # d/dt H along the field equals -beta I: check by a directional derivative
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (n, n))
    m = GameModel.from_matrix(a + a.T)
    g = complete_graph(n)
    rho = rng.dirichlet(np.ones(n) * 3)
    from otgames.dynamics import rhs

    v = rhs(m, g, rho, beta)
    eps = 1e-6
    dh = (relative_entropy(m, rho + eps * v, U3 if n == 3 else np.ones(n) / n, beta)
          - relative_entropy(m, rho - eps * v, U3 if n == 3 else np.ones(n) / n, beta)) / (2 * eps)
    fisher = relative_fisher(m, g, rho, beta)
    assert dh == pytest.approx(-beta * fisher, rel=1e-5, abs=1e-9)
