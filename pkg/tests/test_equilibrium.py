import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otgames import games
from otgames.dynamics import integrate, rhs
from otgames.equilibrium import (
    gibbs_map,
    jacobian_rhs,
    nearest_gibbs,
    solve_gibbs,
    stability_lambda,
    stability_lambda_direct,
    tangent_spectrum,
)
from otgames.errors import (
    BoundaryStateError,
    DegenerateMetricError,
    SwitchingSurfaceError,
    UnsupportedOperationError,
    ValidationError,
)
from otgames.games import GameModel
from otgames.graph import build_graph, complete_graph


def test_gibbs_map_stag_hunt(stag):
    e2, e15 = np.exp(2.0), np.exp(1.5)
    g = gibbs_map(stag, [0.5, 0.5], 1.0)
    assert np.allclose(g, [e2 / (e2 + e15), e15 / (e2 + e15)], atol=1e-15)
    assert g == pytest.approx([0.6224593312, 0.3775406688], abs=1e-9)


def test_gibbs_map_limits(rsp, stag):
    assert np.allclose(gibbs_map(rsp, np.ones(3) / 3, 0.01), 1 / 3, atol=1e-15)
    assert np.allclose(gibbs_map(stag, [0.2, 0.8], 1e6), 0.5, atol=1e-5)
    g = gibbs_map(stag, [0.2, 0.8], 1e-4)  # no overflow
    assert np.all(np.isfinite(g)) and g.sum() == pytest.approx(1.0)
    with pytest.raises(UnsupportedOperationError):
        gibbs_map(stag, [0.5, 0.5], 0.0)


def test_solve_gibbs_rsp_unique(rsp):
    ms = solve_gibbs(rsp, 0.1, num_starts=20, rng=1)
    assert len(ms) == 1
    assert np.allclose(ms[0].rho_star, 1 / 3, atol=1e-9)
    assert ms[0].basin_count == 20


def test_solve_gibbs_example4_two_clusters():
    ms = solve_gibbs(games.builtin("example4"), 0.01, num_starts=100, rng=3)
    pts = sorted(tuple(np.round(m.rho_star, 2)) for m in ms)
    assert pts == [(0.0, 0.5, 0.5), (1.0, 0.0, 0.0)]
    assert sum(m.basin_count for m in ms) == 100


def test_solve_gibbs_residual_and_normalization(stag):
    for m in solve_gibbs(stag, 0.5, rng=0):
        assert m.residual <= 1e-12
        assert np.max(np.abs(gibbs_map(stag, m.rho_star, 0.5) - m.rho_star)) <= 1e-12
        f = stag.matrix @ m.rho_star
        assert m.normalization == pytest.approx(np.exp(f / 0.5).sum(), rel=1e-12)
        assert np.all(m.rho_star > 0)


def test_solve_gibbs_reproducible(stag):
    a = solve_gibbs(stag, 0.1, num_starts=16, rng=42)
    b = solve_gibbs(stag, 0.1, num_starts=16, rng=42)
    assert [m.to_dict() for m in a] == [m.to_dict() for m in b]


def test_solve_gibbs_failures_are_reported(rsp):
    res = solve_gibbs(rsp, 0.02, num_starts=4, max_iter=2, rng=0, return_failures=True)
    assert len(res.failures) == 4 and res.measures == []


def test_solve_gibbs_preconditions(stag):
    with pytest.raises(UnsupportedOperationError):
        solve_gibbs(stag, 0.0)
    with pytest.raises(ValidationError):
        solve_gibbs(stag, 0.1, num_starts=0)


def test_nearest_gibbs(stag):
    ms = solve_gibbs(stag, 0.1, rng=0)
    assert len(ms) >= 2
    assert nearest_gibbs(ms, [0.0, 1.0]).rho_star[1] > 0.9
    with pytest.raises(ValidationError):
        nearest_gibbs([], [0.5, 0.5])


def test_gibbs_points_are_rest_points():
    for name, beta in [("stag_hunt", 0.1), ("example4", 0.05), ("example5", 0.1), ("rsp", 0.1)]:
        m = games.builtin(name)
        g = complete_graph(m.n)
        for gm in solve_gibbs(m, beta, rng=0):
            assert np.max(np.abs(rhs(m, g, gm.rho_star, beta))) <= 1e-8


def test_lambda_congestion_oracle(congestion3, triangle):
    # Hess = -I - beta/rho = -(1 + 3 beta) I at uniform, so Q = (1 + 3 beta) L^2 and
    # every generalised eigenvalue equals (1 + 3 beta) * (nonzero eigenvalue of L).
    # L = (1/3)(3I - 11^T) has eigenvalue 1 on the complement.
    lam = stability_lambda(congestion3, triangle, np.ones(3) / 3, 0.5)
    assert lam == pytest.approx(2.5, abs=1e-12)


def test_lambda_path_graph_oracle(congestion3, path3):
    # path laplacian with weights 1/3: eigenvalues 1/3 and 1
    lam = stability_lambda(congestion3, path3, np.ones(3) / 3, 0.5)
    assert lam == pytest.approx(2.5 / 3, abs=1e-12)


def test_lambda_direct_agrees():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        m = games.congestion(n)
        g = complete_graph(n)
        for rho in rng.dirichlet(np.ones(n) * 4, 2):
            a = stability_lambda(m, g, rho, 0.5)
            b = stability_lambda_direct(m, g, rho, 0.5)
            assert a == pytest.approx(b, abs=1e-6)


def test_lambda_negative_for_convex_potential(stag):
    # Stag Hunt mixed Gibbs measure between the two basins is unstable
    ms = solve_gibbs(stag, 0.5, rng=0)
    assert len(ms) == 1  # only the stable branch exists at this noise
    lam = stability_lambda(GameModel.from_matrix(np.eye(3)), complete_graph(3), np.ones(3) / 3, 0.1)
    assert lam < 0


def test_lambda_errors(rsp, congestion3, triangle):
    with pytest.raises(UnsupportedOperationError):
        stability_lambda(rsp, triangle, np.ones(3) / 3, 0.1)
    with pytest.raises(BoundaryStateError):
        stability_lambda(congestion3, triangle, [1.0, 0.0, 0.0], 0.1)


def test_lambda_degenerate_metric(congestion3):
    g = build_graph(3, [(1, 2), (2, 3)])
    # a state whose weights on the path collapse is impossible for interior rho,
    # so exercise the check through a zero-mass-like tiny state
    with pytest.raises(DegenerateMetricError):
        stability_lambda(congestion3, g, [1 - 2e-300, 1e-300, 1e-300], 0.0)


def test_jacobian_fd_matches_exact(congestion3, triangle):
    rho = np.ones(3) / 3
    a = jacobian_rhs(congestion3, triangle, rho, 0.5)
    b = jacobian_rhs(congestion3, triangle, rho, 0.5, method="exact")
    assert np.allclose(a, b, atol=1e-7)
    spec = np.sort(tangent_spectrum(b).real)
    assert np.allclose(spec, [-2.5, -2.5], atol=1e-10)


def test_jacobian_generic_point():
    rng = np.random.default_rng(5)
    a = rng.uniform(-1, 1, (4, 4))
    m = GameModel.from_matrix(a)
    g = complete_graph(4)
    rho = rng.dirichlet(np.ones(4) * 3)
    assert np.allclose(jacobian_rhs(m, g, rho, 0.2),
                       jacobian_rhs(m, g, rho, 0.2, method="exact"), atol=1e-6)


def test_jacobian_switching_surface(stag):
    ms = solve_gibbs(stag, 0.5, rng=0)
    with pytest.raises(SwitchingSurfaceError):
        jacobian_rhs(stag, complete_graph(2), ms[0].rho_star, 0.5)
    with pytest.raises(ValueError):
        jacobian_rhs(stag, complete_graph(2), [0.5, 0.5], 0.5, method="spline")


def test_hopf_crossing_in_spectrum():
    # circulant payoff: the uniform rest point changes stability at beta = 1/6
    m = GameModel.from_matrix([[0, 1, -2], [-2, 0, 1], [1, -2, 0]])
    g = complete_graph(3)
    u = np.ones(3) / 3
    lo = tangent_spectrum(jacobian_rhs(m, g, u, 0.15, method="exact"))
    hi = tangent_spectrum(jacobian_rhs(m, g, u, 0.18, method="exact"))
    assert np.all(lo.real > 0) and np.all(hi.real < 0)
    assert np.all(np.abs(lo.imag) > 0.1)


def test_lambda_sign_matches_spectrum(congestion3, triangle):
    ms = solve_gibbs(congestion3, 0.5, rng=0)
    assert len(ms) == 1
    lam = stability_lambda(congestion3, triangle, ms[0].rho_star, 0.5)
    spec = tangent_spectrum(jacobian_rhs(congestion3, triangle, ms[0].rho_star, 0.5))
    assert lam > 0 and np.all(spec.real < 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1), st.floats(0.05, 2.0))
def test_gibbs_of_concave_game_unique_and_stable(n, seed, beta):
    rng = np.random.default_rng(seed)
    b = rng.uniform(-1, 1, (n, n))
    a = -(b @ b.T) - 0.1 * np.eye(n)  # negative definite: strictly concave potential
    m = GameModel.from_matrix(a)
    ms = solve_gibbs(m, beta, num_starts=8, rng=seed)
    assert len(ms) == 1
    rho = ms[0].rho_star
    assert stability_lambda(m, complete_graph(n), rho, beta) > 0
    tr = integrate(m, complete_graph(n), rng.dirichlet(np.ones(n)), beta, 60.0, dt_out=0.5)
    assert np.max(np.abs(tr.terminal - rho)) < 1e-4
