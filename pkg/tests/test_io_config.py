import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otgames import config as cfgmod
from otgames import io
from otgames.diagnostics import compute_diagnostics
from otgames.dynamics import Trajectory, integrate
from otgames.errors import ConfigError
from otgames.graph import complete_graph

BASE = {"game": {"type": "builtin", "name": "rsp"}, "beta": 0.1}


def _with(**kw):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(kw)
    return cfg


def test_minimal_config_valid():
    assert cfgmod.validate(_with()) is not None


@pytest.mark.parametrize("cfg,field", [
    (_with(beta=-1), "beta"),
    (_with(bogus=1), "bogus"),
    (_with(game={"type": "builtin", "name": "rsp", "extra": 1}), "extra"),
    (_with(game={"type": "matrix", "A": [[1, "x"], [0, 1]]}), "game.A[0][1]"),
    (_with(agents={"N": 0}), "agents.N"),
    (_with(integrator={"rtol": 1e-9, "stepper": "rk4"}), "stepper"),
    (_with(seed=2**64), "seed"),
    (_with(initial={"type": "explicit", "states": [[0.5, -0.5, 1.0]]}), "initial"),
])
def test_invalid_configs_name_field(cfg, field):
    with pytest.raises(ConfigError) as info:
        cfgmod.validate(cfg)
    assert field in str(info.value)


def test_non_square_matrix():
    with pytest.raises(ConfigError, match="square"):
        cfgmod.validate(_with(game={"type": "matrix", "A": [[1, 0], [0, 1, 2]]}))


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        cfgmod.load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        cfgmod.load_config(p)
    with pytest.raises(ConfigError):
        cfgmod.load_config(tmp_path / "missing.json")


def test_builders():
    cfg = _with(graph={"type": "edges", "edges": [[1, 2], [2, 3]]})
    m = cfgmod.build_game(cfg["game"])
    g = cfgmod.build_graph_from_spec(cfg["graph"], m.n)
    assert g.num_edges == 2
    with pytest.raises(ConfigError, match="graph"):
        cfgmod.build_graph_from_spec({"type": "edges", "edges": [[1, 2]]}, 3)
    with pytest.raises(ConfigError, match="game"):
        cfgmod.build_game({"type": "matrix", "A": [[1, np.nan], [0, 1]]})


def test_beta_list_forms():
    assert cfgmod.beta_list(_with(beta_list=[0, 0.1])) == [0.0, 0.1]
    lin = cfgmod.beta_list(_with(beta_list={"start": 0, "stop": 1, "num": 11}))
    assert len(lin) == 11 and lin[-1] == 1.0
    log = cfgmod.beta_list(_with(beta_list={"start": 0.01, "stop": 1, "num": 3, "spacing": "log"}))
    assert np.allclose(log, [0.01, 0.1, 1.0])
    with pytest.raises(ConfigError):
        cfgmod.beta_list(_with(beta_list=[0.2, 0.1]))
    with pytest.raises(ConfigError):
        cfgmod.beta_list(_with())


def test_initial_states():
    rng = np.random.default_rng(0)
    assert np.allclose(cfgmod.initial_states(_with(), 3, rng), 1 / 3)
    rand = cfgmod.initial_states(_with(initial={"type": "random", "count": 4}), 3, rng)
    assert rand.shape == (4, 3) and np.allclose(rand.sum(axis=1), 1)
    with pytest.raises(ConfigError, match=r"initial.states\[0\]"):
        cfgmod.initial_states(_with(initial={"type": "explicit", "states": [[0.5, 0.5]]}), 3, rng)


def test_csv_round_trip(tmp_path, congestion3, triangle):
    tr = integrate(congestion3, triangle, [0.5, 0.3, 0.2], 0.5, 1.0, dt_out=0.1)
    compute_diagnostics(tr)
    p = io.write_trajectory_csv(tr, tmp_path / "t.csv", {"seed": 7})
    text = p.read_text().splitlines()
    assert text[0] == "# game: congestion3" and "# seed: 7" in text
    header = next(ln for ln in text if not ln.startswith("#"))
    assert header == "t,rho_1,rho_2,rho_3,free_energy,H,I"
    back = io.read_trajectory_csv(p)
    assert np.array_equal(back.states, tr.states) and np.array_equal(back.times, tr.times)
    assert np.array_equal(back.diagnostics["H"], tr.diagnostics["H"])
    assert back.beta == 0.5 and back.meta["seed"] == "7"


def test_csv_blank_for_undefined(tmp_path, rsp, triangle):
    tr = integrate(rsp, triangle, [0.5, 0.3, 0.2], 0.0, 0.1, dt_out=0.05)
    compute_diagnostics(tr)
    p = io.write_trajectory_csv(tr, tmp_path / "t.csv")
    row = p.read_text().splitlines()[-1]
    assert row.endswith(",,,")
    assert np.all(np.isnan(io.read_trajectory_csv(p).diagnostics["I"]))


def test_json_round_trip(tmp_path, stag):
    tr = integrate(stag, complete_graph(2), [0.5, 0.5], 0.0, 1.0, dt_out=0.5)
    compute_diagnostics(tr)
    p = io.write_trajectory_json(tr, tmp_path / "t.json")
    d = json.loads(p.read_text())
    assert d["diagnostics"]["H"] == [None, None, None]
    back = io.read_trajectory_json(p)
    assert np.array_equal(back.states, tr.states)
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ConfigError):
        io.read_trajectory_json(tmp_path / "bad.json")


def test_bad_csv_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ConfigError):
        io.read_trajectory_csv(p)


def test_plot_coordinates(tmp_path):
    tr3 = Trajectory(np.arange(3.0), np.eye(3), 0.0)
    names, data = io.plot_coordinates(tr3)
    assert names == ["t", "x", "y"]
    assert np.allclose(data[:, 1:], [[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    tr2 = Trajectory(np.arange(2.0), np.array([[0.7, 0.3], [0.4, 0.6]]), 0.0)
    assert np.allclose(io.plot_coordinates(tr2)[1][:, 1], [0.3, 0.6])
    with pytest.raises(ConfigError):
        io.plot_coordinates(Trajectory(np.arange(1.0), np.full((1, 4), 0.25), 0.0))
    p = io.write_plot_coordinates(tr3, tmp_path / "p.csv")
    assert "t,x,y" in p.read_text()


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=8), st.integers(), min_size=1, max_size=3))
def test_unknown_top_level_keys_rejected(extra):
    known = set(cfgmod.SCHEMA["properties"])
    if set(extra) <= known:
        return
    with pytest.raises(ConfigError):
        cfgmod.validate({**BASE, **{k: v for k, v in extra.items() if k not in known}})
