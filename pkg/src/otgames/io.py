"""Reading and writing trajectories and plot coordinates.

CSV layout: ``#`` comment lines (metadata and a column description), then
a header row ``t,rho_1,...,rho_n,free_energy,H,I`` and one row per sample.
Undefined diagnostics are written as empty fields. Strategy indices in
column names are 1-based.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import Trajectory
from .errors import ConfigError

DIAG_COLUMNS = ("free_energy", "H", "I")


def _fmt(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _json_value(v):
    """Make numpy scalars/arrays JSON-safe; NaN becomes null."""
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) or math.isinf(v) else v
    return v


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_value(obj), indent=2) + "\n")
    return path


def trajectory_columns(n: int) -> list:
    return ["t"] + [f"rho_{i + 1}" for i in range(n)] + list(DIAG_COLUMNS)


def write_trajectory_csv(traj: Trajectory, path, extra_header: Optional[dict] = None) -> Path:
    """Write ``traj`` as CSV; ``extra_header`` entries become ``# key: value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = traj.n
    diag = traj.diagnostics or {}
    cols = [diag.get(c, np.full(len(traj), np.nan)) for c in DIAG_COLUMNS]
    with path.open("w", newline="") as fh:
        fh.write(f"# game: {traj.game}\n")
        fh.write(f"# beta: {traj.beta!r}\n")
        for key, val in (extra_header or {}).items():
            fh.write(f"# {key}: {val}\n")
        fh.write(f"# columns: 1 time, 2..{n + 1} strategy shares, "
                 f"{n + 2} free energy, {n + 3} relative entropy H, "
                 f"{n + 4} relative Fisher information I (blank = undefined)\n")
        w = csv.writer(fh)
        w.writerow(trajectory_columns(n))
        for k in range(len(traj)):
            w.writerow([_fmt(traj.times[k])] + [_fmt(v) for v in traj.states[k]]
                       + [_fmt(c[k]) for c in cols])
    return path


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv` (no game or graph attached)."""
    meta = {}
    rows = []
    with Path(path).open() as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].partition(":")
            meta[key.strip()] = val.strip()
        else:
            body.append(ln)
    reader = csv.reader(body)
    header = next(reader)
    n = len(header) - 1 - len(DIAG_COLUMNS)
    if n < 2 or header != trajectory_columns(n):
        raise ConfigError(f"{path}: unexpected trajectory header {header}")
    for row in reader:
        rows.append([float(x) if x != "" else np.nan for x in row])
    data = np.array(rows, dtype=float)
    diag = {c: data[:, n + 1 + k] for k, c in enumerate(DIAG_COLUMNS)}
    beta = float(meta.pop("beta", "nan"))
    game = meta.pop("game", "custom")
    meta.pop("columns", None)
    return Trajectory(data[:, 0], data[:, 1:n + 1], beta, game, meta, diag)


def trajectory_to_dict(traj: Trajectory) -> dict:
    out = {
        "game": traj.game,
        "beta": traj.beta,
        "n": traj.n,
        "times": traj.times,
        "states": traj.states,
        "diagnostics": traj.diagnostics,
        "meta": traj.meta,
    }
    return _json_value(out)


def write_trajectory_json(traj: Trajectory, path) -> Path:
    return write_json(trajectory_to_dict(traj), path)


def read_trajectory_json(path) -> Trajectory:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from exc
    missing = {"game", "beta", "times", "states"} - set(d)
    if missing:
        raise ConfigError(f"{path}: trajectory JSON lacks {sorted(missing)}")
    diag = d.get("diagnostics")
    if diag is not None:
        diag = {k: np.array([np.nan if v is None else v for v in vals], dtype=float)
                for k, vals in diag.items()}
    return Trajectory(np.array(d["times"], dtype=float), np.array(d["states"], dtype=float),
                      float(d["beta"]), d["game"], d.get("meta") or {}, diag)


def plot_coordinates(traj: Trajectory) -> tuple[list, np.ndarray]:
    """Planar plot coordinates: ternary ``(x, y)`` for 3 strategies, ``x = rho_2`` for 2."""
    if traj.n == 3:
        return ["t", "x", "y"], np.column_stack([traj.times, traj.ternary()])
    if traj.n == 2:
        return ["t", "x"], np.column_stack([traj.times, traj.states[:, 1]])
    raise ConfigError("plot coordinates are emitted for 2 or 3 strategies only")


def write_plot_coordinates(traj: Trajectory, path) -> Path:
    names, data = plot_coordinates(traj)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if traj.n == 3:
            fh.write("# ternary coordinates: x = rho_2 + rho_3/2, y = sqrt(3)/2 rho_3; "
                     "vertices rho_1 (0,0), rho_2 (1,0), rho_3 (1/2, sqrt(3)/2)\n")
            fh.write("# gnuplot: plot 'file' using 2:3 with lines\n")
        else:
            fh.write("# share of strategy 2 against time\n")
            fh.write("# gnuplot: plot 'file' using 1:2 with lines\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([_fmt(v) for v in row])
    return path
