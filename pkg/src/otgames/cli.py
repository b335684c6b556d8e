"""Command-line front end.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from . import io
from .agents import AgentEnsemble, H_MAX, mean_field_deviation, run_ensemble
from .diagnostics import (
    compute_diagnostics,
    decay_rate_fit,
    dissipation_check,
)
from .dynamics import ClassifyOptions, classify_attractor, integrate, sweep_beta
from .equilibrium import (
    jacobian_rhs,
    nearest_gibbs,
    solve_gibbs,
    stability_lambda,
    stability_lambda_direct,
    tangent_spectrum,
)
from .errors import (
    BoundaryStateError,
    ConfigError,
    DegenerateMetricError,
    NumericalError,
    OTGamesError,
    SwitchingSurfaceError,
    UnsupportedOperationError,
    ValidationError,
)
from .games import BUILTINS

log = logging.getLogger("otgames")

DEFAULT_T_END = 100.0
DIRECT_LAMBDA_MAX_N = 6


@dataclass
class Context:
    cfg: dict
    out: Path
    prefix: str
    seed: int
    quiet: bool

    def say(self, msg: str = ""):
        if not self.quiet:
            print(msg)

    def rngs(self):
        """Independent generators for initial states, Gibbs starts and agent draws."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]

    def path(self, suffix: str) -> Path:
        return self.out / f"{self.prefix}{suffix}"


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return v


def _setup(ctx: Context):
    model = cfgmod.build_game(ctx.cfg["game"])
    graph = cfgmod.build_graph_from_spec(ctx.cfg.get("graph"), model.n)
    return model, graph


def _classify_opts(ctx: Context) -> ClassifyOptions:
    return ClassifyOptions(**ctx.cfg.get("classify", {}))


def _gibbs_opts(ctx: Context) -> dict:
    opts = dict(ctx.cfg.get("gibbs", {}))
    opts.pop("stability", None)
    return opts


def _fmt_state(rho) -> str:
    return "(" + ", ".join(f"{v:.4f}" for v in rho) + ")"


# -- subcommands ------------------------------------------------------------

def cmd_simulate(ctx: Context) -> dict:
    model, graph = _setup(ctx)
    beta = cfgmod.beta_value(ctx.cfg)
    t_end = ctx.cfg.get("t_end", DEFAULT_T_END)
    rng_init, rng_gibbs, _ = ctx.rngs()
    starts = cfgmod.initial_states(ctx.cfg, model.n, rng_init)
    opts = cfgmod.integrator_options(ctx.cfg)
    measures = None
    if model.is_potential and beta > 0:
        measures = solve_gibbs(model, beta, rng=rng_gibbs, **_gibbs_opts(ctx))
    runs = []
    for k, rho0 in enumerate(starts):
        traj = integrate(model, graph, rho0, beta, t_end, **opts)
        traj.meta.update(game_spec=ctx.cfg["game"], graph_spec=graph.to_spec(),
                         initial=rho0.tolist())
        ref = nearest_gibbs(measures, traj.terminal).rho_star if measures else None
        compute_diagnostics(traj, ref)
        report = classify_attractor(traj, _classify_opts(ctx))
        stem = f"_{k:02d}"
        files = [io.write_trajectory_csv(traj, ctx.path(stem + ".csv")),
                 io.write_trajectory_json(traj, ctx.path(stem + ".json"))]
        if model.n in (2, 3):
            files.append(io.write_plot_coordinates(traj, ctx.path(stem + "_plot.csv")))
        ctx.say(f"run {k}: start {_fmt_state(rho0)} -> {report.summary()}")
        runs.append(dict(initial=rho0, terminal=traj.terminal, attractor=report.to_dict(),
                         summary=report.summary(), files=[str(f) for f in files],
                         integrator={key: traj.meta[key] for key in
                                     ("accepted", "rejected", "clamps", "backend")}))
    result = dict(command="simulate", game=model.name, beta=beta, t_end=t_end, runs=runs)
    io.write_json(result, ctx.path("_report.json"))
    return result


def _lambda_or_none(model, graph, rho, beta):
    if not model.is_potential:
        return None, "game has no potential"
    try:
        return stability_lambda(model, graph, rho, beta), None
    except DegenerateMetricError as exc:
        return None, str(exc)


def cmd_gibbs(ctx: Context) -> dict:
    model, graph = _setup(ctx)
    beta = cfgmod.beta_value(ctx.cfg)
    if not beta > 0:
        raise ConfigError("beta: Gibbs measures need beta > 0")
    _, rng_gibbs, _ = ctx.rngs()
    solve = solve_gibbs(model, beta, rng=rng_gibbs, return_failures=True, **_gibbs_opts(ctx))
    want_lambda = ctx.cfg.get("gibbs", {}).get("stability", True)
    rows = []
    for m in solve.measures:
        if want_lambda:
            m.lam, _ = _lambda_or_none(model, graph, m.rho_star, beta)
        rows.append(m.to_dict())
    ctx.say(f"{model.name}, beta = {beta:g}: {len(solve.measures)} Gibbs measure(s)")
    for m in solve.measures:
        lam = "" if m.lam is None else f", lambda = {m.lam:.6g}"
        ctx.say(f"  {_fmt_state(m.rho_star)}  basin {m.basin_count}, "
                f"residual {m.residual:.2e}{lam}")
    if solve.failures:
        ctx.say(f"  {len(solve.failures)} start(s) did not converge")
    result = dict(command="gibbs", game=model.name, beta=beta, measures=rows,
                  failures=[dict(start=s, residual=r) for s, r in solve.failures])
    io.write_json(result, ctx.path(".json"))
    return result


def cmd_stability(ctx: Context) -> dict:
    model, graph = _setup(ctx)
    beta = cfgmod.beta_value(ctx.cfg)
    spec = ctx.cfg.get("stability", {})
    if "states" in spec:
        states = [np.asarray(s, dtype=float) for s in spec["states"]]
    else:
        if not beta > 0:
            raise ConfigError("stability.states: required when beta = 0")
        _, rng_gibbs, _ = ctx.rngs()
        states = [m.rho_star for m in solve_gibbs(model, beta, rng=rng_gibbs,
                                                   **_gibbs_opts(ctx))]
    rows = []
    for rho in states:
        row = dict(rho=rho)
        lam, why = _lambda_or_none(model, graph, rho, beta)
        row["lambda"] = lam
        if why:
            row["lambda_note"] = why
        if lam is not None and graph.n <= DIRECT_LAMBDA_MAX_N:
            row["lambda_direct"] = stability_lambda_direct(model, graph, rho, beta)
        try:
            spec_ = tangent_spectrum(jacobian_rhs(model, graph, rho, beta))
            row["tangent_spectrum"] = [[float(z.real), float(z.imag)] for z in spec_]
            row["max_real_part"] = float(spec_.real.max())
        except (SwitchingSurfaceError, BoundaryStateError) as exc:
            row["tangent_spectrum"] = None
            row["jacobian_note"] = str(exc)
        rows.append(row)
        lam_txt = "n/a" if lam is None else f"{lam:.6g}"
        jac_txt = ("non-smooth" if row["tangent_spectrum"] is None
                   else f"max Re = {row['max_real_part']:.6g}")
        ctx.say(f"{_fmt_state(rho)}: lambda = {lam_txt}, tangent spectrum {jac_txt}")
    result = dict(command="stability", game=model.name, beta=beta, states=rows)
    io.write_json(result, ctx.path(".json"))
    return result


def cmd_sweep(ctx: Context) -> dict:
    model, graph = _setup(ctx)
    betas = cfgmod.beta_list(ctx.cfg)
    t_end = ctx.cfg.get("t_end", DEFAULT_T_END)
    rng_init, _, _ = ctx.rngs()
    rho0 = cfgmod.initial_states(ctx.cfg, model.n, rng_init)[0]
    res = sweep_beta(model, graph, rho0, betas, t_end, classify=_classify_opts(ctx),
                     **cfgmod.integrator_options(ctx.cfg))
    path = ctx.path(".csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# game: {model.name}\n# initial: {list(rho0)}\n# t_end: {t_end}\n")
        w = csv.writer(fh)
        w.writerow(["beta", "kind", "period", "velocity", "diameter"]
                   + [f"point_{i + 1}" for i in range(model.n)] + ["error"])
        for e in res.entries:
            r = e.report
            point = list(r.point) if r is not None and r.point is not None else [""] * model.n
            w.writerow([repr(e.beta), r.kind if r else "error",
                        "" if r is None or r.period is None else repr(r.period),
                        "" if r is None else repr(r.velocity),
                        "" if r is None else repr(r.diameter)]
                       + [p if p == "" else repr(float(p)) for p in point] + [e.error or ""])
    for e in res.entries:
        ctx.say(f"beta = {e.beta:<10.5g} {e.report.summary() if e.report else e.error}")
    for lo, hi, klo, khi in res.brackets:
        ctx.say(f"classification flips in [{lo:g}, {hi:g}]: {klo} -> {khi}")
    result = dict(command="sweep", game=model.name, initial=rho0, t_end=t_end,
                  entries=[dict(beta=e.beta, report=e.report.to_dict() if e.report else None,
                                error=e.error) for e in res.entries],
                  brackets=[dict(beta_lo=lo, beta_hi=hi, kind_lo=klo, kind_hi=khi)
                            for lo, hi, klo, khi in res.brackets])
    io.write_json(result, ctx.path(".json"))
    return result


def cmd_agents(ctx: Context) -> dict:
    model, graph = _setup(ctx)
    beta = cfgmod.beta_value(ctx.cfg)
    spec = ctx.cfg["agents"] if "agents" in ctx.cfg else None
    if spec is None:
        raise ConfigError("agents: required for this command")
    t_end = ctx.cfg.get("t_end", DEFAULT_T_END)
    rng_init, _, rng_agents = ctx.rngs()
    rho0 = cfgmod.initial_states(ctx.cfg, model.n, rng_init)[0]
    ens = AgentEnsemble.from_state(rho0, spec["N"], seed=ctx.seed)
    emp = run_ensemble(ens, model, graph, beta, t_end, h=spec.get("h"), rng=rng_agents,
                       record_every=spec.get("record_every"),
                       h_max=spec.get("h_max", H_MAX))
    opts = cfgmod.integrator_options(ctx.cfg)
    opts.pop("dt_out", None)
    ode = integrate(model, graph, ens.rho, beta, t_end, t_out=emp.times, **opts)
    dev = mean_field_deviation(emp, ode)
    header = {"N": ens.N, "seed": ctx.seed}
    files = [io.write_trajectory_csv(emp, ctx.path(".csv"), header),
             io.write_trajectory_csv(ode, ctx.path("_ode.csv"))]
    if model.n in (2, 3):
        files.append(io.write_plot_coordinates(emp, ctx.path("_plot.csv")))
    ctx.say(f"{model.name}, beta = {beta:g}, N = {ens.N}, seed = {ctx.seed}: "
            f"sup deviation from the ODE {dev:.4g} over t <= {t_end:g}")
    result = dict(command="agents", game=model.name, beta=beta, N=ens.N, seed=ctx.seed,
                  t_end=t_end, deviation=dev, steps=emp.meta["steps"],
                  terminal=emp.terminal, ode_terminal=ode.terminal,
                  files=[str(f) for f in files])
    io.write_json(result, ctx.path("_report.json"))
    return result


def _find(path: str, base: Optional[Path]) -> Path:
    p = Path(path)
    if not p.is_absolute() and not p.exists() and base is not None and (base / p).exists():
        return base / p
    return p


def cmd_diagnose(ctx: Context, base: Optional[Path] = None) -> dict:
    model, graph = _setup(ctx)
    spec = ctx.cfg.get("diagnose")
    if spec is None:
        raise ConfigError("diagnose: required for this command")
    src = _find(spec["trajectory"], base)
    if src.suffix == ".csv":
        traj = io.read_trajectory_csv(src)
    else:
        traj = io.read_trajectory_json(src)
    if traj.n != model.n:
        raise ConfigError(f"diagnose.trajectory: has {traj.n} strategies, game has {model.n}")
    traj.model, traj.graph = model, graph
    rho_inf = spec.get("rho_inf", traj.meta.get("rho_inf"))
    if rho_inf is None and model.is_potential and traj.beta > 0:
        _, rng_gibbs, _ = ctx.rngs()
        rho_inf = nearest_gibbs(solve_gibbs(model, traj.beta, rng=rng_gibbs, **_gibbs_opts(ctx)),
                                traj.terminal).rho_star
    compute_diagnostics(traj, rho_inf)
    result = dict(command="diagnose", source=str(src), game=model.name, beta=traj.beta,
                  rho_inf=traj.meta.get("rho_inf"))
    if model.is_potential and traj.beta > 0:
        try:
            result["dissipation_residual"] = dissipation_check(traj)
        except OTGamesError as exc:
            result["dissipation_note"] = str(exc)
        try:
            fit = decay_rate_fit(traj, spec.get("tail_fraction", 0.5))
            result["decay_fit"] = fit.to_dict()
        except OTGamesError as exc:
            result["decay_note"] = str(exc)
    io.write_trajectory_csv(traj, ctx.path(".csv"))
    io.write_trajectory_json(traj, ctx.path(".json"))
    io.write_json(result, ctx.path("_report.json"))
    if "dissipation_residual" in result:
        ctx.say(f"dissipation residual {result['dissipation_residual']:.3e}")
    if "decay_fit" in result:
        fit = result["decay_fit"]
        ctx.say(f"entropy decay rate {fit['rate']:.6g} (R^2 = {fit['r_squared']:.6f})")
    if not (model.is_potential and traj.beta > 0):
        ctx.say("relative entropy undefined (needs a potential game and beta > 0)")
    return result


def cmd_examples(ctx: Context) -> dict:
    games = {}
    for name, make in sorted(BUILTINS.items()):
        m = make()
        games[name] = dict(n=m.n, labels=m.labels, matrix=m.matrix.tolist(),
                           potential=m.is_potential)
        ctx.say(f"{name} (n = {m.n}{', potential' if m.is_potential else ''})")
        for row in m.matrix:
            ctx.say("    [" + ", ".join(f"{v:g}" for v in row) + "]")
    if ctx.out is not None:
        io.write_json(games, ctx.path(".json"))
    return games


COMMANDS = {
    "simulate": cmd_simulate,
    "gibbs": cmd_gibbs,
    "stability": cmd_stability,
    "sweep": cmd_sweep,
    "agents": cmd_agents,
    "diagnose": cmd_diagnose,
    "examples": cmd_examples,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress the text report")
    parser = argparse.ArgumentParser(
        prog="otgames",
        description="Fokker-Planck dynamics of population games on strategy graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate trajectories and classify their long-run behaviour",
        "gibbs": "solve for Gibbs measures",
        "stability": "stability score and linearisation at given states or Gibbs measures",
        "sweep": "classify long-run behaviour over a list of noise levels",
        "agents": "simulate N players and compare with the mean-field flow",
        "diagnose": "recompute entropy diagnostics for a stored trajectory",
        "examples": "list the built-in games",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", metavar="PATH", required=name != "examples",
                       help="JSON run configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        base = None
        if args.config is not None:
            cfg = cfgmod.load_config(args.config)
            base = Path(args.config).resolve().parent
        else:
            cfg = {}
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out_cfg = cfg.get("output", {})
        out = Path(args.out or out_cfg.get("dir", "out"))
        prefix = out_cfg.get("prefix", args.command)
        if args.command == "examples" and args.out is None:
            out = None
        ctx = Context(cfg, out, prefix, seed, args.quiet)
        if args.command == "diagnose":
            cmd_diagnose(ctx, base)
        else:
            COMMANDS[args.command](ctx)
    except (ValidationError, UnsupportedOperationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
