"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed, 2 config error,
3 refused to solve a provably non-ergodic system, 4 drift certificate
inapplicable, 5 solver failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, export
from .export import ConfigError, ExperimentConfig, load_config
from .instant import instant_balance_residual, instant_stationary
from .lyapunov import check_ergodicity, verify_drift_bound
from .model import PARAM_KEYS, ModelParams
from .simulator import SimConfig, simulate, throughput_check
from .solver import (X1, X2, Y, SolverError, TruncationSpec, build_generator, marginal,
                     solve_stationary)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_INAPPLICABLE, EXIT_SOLVER = 0, 1, 2, 3, 4, 5

DEFAULT_TRUNC = (40, 40)
DEFAULT_BOX = (50, 50)
DEFAULT_SIM_TRUNC = (60, 60)


class CliExit(Exception):
    def __init__(self, code, msg=""):
        super().__init__(msg)
        self.code = code


def _err(msg):
    print(msg, file=sys.stderr)


# --- argument plumbing --------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON or key=value config file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true", help="solve even when provably non-ergodic")
    for key in PARAM_KEYS:
        p.add_argument(f"--{key}", dest=f"param_{key}", metavar="X")


def _trunc_arg(p, name, default, help):
    p.add_argument(name, nargs=2, type=int, metavar=("CAP1", "CAP2"), default=None,
                   help=f"{help} (default {default[0]} {default[1]})")


def _events(text) -> int:
    v = float(text)
    if not v.is_integer() or v < 0:
        raise argparse.ArgumentTypeError(f"not an event count: {text}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prioinv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="stationary distribution of the truncated chain + identity checks")
    _common(p)
    _trunc_arg(p, "--trunc", DEFAULT_TRUNC, "queue caps")
    p.add_argument("--method", choices=("auto", "gth", "power"), default="auto")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("drift", help="Lyapunov drift verification over a state box")
    _common(p)
    _trunc_arg(p, "--box", DEFAULT_BOX, "box caps")
    p.add_argument("--emit-csv", action="store_true", help="write the per-state drift CSV")

    p = sub.add_parser("simulate", help="event simulation with batch-means confidence intervals")
    _common(p)
    p.add_argument("--events", type=_events)
    p.add_argument("--warmup", type=_events)
    p.add_argument("--batches", type=int)
    p.add_argument("--stream", type=int)
    p.add_argument("--trajectory", help="write the event log CSV here")
    p.add_argument("--against-solve", action="store_true", help="z-scores against a truncated solve")
    _trunc_arg(p, "--trunc", DEFAULT_SIM_TRUNC, "caps for --against-solve")

    p = sub.add_parser("instant", help="closed-form inventory law of the instant-service system")
    _common(p)

    p = sub.add_parser("verify", help="run every check and report pass/fail")
    _common(p)
    _trunc_arg(p, "--trunc", DEFAULT_TRUNC, "queue caps")
    _trunc_arg(p, "--box", DEFAULT_BOX, "drift box caps")

    p = sub.add_parser("sweep", help="metrics over a grid of one parameter (long-format CSV)")
    _common(p)
    p.add_argument("--axis", choices=PARAM_KEYS)
    p.add_argument("--grid", help="comma-separated values")
    p.add_argument("--mode", choices=("solve", "simulate"), default="solve")
    p.add_argument("--workers", type=int, default=1)
    _trunc_arg(p, "--trunc", DEFAULT_TRUNC, "queue caps")
    p.add_argument("--events", type=_events)
    p.add_argument("--batches", type=int)
    return ap


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(params={})
    for key in PARAM_KEYS:
        v = getattr(args, f"param_{key}")
        if v is not None:
            cfg.params[key] = v
    if args.out:
        cfg.out = args.out
    if args.format:
        cfg.format = args.format
    if args.seed is not None:
        cfg.sim["seed"] = args.seed
    return cfg


def _fmt_of(cfg: ExperimentConfig, default: str) -> str:
    if cfg.format:
        return cfg.format
    if cfg.out:
        suffix = Path(cfg.out).suffix.lower().lstrip(".")
        if suffix in ("csv", "json"):
            return suffix
    return default


def _emit(text: str, path: str | None):
    if path:
        export.write_text(path, text)
    else:
        sys.stdout.write(text)


def _trunc(value, cfg_value, default) -> TruncationSpec:
    caps = value or cfg_value or default
    try:
        return TruncationSpec(*caps)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "trunc") from None


def _stability_gate(params: ModelParams, force: bool):
    erg = check_ergodicity(params)
    if erg.stable:
        return
    if erg.sharp:
        _err(f"not ergodic: lambda1 + lambda2 = {params.lambda1 + params.lambda2:g} >= mu = {params.mu:g} "
             "with p = 1 (the condition is necessary and sufficient)")
        if not force:
            raise CliExit(EXIT_UNSTABLE)
        _err("--force given: solving the truncated chain anyway")
    else:
        _err("warning: lambda1 + lambda2 >= mu, ergodicity is not certified (condition only sufficient for p < 1)")


def _solve(params, trunc, **kw):
    gen = build_generator(params, trunc)
    try:
        return gen, solve_stationary(gen, **kw)
    except SolverError as exc:
        raise CliExit(EXIT_SOLVER, f"solver failure: {exc}") from None


def _print_reports(reports, stream=sys.stdout):
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        extra = f" boundary_mass={r.boundary_mass:.3e}" if r.boundary_mass is not None else ""
        print(f"{tag} {r.identity:<16} max_residual={r.max_residual:.3e} tol={r.tolerance:.1e}{extra}", file=stream)


# --- commands -----------------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = _config(args)
    params = cfg.model_params()
    trunc = _trunc(args.trunc, cfg.trunc, DEFAULT_TRUNC)
    _stability_gate(params, args.force)
    kw = {"method": args.method}
    if args.tol is not None:
        kw["tol"] = args.tol
    gen, dist = _solve(params, trunc, **kw)
    fmt = _fmt_of(cfg, "csv")
    _emit(export.stationary_csv(dist) if fmt == "csv" else export.stationary_json(dist), cfg.out)
    reports = analysis.run_all(dist, gen)
    summary_stream = sys.stderr if not cfg.out else sys.stdout
    _print_reports(reports, summary_stream)
    if cfg.out:
        export.write_text(Path(cfg.out).with_suffix(".checks.json"), export.balance_json(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_drift(args) -> int:
    cfg = _config(args)
    params = cfg.model_params()
    box = _trunc(args.box, cfg.trunc, DEFAULT_BOX)
    report = verify_drift_bound(params, box)
    if not report.applicable:
        _err(f"certificate inapplicable: eta = mu - lambda1 - lambda2 = {report.eta:g} <= 0")
        return EXIT_INAPPLICABLE
    summary = export.drift_json(report)
    if args.emit_csv:
        _emit(export.drift_csv(report), cfg.out)
        (sys.stderr if not cfg.out else sys.stdout).write(summary)
    elif _fmt_of(cfg, "json") == "csv":
        _emit(export.drift_csv(report), cfg.out)
    else:
        _emit(summary, cfg.out)
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def _sim_config(cfg: ExperimentConfig, args, **extra) -> SimConfig:
    sim = dict(cfg.sim)
    for name in ("events", "warmup", "batches", "stream"):
        v = getattr(args, name, None)
        if v is not None:
            sim[name] = v
    try:
        return SimConfig(
            seed=int(sim.get("seed", 0)),
            max_events=int(float(sim.get("events", 1_000_000))),
            warmup_events=None if sim.get("warmup") is None else int(float(sim["warmup"])),
            batches=int(sim.get("batches", 20)),
            stream=int(sim.get("stream", 0)),
            **extra,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"simulation settings: {exc}", "sim") from None


def solver_metrics(dist) -> dict:
    """Solver-side values of the simulator's metrics."""
    params = dist.params
    y = marginal(dist, Y).values
    out = {f"P(Y={k})": float(y[k]) for k in range(len(y))}
    out["P(Y>0)"] = math.fsum(y[1:])
    out["P(0<Y<=s)"] = math.fsum(y[1:params.s + 1])
    x1 = marginal(dist, X1).values
    x2 = marginal(dist, X2).values
    out["E[X1]"] = math.fsum(n * v for n, v in enumerate(x1))
    out["E[X2]"] = math.fsum(n * v for n, v in enumerate(x2))
    rates = analysis.check_rate_equations(dist).extra
    out["rate_A1"], out["rate_A2"] = rates["effective_arrival"][:2]
    out["rate_S1"], out["rate_S2"] = rates["effective_departure"][:2]
    return out


def cmd_simulate(args) -> int:
    cfg = _config(args)
    params = cfg.model_params()
    sc = _sim_config(cfg, args, record_trajectory=bool(args.trajectory))
    est = simulate(params, sc)
    _emit(export.simulation_json(est), cfg.out)
    if args.trajectory:
        export.write_text(args.trajectory, export.trajectory_csv(est.trajectory))
    stream = sys.stdout if cfg.out else sys.stderr
    tc = throughput_check(est)
    for c, r in tc.residuals.items():
        status = "boundary" if tc.boundary else ("PASS" if tc.passed[c] else "FAIL")
        print(f"throughput class {c}: residual={r:.3e} se={tc.std_errors[c]:.3e} {status}", file=stream)
    if args.against_solve:
        trunc = _trunc(args.trunc, cfg.trunc, DEFAULT_SIM_TRUNC)
        _stability_gate(params, args.force)
        _, dist = _solve(params, trunc)
        for metric, ref in solver_metrics(dist).items():
            est_v = est.time_avg[metric][0]
            bv = est.batch_values[metric]
            se = float(np.std(bv, ddof=1) / math.sqrt(len(bv)))
            z = (est_v - ref) / se if se > 0 else float("nan")
            print(f"z {metric:<12} sim={est_v:.6g} solve={ref:.6g} z={z:+.2f}", file=stream)
    return EXIT_OK


def cmd_instant(args) -> int:
    cfg = _config(args)
    params = cfg.model_params()
    dist = instant_stationary(params)
    res = instant_balance_residual(params, dist)
    fmt = _fmt_of(cfg, "csv")
    _emit(export.instant_csv(dist) if fmt == "csv" else export.instant_json(dist, res), cfg.out)
    return EXIT_OK if res <= 1e-12 else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    cfg = _config(args)
    params = cfg.model_params()
    trunc = _trunc(args.trunc, cfg.trunc, DEFAULT_TRUNC)
    erg = check_ergodicity(params)
    print(f"ergodicity: stable={erg.stable} eta={erg.eta:.6g} epsilon={erg.epsilon:.6g} ({erg.tag})")
    _stability_gate(params, args.force)
    ok = True
    gen, dist = _solve(params, trunc)
    reports = analysis.run_all(dist, gen)
    reports += analysis.check_inventory_insensitivity(params, trunc)
    _print_reports(reports)
    ok &= all(r.passed for r in reports)
    if erg.eta > 0:
        box = TruncationSpec(*(args.box or DEFAULT_BOX))
        d = verify_drift_bound(params, box)
        print(f"{'PASS' if d.ok else 'FAIL'} drift_bound      max_drift={d.max_drift_outside_F:.6g} "
              f"-epsilon={-d.epsilon:.6g} violations={len(d.violations)}")
        ok &= d.ok
    else:
        print("SKIP drift_bound      certificate inapplicable (eta <= 0)")
    res = instant_balance_residual(params, instant_stationary(params))
    print(f"{'PASS' if res <= 1e-12 else 'FAIL'} instant_balance  max_residual={res:.3e} tol=1.0e-12")
    ok &= res <= 1e-12
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _sweep_point(task):
    """Metrics for one grid point; top-level so worker processes can run it."""
    i, params, mode, trunc, sim_cfg, force = task
    erg = check_ergodicity(params)
    rows = [("stable", float(erg.stable), None), ("eta", erg.eta, None), ("epsilon", erg.epsilon, None)]
    if mode == "solve":
        names = [f"P(Y={k})" for k in range(params.b + 1)] + [
            "P(Y>0)", "P(0<Y<=s)", "E[X1]", "E[X2]", "rate_A1", "rate_A2", "rate_S1", "rate_S2",
            "boundary_mass"]
        if erg.sharp and not erg.stable and not force:
            rows += [(m, float("nan"), None) for m in names]
        else:
            dist = solve_stationary(build_generator(params, trunc))
            vals = solver_metrics(dist)
            vals["boundary_mass"] = dist.boundary_mass()
            rows += [(m, vals[m], None) for m in names]
    else:
        cfg = SimConfig(sim_cfg.seed, sim_cfg.max_events, sim_cfg.warmup_events, sim_cfg.batches,
                        None, i)
        est = simulate(params, cfg)
        rows += [(m, e, h) for m, (e, h) in est.time_avg.items()]
    return rows


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.axis:
        cfg.sweep_axis = args.axis
    if args.grid:
        cfg.sweep_grid = export._grid(args.grid)
    points = cfg.sweep_points()
    trunc = _trunc(args.trunc, cfg.trunc, DEFAULT_TRUNC)
    sim_cfg = _sim_config(cfg, args) if args.mode == "simulate" else None
    tasks = [(i, p, args.mode, trunc, sim_cfg, args.force) for i, p in enumerate(points)]
    try:
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as ex:
                results = list(ex.map(_sweep_point, tasks))
        else:
            results = [_sweep_point(t) for t in tasks]
    except SolverError as exc:
        raise CliExit(EXIT_SOLVER, f"solver failure: {exc}") from None
    axis = cfg.sweep_axis
    rows = []
    for p, res in zip(points, results):
        value = getattr(p, axis)
        rows += [(axis, value, m, v, "" if h is None else h) for m, v, h in res]
    text = export._csv(("param", "param_value", "metric", "metric_value", "half_width"), rows)
    _emit(text, cfg.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "drift": cmd_drift, "simulate": cmd_simulate,
            "instant": cmd_instant, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        _err(f"config error{key}: {exc}")
        return EXIT_CONFIG
    except CliExit as exc:
        if str(exc):
            _err(str(exc))
        return exc.code
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
