"""Command line entry point: run, bounds, compare and batch subcommands.

Exit codes: 0 success, 1 configuration error, 2 simulation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import feasibility_report, min_feasible_r
from .errors import SimulationError
from .scenarios import REPORTED_VALUES, ConfigError, ScenarioConfig, build_scenario, load_config
from .sim import RunResult, Scenario, run

log = logging.getLogger("ettrack")

ARMING_NOTE = ("total_updates counts the first-arming update at t0 "
               "(the first time ||x_tilde|| >= r) as a control execution")


def _names(prefix: str, k: int) -> list:
    return [prefix] if k == 1 else [f"{prefix}{i + 1}" for i in range(k)]


def trajectory_columns(n: int, m: int, q: int) -> list:
    return (["t"] + _names("x", n) + _names("xd", n) + _names("v", q) + _names("xt", n) + _names("u", m)
            + ["V", "normxt", "trigger_g"])


def write_trajectory_csv(path: Path, result: RunResult) -> None:
    tr = result.trajectory
    n, m, q = tr.x.shape[1], tr.u.shape[1], tr.v.shape[1]
    data = np.column_stack([tr.t, tr.x, tr.x_d, tr.v, tr.x_tilde, tr.u, tr.V, tr.norm_xt, tr.g])
    np.savetxt(path, data, delimiter=",", header=",".join(trajectory_columns(n, m, q)), comments="",
               fmt="%.10g")


def write_events_csv(path: Path, result: RunResult) -> None:
    k = len(result.events[0].L) if result.events else 0
    lines = [",".join(["i", "t_i", "normxt_i"] + [f"L_{j + 1}" for j in range(k)] + ["reason"])]
    for ev in result.events:
        lines.append(",".join([str(ev.index), f"{ev.t:.10g}", f"{ev.norm_xt:.10g}"]
                              + [f"{x:.10g}" for x in ev.L] + [ev.reason]))
    path.write_text("\n".join(lines) + "\n")


def weighted_error(scenario: Scenario, result: RunResult) -> np.ndarray:
    """W_i'|e| = L_i'|e| ||x_tilde|| / threshold(||x_tilde||); an event is due when it reaches ||x_tilde||."""
    tr = result.trajectory
    thr = np.array([scenario.cert.threshold(s, scenario.params.sigma) if s > 0 else np.nan for s in tr.norm_xt])
    return tr.lte * tr.norm_xt / thr


def write_figure(path: Path, scenario: Scenario, result: RunResult) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tr = result.trajectory
    w = weighted_error(scenario, result)
    r, r1 = scenario.params.r, result.metrics.r1
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for ax, zoom in zip(axes, (False, True)):
        ax.plot(tr.t, w, lw=0.6, color="tab:orange", label=r"$W_i^T|e|$")
        ax.plot(tr.t, tr.norm_xt, lw=1.0, color="tab:blue", label=r"$\|\tilde x\|$")
        ax.axhline(r, color="k", ls="--", lw=0.8, label="r")
        ax.axhline(r1, color="tab:red", ls=":", lw=0.8, label=r"$r_1$")
        ax.set_xlabel("t [s]")
        if zoom:
            ax.set_ylim(0, 1.2 * r1)
            ax.set_title("zoom")
        else:
            ax.set_yscale("log")
            ax.set_title(scenario.name)
    axes[0].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _bounds_payload(scenario: Scenario) -> dict:
    reports = feasibility_report(scenario)
    payload = {"r": scenario.params.r, "r1": scenario.r1, "reports": [rep.as_dict() for rep in reports]}
    ref = scenario.reference
    mu0 = reports[0].details.get("mu0")
    jump = None
    if ref.assumption_set == "A5":
        jump = ref.jump * np.linalg.norm(scenario.provider.M(reports[0].details["R0"]))
    elif ref.assumption_set == "A3" and ref.d_v is not None:
        jump = 2 * ref.d_v * np.linalg.norm(scenario.provider.M(reports[0].details["R0"]))
    if jump is not None and mu0:
        try:
            payload["r_min_feasible"] = min_feasible_r(scenario.cert, scenario.params.sigma, mu0, jump)
        except ValueError:
            payload["r_min_feasible"] = None
    return payload


def _report(scenario: Scenario, result: RunResult) -> dict:
    rep = {
        "scenario": scenario.name,
        "ledger_mode": scenario.ledger_mode,
        "parameters": {"sigma": scenario.params.sigma, "r": scenario.params.r, "dt": scenario.sim.dt,
                       "horizon": scenario.sim.horizon, "x0": scenario.x0},
        "metrics": result.metrics.as_dict(),
        "bounds": _bounds_payload(scenario),
        "conventions": {"arming_update": ARMING_NOTE,
                        "ultimate_bound_observed": "max ||x_tilde|| over the final 20% of the horizon",
                        "avg_freq_transient": "updates before ||x_tilde|| first reaches r, per second of that period"},
    }
    if scenario.reference.name in REPORTED_VALUES:
        rep["reported"] = REPORTED_VALUES[scenario.reference.name]
    return _clean(rep)


def _print_summary(report: dict, out=None) -> None:
    out = out or sys.stdout
    m = report["metrics"]
    reported = report.get("reported", {})
    rows = [("total_updates", m["total_updates"], reported.get("total_updates")),
            ("min_inter_exec [s]", m["min_inter_exec"], reported.get("min_inter_exec")),
            ("avg_freq_total [Hz]", m["avg_freq_total"], reported.get("avg_freq_total")),
            ("avg_freq_transient [Hz]", m["avg_freq_transient"], reported.get("avg_freq_transient")),
            ("ultimate_bound_observed", m["ultimate_bound_observed"], None),
            ("r1", m["r1"], reported.get("r1"))]
    for rep in report["bounds"]["reports"]:
        rows.append((f"theorem {rep['theorem']} T_lower [s]", rep["T_lower"], reported.get("T_lower")))
    print(f"scenario {report['scenario']} (ledger {report['ledger_mode']})", file=out)
    for name, val, ref in rows:
        ref_s = "" if ref is None else f"   reported: {ref:g}"
        val_s = "n/a" if val is None else f"{val:.6g}"
        print(f"  {name:<26} {val_s:>12}{ref_s}", file=out)
    print(f"  note: {ARMING_NOTE}", file=out)


def _prepare(args, path=None) -> Scenario:
    cfg: ScenarioConfig = load_config(path or args.config)
    sim = cfg.sim
    if getattr(args, "dt", None):
        sim = replace(sim, dt=args.dt)
    if getattr(args, "horizon", None):
        sim = replace(sim, horizon=args.horizon)
    if getattr(args, "no_checks", False):
        sim = replace(sim, invariant_checks=False)
    try:
        cfg = replace(cfg, sim=sim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if getattr(args, "ledger", None):
        cfg = replace(cfg, ledger_mode="varying" if args.ledger == "varying" else "frozen")
    return build_scenario(cfg)


def _run_and_write(scenario: Scenario, out_dir: Path, quiet: bool = False) -> dict:
    result = run(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out_dir / "trajectory.csv", result)
    write_events_csv(out_dir / "events.csv", result)
    report = _report(scenario, result)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    write_figure(out_dir / "figure.svg", scenario, result)
    if not quiet:
        _print_summary(report)
    return report


def cmd_run(args) -> int:
    scenario = _prepare(args)
    out = Path(args.out or f"out/{scenario.name}")
    _run_and_write(scenario, out)
    print(f"wrote {out}/trajectory.csv, events.csv, report.json, figure.svg")
    return 0


def cmd_bounds(args) -> int:
    scenario = _prepare(args)
    payload = _clean(_bounds_payload(scenario))
    print(f"scenario {scenario.name}: r = {payload['r']:.6g}, r1 = {payload['r1']:.6g}")
    for rep in payload["reports"]:
        status = "feasible" if rep["feasible"] else f"INFEASIBLE ({rep['infeasibility_reason']})"
        T = "n/a" if rep["T_lower"] is None else f"{rep['T_lower']:.4g} s"
        print(f"  theorem {rep['theorem']}: Delta = {rep['delta']:.6g}, T_lower = {T}, {status}")
    if payload.get("r_min_feasible") is not None:
        print(f"  smallest feasible r: {payload['r_min_feasible']:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bounds.json").write_text(json.dumps(payload, indent=2) + "\n")
    else:
        print(json.dumps(payload))
    return 0


def frozen_variant(scenario: Scenario) -> Scenario:
    """The same scenario with L held at L0.

    The constant-L trigger can request an update on every solver step, so the Zeno
    guard is raised to the one-event-per-step ceiling for this run.
    """
    cap = int(math.ceil(scenario.sim.zeno_window / scenario.sim.dt)) + 1
    sim = replace(scenario.sim, zeno_guard=max(scenario.sim.zeno_guard, cap))
    return replace(scenario, ledger_mode="frozen", sim=sim)


def compare(scenario: Scenario) -> dict:
    varying = run(replace(scenario, ledger_mode="varying")).metrics
    frozen = run(frozen_variant(scenario)).metrics
    return _clean({
        "scenario": scenario.name,
        "varying": varying.as_dict(),
        "frozen": frozen.as_dict(),
        "ratio_total": frozen.avg_freq_total / varying.avg_freq_total,
        "ratio_transient": frozen.avg_freq_transient / varying.avg_freq_transient,
    })


def cmd_compare(args) -> int:
    scenario = _prepare(args)
    res = compare(scenario)
    v, f = res["varying"], res["frozen"]
    print(f"scenario {scenario.name}: time-varying L vs frozen L0")
    print(f"  {'':<22}{'varying':>12}{'frozen':>12}")
    for key in ("total_updates", "avg_freq_total", "avg_freq_transient", "min_inter_exec", "ultimate_bound_observed"):
        print(f"  {key:<22}{v[key]:>12.6g}{f[key]:>12.6g}")
    print(f"  frequency ratio (total) {res['ratio_total']:.3g}, (transient) {res['ratio_transient']:.3g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.json").write_text(json.dumps(res, indent=2) + "\n")
    return 0


def _batch_worker(job):
    path, out_dir, overrides = job
    ns = argparse.Namespace(config=path, **overrides)
    try:
        scenario = _prepare(ns)
        _run_and_write(scenario, Path(out_dir) / scenario.name, quiet=True)
        return path, 0, ""
    except ConfigError as exc:
        return path, 1, str(exc)
    except SimulationError as exc:
        return path, 2, str(exc)


def cmd_batch(args) -> int:
    paths = list(args.configs) + ([args.config] if args.config else [])
    if not paths:
        raise ConfigError("batch needs at least one config")
    overrides = {"dt": args.dt, "horizon": args.horizon, "no_checks": args.no_checks, "ledger": args.ledger}
    out = args.out or "out"
    jobs = [(p, out, overrides) for p in paths]
    if args.workers == 1 or len(jobs) == 1:
        results = [_batch_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_batch_worker, jobs))
    code = 0
    for path, rc, msg in results:
        print(f"{path}: {'ok' if rc == 0 else 'FAILED (' + msg + ')'}")
        code = max(code, rc)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ettrack", description="Event-triggered trajectory tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, positional=True):
        if positional:
            p.add_argument("config_pos", nargs="?", metavar="CONFIG")
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--ledger", choices=["varying", "frozen"])
        p.add_argument("--no-checks", action="store_true")

    for name, fn, help_ in (("run", cmd_run, "simulate a scenario and write logs"),
                            ("bounds", cmd_bounds, "print analytic guarantees"),
                            ("compare", cmd_compare, "time-varying vs frozen Lipschitz vector")):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("batch", help="run several scenarios, one output directory each")
    p.add_argument("configs", nargs="*")
    p.add_argument("--workers", type=int, default=None)
    common(p, positional=False)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "config_pos", None) and not args.config:
        args.config = args.config_pos
    if args.command != "batch" and not args.config:
        print("error: a config path is required", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
