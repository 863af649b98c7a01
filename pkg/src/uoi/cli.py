"""Command-line runner for the status-update experiments.

Each subcommand writes a CSV whose ``#`` header records the full resolved
configuration, so the header alone is enough to reproduce the file.
Outputs default to ``$UOI_OUTPUT_DIR`` (or the current directory).
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import COMMAND_DEFAULTS, _float_list, resolve_settings
from .control import PlantConfig, run_tracking
from .experiments import bound_check_point, sample_path_config, tradeoff_point
from .mdp import Discretization, NonConvergenceError, lagrangian_sweep, save_policy
from .policies import PolicySpec
from .processes import Channel, ConfigurationError, TwoPointIid
from .sim import Trace, run

log = logging.getLogger("uoi")

OUTPUT_ENV = "UOI_OUTPUT_DIR"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path: Path, command: str, settings: dict, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# command={command}\n")
        for k in sorted(settings):
            fh.write(f"# {k}={settings[k]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _weights(s):
    return TwoPointIid(s["weight_low"], s["weight_high"], s["weight_prob"])


def _trace_rows(tr: Trace):
    for i in range(len(tr)):
        yield {"t": int(tr.t[i]), "Q": tr.Q[i], "omega": tr.omega[i], "H": tr.H[i], "U": int(tr.U[i]),
               "S": "" if tr.S[i] < 0 else int(tr.S[i]), "J": tr.J[i], "uoi": tr.uoi[i], "age": int(tr.age[i])}


def cmd_sample_path(s: dict, out: Path) -> int:
    cfg = sample_path_config(rho=s["rho"], p=s["p"], V=s["V"], T=s["T"], seed=s["seed"], sigma2=s["sigma2"],
                             critical_len=s["critical_len"], critical_weight=s["critical_weight"],
                             ordinary_weight=s["ordinary_weight"], batches=s["batches"])
    summary, tr = run(cfg, trace=True)
    write_csv(out, "sample-path", s, Trace.COLUMNS, _trace_rows(tr))
    pp = summary.per_period
    rows = [{"key": k, "value": v} for k, v in (
        ("avg_uoi", summary.avg_uoi), ("avg_aoi", summary.avg_aoi), ("avg_update_rate", summary.avg_update_rate),
        ("final_h_over_t", summary.final_h_over_t), ("critical_avg_sq_error", pp.critical_avg_sq_error),
        ("ordinary_avg_sq_error", pp.ordinary_avg_sq_error), ("critical_update_rate", pp.critical_update_rate),
        ("ordinary_update_rate", pp.ordinary_update_rate))]
    write_csv(out.with_name(out.stem + "_summary.csv"), "sample-path", s, ("key", "value"), rows)
    for r in rows:
        print(f"{r['key']}={_fmt(r['value'])}")
    return 0


def _tradeoff_job(args):
    idx, rho, s = args
    return tradeoff_point(rho, p=s["p"], weights=_weights(s), sigma2=s["sigma2"], T=s["T"], V=s["V"],
                          seed=(s["seed"], idx), q_bins=s["q_bins"], age_max=s["age_max"], rvi_tol=s["rvi_tol"],
                          rvi_max_iter=s["rvi_max_iter"], batches=s["batches"])


def cmd_tradeoff(s: dict, out: Path) -> int:
    rhos = _float_list("rhos", s["rhos"])
    jobs = [(i, rho, s) for i, rho in enumerate(rhos)]
    if s["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=s["jobs"]) as ex:
            results = list(ex.map(_tradeoff_job, jobs))
    else:
        results = [_tradeoff_job(j) for j in jobs]
    rows = [row for point in results for row in point]
    write_csv(out, "tradeoff", s, ("rho", "policy", "avg_uoi", "avg_update_rate", "stderr", "status"), rows)
    for r in rows:
        print(f"rho={r['rho']:.2f} {r['policy']:<12} avg_uoi={r['avg_uoi']:.4f} "
              f"rate={r['avg_update_rate']:.4f} stderr={r['stderr']:.4f} {r['status']}")
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_bound_check(s: dict, out: Path) -> int:
    rows = []
    grid = [(p, rho, V) for p in _float_list("ps", s["ps"]) for rho in _float_list("rhos", s["rhos"])
            for V in _float_list("Vs", s["Vs"])]
    for i, (p, rho, V) in enumerate(grid):
        rows.append(bound_check_point(p, rho, V, weights=_weights(s), sigma2=s["sigma2"], T=s["T"],
                                      seed=(s["seed"], i), batches=s["batches"]))
    cols = ("p", "rho", "V", "omega_bar", "sigma2", "avg_uoi", "stderr", "bound", "margin", "avg_update_rate",
            "h_over_t", "result")
    write_csv(out, "bound-check", s, cols, rows)
    for r in rows:
        print(f"p={r['p']} rho={r['rho']} V={r['V']}: avg_uoi={r['avg_uoi']:.4f} bound={r['bound']:.4f} "
              f"{r['result']}")
    return 0 if all(r["result"] == "PASS" for r in rows) else 1


def _plants(spec: str):
    out = []
    for item in spec.split(","):
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"plants: expected a:b:noise_var triples, got {item!r}")
        out.append(tuple(float(x) for x in parts))
    return out


def cmd_control_demo(s: dict, out: Path) -> int:
    rows = []
    w = _weights(s)
    for i, (a, b, var) in enumerate(_plants(s["plants"])):
        res = run_tracking(PlantConfig(a, b, var), w, PolicySpec(s["policy"], period=s["period"]), Channel(s["p"]),
                           s["T"], seed=(s["seed"], i), rho=s["rho"], V=s["V"], batches=s["batches"])
        ok = abs(res.residual) <= 3 * res.residual_stderr
        rows.append({"a": a, "b": b, "noise_var": var, "avg_tracking": res.avg_weighted_tracking_error,
                     "avg_estimation": res.avg_weighted_estimation_error,
                     "predicted_tracking": a * a * res.avg_weighted_estimation_error + res.omega_bar * var,
                     "residual": res.residual, "residual_stderr": res.residual_stderr,
                     "avg_update_rate": res.avg_update_rate, "result": "PASS" if ok else "FAIL"})
    cols = ("a", "b", "noise_var", "avg_tracking", "avg_estimation", "predicted_tracking", "residual",
            "residual_stderr", "avg_update_rate", "result")
    write_csv(out, "control-demo", s, cols, rows)
    for r in rows:
        print(f"a={r['a']} b={r['b']} var={r['noise_var']}: tracking={r['avg_tracking']:.4f} "
              f"predicted={r['predicted_tracking']:.4f} {r['result']}")
    return 0 if all(r["result"] == "PASS" for r in rows) else 1


def cmd_rvi_solve(s: dict, out: Path) -> int:
    w = _weights(s)
    disc = Discretization.default(s["sigma2"], s["p"], s["rho"], w.support, q_bins=s["q_bins"],
                                  age_max=s["age_max"])
    if s["q_max"] > 0:
        disc = Discretization(s["q_max"], s["q_bins"], w.support, s["age_max"])
    try:
        pt = lagrangian_sweep(disc, s["sigma2"], s["p"], s["metric"], [s["rho"]], tol=s["rvi_tol"],
                              max_iter=s["rvi_max_iter"])[0]
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.parent.mkdir(parents=True, exist_ok=True)
    save_policy(out, pt.policy, sigma2=s["sigma2"], p=s["p"])
    print(f"metric={s['metric']} rho={s['rho']} avg_cost={pt.avg_cost!r} "
          f"rate={pt.policy.average_update_rate!r} lam={pt.lam!r}")
    return 0


COMMANDS = {
    "sample-path": (cmd_sample_path, "sample path of queue length and squared error around a critical period"),
    "tradeoff": (cmd_tradeoff, "average urgency vs update budget for adaptive, randomized and RVI baselines"),
    "bound-check": (cmd_bound_check, "simulated average urgency against the adaptive policy's upper bound"),
    "control-demo": (cmd_control_demo, "tracking-control error decomposition"),
    "rvi-solve": (cmd_rvi_solve, "solve and store a constrained-optimal policy table"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uoi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="key=value file; flags take precedence")
        sp.add_argument("--out", type=Path, help=f"output path (default ${OUTPUT_ENV}/{name}.csv)")
        for key, default in COMMAND_DEFAULTS[name].items():
            sp.add_argument(f"--{key}", dest=key, default=None, metavar=type(default).__name__.upper(),
                            help=f"default {default}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    defaults = COMMAND_DEFAULTS[args.command]
    overrides = {k: getattr(args, k) for k in defaults}
    try:
        settings = resolve_settings(defaults, args.config, overrides)
    except ConfigurationError as exc:
        parser.error(str(exc))
    ext = ".txt" if args.command == "rvi-solve" else ".csv"
    out = args.out or Path(os.environ.get(OUTPUT_ENV, ".")) / f"{args.command.replace('-', '_')}{ext}"
    try:
        return COMMANDS[args.command][0](settings, out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
