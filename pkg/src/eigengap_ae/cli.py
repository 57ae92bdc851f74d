"""Command-line front end.

Subcommands: ``estimate``, ``verify``, ``sweep``, ``invariance``, ``audit``.
Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
named after the long flags (``p-flip = 0.01`` or ``p_flip = 0.01``);
explicit flags win.  Exit codes: 0 success, 1 check or runtime failure,
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import exact_verifier as ev
from .estimators import RESULT_COLUMNS, EstimatorConfig, estimate
from .experiments import (
    INVARIANCE_COLUMNS,
    InvariancePlan,
    SweepPlan,
    default_output_dir,
    log_splits,
    run_invariance,
    run_lemma_audit,
    run_sweep,
    write_plot_data,
)
from .signal_oracle import AmplitudeOracle, Protocol

DEFAULT_SEED = 20240901
OUTPUT_ENV = "EIGENGAP_AE_OUTPUT"


class ConfigError(Exception):
    pass


# --- value parsers ---------------------------------------------------------

def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _split(text: str):
    try:
        d, q = text.split(":")
        return float(d), float(q)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected DEPTH:QUERIES, got {text!r}")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _int_like(text: str) -> int:
    # accepts 1e6 style integers
    v = float(text)
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


# --- config files ----------------------------------------------------------

def read_config(path) -> list:
    """Parse ``key = value`` lines; returns ``[(key, value, lineno)]``.

    Blank lines and ``#`` comments are skipped.  Raises :class:`ConfigError`
    naming ``file:line`` on malformed input.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})")
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{n}: empty key")
        out.append((key.replace("-", "_"), value, n))
    return out


def _apply_config(parser: argparse.ArgumentParser, path) -> None:
    actions = {a.dest: a for a in parser._actions if a.option_strings}
    defaults = {}
    for key, value, n in read_config(path):
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = _bool(value)
            elif action.type is not None:
                defaults[key] = action.type(value)
            else:
                defaults[key] = value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{n}: bad value for {key!r}: {exc}")
        if action.choices is not None and defaults[key] not in action.choices:
            raise ConfigError(f"{path}:{n}: {key!r} must be one of {', '.join(map(str, action.choices))}")
    parser.set_defaults(**defaults)


# --- parser ----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, seed=True, jobs=False) -> None:
    p.add_argument("--config", metavar="FILE", default=None, help="key = value file; explicit flags win")
    if seed:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    if jobs:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="eigengap-ae", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    protocols = [p.value for p in Protocol]

    p = sub.add_parser("estimate", help="one amplitude estimate, printed as a CSV row", formatter_class=fmt)
    _common(p)
    p.add_argument("--a", type=float, default=None, help="hidden amplitude in [0, 1] (required)")
    p.add_argument("--epsilon", type=float, default=None, help="target precision in (0, 1) (required)")
    p.add_argument("--protocol", choices=protocols, default=None, help="estimator (required)")
    p.add_argument("--beta", type=float, default=0.0, help="depth/shot tradeoff exponent in [0, 1]")
    p.add_argument("--sigma", type=float, default=4.0, help="truncation cutoff in standard deviations")
    p.add_argument("--rho", type=float, default=6.0, help="normaliser cutoff, >= sigma")
    p.add_argument("--T", dest="T", type=float, default=None, help="Gaussian width (derived when omitted)")
    p.add_argument("--N", dest="N", type=_int_like, default=None, help="sample count (derived when omitted)")
    p.add_argument("--c-T", dest="c_T", type=float, default=1.0, help="width constant")
    p.add_argument("--c-N", dest="c_N", type=float, default=10.0, help="sample-count constant")
    p.add_argument("--p-flip", type=float, default=0.0, help="symmetric readout flip probability")
    p.add_argument("--query-weight", type=int, choices=[1, 2], default=1, help="queries charged per iteration")
    p.add_argument("--header", action="store_true", help="print the CSV header first")

    p = sub.add_parser("verify", help="dense-matrix checks of eigenphases and signals", formatter_class=fmt)
    _common(p)
    p.add_argument("--dims", type=_int_list, default=[2, 4, 8, 16], help="comma-separated Hilbert-space sizes")
    p.add_argument("--seeds", type=int, default=5, help="random models per dimension")
    p.add_argument("--t-max", type=int, default=16, help="largest walk power checked")

    p = sub.add_parser("sweep", help="error/depth/query sweep over a grid", formatter_class=fmt)
    _common(p, jobs=True)
    p.add_argument("--plan", dest="config", metavar="FILE", help="alias of --config")
    p.add_argument("--protocols", type=_str_list, default=["glsae"], help="comma-separated protocols")
    p.add_argument("--a", type=_float_list, default=[0.3], help="comma-separated amplitudes")
    p.add_argument("--epsilons", type=_float_list, default=None,
                   help="comma-separated, strictly decreasing (default: --points log-spaced values)")
    p.add_argument("--eps-max", type=float, default=1e-1, help="largest epsilon when --epsilons is omitted")
    p.add_argument("--eps-min", type=float, default=1e-3, help="smallest epsilon when --epsilons is omitted")
    p.add_argument("--points", type=int, default=5, help="log-spaced epsilon count")
    p.add_argument("--beta", type=float, default=0.0, help="depth/shot tradeoff exponent")
    p.add_argument("--trials", type=int, default=100, help="trials per grid point")
    p.add_argument("--output", default=None, help=f"CSV path (default: ${OUTPUT_ENV}/sweep.csv)")
    p.add_argument("--plot-data", default=None, metavar="DIR", help="also write x y series files here")
    p.add_argument("--allow-large", action="store_true", help="lift the desk-scale caps")

    p = sub.add_parser("invariance", help="fixed depth x queries budget split several ways", formatter_class=fmt)
    _common(p, jobs=True)
    p.add_argument("--budget", type=float, default=1e6, help="depth x queries product")
    p.add_argument("--splits", type=int, default=3, help="number of log-spaced splits")
    p.add_argument("--split", dest="split_list", type=_split, action="append", default=None,
                   metavar="D:Q", help="explicit split; repeatable, overrides --splits")
    p.add_argument("--depth-min", type=float, default=20.0, help="shallowest split depth")
    p.add_argument("--depth-max", type=float, default=None, help="deepest split depth (default sqrt(budget)/10)")
    p.add_argument("--a", type=float, default=0.25, help="hidden amplitude")
    p.add_argument("--trials", type=int, default=100, help="trials per split")
    p.add_argument("--epsilon", type=float, default=1e-4, help="grid resolution")
    p.add_argument("--output", default=None, help=f"CSV path (default: ${OUTPUT_ENV}/invariance.csv)")
    p.add_argument("--allow-large", action="store_true", help="lift the desk-scale caps")

    p = sub.add_parser("audit", help="curvature and truncation checks of the periodic Gaussians", formatter_class=fmt)
    _common(p, seed=False)
    p.add_argument("--T", dest="Ts", type=_float_list, default=[2 / math.pi, 1.0, 5.0, 20.0], help="widths to audit")
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step")
    p.add_argument("--points", type=int, default=4001, help="grid points per interval")
    p.add_argument("--sigma", type=float, default=4.0, help="truncation cutoff for the loss check")
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        sp = parser._subparsers._group_actions[0].choices[args.command]
        try:
            _apply_config(sp, args.config)
        except ConfigError as exc:
            sp.error(str(exc))
        args = parser.parse_args(argv)
    return args, parser._subparsers._group_actions[0].choices[args.command]


# --- commands --------------------------------------------------------------

def _out_path(arg, name):
    return Path(arg) if arg else default_output_dir() / name


def cmd_estimate(args, p) -> int:
    for flag in ("a", "epsilon", "protocol"):
        if getattr(args, flag) is None:
            p.error(f"the following argument is required: --{flag}")
    checks = [
        ("--a", 0.0 <= args.a <= 1.0, "must lie in [0, 1]"),
        ("--epsilon", 0.0 < args.epsilon < 1.0, "must lie in (0, 1)"),
        ("--beta", 0.0 <= args.beta <= 1.0, "must lie in [0, 1]"),
        ("--sigma", args.sigma > 0, "must be positive"),
        ("--rho", args.rho >= args.sigma, "must be >= --sigma"),
        ("--T", args.T is None or args.T > 0, "must be positive"),
        ("--N", args.N is None or args.N >= 1, "must be >= 1"),
        ("--p-flip", 0.0 <= args.p_flip <= 0.5, "must lie in [0, 0.5]"),
        ("--c-T", args.c_T > 0, "must be positive"),
        ("--c-N", args.c_N > 0, "must be positive"),
    ]
    for flag, ok, msg in checks:
        if not ok:
            p.error(f"argument {flag}: {msg}, got {getattr(args, flag[2:].replace('-', '_'))!r}")

    cfg = EstimatorConfig(
        epsilon=args.epsilon, beta=args.beta, protocol=args.protocol, T=args.T, N=args.N,
        sigma=args.sigma, rho=args.rho, seed=args.seed, c_T=args.c_T, c_N=args.c_N,
        query_weight=args.query_weight, p_flip=args.p_flip,
    )
    oracle = AmplitudeOracle(args.a, query_weight=args.query_weight, p_flip=args.p_flip)
    result = estimate(cfg, oracle)
    w = csv.writer(sys.stdout, lineterminator="\n")
    if args.header:
        w.writerow(RESULT_COLUMNS)
    w.writerow(result.csv_row())
    if result.outside_range:
        print(f"warning: estimate lies outside [zeta, 1 - zeta] with zeta={result.zeta:.3g}", file=sys.stderr)
    return 0


def cmd_verify(args, p) -> int:
    if not args.dims:
        p.error("argument --dims: empty list")
    for d in args.dims:
        if d > ev.MAX_DIM:
            p.error(f"argument --dims: {d} exceeds the cap of {ev.MAX_DIM}")
        if d < 2:
            p.error(f"argument --dims: {d} is below 2")
    if args.seeds < 1:
        p.error("argument --seeds: must be >= 1")
    if not 0 <= args.t_max <= 32:
        p.error("argument --t-max: must lie in [0, 32]")

    worst = (0.0, "")
    for d in args.dims:
        dim_worst = 0.0
        for s in range(args.seeds):
            rng = np.random.default_rng([args.seed, d, s])
            models = [("random", ev.random_model(d, rng))]
            if d % 2 == 0:
                models.append(("flag", ev.flag_model(d // 2, rng=rng)))
            for kind, model in models:
                for rep in (ev.verify_eigenphases(model), ev.verify_signals(model, args.t_max)):
                    dim_worst = max(dim_worst, rep.max_error)
                    if rep.max_error > worst[0]:
                        key = max(rep.checks, key=rep.checks.get)
                        worst = (rep.max_error, f"dim={d} seed={s} model={kind} check={rep.name}/{key}")
        print(f"dim={d:<3d} models={args.seeds * (2 if d % 2 == 0 else 1):<3d} max_error={dim_worst:.3e}")
    ok = worst[0] <= ev.TOL
    print(f"{'PASS' if ok else 'FAIL'} max_error={worst[0]:.3e} tol={ev.TOL:g}")
    if not ok:
        print(f"worst: {worst[1]}")
    return 0 if ok else 1


def cmd_sweep(args, p) -> int:
    try:
        protocols = [Protocol.parse(x) for x in args.protocols]
    except ValueError:
        p.error(f"argument --protocols: unknown protocol in {','.join(args.protocols)}")
    if args.epsilons:
        eps = args.epsilons
    else:
        if args.points < 2 or not 0 < args.eps_min < args.eps_max:
            p.error("argument --points/--eps-min/--eps-max: need points >= 2 and 0 < eps-min < eps-max")
        eps = np.geomspace(args.eps_max, args.eps_min, args.points).tolist()
    out = _out_path(args.output, "sweep.csv")
    try:
        plan = SweepPlan(protocols, args.a, eps, beta=args.beta, trials=args.trials,
                         seed_base=args.seed, output=str(out), allow_large=args.allow_large)
    except ValueError as exc:
        p.error(str(exc))
    res = run_sweep(plan, jobs=args.jobs)

    print("protocol a_true epsilon success rmse p90 median_depth median_queries")
    for s in res.summary:
        print(f"{s['protocol']} {s['a_true']:.6g} {s['epsilon']:.4g} {s['success']:.2f} "
              f"{s['rmse']:.3e} {s['p90']:.3e} {s['median_depth']:.1f} {s['median_queries']:.1f}")
    if len(plan.epsilons) >= 2:
        for proto in plan.protocols:
            for a in plan.a_values:
                print(f"depth slope {proto.value} a={a:.6g}: {res.depth_slope(proto, a):+.3f}")
    if args.plot_data:
        series = {}
        for proto in plan.protocols:
            for a in plan.a_values:
                pts = [s for s in res.summary if s["protocol"] == proto.value and s["a_true"] == a]
                tag = f"{proto.value}_a{a:g}"
                series[f"{tag}_depth"] = ([s["median_depth"] for s in pts], [s["rmse"] for s in pts])
                series[f"{tag}_queries"] = ([s["median_queries"] for s in pts], [s["rmse"] for s in pts])
        write_plot_data(args.plot_data, series)
    print(f"wrote {out}")
    return 0


def cmd_invariance(args, p) -> int:
    if args.split_list:
        splits = args.split_list
    else:
        if args.splits < 1:
            p.error("argument --splits: must be >= 1")
        splits = log_splits(args.budget, args.splits, args.depth_min, args.depth_max)
    out = _out_path(args.output, "invariance.csv")
    try:
        plan = InvariancePlan(budget=args.budget, splits=splits, a_true=args.a, trials=args.trials,
                              seed_base=args.seed, epsilon=args.epsilon, output=str(out),
                              allow_large=args.allow_large)
    except ValueError as exc:
        p.error(str(exc))
    res = run_invariance(plan, jobs=args.jobs)
    print(" ".join(INVARIANCE_COLUMNS))
    for d, q, prod, rmse, n in res.rows:
        print(f"{d:.4g} {q:.4g} {prod:.4g} {rmse:.3e} {n}")
    print(f"max/min rmse ratio: {res.ratio:.3f}")
    print(f"wrote {out}")
    return 0


def cmd_audit(args, p) -> int:
    if not 1e-6 <= args.h <= 1e-3:
        p.error("argument --h: must lie in [1e-6, 1e-3]")
    if any(t <= 0 for t in args.Ts):
        p.error("argument --T: widths must be positive")
    if args.points < 3:
        p.error("argument --points: must be >= 3")
    report = run_lemma_audit(Ts=args.Ts, h=args.h, points=args.points, sigma=args.sigma)
    for line in report.lines():
        print(line)
    print("audit " + ("PASS" if report.passed else "FAIL"))
    return 0 if report.passed else 1


COMMANDS = {
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "invariance": cmd_invariance,
    "audit": cmd_audit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, sub = _parse(parser, argv)
    try:
        return COMMANDS[args.command](args, sub)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
