"""Command-line frontend: ``selfcont <command> ...``.

Every run writes its result files plus a ``<command>.run.json`` report that
lists them, and prints a one-line summary followed by the report path.
Exit codes: 0 success (any verdict), 2 usage error, 3 parse or field error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path as FsPath

import numpy as np

from .expr import FieldParseError
from .field import FieldEvaluationError, parse_field_expr, parse_germ
from .germstep import GermMode, PlainMode, SnapMode, StepConfig, integrate
from .path import read_path_csv, write_path_csv
from .probe import ProbeSchedule, fit_germ_direction, probe_grid, probe_ray
from .sobolev import AnalyticGradient, FiniteDifferenceGradient, check_integrability
from .varmin import (STRATEGIES, OptConfig, family_from_exprs, minimize_fixed_start,
                     minimize_two_point, parse_init, value_function, verify_generalized)
from .zoo import ParameterError, UnknownEntryError, export_entry, instantiate, list_entries

EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 2, 3, 4
SEED_ENV = "SELFCONT_SEED"


class UsageError(Exception):
    pass


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


def _vector(text):
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("vector entries must be finite")
    return vals


def _ints(text):
    try:
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _kv(text):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, val


# --------------------------------------------------------------------------
# shared option groups

def _add_field_opts(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--field", metavar="FILE", help="field definition file")
    g.add_argument("--zoo", metavar="NAME", help="zoo entry name")
    p.add_argument("--param", type=_kv, action="append", default=[], metavar="K=V",
                   help="zoo parameter (vectors as comma lists)")


def _add_schedule_opts(p):
    d = ProbeSchedule()
    p.add_argument("--eps0", type=float, default=d.eps0)
    p.add_argument("--ratio", type=float, default=d.ratio)
    p.add_argument("--count", type=int, default=d.count)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--stall", type=float, default=d.stall_threshold)


def _add_opt_opts(p):
    d = OptConfig()
    p.add_argument("--nodes", type=int, default=d.n_nodes)
    p.add_argument("--budget", type=int, default=d.budget)
    p.add_argument("--restarts", type=int, default=d.restarts)
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--init", default=None,
                   help="linear[:V] | germ-plain[:H] | germ-snap:PRED[:TOL[:H]] | path:FILE")
    p.add_argument("--step0", type=float, default=None)
    p.add_argument("--min-step", type=float, default=d.min_step)
    p.add_argument("--method", choices=sorted(STRATEGIES), default=d.method,
                   help="compass on the final grid, or multilevel (coarse-to-fine)")


def _load_field(args):
    if args.field:
        return parse_field_expr(FsPath(args.field).read_text()), None
    entry = instantiate(args.zoo, **dict(args.param))
    return entry.field, entry


def _schedule(args):
    return ProbeSchedule(args.eps0, args.ratio, args.count, args.tol, args.stall)


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return 0


def _opt_config(args, field, seed, default_init):
    init = parse_init(args.init) if args.init else default_init
    return OptConfig(n_nodes=args.nodes, budget=args.budget, restarts=args.restarts, seed=seed,
                     init=init, step0=args.step0, min_step=args.min_step,
                     method=args.method, workers=args.workers)


def _check_dim(vec, field, what):
    if len(vec) != field.dim:
        raise UsageError(f"{what} has {len(vec)} components, field has dimension {field.dim}")


class _Outputs:
    """Collects written files so the run report can list every one of them."""

    def __init__(self, out_dir, stem):
        self.dir = FsPath(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stem = stem
        self.files = []

    def path(self, suffix, name=None):
        p = self.dir / (name if name else f"{self.stem}{suffix}")
        self.files.append(str(p))
        return p

    def json(self, obj, suffix=".json", name=None):
        p = self.path(suffix, name)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        return p


# --------------------------------------------------------------------------
# commands; each returns (summary line, result dict or None)

def cmd_probe(args, out, seed):
    field, _ = _load_field(args)
    sched = _schedule(args)
    if (args.at is None) == (args.grid is None):
        raise UsageError("give exactly one of --at or --grid")
    if args.at is not None:
        _check_dim(args.at, field, "--at")
        rep = probe_ray(field, args.at, sched)
        out.json(rep.to_dict())
        return f"{rep.verdict.value} at {args.at}", rep.to_dict()
    if args.res is None:
        raise UsageError("--grid needs --res with per-axis node counts")
    lo_hi = args.grid.split(":")
    if len(lo_hi) != 2:
        raise UsageError("--grid box must read LO:HI with comma vectors")
    lo, hi = _vector(lo_hi[0]), _vector(lo_hi[1])
    res = args.res
    _check_dim(lo, field, "grid corner")
    _check_dim(hi, field, "grid corner")
    rows = probe_grid(field, lo, hi, res, sched, workers=args.workers)
    result = {"grid": [{"point": [float(v) for v in p], "verdict": v.value} for p, v in rows]}
    out.json(result)
    counts = {}
    for _, v in rows:
        counts[v.value] = counts.get(v.value, 0) + 1
    return "grid verdicts " + ", ".join(f"{k}={n}" for k, n in sorted(counts.items())), result


def cmd_germ_direction(args, out, seed):
    field, _ = _load_field(args)
    _check_dim(args.at, field, "--at")
    smin, smax, ns = args.speeds
    cand = fit_germ_direction(field, args.at, args.ndirs, (smin, smax, int(ns)), _schedule(args),
                              allow_equilibrium=args.allow_equilibrium)
    d = cand.to_dict()
    out.json(d)
    if d["found"]:
        return f"extension value {d['value']} (tail residual {d['tail_residual']:.3g})", d
    return f"no extension found (best tail residual {d['best_residual']:.3g})", d


def cmd_integrate(args, out, seed):
    field, _ = _load_field(args)
    _check_dim(args.x0, field, "--x0")
    mode_text = args.mode
    if mode_text == "plain":
        mode = PlainMode()
    elif mode_text.startswith("snap:"):
        body = mode_text[5:]
        pred, sep, tol = body.rpartition(":")
        if not sep:
            raise UsageError("snap mode reads snap:PRED:TOL")
        mode = SnapMode.parse(pred, field.dim, float(tol))
    elif mode_text.startswith("germ:"):
        mode = GermMode(parse_germ(FsPath(mode_text[5:]).read_text()))
    else:
        raise UsageError(f"unknown mode {mode_text!r}")
    res = integrate(field, args.x0, StepConfig(args.h, args.T, mode))
    csv_path = out.path(".csv", args.out)
    write_path_csv(res.path, csv_path)
    d = res.to_dict()
    d["path_file"] = csv_path.name
    out.json(d)
    return f"E = {res.e_total:.6g} over {res.steps} steps" + \
        (" (truncated)" if res.truncated else ""), d


def cmd_minimize(args, out, seed):
    field, _ = _load_field(args)
    _check_dim(args.x0, field, "--x0")
    cfg = _opt_config(args, field, seed, OptConfig().init)
    if args.end is not None:
        _check_dim(args.end, field, "--end")
        res = minimize_two_point(field, args.x0, args.end, args.T, cfg)
    else:
        res = minimize_fixed_start(field, args.x0, args.T, cfg)
    csv_path = out.path(".csv")
    write_path_csv(res.path, csv_path)
    d = res.to_dict(path_file=csv_path.name)
    d["config"] = cfg.to_dict()
    out.json(d)
    return f"E = {res.e_value:.6g} ({res.terminated_by})", d


def cmd_mvalue(args, out, seed):
    field, _ = _load_field(args)
    _check_dim(args.x0, field, "--x0")
    cfg = _opt_config(args, field, seed, OptConfig().init)
    pairs, _ = value_function(field, args.x0, args.rgrid, cfg)
    table = out.path(".csv")
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "m_estimate"])
        for r, m in pairs:
            w.writerow([f"{r:.17g}", f"{m:.17g}"])
    d = {"values": [[r, m] for r, m in pairs], "config": cfg.to_dict(), "table_file": table.name}
    out.json(d)
    return "m estimates " + ", ".join(f"m({r:g}) = {m:.3g}" for r, m in pairs), d


def cmd_verify(args, out, seed):
    field, _ = _load_field(args)
    x = read_path_csv(args.path)
    if x.dim != field.dim:
        raise UsageError("path dimension differs from the field")
    exprs = [s.strip() for s in args.family.split(";")]
    if len(exprs) != field.dim:
        raise UsageError(f"--family needs {field.dim} expressions separated by ';'")
    grid = np.union1d(np.linspace(x.t0, x.t_end, 512), x.t)
    rep = verify_generalized(field, x, family_from_exprs(exprs, grid), args.jlist,
                             args.tol_e, args.tol_sup)
    d = rep.to_dict()
    out.json(d)
    return f"{d['verdict']}" + (f": {rep.failing_clause}" if rep.failing_clause else ""), d


def cmd_sobolev(args, out, seed):
    field, entry = _load_field(args)
    _check_dim(args.x0, field, "--x0")
    spec = args.grad
    if spec == "fd" or spec.startswith("fd:"):
        grad = FiniteDifferenceGradient(float(spec[3:]) if spec.startswith("fd:") else 1e-6)
    elif spec == "analytic":
        if entry is None or "gradient" not in entry.metadata:
            raise UsageError("--grad analytic without a file needs a zoo entry with a gradient")
        grad = AnalyticGradient.parse(entry.metadata["gradient"])
    elif spec.startswith("analytic:"):
        grad = AnalyticGradient.parse(FsPath(spec[9:]).read_text())
    else:
        raise UsageError(f"unknown gradient {spec!r}")
    rep = check_integrability(field, grad, args.x0, args.rho, args.shells, args.angular, seed,
                              workers=args.workers)
    table = out.path(".csv")
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_inner", "partial_integral"])
        for r, v in rep.shells:
            w.writerow([f"{r:.17g}", f"{v:.17g}"])
    d = rep.to_dict()
    d["table_file"] = table.name
    out.json(d)
    return f"{rep.verdict.value}, estimate {rep.estimate:.6g}", d


def cmd_zoo(args, out, seed):
    if args.action == "list":
        rows = list_entries()
        width = max(len(n) for n, _ in rows)
        for name, summary in rows:
            print(f"{name:<{width}}  {summary}")
        d = {"entries": [{"name": n, "summary": s} for n, s in rows]}
        out.json(d)
        return f"{len(rows)} entries", d
    if not args.name:
        raise UsageError("zoo export needs an entry name")
    entry = instantiate(args.name, **dict(args.param))
    text, meta = export_entry(entry)
    out.path("", f"{args.name}.fld").write_text(text + "\n")
    out.path("", f"{args.name}.json").write_text(meta + "\n")
    return f"exported {args.name}", None


# --------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(prog="selfcont",
                                     description="Self-continuity probes and generalized "
                                                 "solutions of discontinuous ODEs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for outputs (default: .)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="worker threads (results do not depend on it)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", parents=[common], help="ray test of self-continuity")
    _add_field_opts(p)
    p.add_argument("--at", type=_vector, metavar="X", help="probe point, e.g. --at=0,0")
    p.add_argument("--grid", metavar="LO:HI", help="box corners, e.g. --grid=-1,-1:1,1")
    p.add_argument("--res", type=_ints, metavar="N,N", help="grid nodes per axis, e.g. 5,5")
    _add_schedule_opts(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("germ-direction", parents=[common], help="search a self-continuous value")
    _add_field_opts(p)
    p.add_argument("--at", type=_vector, required=True, metavar="X")
    p.add_argument("--ndirs", type=int, default=None)
    p.add_argument("--speeds", type=_vector, default=[0.05, 20.0, 24.0],
                   metavar="SMIN,SMAX,N")
    p.add_argument("--allow-equilibrium", action="store_true")
    _add_schedule_opts(p)
    p.set_defaults(func=cmd_germ_direction)

    p = sub.add_parser("integrate", parents=[common], help="germ-step integration")
    _add_field_opts(p)
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--mode", default="plain", help="plain | snap:PRED:TOL | germ:FILE")
    p.add_argument("--out", default=None, metavar="PATH.csv", help="path file name")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("minimize", parents=[common], help="minimize E over polylines")
    _add_field_opts(p)
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--end", type=_vector, default=None, metavar="Z", help="fixed endpoint")
    _add_opt_opts(p)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("mvalue", parents=[common], help="value function on a grid of horizons")
    _add_field_opts(p)
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--rgrid", type=_vector, required=True)
    _add_opt_opts(p)
    p.set_defaults(func=cmd_mvalue)

    p = sub.add_parser("verify", parents=[common], help="generalized-solution surrogate check")
    _add_field_opts(p)
    p.add_argument("--path", required=True, help="candidate path CSV")
    p.add_argument("--family", required=True,
                   help="approximant components in t and j, separated by ';'")
    p.add_argument("--jlist", type=_ints, default=[2, 8, 32, 128])
    p.add_argument("--tol-e", type=float, default=1e-3)
    p.add_argument("--tol-sup", type=float, default=0.05)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sobolev", parents=[common], help="integrability test near a point")
    _add_field_opts(p)
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--shells", type=int, default=33)
    p.add_argument("--angular", type=int, default=128)
    p.add_argument("--grad", default="fd", help="analytic | analytic:FILE | fd[:STEP]")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sobolev)

    p = sub.add_parser("zoo", parents=[common], help="list or export catalog entries")
    p.add_argument("action", choices=["list", "export"])
    p.add_argument("name", nargs="?")
    p.add_argument("--param", type=_kv, action="append", default=[], metavar="K=V")
    p.set_defaults(func=cmd_zoo)
    return parser


def _canonical_inputs(args):
    skip = {"func", "workers", "out_dir"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, tuple):
            v = list(v)
        if k == "param":
            v = sorted([list(kv) for kv in v])
        out[k] = v
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        seed = _seed(args)
        stem = args.command
        out = _Outputs(args.out_dir, stem)
        t0 = time.perf_counter()
        summary, _ = args.func(args, out, seed)
        elapsed = time.perf_counter() - t0
        report_path = out.dir / f"{stem}.run.json"
        report = {"command": args.command, "inputs": _canonical_inputs(args), "seed": seed,
                  "outputs": list(out.files), "timing": elapsed, "version": _version()}
        report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    except UsageError as exc:
        print(f"selfcont: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FieldParseError, ParameterError, UnknownEntryError, OSError) as exc:
        print(f"selfcont: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FieldEvaluationError, ArithmeticError) as exc:
        print(f"selfcont: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"selfcont: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(summary)
    print(f"report: {report_path}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
