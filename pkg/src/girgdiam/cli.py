"""Command line: girgdiam {sample,scaling,verify,towers,lowerbound,route}.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 a verified invariant failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .errors import GirgError, InvalidInputError
from .experiments import (BUILD_ID, ExperimentConfig, connected_pairs, csv_text, lowerbound_row, route_rows,
                          run_scaling, run_trials, tower_rows, verify_all)
from .router import MAX_HOP
from .sampler import sample_graph, write_graph
from .tessellation import build_tessellation

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _model_flags(p, many: bool):
    nargs = "+" if many else None
    p.add_argument("--d", type=int, nargs=nargs, default=[2] if many else 2)
    p.add_argument("--tau", type=float, nargs=nargs, default=[2.5] if many else 2.5)
    p.add_argument("--lambda", dest="lam", type=float, nargs=nargs, default=[1.0] if many else 1.0)
    p.add_argument("--n", type=int, nargs=nargs, default=[4096] if many else 4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", dest="edge_prob", type=float, default=1.0, help="edge retention probability")
    p.add_argument("--d0-target", type=float, default=0.25)


def _run_flags(p):
    p.add_argument("--seeds", type=int, default=1, help="trials per point; seeds are seed + trial index")
    p.add_argument("-o", "--output", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--json", default=None, help="summary JSON path")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="girgdiam", description="Threshold GIRG diameter experiments")
    ap.add_argument("--version", action="version", version=f"girgdiam {BUILD_ID}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("sample", help="sample one graph and write it in text form")
    _model_flags(s, many=False)
    s.add_argument("-o", "--output", required=True)

    s = sub.add_parser("scaling", help="largest-component diameter against log2 n")
    _model_flags(s, many=True)
    _run_flags(s)

    s = sub.add_parser("verify", help="run the invariant suites")
    _model_flags(s, many=True)
    s.add_argument("--quick", action="store_true", help="smaller suites")
    s.add_argument("--json", default=None)

    s = sub.add_parser("towers", help="tower activity per cutoff level")
    _model_flags(s, many=True)
    _run_flags(s)
    s.add_argument("--cutoff", dest="cutoffs", type=int, nargs="+", default=[])
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--c3", type=float, default=4.0)

    s = sub.add_parser("lowerbound", help="longest component made only of low-weight vertices")
    _model_flags(s, many=True)
    _run_flags(s)
    s.add_argument("--weight-cap", type=float, default=None, help="defaults to 3^d")

    s = sub.add_parser("route", help="certify confined walks for random connected pairs")
    _model_flags(s, many=True)
    _run_flags(s)
    s.add_argument("--pairs", type=int, default=100)
    return ap


def _config(args) -> ExperimentConfig:
    def lst(x):
        return list(x) if isinstance(x, (list, tuple)) else [x]
    cfg = ExperimentConfig(
        command=args.command, n=lst(args.n), tau=lst(args.tau), lam=lst(args.lam), d=lst(args.d),
        seed=args.seed, seeds=getattr(args, "seeds", 1), edge_prob=args.edge_prob,
        d0_target=args.d0_target, cutoffs=list(getattr(args, "cutoffs", [])),
        eps=getattr(args, "eps", 0.1), c3=getattr(args, "c3", 4.0), pairs=getattr(args, "pairs", 100),
        weight_cap=getattr(args, "weight_cap", None), output=getattr(args, "output", None))
    for n in cfg.n:
        if n < 1:
            raise InvalidInputError(f"n must be positive, got {n}")
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _emit_json(obj, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if path is None:
        sys.stderr.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def cmd_sample(args) -> int:
    cfg = _config(args)
    p = cfg.params(cfg.d[0], cfg.tau[0], cfg.lam[0], cfg.n[0], cfg.seed)
    g = sample_graph(p)
    with open(args.output, "w", newline="\n") as fh:
        write_graph(g, fh)
    print(f"vertices {g.num_vertices} edges {g.num_edges}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    cfg = _config(args)
    rows, fit = run_scaling(cfg)
    header = ["n", "seed", "largest_comp_size", "diameter", "diameter_over_log2n", "ok"]
    _emit(csv_text(cfg, header, rows), cfg.output)
    summary = fit.as_dict()
    summary["max_diameter_over_log2n"] = max((r[4] for r in rows if r[5]), default=float("nan"))
    _emit_json(summary, args.json)
    if fit.flat:
        print("warning: diameters do not vary with n, slope is flat", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    results = verify_all(cfg, quick=args.quick)
    failed = [r.name for r in results if not r.passed]
    for r in results:
        print(r.line())
    for r in results:
        if r.failures and not r.hard:
            print(f"warning: {r.name} ran in counting mode", file=sys.stderr)
    if args.json:
        _emit_json({"build": BUILD_ID, "suites": [
            {"name": r.name, "instances": r.instances, "failures": r.failures, "hard": r.hard,
             "passed": r.passed, "note": r.note} for r in results]}, args.json)
    if failed:
        print("failed suites: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_towers(args) -> int:
    cfg = _config(args)
    out = run_trials(lambda p: tower_rows(cfg, p), cfg.points())
    rows = [r for rr, _ in out for r in rr]
    header = ["seed", "n", "level", "tower_index", "cond1", "cond2", "cond3", "active"]
    _emit(csv_text(cfg, header, rows), cfg.output)
    per_level = {}
    for (_, rates) in out:
        for lvl, rate in rates.items():
            per_level.setdefault(lvl, []).append(rate)
    _emit_json({"activity_rate": {str(k): float(np.mean(v)) for k, v in sorted(per_level.items())}}, args.json)
    return EXIT_OK


def cmd_lowerbound(args) -> int:
    cfg = _config(args)
    rows = run_trials(lambda p: lowerbound_row(cfg, p), cfg.points())
    header = ["n", "seed", "component", "diameter", "diameter_over_log2n"]
    _emit(csv_text(cfg, header, rows), cfg.output)
    best = {}
    for n, _, _, diam, _ in rows:
        best.setdefault(n, []).append(diam)
    _emit_json({"max_diameter": {str(n): max(v) for n, v in sorted(best.items())},
                "mean_max_diameter": {str(n): float(np.mean(v)) for n, v in sorted(best.items())}}, args.json)
    return EXIT_OK


def cmd_route(args) -> int:
    cfg = _config(args)

    def trial(point):
        d, tau, lam, n, seed = point
        p = cfg.params(d, tau, lam, n, seed)
        g = sample_graph(p)
        tess = build_tessellation(p)
        pairs = connected_pairs(g, cfg.pairs, np.random.default_rng(seed))
        return [(n, seed) + r for r in route_rows(tess, g, pairs)]

    rows = [r for rr in run_trials(trial, cfg.points()) for r in rr]
    header = ["n", "seed", "u", "v", "dist", "walk_length", "max_hop", "ws_size", "constant", "excursions",
              "problems"]
    _emit(csv_text(cfg, header, rows), cfg.output)
    worst_hop = max((r[6] for r in rows), default=0)
    summary = {"pairs": len(rows), "max_hop": worst_hop,
               "max_constant": max((r[8] for r in rows), default=0.0),
               "invalid": sum(1 for r in rows if r[10])}
    _emit_json(summary, args.json)
    if summary["invalid"] or worst_hop > MAX_HOP:
        return EXIT_INVARIANT
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "scaling": cmd_scaling, "verify": cmd_verify, "towers": cmd_towers,
            "lowerbound": cmd_lowerbound, "route": cmd_route}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            ap.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"girgdiam: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, ValueError) as e:
        print(f"girgdiam: invalid input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"girgdiam: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except GirgError as e:
        print(f"girgdiam: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
