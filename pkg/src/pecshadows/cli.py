"""Command-line front end.

Exit status: 0 on success, 1 when a check fails, 2 on invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__, harness, verify
from .config import read_config
from .errors import ShadowsError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config(args):
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _table_csv(cfg, kind, columns, dict_rows) -> str:
    rows = [[harness._fmt(r[c]) for c in columns] for r in dict_rows]
    return harness.write_csv(harness.header_lines(cfg, kind), columns, rows)


def cmd_verify(args) -> int:
    report = verify.run(args.level, seed=args.seed or 0)
    if args.format == "json":
        _emit(_json({"version": __version__, "level": args.level, **report.as_dict()}), args.out)
    else:
        lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name:28s} dev={r.deviation:.3e} "
                 f"tol={r.tolerance:.1e} {r.seconds:.2f}s {r.note}".rstrip()
                 for r in report.results]
        verdict = "all checks passed" if report.passed else "failed: " + ", ".join(report.failed)
        _emit("\n".join(lines + [verdict]) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_moments(args) -> int:
    cfg = _config(args)
    if args.n is not None:
        cfg.moments = {**cfg.moments, "n": args.n}
    _emit(_json(harness.moments_doc(cfg)), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _config(args)
    if args.format == "json":
        rows = [dict(zip(harness.SAMPLE_COLUMNS, r)) for r in harness.sample_rows(cfg)]
        _emit(_json(harness.envelope(cfg, "sample", {"rows": rows})), args.out)
    else:
        _emit(harness.sample_csv(cfg), args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    if args.format == "json":
        _emit(_json(harness.pipeline_json(cfg)), args.out)
    else:
        _emit(harness.pipeline_csv(cfg), args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config(args)
    eta = args.eta if args.eta == "auto" else float(args.eta)
    rows = harness.plan_table(cfg, args.B, args.eps, eta, args.compare)
    if args.format == "json":
        _emit(_json(harness.envelope(cfg, "plan", {"B": args.B, "eps": args.eps,
                                                   "eta": args.eta, "plans": rows})), args.out)
    else:
        _emit(_table_csv(cfg, "plan", harness.PLAN_COLUMNS, rows), args.out)
    return EXIT_OK


def cmd_delta_curve(args) -> int:
    cfg = _config(args)
    spec = dict(cfg.delta_curve)
    if args.etas:
        spec["etas"] = args.etas
    if args.n_rule:
        spec["n_rule"] = args.n_rule
    if args.n is not None:
        spec["n"] = args.n
    cfg.delta_curve = spec
    if args.format == "json":
        _emit(_json(harness.envelope(cfg, "delta-curve", {"rows": harness.delta_rows(cfg)})), args.out)
    else:
        _emit(harness.delta_csv(cfg), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = harness.bench()
    if args.format == "json":
        _emit(_json({"version": __version__, "timings": rows}), args.out)
    else:
        _emit("".join(f"{r['name']},{r['seconds']:.4f}\n" for r in rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="pecshadows", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the oracle checks")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.set_defaults(func=cmd_verify, format="text")

    p = sub.add_parser("moments", parents=[common], help="exact moments of the joint measurement")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("sample", parents=[common], help="sample measurement outcomes")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pipeline", parents=[common], help="repeat the compound estimator")
    p.add_argument("--repetitions", type=int)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("plan", parents=[common], help="choose k, n, b")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eta", required=True, help="principal deviation or 'auto'")
    p.add_argument("--compare", action="store_true", help="also show both baselines")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("delta-curve", parents=[common], help="Delta(eta) table")
    p.add_argument("--etas", type=float, nargs="+")
    p.add_argument("--n-rule", choices=("fixed", "inverse"))
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_delta_curve)

    p = sub.add_parser("bench", parents=[common], help="time the heavier kernels")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ShadowsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
