"""Command-line entry point: ``inr-forge <task|sweep|verify-theory|summarize>``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics, tasks, trilogy
from .errors import DivergenceError, InrError


def _parse_values(text):
    if not text.strip():
        return []
    return [json.loads(v) for v in text.split(",")]


def _common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dot-path config key (repeatable)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="training and init seed")
    p.add_argument("--method", choices=tasks.METHODS)
    p.add_argument("--ablation", choices=tasks.ABLATIONS)
    p.add_argument("--iterations", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="inr-forge", description="Implicit neural representation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for task in tasks.TASKS:
        _common(sub.add_parser(task, help=f"run the {task} task"))
    sw = sub.add_parser("sweep", help="run one task over a list of parameter values")
    _common(sw)
    sw.add_argument("--task", choices=tasks.TASKS)
    sw.add_argument("--axis", required=True, help="parameter name, e.g. s0, sigma, projections")
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 1,5,10,20")
    sw.add_argument("--workers", type=int, help="parallel processes (default: INR_FORGE_THREADS or 1)")
    vt = sub.add_parser("verify-theory", help="check the series identity and its coefficient bounds")
    vt.add_argument("--order-cap", type=int, default=30)
    vt.add_argument("--inner-cap", type=int, default=40)
    vt.add_argument("--grid", type=int, default=1001)
    vt.add_argument("--out", help="directory for theory.json")
    sm = sub.add_parser("summarize", help="pivot metrics.jsonl files into a table")
    sm.add_argument("paths", nargs="+", help="metrics.jsonl files or run directories (searched recursively)")
    return parser


def _resolve(args, task):
    raw = tasks.load_config_file(args.config) if args.config else {}
    if task is not None:
        raw["task"] = task
    return tasks.resolve_config(
        raw, args.set, seed=args.seed, output_dir=args.out,
        method=args.method, ablation=args.ablation, iterations=args.iterations,
    )


def _cmd_task(args):
    cfg = _resolve(args, args.command)
    report = tasks.run_task(cfg)
    print(json.dumps({"output_dir": cfg.output_dir, "metrics": {k: tasks._json_float(v) for k, v in report.metrics.items()},
                      "wall_time": round(report.wall_time, 3)}, sort_keys=True))
    return 0


def _cmd_sweep(args):
    cfg = _resolve(args, args.task)
    values = _parse_values(args.values)
    reports = tasks.sweep(cfg, args.axis, values, args.workers)
    print(tasks.sweep_table(reports, args.axis))
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    summary = [{"value": tasks._get_path(r.config, tasks.AXIS_ALIASES.get(args.axis, args.axis)),
                "output_dir": r.config["output_dir"],
                "metrics": {k: tasks._json_float(v) for k, v in r.metrics.items()}} for r in reports]
    (Path(cfg.output_dir) / "sweep.json").write_text(json.dumps(summary, indent=2))
    return 0


def _cmd_verify(args):
    result = trilogy.verify(args.order_cap, args.inner_cap, args.grid)
    text = json.dumps(result, indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "theory.json").write_text(text)
    return 1 if result["bound_violations"] else 0


def _cmd_summarize(args):
    reports = []
    for p in map(Path, args.paths):
        files = sorted(p.rglob("metrics.jsonl")) if p.is_dir() else [p]
        for f in files:
            reports.extend(metrics.read_reports(f))
    print(metrics.pivot_table(reports))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"sweep": _cmd_sweep, "verify-theory": _cmd_verify, "summarize": _cmd_summarize}.get(args.command, _cmd_task)
    try:
        return handler(args)
    except DivergenceError as exc:
        print(f"inr-forge: diverged: {exc}", file=sys.stderr)
        return exc.exit_code
    except InrError as exc:
        print(f"inr-forge: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"inr-forge: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
