"""Command line entry point.

Subcommands:
  run     simulate one config, optionally writing the trace
  sweep   execute an experiment plan and write the results CSV
  audit   check a recorded trace for window connectivity
  bounds  evaluate one closed-form bound with explicit inputs
  report  fit scaling models to a sweep CSV

Exit codes: 0 success; 1 domain failure (audit violation, unsolved run under
--require-solved, motion or geometry breach, invalid sweep cell); 2 usage or
configuration error. Diagnostics go to standard error, data to standard
output or files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Any

from .bounds import bound_report
from .connectivity import audit_alpha_beta
from .core import (
    GeometryError,
    MotionError,
    ParamError,
    ScheduleError,
    SimConfig,
    read_trace,
    write_trace,
)
from .engine import run as run_engine
from .experiments import (
    MODELS,
    ExperimentPlan,
    cells_from_rows,
    fit_scaling,
    load_rows_csv,
    run_sweep,
)


def _load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParamError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParamError(f"{path} is not valid JSON: {exc}") from exc


def _parse_params(text: str) -> dict[str, Any]:
    """Comma-separated name=value pairs; numbers become int or float."""
    out: dict[str, Any] = {}
    if not text:
        return out
    for piece in text.split(","):
        if "=" not in piece:
            raise ParamError(f"--params expects name=value pairs, got {piece!r}")
        name, raw = piece.split("=", 1)
        name = name.strip()
        raw = raw.strip()
        if not name:
            raise ParamError(f"--params pair {piece!r} has no name")
        value: Any
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        out[name] = value
    return out


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = SimConfig.from_json(_load_json(args.config))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_engine(cfg)
    if args.out:
        write_trace(result.trace, args.out)
        if args.verbose:
            print(f"trace written to {args.out}", file=sys.stderr)
    print(json.dumps(result.summary(), sort_keys=True))
    if not result.audit.ok:
        print(
            f"audit violation at slot {result.audit.first_violation_slot}",
            file=sys.stderr,
        )
        return 1
    if args.require_solved and not result.solved:
        print("run did not solve within the slot budget", file=sys.stderr)
        return 1
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    plan = ExperimentPlan.from_json(_load_json(args.plan))
    if args.out is None and plan.out is None:
        raise ParamError("sweep needs an output path (--out or the plan's own)")
    outcome = run_sweep(plan, out=args.out, threads=args.threads)
    print(json.dumps({"cells": [c.to_json() for c in outcome.cells]}, sort_keys=True))
    invalid = [c for c in outcome.cells if not c.valid]
    if invalid:
        for cell in invalid:
            print(f"invalid cell (audit failures): {cell.params}", file=sys.stderr)
        return 1
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    trace = read_trace(args.trace)
    report = audit_alpha_beta(trace, args.alpha, args.beta)
    print(json.dumps(report.to_json(), sort_keys=True))
    if not report.ok:
        print(
            f"audit violation at slot {report.first_violation_slot}",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    report = bound_report(args.kind, **_parse_params(args.params))
    print(json.dumps(report.to_json(), sort_keys=True))
    if not report.preconditions_ok:
        for reason in report.violated:
            print(f"precondition failed: {reason}", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = load_rows_csv(args.infile)
    cells = cells_from_rows(rows)
    fits: dict[str, Any] = {}
    if args.model is not None:
        coefficient, residual = fit_scaling(cells, args.model)
        fits[args.model] = {"coefficient": coefficient, "residual": residual}
    else:
        for name in sorted(MODELS):
            try:
                coefficient, residual = fit_scaling(cells, name)
                fits[name] = {"coefficient": coefficient, "residual": residual}
            except ParamError as exc:
                fits[name] = {"error": str(exc)}
    print(
        json.dumps(
            {"cells": [c.to_json() for c in cells], "fits": fits},
            sort_keys=True,
        )
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manetsim",
        description="Opportunistic dissemination simulator with adversarial mobility",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one configured run")
    p_run.add_argument("--config", required=True, help="run config JSON path")
    p_run.add_argument("--out", help="write the trace as JSON lines")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument(
        "--require-solved",
        action="store_true",
        help="exit 1 if the run does not solve within its budget",
    )
    p_run.add_argument("-v", "--verbose", action="store_true")
    p_run.set_defaults(handler=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment plan")
    p_sweep.add_argument("--plan", required=True, help="experiment plan JSON path")
    p_sweep.add_argument("--out", help="results CSV path (overrides the plan's)")
    p_sweep.add_argument("--threads", type=int, help="worker cap (default TOOL_THREADS or machine)")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_audit = sub.add_parser("audit", help="audit a recorded trace")
    p_audit.add_argument("--trace", required=True, help="trace JSON-lines path")
    p_audit.add_argument("--alpha", required=True, type=int)
    p_audit.add_argument("--beta", required=True, type=int)
    p_audit.set_defaults(handler=_cmd_audit)

    p_bounds = sub.add_parser("bounds", help="evaluate one closed-form bound")
    p_bounds.add_argument("--kind", required=True, help="bound name, e.g. ub_budget")
    p_bounds.add_argument("--params", default="", help="comma-separated name=value inputs")
    p_bounds.set_defaults(handler=_cmd_bounds)

    p_report = sub.add_parser("report", help="fit scaling models to a sweep CSV")
    p_report.add_argument("--in", dest="infile", required=True, help="sweep CSV path")
    p_report.add_argument("--model", choices=sorted(MODELS), help="fit only this model")
    p_report.set_defaults(handler=_cmd_report)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.handler(args)
    except (ParamError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MotionError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
