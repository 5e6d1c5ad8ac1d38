"""Command line entry point: ``martcomp run|batch|report``.

Exit codes: 0 confirmed or cleanly inconclusive, 1 contradicted, 2 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .compare import ComparisonReport, parse_number, emit_report, exit_code, load_scenario, report_text, run_scenario
from .errors import MartcompError


SCENARIO_SUFFIXES = (".yaml", ".yml", ".json")


def _overrides(args) -> dict:
    out: dict = {"grids": {}, "mc": {}, "tolerances": {}}
    if args.seed is not None:
        out["mc"]["seed"] = args.seed
    if args.paths is not None:
        out["mc"]["n_paths"] = args.paths
    if args.steps is not None:
        out["mc"]["n_steps"] = args.steps
    if args.grid:
        parts = [p for p in args.grid.split(",") if p.strip()]
        if len(parts) not in (2, 3):
            raise MartcompError("--grid takes TIME_STEP,SPACE_STEP[,HALF_WIDTH]")
        keys = ("time_step", "space_step", "half_width")
        out["grids"].update({k: parse_number(v) for k, v in zip(keys, parts)})
    if args.tolerance_scale is not None:
        out["tolerances"]["scale"] = args.tolerance_scale
    return out


def _run_one(path: Path, args, out: Path) -> int:
    sc = load_scenario(path, _overrides(args))
    rep = run_scenario(sc)
    fmt = args.format
    target = out if fmt == "csv_bundle" else out.with_suffix(".json" if fmt == "json" else ".txt")
    emit_report(rep, fmt, target)
    if fmt != "json":
        emit_report(rep, "json", out.with_suffix(".json") if fmt == "text" else out / "report.json")
    code = exit_code(rep)
    print(f"{sc.name}: {rep.conclusion}" + (f" (error in {rep.error['stage']})" if rep.error else ""))
    return code


def cmd_run(args) -> int:
    path = Path(args.scenario)
    out = Path(args.out) if args.out else Path(path.stem)
    code = _run_one(path, args, out)
    return code


def cmd_batch(args) -> int:
    root = Path(args.directory)
    files = sorted(p for p in root.iterdir() if p.suffix in SCENARIO_SUFFIXES)
    if not files:
        raise MartcompError(f"no scenario files in {root}")
    out_dir = Path(args.out) if args.out else Path("reports")
    out_dir.mkdir(parents=True, exist_ok=True)
    codes = []
    for p in files:
        try:
            codes.append(_run_one(p, args, out_dir / p.stem))
        except MartcompError as exc:
            print(f"{p.name}: error: {exc}", file=sys.stderr)
            codes.append(2)
    return 2 if 2 in codes else (1 if 1 in codes else 0)


def cmd_report(args) -> int:
    data = json.loads(Path(args.result).read_text())
    rep = ComparisonReport.from_dict(data)
    if args.format == "csv_bundle":
        raise MartcompError("csv bundles need a live run: use `run --format csv_bundle`")
    if args.out:
        emit_report(rep, args.format, Path(args.out))
    else:
        sys.stdout.write(rep.to_json() if args.format == "json" else report_text(rep))
    return exit_code(rep)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="martcomp", description="Compare expectations of two semimartingales.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int, help="Monte Carlo paths per model")
        p.add_argument("--steps", type=int, help="Euler steps per path")
        p.add_argument("--grid", help="TIME_STEP,SPACE_STEP[,HALF_WIDTH], fractions allowed (1/256)")
        p.add_argument("--out", help="output file stem (run) or directory (batch)")
        p.add_argument("--tolerance-scale", type=float, help="multiplier for every ordering tolerance")
        p.add_argument("--format", choices=("json", "text", "csv_bundle"), default="json")

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("batch", help="run every scenario file in a directory")
    p.add_argument("directory")
    common(p)
    p.set_defaults(func=cmd_batch)
    p = sub.add_parser("report", help="re-emit a stored JSON report")
    p.add_argument("result")
    p.add_argument("--format", choices=("json", "text", "csv_bundle"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (MartcompError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
