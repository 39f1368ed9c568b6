"""Command-line front end.

    photonflow run SCENARIO [--out DIR]
    photonflow scan SCENARIO --axis SECTION.KEY --values v1,v2,... [--out DIR] [--jobs N]
    photonflow validate SCENARIO

Exit codes: 0 success, 2 parse or configuration error, 3 runtime
invariant failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigurationError, InvalidInput, InvariantViolation, ScenarioError
from .scenario import parse_scenario, run_scenario, scan_scenario, summary_fields


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonflow",
        description="Config-driven simulator of irreversible photon transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("scenario", help="path to a scenario file")
    p_run.add_argument("--out", default=None, help="output directory (default: [output] dir)")

    p_scan = sub.add_parser("scan", help="run a scenario once per axis value")
    p_scan.add_argument("scenario", help="path to a scenario template")
    p_scan.add_argument("--axis", required=True, help="parameter to vary, as section.key")
    p_scan.add_argument("--values", required=True, help="comma-separated numeric values")
    p_scan.add_argument("--out", default=None, help="output directory")
    p_scan.add_argument("--jobs", type=int, default=1, help="parallel scan workers")

    p_val = sub.add_parser("validate", help="parse and validate a scenario file")
    p_val.add_argument("scenario", help="path to a scenario file")
    return parser


def _outdir(sc, override, suffix=""):
    base = override if override is not None else sc.get("output", "dir", "out")
    return Path(base) / (sc.name + suffix)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
        if args.command == "validate":
            print(f"OK: {sc.name} ({sc.kind})")
            return 0
        if args.command == "run":
            outdir = _outdir(sc, args.out)
            outcome = run_scenario(sc, outdir)
            for key in summary_fields(sc.kind):
                print(f"{key} = {outcome.results[key]:.10g}")
            print(f"outputs written to {outdir}")
            return 0
        # scan
        values = [v for v in args.values.split(",") if v.strip() != ""]
        outdir = _outdir(sc, args.out, suffix="_scan")
        scan_scenario(sc, args.axis, values, outdir, jobs=args.jobs)
        print(f"scan summary written to {outdir / 'scan_summary.csv'}")
        return 0
    except (ScenarioError, ConfigurationError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
