"""Command-line experiment runner: otfs-isac-sim run --config scenario.json --out dir."""

from __future__ import annotations

import argparse
import sys

from .harness import Scenario, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfs-isac-sim",
        description="Run link-level OTFS ISAC experiments from a scenario file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--trials", type=int, default=None, help="override the trial count")
    p_run.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            scenario = Scenario.from_json(args.config)
            if args.seed is not None:
                scenario.seed = args.seed
            if args.trials is not None:
                scenario.trials = args.trials
            table = run(scenario, args.out, threads=args.threads)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for row in table.rows:
            print(f"{row['metric']}: {row['value']}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
