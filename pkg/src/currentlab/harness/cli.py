"""Command line interface: one subcommand per experiment kind, plus replay.

    currentlab <kind> [--config cfg.toml] [--seed N] [--out DIR] [--budget S]
    currentlab replay <result-dir>
    currentlab --list-experiments
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .experiments import KINDS, ConfigError, rerun_for_replay, run_experiment
from .records import replay as replay_records

DEFAULT_OUT_ENV = "CURRENTLAB_OUT"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})")


def _list_experiments() -> str:
    lines = ["available experiment kinds:"]
    for kind in sorted(KINDS):
        defaults = KINDS[kind]["defaults"]
        keys = ", ".join(sorted(defaults))
        lines.append(f"  {kind}")
        lines.append(f"      fields: {keys}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="currentlab",
        description="Random-current verification suites and Monte Carlo scans",
    )
    parser.add_argument("--list-experiments", action="store_true",
                        help="print experiment kinds and their config fields")
    sub = parser.add_subparsers(dest="command")
    for kind in sorted(KINDS):
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--budget", type=float,
                       help="wall-clock budget in seconds (recorded)")
    rp = sub.add_parser("replay", help="re-run a result directory and compare")
    rp.add_argument("result_dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_experiments:
        print(_list_experiments())
        return 0
    if args.command is None:
        parser.print_help()
        return 2

    if args.command == "replay":
        ok, message = replay_records(args.result_dir, rerun_for_replay)
        print(("replay ok: " if ok else "replay MISMATCH: ") + message)
        return 0 if ok else 1

    kind = args.command
    try:
        overrides = _load_config(args.config)
        if args.seed is not None:
            if "seeds" in KINDS[kind]["defaults"]:
                overrides["seeds"] = [args.seed]
            else:
                overrides["seed"] = args.seed
        if args.budget is not None:
            overrides["budget"] = args.budget
        out_dir = args.out or overrides.pop("out", None) \
            or os.environ.get(DEFAULT_OUT_ENV) or f"results/{kind}"
        status, summary = run_experiment(kind, overrides, Path(out_dir))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced to the shell
        print(f"experiment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    verdict = "PASS" if status == 0 else "FAIL"
    print(f"{kind}: {verdict}")
    for key, value in summary.items():
        print(f"  {key}: {value}")
    print(f"  records: {Path(out_dir) / 'records.csv'}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
