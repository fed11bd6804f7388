"""Batch command line: ``skinstretch <subcommand> [--config PATH] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ENV_VAR, ConfigError, load_config, with_overrides

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=None,
        help=f"INI config path, or 'default' (falls back to ${ENV_VAR}, then the built-in defaults)",
    )
    common.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output root; runs go to <out>/<experiment>/<timestamp>/")

    parser = argparse.ArgumentParser(prog="skinstretch", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, text in (
        ("calibrate", "collect calibration data, fit the cubic model, report static and dynamic errors"),
        ("characterize", "hysteresis, creep and torsion of the calibrated sensor"),
        ("step", "closed-loop step protocol"),
        ("chirp", "closed-loop chirp and Bode estimate per axis"),
    ):
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name != "calibrate":
            p.add_argument("--model", default=None, help="calibration model file (default: calibrate in-process)")
    rep = sub.add_parser("report", help="render every CSV in a directory to SVG")
    rep.add_argument("directory")
    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _report(directory: str) -> int:
    from .plots import render_directory

    root = Path(directory)
    if not root.is_dir():
        print(f"error [report]: not a directory: {directory}", file=sys.stderr)
        return EXIT_FAIL
    written = render_directory(root)
    for path in written:
        print(path)
    print(f"rendered {len(written)} plot(s)")
    return EXIT_OK


def _selftest() -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        print(f"error [selftest]: {len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_USAGE if exc.code else EXIT_OK

    if args.command == "report":
        return _report(args.directory)
    if args.command == "selftest":
        return _selftest()

    from dataclasses import replace

    from .experiments import StageError, execute

    try:
        cfg = with_overrides(load_config(args.config), seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "model", None):
        cfg = replace(cfg, model_path=args.model)

    try:
        _, run_dir, manifest = execute(args.command, cfg)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wrote {run_dir}")
    for key, value in manifest.summary.items():
        print(f"  {key}: {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
