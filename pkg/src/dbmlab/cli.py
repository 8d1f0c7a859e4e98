"""``dbm-lab <kind> --config <path> [--seed <u64>] [--out <dir>] [--plots]``.

Exit status: 0 when every configured check passes, 1 on a threshold
failure, 2 on any error.
"""

from __future__ import annotations

import argparse
import sys

from .config import KINDS, load_config
from .errors import DBMLabError

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbm-lab", description="Run a deformed-GOE / DBM experiment.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="flat YAML config file")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_ERROR
    from .runner import run

    try:
        cfg = load_config(args.config, args.kind)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        result = run(cfg, plots=args.plots)
    except DBMLabError as exc:
        print(f"dbm-lab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"dbm-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, check in sorted(result.report.checks.items()):
        status = "PASS" if check["pass"] else "FAIL"
        print(f"{status} {name}: value={check['value']} threshold={check['threshold']}")
    print(f"report: {result.out_dir / 'report.json'}")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
