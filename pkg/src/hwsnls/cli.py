"""Command line entry point: ``hwsnls <subcommand> --config FILE`` and ``hwsnls plot RUN_DIR``.

Exit status 0 means the run met its contract, 2 that it ran (or refused
to run) without meeting it, and 1 a usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import SUBCOMMANDS, ConfigError, parse_config
from .plotting import PlotDataError, emit_plot_data
from .runs import EXIT_USAGE, run


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hwsnls", description="Half-wave and semirelativistic NLS experiments.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = subs.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, type=Path, help="JSON configuration file")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a dotted config key; VALUE is parsed as JSON (repeatable)")
        sp.add_argument("--output-root", type=Path, default=None,
                        help="directory for run folders (default: config output_dir, "
                             "$HWSNLS_OUTPUT_ROOT, then ./runs)")
        sp.add_argument("--no-plots", action="store_true", help="skip figures and .dat files")
    pp = subs.add_parser("plot", help="write figures and .dat files for an existing run directory")
    pp.add_argument("run_dir", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        try:
            paths = emit_plot_data(args.run_dir)
        except PlotDataError as exc:
            print(f"hwsnls plot: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for p in paths:
            print(p)
        return 0
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"hwsnls: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(text, args.command, args.override)
    except ConfigError as exc:
        print(f"hwsnls {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, run_dir = run(cfg, args.output_root, plots=not args.no_plots)
    report = json.loads((run_dir / "report.json").read_text())
    line = "contract satisfied" if code == 0 else f"contract not met: {report.get('reason', '')}"
    print(f"{run_dir}: {line}")
    return code


if __name__ == "__main__":
    sys.exit(main())
