"""Command line: gen-map, run and sweep."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (
    ConfigError, RunSpec, SweepSpec, batch_report, load_config, parse_axis, rows_for,
    run_batch, run_sweep, write_csv, write_json, write_world,
)

log = logging.getLogger("highway_mapf")

EXIT_OK, EXIT_USAGE, EXIT_ALL_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="highway-mapf", description="Lifelong MAPF with highway heuristics.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-map", help="write a warehouse map and its highway overlay")
    g.add_argument("--blocks", type=int, required=True, help="odd block count per side")
    g.add_argument("--out", required=True, help="map path; the overlay goes to PATH.highway")

    r = sub.add_parser("run", help="run a batch of episodes from a config file")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", help="output directory (default from config)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; repeatable")

    s = sub.add_parser("sweep", help="run the cross product of one or more axes")
    s.add_argument("--config", help="key = value config file for the fixed settings")
    s.add_argument("--axis", action="append", required=True, metavar="KEY=V1,V2,...",
                   help="swept key and its values; repeatable")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="output directory (default from config)")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _spec_from(args) -> RunSpec:
    spec = load_config(args.config) if args.config else RunSpec()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        spec.set(key.strip(), value.strip())
    if args.seed is not None:
        spec.seed = args.seed
    if args.out is not None:
        spec.out = args.out
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return spec


def cmd_gen_map(args) -> int:
    try:
        map_path, overlay = write_world(args.blocks, args.out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {map_path} and {overlay}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = _spec_from(args)
    results = run_batch(spec, args.jobs)
    out = Path(spec.out)
    write_csv(out / "episodes.csv", rows_for(spec, results))
    report = batch_report(spec, results)
    write_json(out / "summary.json", report)
    print(f"{report['episodes']} episodes, {report['fail_count']} failed; results in {out}")
    if report["means"]:
        for k, v in report["means"].items():
            print(f"  {k:22s} {v:.6g}")
    return EXIT_ALL_FAILED if report["means"] is None else EXIT_OK


def cmd_sweep(args) -> int:
    base = _spec_from(args)
    axes = {}
    for text in args.axis:
        key, values = parse_axis(text)
        if key in axes:
            raise ConfigError(f"axis {key} given twice")
        axes[key] = values
    summary = run_sweep(SweepSpec(base, axes), base.out, args.jobs)
    for cell in summary["cells"]:
        name = ", ".join(f"{k}={v}" for k, v in cell["cell"].items())
        means = cell["means"]
        if means is None:
            print(f"{name}: all {cell['episodes']} episodes failed")
            continue
        line = f"{name}: throughput {means['throughput']:.4g}, runtime {means['mean_runtime_s']:.3g}s"
        ratios = cell.get("ratios")
        if ratios:
            line += f", throughput ratio {ratios['throughput']:.3g}"
        print(line)
    if all(cell["means"] is None for cell in summary["cells"]):
        return EXIT_ALL_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"gen-map": cmd_gen_map, "run": cmd_run, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
