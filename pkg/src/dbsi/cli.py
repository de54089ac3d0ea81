"""Command line: ``dbsi run CONFIG``, ``dbsi preset NAME``, ``dbsi report DIR``.

Exit codes: 0 success, 1 configuration error, 2 runtime divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from dbsi.config import apply_overrides, dump_toml, load_config, preset
from dbsi.errors import ConfigError, SimulationError

log = logging.getLogger("dbsi")


def _summary_lines(aggregates: dict, variant: str, last_k: int) -> list[str]:
    from dbsi.metrics import post_convergence_mean

    lines = [f"{'variant':<20} {'post-conv NPM [dB]':>20} {'final |hhat|':>14}"]
    for lab, tr in aggregates.items():
        k = min(last_k, len(tr))
        lines.append(f"{lab:<20} {post_convergence_mean(tr.npm_db(variant), k):>20.3f} "
                     f"{tr.norm_hhat[-1]:>14.5f}")
    return lines


def _execute(cfg, output: str | None) -> int:
    from dbsi.runner import emit, run

    if output:
        cfg.output_dir = output
    result = run(cfg)
    paths = emit(result)
    for line in _summary_lines(result.aggregates, cfg.npm_variant, cfg.post_convergence_frames):
        print(line)
    print(f"wrote {len(paths)} files to {cfg.output_dir}")
    return 0


def cmd_run(args) -> int:
    cfg = apply_overrides(load_config(args.config), args.override)
    return _execute(cfg, args.output)


def cmd_preset(args) -> int:
    cfg = apply_overrides(preset(args.name), args.override)
    if args.write_config:
        Path(args.write_config).write_text(dump_toml(cfg))
        print(f"wrote {args.write_config}")
        return 0
    return _execute(cfg, args.output)


def cmd_report(args) -> int:
    from dbsi.runner import read_trace_csv

    trace_dir = Path(args.trace_dir)
    meta_path = trace_dir / "metadata.json"
    if not meta_path.exists():
        raise ConfigError(f"{trace_dir} has no metadata.json")
    meta = json.loads(meta_path.read_text())
    cfg = meta["config"]
    labels = list(meta["variants"])
    aggregates = {lab: read_trace_csv(trace_dir / f"{lab}.csv", lab) for lab in labels}
    for line in _summary_lines(aggregates, cfg["npm_variant"], cfg["post_convergence_frames"]):
        print(line)
    print()
    print("norm-phase transmit ops per node per frame (actual / nominal):")
    for lab, rep in meta["cost_report"].items():
        actual = ", ".join(f"{v:g}" for v in rep["norm_phase_actual_per_node_per_frame"])
        nominal = ", ".join(str(v) for v in rep["norm_phase_nominal_per_node_per_frame"])
        print(f"  {lab:<18} [{actual}] / [{nominal}]")
    print(f"batch oracle median conventional NPM: "
          f"{meta['batch_oracle']['median_npm_conventional_db']:.2f} dB")
    if args.charts:
        from dbsi.charts import render_scenario_charts
        from dbsi.config import config_from_dict

        render_scenario_charts(aggregates, trace_dir, config_from_dict(cfg))
        print(f"charts written to {trace_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbsi", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a TOML config file")
    r.add_argument("config")
    r.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--output", help="output directory (overrides output_dir)")
    r.set_defaults(fn=cmd_run)

    pr = sub.add_parser("preset", help="run a built-in scenario")
    pr.add_argument("name", choices=["static5", "dynamic3"])
    pr.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE")
    pr.add_argument("--output", help="output directory (overrides output_dir)")
    pr.add_argument("--write-config", metavar="PATH", help="write the preset as TOML and exit")
    pr.set_defaults(fn=cmd_preset)

    rep = sub.add_parser("report", help="summarize an output directory")
    rep.add_argument("trace_dir")
    rep.add_argument("--charts", action="store_true", help="re-render the SVG charts")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
