"""Command-line interface.

Three verbs:

* ``simulate``       — full configuration-driven run; writes report.json
                       and per-channel artifacts.
* ``analyze-golden`` — re-analyze a bundled reference dataset
                       (table2 | table3 | table4).
* ``reproduce``      — regenerate a figure/table analysis
                       (fig3 | fig4 | fig5 | fig7 | table1 | table2).

Exit codes: 0 success, 1 a tolerance check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from afcsim import reports
from afcsim.config import ConfigError, ExperimentConfig, load_config, reference_calibration_config
from afcsim.datasets import FixtureError


def _parse_channels(text: str | None):
    if text is None:
        return None
    try:
        channels = sorted({int(tok) - 1 for tok in text.split(",") if tok.strip()})
    except ValueError as err:
        raise ConfigError(f"--channels: {err}") from err
    if any(not 0 <= c < 5 for c in channels):
        raise ConfigError("--channels: channel labels run 1..5")
    return channels


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else reference_calibration_config()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "trials", None) is not None:
        cfg = dataclasses.replace(
            cfg, desk_scale=dataclasses.replace(cfg.desk_scale, mc_trials=args.trials)
        )
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    report = reports.write_simulation_report(cfg, out, _parse_channels(args.channels))
    print(f"simulate: report for {len(report['channels'])} channel(s) -> {out/'report.json'}")
    return 0


def cmd_analyze_golden(args) -> int:
    out = _out_dir(args)
    if args.dataset == "table4":
        summary, ok = reports.analyze_table4(out)
    elif args.dataset == "table3":
        summary, ok = reports.analyze_table3(out, mc_trials=args.trials or 100, seed=args.seed or 0)
    else:
        summary, ok = reports.analyze_table2(out)
    print(f"analyze-golden {args.dataset}: {'PASS' if ok else 'FAIL'} -> {out}")
    return 0 if ok else 1


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    if args.figure == "table2":
        summary, ok = reports.analyze_table2(out)
    else:
        cfg = _load(args)
        channels = _parse_channels(args.channels)
        first = (channels or [0])[0]
        if args.figure == "fig3":
            summary, ok = reports.reproduce_fig3(cfg, out, channels)
        elif args.figure == "fig4":
            summary, ok = reports.reproduce_fig4(cfg, out, first)
        elif args.figure == "fig5":
            summary, ok = reports.reproduce_fig5(cfg, out, first)
        elif args.figure == "fig7":
            summary, ok = reports.reproduce_fig7(cfg, out, first)
        else:
            summary, ok = reports.reproduce_table1(cfg, out, channels)
    print(f"reproduce {args.figure}: {'PASS' if ok else 'FAIL'} -> {out}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afcsim",
        description=(
            "Simulate and analyze a five-channel AFC photonic memory storing "
            "time-bin entangled photon pairs."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the full simulated experiment")
    sim.add_argument("--config", help="JSON config path (default: bundled calibrated config)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, help="override the config seed")
    sim.add_argument("--channels", help="comma-separated channel labels, e.g. 1,3")
    sim.add_argument("--trials", type=int, help="Monte-Carlo trials for error bars")
    sim.set_defaults(func=cmd_simulate)

    gold = sub.add_parser("analyze-golden", help="re-analyze a bundled reference dataset")
    gold.add_argument("dataset", choices=("table2", "table3", "table4"))
    gold.add_argument("--out", required=True)
    gold.add_argument("--seed", type=int)
    gold.add_argument("--trials", type=int)
    gold.set_defaults(func=cmd_analyze_golden)

    rep = sub.add_parser("reproduce", help="regenerate a figure/table analysis")
    rep.add_argument("figure", choices=("fig3", "fig4", "fig5", "fig7", "table1", "table2"))
    rep.add_argument("--config")
    rep.add_argument("--out", required=True)
    rep.add_argument("--seed", type=int)
    rep.add_argument("--channels")
    rep.add_argument("--trials", type=int)
    rep.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FixtureError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
