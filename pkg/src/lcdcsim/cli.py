"""Command line entry point: ``lcdc run`` and ``lcdc power-report``.

Exit codes: 0 success, 2 invalid config or arguments, 3 runtime failure,
4 replay mismatch under ``--verify-replay``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import power
from .config import MODES, ConfigError, ScenarioConfig, load_config, scaled, to_ini
from .topology import SCALES
from .units import format_duration, parse_duration

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_REPLAY = 4

log = logging.getLogger("lcdcsim")


def effective_config(args) -> ScenarioConfig:
    """Scale preset, then config file, then command-line overrides."""
    base = scaled(args.scale) if args.scale else ScenarioConfig()
    config = load_config(args.config, base) if args.config else base
    run = {}
    if args.mode is not None:
        run["mode"] = args.mode
    if args.seed is not None:
        run["seed"] = args.seed
    if args.duration is not None:
        try:
            run["duration"] = parse_duration(args.duration)
        except ValueError as exc:
            raise ConfigError(f"--duration: {exc}") from None
    if run:
        config = config.replace("run", **run)
    if args.profile is not None:
        config = config.replace("workload", profile=args.profile)
    if args.load is not None:
        config = config.replace("workload", load=args.load)
    config.validate()
    return config


def write_outputs(out: Path, config: ScenarioConfig, result) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective.ini").write_text(to_ini(config))
    summary = {
        "scenario": {
            "profile": config.workload.profile,
            "trace": config.workload.trace or None,
            "load": config.workload.load,
            "seed": config.run.seed,
            "duration": format_duration(config.run.duration),
            "mode": config.run.mode,
        },
        **result.as_dict(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for mode, run in result.runs.items():
        with open(out / f"timelines-{mode}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["link_id", "link", "start_ps", "end_ps", "on"])
            for tl in run.timelines:
                for s, e, on in tl.intervals:
                    w.writerow([tl.link_id, tl.name, s, e, int(on)])
        with open(out / f"histogram-{mode}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            n = len(run.activation_histogram)
            w.writerow(["active_share_low", "active_share_high", "time_fraction"])
            for i, frac in enumerate(run.activation_histogram):
                w.writerow([f"{i / n:.4f}", f"{(i + 1) / n:.4f}", f"{frac:.6f}"])
    return summary


def cmd_run(args) -> int:
    from .network import run_scenario

    try:
        config = effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(config)
        if args.verify_replay:
            again = run_scenario(config)
            for mode, run in result.runs.items():
                h1, h2 = run.trace_hash, again.runs[mode].trace_hash
                if h1 != h2:
                    print(f"replay mismatch in {mode} run: {h1} != {h2}", file=sys.stderr)
                    return EXIT_REPLAY
                log.info("replay ok (%s): %s", mode, h1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError, AssertionError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    summary = write_outputs(Path(args.output_dir), config, result)
    if args.verify_replay:
        summary["replay_verified"] = True
        (Path(args.output_dir) / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    sav = summary.get("savings")
    if sav:
        over = sav["latency_overhead"]
        print(f"transceiver savings {sav['transceiver_savings']:.1%}, "
              f"latency overhead {'n/a' if over is None else f'{over:+.1%}'}")
    for mode, run in summary["runs"].items():
        print(f"{mode}: {run['packets_delivered']} packets delivered, drops {run['drops'] or 0}, "
              f"trace {run['trace_hash']}")
    print(f"wrote {args.output_dir}/summary.json")
    return EXIT_OK


def cmd_power_report(args) -> int:
    try:
        scenario = power.load_power_scenario(args.scenario) if args.scenario else power.PowerScenario()
        if args.savings is not None:
            if not 0 <= args.savings <= 1:
                raise power.PowerModelError("--savings must be in [0, 1]")
            scenario = power.PowerScenario(args.savings, scenario.utilizations, scenario.curve,
                                           scenario.designs, scenario.watts)
        inventories = scenario.inventories()
    except power.PowerModelError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = power.savings_table(scenario.network_savings, scenario.utilizations, inventories, scenario.curve)
    print(f"network transceiver savings {scenario.network_savings:.1%}, curve {scenario.curve}, "
          f"averaged over {len(inventories)} designs")
    print(f"{'util':>5} {'servers':>8} {'optics':>7} {'phy+nic':>8} {'DC savings':>11} {'with phy+nic':>13}")
    for r in rows:
        print(f"{r.utilization:5.0%} {r.server_share:8.1%} {r.transceiver_share:7.1%} {r.phy_nic_share:8.1%} "
              f"{r.savings_transceivers:11.1%} {r.savings_with_phy_nic:13.1%}")
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["design", "bar", "utilization", *power.CLASSES])
            for inv in inventories:
                for u in scenario.utilizations:
                    for label, shares in power.ladder_table(inv, u):
                        w.writerow([inv.name, label, u, *(f"{shares[k]:.6f}" for k in power.CLASSES)])
        print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcdc", description="Stage-gated optical link simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario in gated and/or always-on mode")
    run.add_argument("--config", help="scenario INI file")
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", help="simulated time, e.g. 10ms")
    run.add_argument("--scale", choices=sorted(SCALES), help="site size preset applied before --config")
    run.add_argument("--profile", help="workload profile override")
    run.add_argument("--load", type=float, help="offered load override (fraction of NIC bandwidth)")
    run.add_argument("--output-dir", default="lcdc-out")
    run.add_argument("--verify-replay", action="store_true", help="run twice and compare trace hashes")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("power-report", help="site-wide savings from a network savings figure")
    rep.add_argument("scenario", nargs="?", help="power scenario INI (defaults if omitted)")
    rep.add_argument("--savings", type=float, help="override network transceiver savings fraction")
    rep.add_argument("--output", help="CSV of stacked shares per design and ladder bar")
    rep.set_defaults(func=cmd_power_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
