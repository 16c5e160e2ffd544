"""Command-line entry point: ``stackdr simulate`` and ``stackdr default-config``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from . import engine, report
from .errors import ConfigError, CurtailmentRequired, StackdrError
from .scenario import default_scenario, load_scenario, to_dict

EXIT_CONFIG, EXIT_CURTAIL, EXIT_OTHER = 2, 3, 4


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackdr", description="Retailer/user demand-response game simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run Monte Carlo trials and write tables/figure data")
    sim.add_argument("--scenario", help="scenario JSON file (default: built-in scenario)")
    sim.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    sim.add_argument("--seed", type=_u64, help="64-bit seed")
    sim.add_argument("--mode", choices=engine.MODES, default="both")
    sim.add_argument("--out-dir", default="out", help="output directory (default: %(default)s)")
    sim.add_argument("--max-rounds", type=int, help="round-robin rounds before giving up")
    sim.add_argument("--epsilon", type=float, help="relative aggregate-load convergence tolerance")
    sim.add_argument("--workers", type=int, default=1, help="parallel trial workers (results do not depend on it)")
    sim.add_argument("--figures", action="store_true", help="also render PNG figures into the output directory")
    sim.add_argument("-v", "--verbose", action="store_true")

    dc = sub.add_parser("default-config", help="print the fully resolved default scenario as JSON")
    dc.add_argument("--out", help="write to this file instead of stdout")
    return parser


def _resolve(args):
    s = load_scenario(args.scenario) if args.scenario else default_scenario()
    overrides = {k: v for k, v in (("trials", args.trials), ("seed", args.seed),
                                   ("max_rounds", args.max_rounds), ("epsilon", args.epsilon)) if v is not None}
    return s.replace(**overrides) if overrides else s


def _print_table(summary: report.RunSummary) -> None:
    head = f"{'scenario':<10} {'peak [kW]':>12} {'energy [kWh]':>14} {'payments':>12} {'gen. cost':>12}"
    print(head)
    for name, sc in summary.scenarios.items():
        m = sc["mean"]
        print(f"{name:<10} {m['peak_demand_kw']:>12.1f} {m['total_energy_kwh']:>14.1f} "
              f"{m['total_payments']:>12.1f} {m['generation_cost']:>12.1f}")
    c = summary.convergence
    print(f"converged: {c['converged']}/{c['trials']} trials (max rounds used {c['max_rounds_used']})")


def simulate(args) -> int:
    s = _resolve(args)
    t0 = time.perf_counter()
    results = engine.run_trials(s, args.mode, workers=args.workers)
    summary = report.aggregate_stats(results, s)
    paths = report.emit_outputs(summary, s, args.out_dir)
    if args.figures:
        from . import plotting

        paths += plotting.render_all(summary, args.out_dir)
    _print_table(summary)
    for p in paths:
        print(f"wrote {p}")
    logging.getLogger(__name__).info("%d trials in %.1f s", s.trials, time.perf_counter() - t0)
    if summary.convergence["nonconverged_trials"]:
        print(f"warning: trials without convergence: {summary.convergence['nonconverged_trials']}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "default-config":
            text = json.dumps(to_dict(default_scenario()), indent=2) + "\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        return simulate(args)
    except ConfigError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CurtailmentRequired as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CURTAIL
    except (StackdrError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
