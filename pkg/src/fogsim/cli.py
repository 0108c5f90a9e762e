"""Command line: ``fogsim run``, ``fogsim sweep`` and ``fogsim report``.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import TABLE6, Cell, read_comparison, run_cell, run_experiments
from .scenario import ScenarioError, load_paper_default, load_scenario, parse_threshold

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger("fogsim")


def _load(args) -> "Scenario":  # noqa: F821
    if args.scenario is None or args.scenario == "paper-default":
        s = load_paper_default()
    else:
        s = load_scenario(args.scenario, strict=not args.lenient)
    kw = {}
    if getattr(args, "threshold", None) is not None:
        kw["offloading_threshold"] = parse_threshold(args.threshold)
    if getattr(args, "dec", None) is not None:
        kw["dec_enabled"] = args.dec
    if args.horizon is not None:
        kw["horizon_ms"] = args.horizon
    return s.with_overrides(**kw) if kw else s


def _fmt(x, spec=".2f"):
    return "-" if x is None else format(x, spec)


def _print_report(rep: dict, out=None):
    out = out or sys.stdout
    print(f"scenario {rep['scenario']}  threshold={rep['offloading_threshold']}  "
          f"dec={'on' if rep['dec_enabled'] else 'off'}  horizon={rep['horizon_ms']:g} ms", file=out)
    print(f"  mean RTT loop A (fog) {_fmt(rep['mean_rtt_loop_A'])} ms   "
          f"loop B (fog) {_fmt(rep['mean_rtt_loop_B'])} ms", file=out)
    print(f"  mean RTT loop A (all) {_fmt(rep['mean_rtt_loop_A_all'])} ms   "
          f"loop B (all) {_fmt(rep['mean_rtt_loop_B_all'])} ms", file=out)
    print(f"  fog-executed tasks {rep['executed_task_count']}   emitted {rep['tasks_emitted']}", file=out)
    print(f"  fog energy {rep['fog_energy']:.3f} J   cloud energy {rep['cloud_energy']:.3f} J", file=out)
    print(f"  decisions {rep['decisions']}", file=out)


def cmd_run(args) -> int:
    s = _load(args)
    out = Path(args.out) if args.out else None
    rep = run_cell(s, out, trace=args.trace, write_tasks=not args.no_tasks)
    _print_report(rep)
    if out:
        print(f"outputs written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _load(args)
    if args.table6:
        matrix = TABLE6
    else:
        thresholds = args.thresholds or ["inf", "50", "100", "200"]
        matrix = []
        for t in thresholds:
            value = parse_threshold(t)
            label = "no-offloading" if value == float("inf") else f"offloading-{value:g}"
            for dec in (False, True):
                matrix.append(Cell(label + ("-dec" if dec else ""), value, dec))
    reports, rows, failures = run_experiments(matrix, s, args.out, jobs=args.jobs,
                                              trace=args.trace, write_tasks=not args.no_tasks)
    print(f"{'threshold':>10} {'RTT A':>10} {'RTT B':>10} {'fog tasks':>10} "
          f"{'E noDEC':>12} {'E DEC':>12} {'saving':>8}")
    for r in rows:
        saving = "-" if r["energy_saving"] is None else f"{100 * r['energy_saving']:.2f}%"
        print(f"{r['threshold']:>10} {_fmt(r['mean_rtt_loop_A_ms']):>10} "
              f"{_fmt(r['mean_rtt_loop_B_ms']):>10} {r['fog_task_count']:>10} "
              f"{_fmt(r['fog_energy_no_dec_j']):>12} {_fmt(r['fog_energy_dec_j']):>12} {saving:>8}")
    if args.out:
        print(f"outputs written to {args.out}")
    for name in failures:
        print(f"cell {name} FAILED", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"no such directory: {root}", file=sys.stderr)
        return EXIT_INVALID
    single = root / "report.json"
    paths = [single] if single.exists() else sorted(root.glob("*/report.json"))
    if not paths:
        print(f"no report.json under {root}", file=sys.stderr)
        return EXIT_INVALID
    for p in paths:
        _print_report(json.loads(p.read_text()))
    comp = root / "comparison.csv"
    if comp.exists():
        print("comparison:")
        for row in read_comparison(comp):
            print("  " + ", ".join(f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fogsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", nargs="?", default=None,
                        help="scenario JSON (default: bundled paper-default)")
        sp.add_argument("--paper-default", dest="scenario", action="store_const",
                        const="paper-default", help="use the bundled default scenario")
        sp.add_argument("--horizon", type=float, metavar="MS", help="simulated time in ms")
        sp.add_argument("--trace", action="store_true",
                        help="also write trace.csv, decisions.csv and power.csv")
        sp.add_argument("--no-tasks", action="store_true", help="skip tasks.csv")
        sp.add_argument("--lenient", action="store_true", help="warn on unknown scenario keys")
        sp.add_argument("--out", metavar="DIR")

    run = sub.add_parser("run", help="run one scenario")
    common(run)
    run.add_argument("--threshold", metavar="MS|inf", help="offloading threshold override")
    dec = run.add_mutually_exclusive_group()
    dec.add_argument("--dec", dest="dec", action="store_true", default=None,
                     help="enable dynamic energy control")
    dec.add_argument("--no-dec", dest="dec", action="store_false")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run an experiment matrix")
    common(sweep)
    sweep.add_argument("--table6", action="store_true", help="the eight standard cells")
    sweep.add_argument("--thresholds", nargs="+", metavar="MS|inf")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="summarise an output directory")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
