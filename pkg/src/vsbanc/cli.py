"""Command-line entry point: ``vsb-anc {run,sweep,optimal,validate}``.

Exit codes: 0 success, 2 usage error, 3 scenario/schema error, 4 divergence
or ill-posed control, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import DivergenceError, IllPosedControlError, ScenarioError, VsbError, WavParseError
from .runner import run_optimal_analysis, run_scenario, run_sweep, validate
from .scenario import load_scenario

EXIT_OK = 0
EXIT_SCHEMA = 3
EXIT_DIVERGENCE = 4
EXIT_IO = 5

log = logging.getLogger("vsbanc")


def _out_dir(args, sc, multiple):
    base = Path(args.output) if args.output else Path("out")
    return base / sc.name if multiple or not args.output else base


def _print_table(summary):
    table = summary.get("table")
    if not table:
        return
    print(f"{'condition':<22}{'ANC_OFF':>10}{'ANC_ON':>10}{'NR':>9}")
    for r in table["rows"]:
        flag = " (provisional)" if r["provisional"] else ""
        print(f"{r['label']:<22}{r['spl_off']:>9.1f} {r['spl_on']:>9.1f} {r['nr']:>8.1f}{flag}")


def _run_one(task):
    path, seed, out = task
    sc = load_scenario(path, seed=seed)
    return run_scenario(sc, out_dir=out)


def cmd_run(args):
    scenarios = [load_scenario(p, seed=args.seed) for p in args.scenario]
    multiple = len(scenarios) > 1
    tasks = [(p, args.seed, _out_dir(args, sc, multiple)) for p, sc in zip(args.scenario, scenarios)]
    if args.jobs > 1 and multiple:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            summaries = list(ex.map(_run_one, tasks))
    else:
        summaries = [_run_one(t) for t in tasks]
    for (_, _, out), s in zip(tasks, summaries):
        print(f"# {s['scenario_name']} -> {out}")
        _print_table(s)
    return EXIT_OK


def cmd_sweep(args):
    sc = load_scenario(args.scenario, seed=args.seed)
    out = _out_dir(args, sc, False)
    s = run_sweep(sc, frequencies=args.frequencies, jobs=args.jobs, out_dir=out)
    print(f"# {s['scenario_name']} -> {out}")
    _print_table(s)
    return EXIT_OK


def cmd_optimal(args):
    sc = load_scenario(args.scenario, seed=args.seed)
    out = _out_dir(args, sc, False)
    s = run_optimal_analysis(sc, out_dir=out)
    print(f"# {s['scenario_name']} -> {out}  (controllable limit {s['controllable_limit_hz']:.1f} Hz)")
    print(f"{'freq_hz':>8}{'NR_opt_dB':>11}{'cond':>11}")
    for r in s["rows"]:
        print(f"{r['freq']:>8.0f}{r['nr_optimal']:>11.2f}{r['condition_number']:>11.2e}")
    return EXIT_OK


def cmd_validate(args):
    worst = EXIT_OK
    for p in args.scenario:
        diags = validate(p)
        if args.json:
            print(json.dumps({"scenario": str(p), "diagnostics": [vars(d) for d in diags]}))
        else:
            for d in diags:
                print(f"{p}: {d.severity}: {d.path}: {d.message}")
        if any(d.severity == "error" for d in diags):
            worst = EXIT_SCHEMA
    return worst


def build_parser():
    ap = argparse.ArgumentParser(prog="vsb-anc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, many=False):
        p.add_argument("scenario", nargs="+" if many else None, type=Path, help="scenario JSON file")
        p.add_argument("-o", "--output", type=Path, help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("run", help="closed-loop simulation of one or more scenarios")
    common(p, many=True)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="tonal sweep, one NR row per frequency")
    common(p)
    p.add_argument("--frequencies", type=float, nargs="+", help="override the sweep frequencies (Hz)")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("optimal", help="frequency-domain optimal-control NR curve")
    common(p)
    p.set_defaults(func=cmd_optimal)
    p = sub.add_parser("validate", help="schema, geometry and stability diagnostics")
    p.add_argument("scenario", nargs="+", type=Path)
    p.add_argument("--json", action="store_true", help="machine-readable diagnostics")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DivergenceError, IllPosedControlError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, WavParseError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VsbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
