"""Command line: ``edass run | validate | metrics | audit``.

Exit codes: 0 success, 1 scenario error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from .audit import audit
from .metrics import MismatchedTrace, compute_metrics
from .scenario import BUILTIN_PREFIX, ScenarioError, builtin_names, load_scenario
from .simulation import run_scenario
from .trace import TraceFormatError, parse_trace, records_to_lines

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_RUNTIME = 2


def _run_one(ref: str, trace_out: Optional[str], metrics_out: Optional[str],
             t_end: Optional[float], seed: Optional[int]) -> str:
    scenario = load_scenario(ref)
    result = run_scenario(scenario, seed=seed, t_end=t_end)
    text = result.trace_text()
    if trace_out:
        Path(trace_out).write_text(text)
    summary = compute_metrics(records_to_lines(result.trace), result.scenario).to_text()
    if metrics_out:
        Path(metrics_out).write_text(summary)
    return summary


def _stem(ref: str) -> str:
    return ref[len(BUILTIN_PREFIX):] if ref.startswith(BUILTIN_PREFIX) else Path(ref).stem


def cmd_run(args) -> int:
    refs: List[str] = args.scenarios
    # validate everything up front so scenario errors map to exit code 1
    for ref in refs:
        load_scenario(ref)
    if len(refs) == 1:
        summary = _run_one(refs[0], args.trace, args.metrics, args.t_end, args.seed)
        if not args.metrics:
            sys.stdout.write(summary)
        return EXIT_OK
    outs = []
    for ref in refs:
        tr = str(Path(args.trace) / f"{_stem(ref)}.trace") if args.trace else None
        me = str(Path(args.metrics) / f"{_stem(ref)}.metrics") if args.metrics else None
        outs.append((ref, tr, me))
    for d in (args.trace, args.metrics):
        if d:
            Path(d).mkdir(parents=True, exist_ok=True)
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_one, ref, tr, me, args.t_end, args.seed) for ref, tr, me in outs]
        for (ref, _, _), fut in zip(outs, futures):
            summary = fut.result()
            if not args.metrics:
                sys.stdout.write(f"== {ref}\n{summary}")
    return EXIT_OK


def cmd_validate(args) -> int:
    for ref in args.scenarios:
        s = load_scenario(ref)
        print(f"{ref}: ok ({len(s.field.nodes)} nodes, {len(s.targets)} targets, "
              f"{len(s.signatures)} signatures, seed {s.seed})")
    return EXIT_OK


def cmd_metrics(args) -> int:
    scenario = load_scenario(args.scenario)
    header, lines = parse_trace(Path(args.trace).read_text())
    summary = compute_metrics(lines, scenario, header)
    sys.stdout.write(summary.to_text())
    return EXIT_OK


def cmd_audit(args) -> int:
    scenario = load_scenario(args.scenario)
    header, lines = parse_trace(Path(args.trace).read_text())
    initial = "Active" if scenario.protocol.forced_active else "Sleep"
    failed = False
    for name, problems in audit(lines, scenario.link.propagation, initial).items():
        print(f"{name}: {'ok' if not problems else f'{len(problems)} violation(s)'}")
        for p in problems[:10]:
            print(f"  {p}")
        failed = failed or bool(problems)
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edass", description="Explosive-detection sensor network simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one or more scenarios")
    p.add_argument("scenarios", nargs="+", help=f"scenario paths or {BUILTIN_PREFIX}<name>")
    p.add_argument("--trace", help="trace output file (a directory when several scenarios are given)")
    p.add_argument("--metrics", help="metrics output file (a directory when several scenarios are given)")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=None, help="parallel workers for several scenarios")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="parse and check scenarios")
    p.add_argument("scenarios", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", help="summarize a trace")
    p.add_argument("trace")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("audit", help="check trace invariants")
    p.add_argument("trace")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=lambda a: print("\n".join(BUILTIN_PREFIX + n for n in builtin_names())) or EXIT_OK)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError) as e:
        print(f"edass: scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except (MismatchedTrace, TraceFormatError) as e:
        print(f"edass: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        print(f"edass: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
