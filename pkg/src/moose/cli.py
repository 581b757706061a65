"""Command-line entry point.

Exit codes: 0 success, 1 the task failed (no plan, invalid plan), 2 usage
or input error.  The first stdout line is a one-line summary; diagnostics
go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from moose import analysis, bench, fixtures
from moose.executor import instantiate
from moose.model import PlanningError
from moose.pddl import PddlSyntaxError, format_plan, load_domain, load_problem, parse_plan
from moose.planner import HEURISTICS, SearchLimits, ground, optimal_plan
from moose.pruning import FLAVORS, export_axioms, pruned_astar
from moose.semantics import validate_plan
from moose.synthesis import MooseProgram, SynthesisConfig, SynthesisStats, synthesize

log = logging.getLogger("moose")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _write(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _limits(args) -> SearchLimits:
    return SearchLimits(args.max_expansions, args.time_limit)


def _load_program(path: str) -> MooseProgram:
    return MooseProgram.from_json(Path(path).read_text())


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    dom = load_domain(args.domain)
    problems = [load_problem(p, dom) for p in args.problems]
    cfg = SynthesisConfig(
        n_p=args.n_p,
        n_r=args.n_r,
        seed=args.seed,
        heuristic=args.heuristic,
        max_expansions=args.max_expansions,
        time_limit=args.time_limit,
    )
    stats: List[SynthesisStats] = []
    start = time.perf_counter()
    program = synthesize(problems, cfg, domain=dom, stats=stats)
    for st in stats:
        print(f"{st.problem}: {st.solved}/{st.subproblems} sub-problems solved, {st.rules} rules", file=sys.stderr)
    Path(args.out).write_text(program.to_json())
    print(f"synth rules={len(program)} problems={len(problems)} seconds={time.perf_counter() - start:.3f}")
    return 0


def cmd_run(args) -> int:
    dom = load_domain(args.domain)
    prob = load_problem(args.problem, dom)
    program = _load_program(args.program)
    res = instantiate(prob, program, step_limit=args.step_limit, strict_precedence=args.strict_precedence)
    if res.success and not validate_plan(prob, res.plan).valid:  # defensive; should not happen
        print("run status=failure reason=invalid-plan")
        return 1
    reason = f" reason={res.failure_reason}" if res.failure_reason else ""
    print(f"run status={res.status} length={len(res.plan)} iterations={len(res.trace)}{reason}")
    if args.trace:
        steps = [{"rule": t.rule, "binding": dict(t.binding), "state": t.state, "cached": t.cached} for t in res.trace]
        Path(args.trace).write_text(json.dumps(steps, indent=1) + "\n")
    if res.success:
        _write(args.out, format_plan(res.plan))
        return 0
    return 1


def cmd_solve(args) -> int:
    dom = load_domain(args.domain)
    prob = load_problem(args.problem, dom)
    if args.mode == "pruned":
        if not args.program:
            raise PlanningError("--mode pruned needs --program")
        res = pruned_astar(prob, _load_program(args.program), args.heuristic, _limits(args))
    else:
        res = optimal_plan(ground(prob), _limits(args), args.heuristic)
    st = res.stats
    cost = "" if res.plan is None else f" cost={len(res.plan)}"
    print(f"solve mode={args.mode} outcome={res.outcome}{cost} expansions={st.expansions} generated={st.generated}")
    if res.solved:
        _write(args.out, format_plan(res.plan))
        return 0
    return 1


def cmd_export_axioms(args) -> int:
    dom = load_domain(args.domain)
    prob = load_problem(args.problem, dom)
    doc = export_axioms(prob, _load_program(args.program), args.flavor)
    Path(args.out_domain).write_text(doc.domain)
    Path(args.out_problem).write_text(doc.problem)
    print(f"export-axioms flavor={args.flavor} domain={args.out_domain} problem={args.out_problem}")
    return 0


def _corpus(directory: Path):
    """Problems from every directory holding a ``domain.pddl``."""
    out = []
    for dom_path in sorted(Path(directory).rglob("domain.pddl")):
        dom = load_domain(dom_path)
        for p in sorted(dom_path.parent.glob("*.pddl")):
            if p.name != "domain.pddl":
                out.append(load_problem(p, dom))
    return out


def cmd_tgi(args) -> int:
    problems = _corpus(args.corpus)
    seeds = [args.seed + i for i in range(args.seeds)]
    reports, used, summary = analysis.tgi_corpus(problems, seeds, _limits(args), args.heuristic)
    pct = "n/a" if summary.val_percent is None else f"{summary.val_percent:.1f}"
    print(f"tgi problems={len(problems)} val={summary.valid} inval={summary.invalid} oor={summary.oor} val_pct={pct}")
    _write(args.out, analysis.reports_csv(reports, used, timing=not args.no_timing))
    if args.summary:
        Path(args.summary).write_text(analysis.summary_csv(summary))
    return 0


def cmd_validate(args) -> int:
    dom = load_domain(args.domain)
    prob = load_problem(args.problem, dom)
    try:
        plan = parse_plan(Path(args.plan).read_text(), prob)
    except PlanningError as exc:
        # unknown actions or objects make the plan invalid, not the call
        print(json.dumps({"valid": False, "step": None, "reason": str(exc)}) if args.json else f"invalid: {exc}")
        return 1
    report = validate_plan(prob, plan)
    print(report.to_json() if args.json else str(report))
    return 0 if report.valid else 1


def cmd_bench(args) -> int:
    jobs = bench.load_manifest(args.manifest)
    records = bench.run_manifest(jobs, args.jobs)
    timing = not args.no_timing
    Path(args.out).write_text(bench.records_csv(records, timing))
    if args.coverage:
        Path(args.coverage).write_text(bench.coverage_csv(records, timing))
    solved = sum(r.solved for r in records)
    print(f"bench jobs={len(records)} solved={solved}")
    return 0


def cmd_fixtures(args) -> int:
    written = fixtures.dump(Path(args.out))
    print(f"fixtures files={len(written)} dir={args.out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moose", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def search_flags(p):
        p.add_argument("--heuristic", choices=HEURISTICS, default="hmax")
        p.add_argument("--max-expansions", type=_positive_int, default=None)
        p.add_argument("--time-limit", type=_positive_float, default=None, help="seconds per search")

    p = sub.add_parser("synth", help="learn a rule program from training problems")
    p.add_argument("domain")
    p.add_argument("problems", nargs="*")
    p.add_argument("-o", "--out", required=True, help="program JSON to write")
    p.add_argument("--n-p", type=_positive_int, default=3, help="goal orderings per problem")
    p.add_argument("--n-r", type=_positive_int, default=1, help="largest goal block size")
    p.add_argument("--seed", type=int, default=0)
    search_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="execute a program on a problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--program", required=True)
    p.add_argument("-o", "--out", help="plan file (default: stdout)")
    p.add_argument("--trace", help="write a JSON trace of fired rules")
    p.add_argument("--step-limit", type=_positive_int, default=10**6)
    p.add_argument("--strict-precedence", action="store_true", help="disable the last-fired-rule shortcut")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("solve", help="optimal planning, optionally pruned by a program")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--mode", choices=("optimal", "pruned"), default="optimal")
    p.add_argument("--program")
    p.add_argument("-o", "--out", help="plan file (default: stdout)")
    search_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("export-axioms", help="encode a program as PDDL derived predicates")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--program", required=True)
    p.add_argument("--flavor", choices=FLAVORS, default="derived")
    p.add_argument("--out-domain", required=True)
    p.add_argument("--out-problem", required=True)
    p.set_defaults(func=cmd_export_axioms)

    p = sub.add_parser("tgi", help="greedy goal-independence check over a corpus directory")
    p.add_argument("corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=_positive_int, default=1, help="runs per problem with consecutive seeds")
    p.add_argument("-o", "--out", help="CSV report (default: stdout)")
    p.add_argument("--summary", help="CSV with OOR/Inval/Val counts")
    p.add_argument("--no-timing", action="store_true", help="leave time columns empty")
    search_flags(p)
    p.set_defaults(func=cmd_tgi)

    p = sub.add_parser("validate", help="check a plan against a problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="run a JSON manifest of jobs")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True, help="CSV of records")
    p.add_argument("--coverage", help="CSV of cumulative solved count over time")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--no-timing", action="store_true", help="leave time and memory columns empty")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixtures", help="write the bundled domains and problems to a directory")
    p.add_argument("out")
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (PddlSyntaxError, PlanningError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
