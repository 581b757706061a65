"""Greedy goal-independence check.

The greedy procedure orders the goal atoms, then solves one atom at a time
optimally from the state the previous sub-plans reached.  A problem where
this works for every ordering is goal independent in the strongest sense;
the runner below gives evidence per ordering, it is not a decider.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

from moose.model import GroundAction, NumericCondition, PartialState, ProblemDef
from moose.planner import GroundingLimitError, SearchLimits, ground, optimal_plan
from moose.semantics import succ_seq, validate_plan
from moose.synthesis import distinct_permutations

VALID, INVALID, OOR = "valid", "invalid", "oor"


@dataclass
class TgiReport:
    problem: str
    domain: str
    outcome: str
    goal_order: List[str]
    sub_plan_lengths: List[int]
    plan: List[GroundAction] = field(default_factory=list)
    sub_reason: Optional[str] = None  # deadend | goal-not-satisfied
    seconds: float = 0.0

    @property
    def length(self) -> int:
        return len(self.plan)


def tgi_greedy(
    problem: ProblemDef,
    seed: int = 0,
    limits: SearchLimits = SearchLimits(),
    heuristic: str = "hmax",
    order: Optional[Sequence] = None,
) -> TgiReport:
    """One greedy run over a seeded random goal ordering (or ``order``)."""
    start = time.perf_counter()
    dom = problem.domain.name
    if order is None:
        (order,) = distinct_permutations(problem.goal.items(), 1, random.Random(f"tgi:{seed}"))
    names = [str(x) for x in order]

    def report(outcome, lengths, plan, reason=None):
        return TgiReport(problem.name, dom, outcome, names, lengths, plan, reason, time.perf_counter() - start)

    try:
        task = ground(problem)
    except GroundingLimitError:
        return report(OOR, [], [])
    s = problem.initial_state
    plan: List[GroundAction] = []
    lengths: List[int] = []
    for item in order:
        g = PartialState.of([], [item]) if isinstance(item, NumericCondition) else PartialState.of([item])
        result = optimal_plan(task.with_init_goal(s, g), limits, heuristic)
        if result.outcome == "resource-limit":
            return report(OOR, lengths, plan)
        if not result.solved:
            return report(INVALID, lengths, plan, "deadend")
        lengths.append(len(result.plan))
        plan += result.plan
        s = succ_seq(s, result.plan)
    if validate_plan(problem, plan).valid:
        return report(VALID, lengths, plan)
    return report(INVALID, lengths, plan, "goal-not-satisfied")


def tgi_all_orders(
    problem: ProblemDef,
    limits: SearchLimits = SearchLimits(),
    heuristic: str = "hmax",
    max_orders: int = 24,
) -> Optional[List[TgiReport]]:
    """Greedy runs over every goal ordering, or None when there are more
    than ``max_orders`` of them."""
    items = sorted(problem.goal.items(), key=str)
    if math.factorial(len(items)) > max_orders:
        return None
    return [tgi_greedy(problem, limits=limits, heuristic=heuristic, order=o) for o in itertools.permutations(items)]


@dataclass
class CorpusSummary:
    valid: int
    invalid: int
    oor: int

    @property
    def val_percent(self) -> Optional[float]:
        """Valid share among decided runs; out-of-resource runs excluded."""
        decided = self.valid + self.invalid
        return None if decided == 0 else 100.0 * self.valid / decided


def summarise(reports: Iterable[TgiReport]) -> CorpusSummary:
    reports = list(reports)
    count = lambda o: sum(r.outcome == o for r in reports)  # noqa: E731
    return CorpusSummary(count(VALID), count(INVALID), count(OOR))


CSV_FIELDS = ["domain", "problem", "seed", "outcome", "sub_reason", "goal_order", "total_length", "time"]


def reports_csv(reports: Sequence[TgiReport], seeds: Sequence[int], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r, seed in zip(reports, seeds):
        w.writerow(
            [
                r.domain,
                r.problem,
                seed,
                r.outcome,
                r.sub_reason or "",
                " ".join(r.goal_order),
                r.length,
                f"{r.seconds:.4f}" if timing else "",
            ]
        )
    return buf.getvalue()


def summary_csv(summary: CorpusSummary) -> str:
    pct = "" if summary.val_percent is None else f"{summary.val_percent:.1f}"
    return f"oor,inval,val,val_pct\n{summary.oor},{summary.invalid},{summary.valid},{pct}\n"


def tgi_corpus(
    problems: Sequence[ProblemDef],
    seeds: Sequence[int] = (0,),
    limits: SearchLimits = SearchLimits(),
    heuristic: str = "hmax",
):
    """Run the greedy check for every (problem, seed); returns reports,
    their seeds, and the aggregate counts."""
    reports, used = [], []
    for p in problems:
        for seed in seeds:
            reports.append(tgi_greedy(p, seed, limits, heuristic))
            used.append(seed)
    return reports, used, summarise(reports)
