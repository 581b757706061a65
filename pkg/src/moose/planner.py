"""Grounding and optimal (unit-cost) search.

Ground tasks encode facts as integers and states as ``(frozenset[int],
tuple[Fraction, ...])`` pairs.  Grounding keeps only actions whose
propositional preconditions are reachable under delete relaxation from the
initial state; numeric preconditions are not used for pruning there.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from moose.model import Atom, FluentKey, GroundAction, PartialState, PlanningError, ProblemDef, State
from moose.query import AtomIndex, extend_free, match

logger = logging.getLogger(__name__)

DEFAULT_MAX_ACTIONS = 10**6
DEFAULT_NUMERIC_CAP = 10**5

SearchState = Tuple[FrozenSet[int], Tuple[Fraction, ...]]


class GroundingLimitError(PlanningError):
    pass


@dataclass
class TaskAction:
    action: GroundAction
    pre: FrozenSet[int]
    add: FrozenSet[int]
    delete: FrozenSet[int]
    num_pre: Tuple[Tuple[int, object], ...]  # (fluent index, NumericCondition)
    num_eff: Tuple[Tuple[int, Fraction], ...]


@dataclass
class GroundTask:
    """A fully grounded problem sharing its action table across inits/goals."""

    problem: ProblemDef
    facts: List[Atom]
    fact_ids: Dict[Atom, int]
    fluent_keys: List[FluentKey]
    actions: List[TaskAction]
    init: SearchState
    goal_facts: FrozenSet[int]
    goal_numeric: Tuple[Tuple[int, object], ...]
    goal_reachable: bool = True
    action_ids: Dict[Tuple[str, Tuple[str, ...]], int] = field(default_factory=dict)
    _static: FrozenSet[int] = frozenset()

    @property
    def has_numeric(self) -> bool:
        return bool(self.fluent_keys) and (
            bool(self.goal_numeric) or any(a.num_pre or a.num_eff for a in self.actions)
        )

    def encode(self, s: State) -> SearchState:
        atoms = frozenset(self.fact_ids[a] for a in s.atoms if a in self.fact_ids)
        values = s.fluent_map
        return atoms, tuple(values.get(k, Fraction(0)) for k in self.fluent_keys)

    def decode(self, s: SearchState) -> State:
        atoms = frozenset(self.facts[i] for i in s[0])
        # facts outside the reachable universe never change; keep them
        outside = self.problem.initial_state.atoms - self.fact_ids.keys()
        return State(atoms | outside, tuple(sorted(zip(self.fluent_keys, s[1]))))

    def with_init_goal(self, state: State, goal: PartialState) -> "GroundTask":
        """Same action table, new initial state and goal.

        ``state`` must be reachable from the task's original initial state,
        otherwise relaxed-reachability pruning may have dropped actions.
        """
        goal_facts, reachable = [], True
        for a in goal.atoms:
            if a in self.fact_ids:
                goal_facts.append(self.fact_ids[a])
            elif a not in state.atoms:
                reachable = False
        fl = {k: i for i, k in enumerate(self.fluent_keys)}
        goal_num = []
        for c in goal.numeric:
            if c.key not in fl:
                raise PlanningError(f"goal mentions unknown fluent {c.key}")
            goal_num.append((fl[c.key], c))
        return GroundTask(
            problem=self.problem,
            facts=self.facts,
            fact_ids=self.fact_ids,
            fluent_keys=self.fluent_keys,
            actions=self.actions,
            init=self.encode(state),
            goal_facts=frozenset(goal_facts),
            goal_numeric=tuple(sorted(goal_num, key=lambda x: x[0])),
            goal_reachable=reachable,
            action_ids=self.action_ids,
        )

    def applicable(self, s: SearchState, a: TaskAction) -> bool:
        if not a.pre <= s[0]:
            return False
        return all(c.holds(s[1][i]) for i, c in a.num_pre)

    def apply(self, s: SearchState, a: TaskAction) -> SearchState:
        atoms = (s[0] - a.delete) | a.add
        if not a.num_eff:
            return atoms, s[1]
        values = list(s[1])
        for i, d in a.num_eff:
            values[i] += d
        return atoms, tuple(values)

    def is_goal(self, s: SearchState) -> bool:
        return self.goal_facts <= s[0] and all(c.holds(s[1][i]) for i, c in self.goal_numeric)


def ground(problem: ProblemDef, max_actions: int = DEFAULT_MAX_ACTIONS) -> GroundTask:
    """Instantiate all relaxed-reachable actions of ``problem``."""
    dom = problem.domain
    init = problem.initial_state
    reached = AtomIndex(init.atoms)
    objects = problem.object_names
    found: Dict[Tuple[str, Tuple[str, ...]], GroundAction] = {}
    schemas = sorted(dom.schemas.values(), key=lambda s: s.name)
    changed = True
    while changed:
        changed = False
        for schema in schemas:
            pre = sorted(schema.full_pre)
            for binding in match([(a, reached) for a in pre]):
                for full in extend_free(binding, schema.variables, objects):
                    args = tuple(full[v] for v in schema.variables)
                    if (schema.name, args) in found:
                        continue
                    act = schema.ground(args)
                    found[(schema.name, args)] = act
                    if len(found) > max_actions:
                        raise GroundingLimitError(f"more than {max_actions} ground actions")
                    for atom in act.add:
                        if reached.add(atom):
                            changed = True
    acts = [found[k] for k in sorted(found)]
    facts = sorted({a for act in acts for a in act.pre | act.add | act.delete} | set(init.atoms))
    fact_ids = {a: i for i, a in enumerate(facts)}
    fluent_keys = [k for k, _ in init.fluents]
    fl = {k: i for i, k in enumerate(fluent_keys)}
    table = []
    for act in acts:
        for c in act.num_pre:
            if c.key not in fl:
                raise PlanningError(f"{act} tests unknown fluent {c.key}")
        for k, _ in act.num_eff:
            if k not in fl:
                raise PlanningError(f"{act} changes unknown fluent {k}")
        table.append(
            TaskAction(
                action=act,
                pre=frozenset(fact_ids[a] for a in act.pre),
                add=frozenset(fact_ids[a] for a in act.add),
                delete=frozenset(fact_ids[a] for a in act.delete),
                num_pre=tuple(sorted(((fl[c.key], c) for c in act.num_pre), key=lambda x: x[0])),
                num_eff=tuple((fl[k], d) for k, d in act.num_eff),
            )
        )
    base = GroundTask(
        problem=problem,
        facts=facts,
        fact_ids=fact_ids,
        fluent_keys=fluent_keys,
        actions=table,
        init=((frozenset(), ())),
        goal_facts=frozenset(),
        goal_numeric=(),
        action_ids={(t.action.name, t.action.args): i for i, t in enumerate(table)},
    )
    return base.with_init_goal(init, problem.goal)


# ---------------------------------------------------------------- heuristics


def blind(task: GroundTask, s: SearchState) -> float:
    return 0 if task.is_goal(s) else 1


class HMax:
    """Admissible max-cost delete-relaxation heuristic (numeric parts ignored)."""

    def __init__(self, task: GroundTask):
        self.task = task
        self.by_pre: Dict[int, List[int]] = {}
        self.no_pre: List[int] = []
        for i, a in enumerate(task.actions):
            if not a.pre:
                self.no_pre.append(i)
            for f in a.pre:
                self.by_pre.setdefault(f, []).append(i)
        self.npre = [len(a.pre) for a in task.actions]

    def __call__(self, s: SearchState) -> float:
        task = self.task
        if not task.goal_reachable:
            return math.inf
        goal = task.goal_facts
        if task.is_goal(s):
            return 0
        cost: Dict[int, int] = {f: 0 for f in s[0]}
        remaining = list(self.npre)
        act_cost = [0] * len(task.actions)
        heap: List[Tuple[int, int]] = [(0, f) for f in s[0]]
        heapq.heapify(heap)
        done = set()
        for i in self.no_pre:
            for f in task.actions[i].add:
                if f not in cost or cost[f] > 1:
                    cost[f] = 1
                    heapq.heappush(heap, (1, f))
        unreached = set(goal)
        hval = 0
        while heap:
            c, f = heapq.heappop(heap)
            if f in done or cost.get(f) != c:
                continue
            done.add(f)
            if f in unreached:
                unreached.discard(f)
                hval = max(hval, c)
                if not unreached:
                    break
            for i in self.by_pre.get(f, ()):
                act_cost[i] = max(act_cost[i], c)
                remaining[i] -= 1
                if remaining[i] == 0:
                    nc = act_cost[i] + 1
                    for g in task.actions[i].add:
                        if g not in done and (g not in cost or cost[g] > nc):
                            cost[g] = nc
                            heapq.heappush(heap, (nc, g))
        if unreached:
            return math.inf
        # numeric goals need at least one more action when unsatisfied
        if task.goal_numeric and not all(cn.holds(s[1][i]) for i, cn in task.goal_numeric):
            hval = max(hval, 1)
        return hval


# ---------------------------------------------------------------- search


@dataclass
class SearchStats:
    expansions: int = 0
    generated: int = 0
    peak_open: int = 0
    wall_time: float = 0.0


@dataclass
class SearchResult:
    outcome: str  # "plan" | "unsolvable" | "resource-limit"
    plan: Optional[List[GroundAction]] = None
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def cost(self) -> Optional[int]:
        return None if self.plan is None else len(self.plan)

    @property
    def solved(self) -> bool:
        return self.outcome == "plan"


@dataclass(frozen=True)
class SearchLimits:
    max_expansions: Optional[int] = None
    time_limit: Optional[float] = None


Successors = Callable[[SearchState], Sequence[int]]


def _best_first(
    task: GroundTask,
    h: Callable[[SearchState], float],
    limits: SearchLimits,
    successors: Optional[Successors] = None,
) -> SearchResult:
    start = time.perf_counter()
    stats = SearchStats()
    if not task.goal_reachable:
        stats.wall_time = time.perf_counter() - start
        return SearchResult("unsolvable", stats=stats)
    init = task.init
    h0 = h(init)
    if h0 == math.inf:
        stats.wall_time = time.perf_counter() - start
        return SearchResult("unsolvable", stats=stats)
    counter = itertools.count()
    # ties: lower f, then lower h, then FIFO
    open_list: List[Tuple[float, float, int, SearchState]] = [(h0, h0, next(counter), init)]
    best_g: Dict[SearchState, int] = {init: 0}
    parent: Dict[SearchState, Tuple[Optional[SearchState], int]] = {init: (None, -1)}
    closed = set()
    actions = task.actions
    while open_list:
        stats.peak_open = max(stats.peak_open, len(open_list))
        f, hv, _, s = heapq.heappop(open_list)
        if s in closed:
            continue
        g = best_g[s]
        if task.is_goal(s):
            plan = []
            cur = s
            while True:
                prev, ai = parent[cur]
                if prev is None:
                    break
                plan.append(actions[ai].action)
                cur = prev
            plan.reverse()
            stats.wall_time = time.perf_counter() - start
            return SearchResult("plan", plan, stats)
        closed.add(s)
        stats.expansions += 1
        if limits.max_expansions is not None and stats.expansions > limits.max_expansions:
            stats.wall_time = time.perf_counter() - start
            return SearchResult("resource-limit", stats=stats)
        if limits.time_limit is not None and stats.expansions % 256 == 0:
            if time.perf_counter() - start > limits.time_limit:
                stats.wall_time = time.perf_counter() - start
                return SearchResult("resource-limit", stats=stats)
        indices = range(len(actions)) if successors is None else successors(s)
        for ai in indices:
            a = actions[ai]
            if not task.applicable(s, a):
                continue
            t = task.apply(s, a)
            stats.generated += 1
            ng = g + 1
            if t in closed or best_g.get(t, math.inf) <= ng:
                continue
            ht = h(t)
            if ht == math.inf:
                continue
            best_g[t] = ng
            parent[t] = (s, ai)
            heapq.heappush(open_list, (ng + ht, ht, next(counter), t))
    stats.wall_time = time.perf_counter() - start
    return SearchResult("unsolvable", stats=stats)


HEURISTICS = ("blind", "hmax")


def make_heuristic(task: GroundTask, name: str) -> Callable[[SearchState], float]:
    if name == "blind":
        return lambda s: blind(task, s)
    if name == "hmax":
        return HMax(task)
    raise ValueError(f"unknown heuristic {name!r}; choose from {HEURISTICS}")


def astar(
    task: GroundTask,
    h: str = "hmax",
    limits: SearchLimits = SearchLimits(),
    successors: Optional[Successors] = None,
) -> SearchResult:
    """A* with unit costs.  Optimal for the admissible ``blind``/``hmax``."""
    return _best_first(task, make_heuristic(task, h), limits, successors)


def numeric_search(task: GroundTask, bounds: SearchLimits = SearchLimits(max_expansions=DEFAULT_NUMERIC_CAP)) -> SearchResult:
    """Uniform-cost search with exact duplicate detection.

    The fragment is undecidable, so an expansion cap is always applied;
    hitting it yields ``resource-limit``.
    """
    if bounds.max_expansions is None:
        bounds = SearchLimits(DEFAULT_NUMERIC_CAP, bounds.time_limit)
    return _best_first(task, lambda s: blind(task, s), bounds)


def optimal_plan(task: GroundTask, limits: SearchLimits = SearchLimits(), h: str = "hmax") -> SearchResult:
    """Dispatch to :func:`numeric_search` for numeric tasks, A* otherwise."""
    if task.has_numeric:
        cap = limits.max_expansions if limits.max_expansions is not None else DEFAULT_NUMERIC_CAP
        return numeric_search(task, SearchLimits(cap, limits.time_limit))
    return astar(task, h, limits)
