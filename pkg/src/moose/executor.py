"""Running a rule program on a problem.

Each iteration treats the current state as a database and every rule as a
conjunctive query: state-condition atoms are joined against the state,
goal-condition atoms against the goal atoms not yet achieved.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from moose.model import (
    Atom,
    GroundAction,
    NumericCondition,
    PartialState,
    PlanningError,
    ProblemDef,
    State,
    format_number,
    is_variable,
)
from moose.query import AtomIndex, Binding, extend_free, match
from moose.semantics import is_goal, succ
from moose.synthesis import MooseProgram, MooseRule

logger = logging.getLogger(__name__)

DEFAULT_STEP_LIMIT = 10**6


def goal_token(c: NumericCondition) -> Atom:
    """A numeric goal condition encoded as an atom, so goal matching can
    join it like any other goal fact.  The predicate name holds the
    comparator, which no PDDL identifier can contain."""
    return Atom(f"{c.function}{c.comparator}{format_number(c.bound)}", c.args)


def unachieved_goals(s: State, g: PartialState) -> FrozenSet[Atom]:
    """Goal atoms missing from ``s`` plus tokens for unmet numeric goals."""
    return frozenset(g.atoms - s.atoms) | {goal_token(c) for c in g.numeric if not s.satisfies(c)}


def state_digest(s: State) -> str:
    return hashlib.sha1(str(s).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CompiledRule:
    """A rule prepared for repeated matching."""

    rule: MooseRule
    state_atoms: Tuple[Atom, ...]
    goal_atoms: Tuple[Atom, ...]
    numeric: Tuple
    action_only: Tuple[str, ...]
    goal_numeric: Tuple = ()

    @property
    def goal_patterns(self) -> Tuple[Atom, ...]:
        """Everything matched against the unachieved goals."""
        return self.goal_atoms + tuple(goal_token(c) for c in self.goal_numeric)

    @staticmethod
    def of(rule: MooseRule) -> "CompiledRule":
        cond_vars = {t for a in rule.state_cond | rule.goal_cond for t in a.args if is_variable(t)}
        cond_vars |= {t for c in rule.numeric_cond | rule.numeric_goal for t in c.args if is_variable(t)}
        action_only = []
        for call in rule.actions:
            for t in call.args:
                if is_variable(t) and t not in cond_vars and t not in action_only:
                    action_only.append(t)
        return CompiledRule(
            rule,
            tuple(sorted(rule.state_cond)),
            tuple(sorted(rule.goal_cond)),
            tuple(sorted(rule.numeric_cond)),
            tuple(action_only),
            tuple(sorted(rule.numeric_goal)),
        )

    def groundings(
        self, s: State, state_index: AtomIndex, goal_index: AtomIndex, objects: Sequence[str]
    ) -> Iterator[Binding]:
        """Every total assignment satisfying both subset conditions."""
        goals = [(a, state_index) for a in self.state_atoms] + [(a, goal_index) for a in self.goal_patterns]
        checks = []
        for c in self.numeric:
            vs = frozenset(t for t in c.args if is_variable(t))
            checks.append((vs, lambda b, c=c: s.satisfies(c.ground(b))))
        for binding in match(goals, checks=checks):
            # numeric conditions over action-only variables cannot occur, so
            # leftover variables only need enumerating
            yield from extend_free(binding, self.rule.vars, objects)

    def macro(self, problem: ProblemDef, binding: Binding) -> List[GroundAction]:
        out = []
        for call in self.rule.actions:
            schema = problem.domain.schemas[call.name]
            out.append(schema.ground(tuple(binding.get(t, t) for t in call.args)))
        return out


def compile_program(program: MooseProgram) -> List[CompiledRule]:
    return [CompiledRule.of(r) for r in program.rules]


def find_grounding(rule: MooseRule, s: State, g: PartialState, objects: Sequence[str]) -> Optional[Binding]:
    """Some assignment with ``stateCond ⊆ s`` and ``goalCond ⊆ g \\ s``, or None."""
    cr = CompiledRule.of(rule)
    return next(cr.groundings(s, AtomIndex(s.atoms), AtomIndex(unachieved_goals(s, g)), sorted(objects)), None)


def all_groundings(rule: MooseRule, s: State, g: PartialState, objects: Sequence[str]) -> List[Binding]:
    cr = CompiledRule.of(rule)
    return list(cr.groundings(s, AtomIndex(s.atoms), AtomIndex(unachieved_goals(s, g)), sorted(objects)))


def run_macro(s: State, macro: Sequence[GroundAction]) -> Optional[State]:
    for a in macro:
        s = succ(s, a)
        if s is None:
            return None
    return s


@dataclass(frozen=True)
class TraceStep:
    rule: int
    binding: Tuple[Tuple[str, str], ...]
    state: str
    cached: bool = False


@dataclass
class ExecutionResult:
    plan: List[GroundAction]
    status: str  # "success" | "failure"
    failure_reason: Optional[str] = None  # no-rule-fired | cycle-detected | step-limit
    trace: List[TraceStep] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "success"


def _fire(
    cr: CompiledRule, problem: ProblemDef, s: State, sidx: AtomIndex, ugidx: AtomIndex, objects, ug
) -> Optional[Tuple[Binding, List[GroundAction], State]]:
    """First grounding whose macro runs and achieves the rule's goal atoms."""
    for binding in cr.groundings(s, sidx, ugidx, objects):
        macro = cr.macro(problem, binding)
        t = run_macro(s, macro)
        if t is None:
            continue
        if all(a.ground(binding) in t.atoms for a in cr.goal_atoms) and all(
            t.satisfies(c.ground(binding)) for c in cr.goal_numeric
        ):
            return binding, macro, t
    return None


def instantiate(
    problem: ProblemDef,
    program: MooseProgram,
    step_limit: int = DEFAULT_STEP_LIMIT,
    strict_precedence: bool = False,
    compiled: Optional[List[CompiledRule]] = None,
) -> ExecutionResult:
    """Build a plan by repeatedly firing the best matching rule.

    Unless ``strict_precedence`` is set, the previously fired rule is tried
    first, which can pick a rule that is not the lowest-ranked match.
    """
    program.check_domain(problem.domain)
    rules = compiled if compiled is not None else compile_program(program)
    objects = problem.object_names
    g = problem.goal
    s = problem.initial_state
    plan: List[GroundAction] = []
    trace: List[TraceStep] = []
    visited = {s}
    last: Optional[int] = None
    while not is_goal(s, g):
        ug = unachieved_goals(s, g)
        sidx, ugidx = AtomIndex(s.atoms), AtomIndex(ug)
        fired = None
        order = list(range(len(rules)))
        if last is not None and not strict_precedence:
            order.remove(last)
            order.insert(0, last)
        for ri in order:
            hit = _fire(rules[ri], problem, s, sidx, ugidx, objects, ug)
            if hit is not None:
                fired = (ri, hit)
                break
        if fired is None:
            return ExecutionResult(plan, "failure", "no-rule-fired", trace)
        ri, (binding, macro, t) = fired
        trace.append(TraceStep(ri, tuple(sorted(binding.items())), state_digest(s), ri == last and not strict_precedence))
        if len(plan) + len(macro) > step_limit:
            return ExecutionResult(plan, "failure", "step-limit", trace)
        plan.extend(macro)
        if t in visited:
            return ExecutionResult(plan, "failure", "cycle-detected", trace)
        visited.add(t)
        s = t
        last = ri
    return ExecutionResult(plan, "success", None, trace)


def admits_grounding(cr: CompiledRule, problem: ProblemDef, s: State) -> bool:
    """Whether the rule could fire in ``s`` (used for precedence checks)."""
    ug = unachieved_goals(s, problem.goal)
    return _fire(cr, problem, s, AtomIndex(s.atoms), AtomIndex(ug), problem.object_names, ug) is not None


def replay_states(problem: ProblemDef, result: ExecutionResult, program: MooseProgram) -> List[State]:
    """States at which each trace step fired."""
    rules = compile_program(program)
    s = problem.initial_state
    out = []
    for step in result.trace:
        out.append(s)
        macro = rules[step.rule].macro(problem, dict(step.binding))
        s = run_macro(s, macro)
        if s is None:
            raise PlanningError("trace does not replay")
    return out
