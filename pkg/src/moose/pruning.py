"""Search-space pruning with a rule program.

In a state ``s`` only actions that are the first step of some grounded rule
macro may be applied.  Precedence plays no role here.  The same filter can
be exported as PDDL derived predicates for planners that support axioms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from moose.executor import CompiledRule, compile_program, unachieved_goals
from moose.model import Atom, GroundAction, PartialState, PlanningError, ProblemDef, State, is_variable
from moose.planner import GroundTask, SearchLimits, SearchResult, SearchState, astar, ground
from moose.query import AtomIndex, extend_free, match
from moose.semantics import applicable
from moose.synthesis import MooseProgram

FLAVORS = ("derived", "disjunctive")


class AllowedActionFilter:
    """Rules bucketed by the schema of their first macro action."""

    def __init__(self, program: MooseProgram):
        self.program = program
        self.buckets: Dict[str, List[CompiledRule]] = {}
        for cr in compile_program(program):
            self.buckets.setdefault(cr.rule.actions[0].name, []).append(cr)

    def first_actions(self, s: State, g: PartialState, objects: Sequence[str]) -> Set[Tuple[str, Tuple[str, ...]]]:
        """``(schema, args)`` of the first action of every rule grounding."""
        sidx = AtomIndex(s.atoms)
        ugidx = AtomIndex(unachieved_goals(s, g))
        out = set()
        for name, rules in self.buckets.items():
            for cr in rules:
                first = cr.rule.actions[0]
                needed = [t for t in first.args if is_variable(t)]
                goals = [(a, sidx) for a in cr.state_atoms] + [(a, ugidx) for a in cr.goal_patterns]
                checks = [
                    (frozenset(t for t in c.args if is_variable(t)), lambda b, c=c: s.satisfies(c.ground(b)))
                    for c in cr.numeric
                ]
                for binding in match(goals, checks=checks):
                    # other unbound variables take any object; enumerating
                    # them would only repeat the same first action
                    if not objects and any(v not in binding for v in cr.rule.vars):
                        continue
                    for full in extend_free(binding, needed, objects):
                        out.add((name, tuple(full.get(t, t) for t in first.args)))
        return out

    def allowed(self, problem: ProblemDef, s: State) -> FrozenSet[GroundAction]:
        dom = problem.domain
        out = set()
        for name, args in self.first_actions(s, problem.goal, problem.object_names):
            a = dom.schemas[name].ground(args)
            if applicable(s, a):
                out.add(a)
        return frozenset(out)


def allowed_actions(program: MooseProgram, s: State, problem: ProblemDef) -> FrozenSet[GroundAction]:
    """Applicable first actions of all groundings of all rules in ``s``."""
    return AllowedActionFilter(program).allowed(problem, s)


def pruned_astar(
    problem: ProblemDef,
    program: MooseProgram,
    h: str = "hmax",
    limits: SearchLimits = SearchLimits(),
    task: Optional[GroundTask] = None,
) -> SearchResult:
    """A* whose successors are restricted to rule-allowed actions."""
    program.check_domain(problem.domain)
    task = ground(problem) if task is None else task
    filt = AllowedActionFilter(program)
    cache: Dict[SearchState, List[int]] = {}

    def successors(s: SearchState) -> List[int]:
        hit = cache.get(s)
        if hit is None:
            state = task.decode(s)
            ids = []
            for key in filt.first_actions(state, problem.goal, problem.object_names):
                i = task.action_ids.get(key)
                if i is not None:
                    ids.append(i)
            hit = cache[s] = sorted(ids)
        return hit

    return astar(task, h, limits, successors)


# ---------------------------------------------------------------- axiom export


@dataclass(frozen=True)
class AxiomDocument:
    domain: str
    problem: str


def _pred_g(p: str) -> str:
    return f"{p}_g"


def _pred_ug(p: str) -> str:
    return f"{p}_ug"


def _pred_pi(a: str) -> str:
    return f"{a}_pi"


GUARD = "pi_never"


def _atom_text(pred: str, args: Sequence[str]) -> str:
    return "(" + " ".join((pred,) + tuple(args)) + ")"


def _rule_body(cr: CompiledRule, head_vars: Sequence[str]) -> str:
    """Formula over ``head_vars`` true iff the rule's first action is
    ``schema(head_vars)`` under some grounding."""
    rule = cr.rule
    first = rule.actions[0]
    ren: Dict[str, str] = {}
    eqs = []
    for h, t in zip(head_vars, first.args):
        if is_variable(t) and t not in ren:
            ren[t] = h
        else:
            eqs.append(f"(= {h} {ren.get(t, t)})")
    # remaining rule variables are existential; rename to avoid clashes
    rest = [v for v in rule.vars if v not in ren]
    for i, v in enumerate(rest):
        ren[v] = f"?e{i}"
    lits = eqs + [_atom_text(a.predicate, [ren.get(t, t) for t in a.args]) for a in cr.state_atoms]
    lits += [_atom_text(_pred_ug(a.predicate), [ren.get(t, t) for t in a.args]) for a in cr.goal_atoms]
    body = "(and " + " ".join(lits) + ")" if lits else "(and)"
    if rest:
        body = "(exists (" + " ".join(ren[v] for v in rest) + ") " + body + ")"
    return body


def export_axioms(problem: ProblemDef, program: MooseProgram, flavor: str = "derived") -> AxiomDocument:
    """PDDL domain and problem text encoding ``program`` as action filters.

    Types are compiled away into ordinary unary predicates.  Each schema
    ``a`` gets a derived predicate ``a_pi`` over its parameters, required
    by its precondition; schemas that start no rule are guarded off.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}; choose from {FLAVORS}")
    dom = problem.domain
    program.check_domain(dom)
    if any(r.is_numeric for r in program.rules) or dom.functions:
        raise PlanningError("axiom export supports propositional programs and domains only")
    buckets: Dict[str, List[CompiledRule]] = {}
    for cr in compile_program(program):
        buckets.setdefault(cr.rule.actions[0].name, []).append(cr)

    preds = sorted(dom.predicates.values())
    type_preds = sorted(dom.types)
    lines = [f"(define (domain {dom.name}_moose)"]
    reqs = [":strips"] + ([":derived-predicates"] if flavor == "derived" else []) + [
        ":negative-preconditions",
        ":existential-preconditions",
        ":disjunctive-preconditions",
        ":equality",
    ]
    lines.append(" (:requirements " + " ".join(reqs) + ")")
    if dom.constants:
        lines.append(" (:constants " + " ".join(sorted(dom.constants)) + ")")
    decls = []

    def decl(name: str, arity: int) -> str:
        return _atom_text(name, [f"?x{i}" for i in range(arity)])

    for p in preds:
        decls += [decl(p.name, p.arity), decl(_pred_g(p.name), p.arity), decl(_pred_ug(p.name), p.arity)]
    decls += [decl(t, 1) for t in type_preds]
    schemas = sorted(dom.schemas.values(), key=lambda s: s.name)
    if flavor == "derived":
        decls += [decl(_pred_pi(s.name), len(s.params)) for s in schemas]
    decls.append(decl(GUARD, 0))
    lines.append(" (:predicates")
    lines += [f"  {d}" for d in decls]
    lines.append(" )")
    for p in preds:
        xs = [f"?x{i}" for i in range(p.arity)]
        lines.append(
            f" (:derived {_atom_text(_pred_ug(p.name), xs)}"
            f" (and {_atom_text(_pred_g(p.name), xs)} (not {_atom_text(p.name, xs)})))"
        )
    for schema in schemas:
        head = list(schema.variables)
        rules = buckets.get(schema.name, [])
        bodies = [_rule_body(cr, head) for cr in rules]
        if flavor == "derived":
            for b in bodies:
                lines.append(f" (:derived {_atom_text(_pred_pi(schema.name), head)} {b})")
            guard = _atom_text(_pred_pi(schema.name), head) if bodies else f"({GUARD})"
        else:
            if not bodies:
                guard = f"({GUARD})"
            elif len(bodies) == 1:
                guard = bodies[0]
            else:
                guard = "(or " + " ".join(bodies) + ")"
        lines.append(_schema_text(schema, guard))
    lines.append(")")
    domain_text = "\n".join(lines) + "\n"

    # problem: untyped objects, type facts and goal mirrors in init
    plines = [f"(define (problem {problem.name}_moose)", f" (:domain {dom.name}_moose)"]
    objs = [o for o in problem.object_names if o not in dom.constants]
    plines.append(" (:objects " + " ".join(objs) + ")")
    init = sorted(problem.init | problem.type_atoms) + sorted(
        Atom(_pred_g(a.predicate), a.args) for a in problem.goal.atoms
    )
    plines.append(" (:init")
    plines += [f"  {a}" for a in init]
    plines.append(" )")
    goal = sorted(problem.goal.atoms)
    plines.append(" (:goal (and " + " ".join(map(str, goal)) + "))")
    plines.append(")")
    return AxiomDocument(domain_text, "\n".join(plines) + "\n")


def _schema_text(schema, guard: str) -> str:
    pre = [str(a) for a in sorted(schema.full_pre)] + [guard]
    eff = [str(a) for a in sorted(schema.add)] + [f"(not {a})" for a in sorted(schema.delete)]
    params = " ".join(schema.variables)
    return (
        f" (:action {schema.name}\n"
        f"  :parameters ({params})\n"
        f"  :precondition (and {' '.join(pre)})\n"
        f"  :effect (and {' '.join(eff)}))"
    )
