"""State-transition semantics: progression, regression, goals, validation.

All arithmetic on fluents is exact (``Fraction``); nothing here touches
floating point.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from moose.model import (
    Atom,
    GroundAction,
    NumericCondition,
    PartialState,
    PlanningError,
    ProblemDef,
    State,
    normalise_numeric,
)

Plan = Sequence[GroundAction]

DEFAULT_EQUIVALENCE_LIMIT = 30


def applicable(s: State, a: GroundAction) -> bool:
    if not a.pre <= s.atoms:
        return False
    return all(s.satisfies(c) for c in a.num_pre)


def succ(s: State, a: GroundAction) -> Optional[State]:
    """Successor of ``s`` under ``a``; None when ``a`` is not applicable.

    Deletes are applied before adds, so an atom in both lists stays true.
    """
    if not applicable(s, a):
        return None
    atoms = (s.atoms - a.delete) | a.add
    if not a.num_eff:
        return State(atoms, s.fluents)
    values = dict(s.fluent_map)
    for key, delta in a.num_eff:
        if key not in values:
            raise PlanningError(f"{a} changes unknown fluent {key}")
        values[key] = values[key] + delta
    return State.of(atoms, values)


def succ_seq(s: State, plan: Plan) -> Optional[State]:
    for a in plan:
        s = succ(s, a)
        if s is None:
            return None
    return s


def is_goal(s: State, g: PartialState) -> bool:
    return g.atoms <= s.atoms and all(s.satisfies(c) for c in g.numeric)


def regressable(g: PartialState, a: GroundAction) -> bool:
    """``a`` contributes to ``g`` without destroying any part of it.

    Classical rule: ``add(a) & g`` non-empty and ``del(a) & g`` empty.  An
    additive effect on a fluent constrained by ``g`` also counts as a
    contribution, so purely numeric steps (refuelling, counting) can be
    regressed; for classical goals this is the plain STRIPS definition.
    """
    if a.delete & g.atoms:
        return False
    if a.add & g.atoms:
        return True
    keys = {c.key for c in g.numeric}
    return any(key in keys for key, _ in a.num_eff)


def regr(g: PartialState, a: GroundAction, numeric_mode: str = "conjoin") -> Optional[PartialState]:
    """Regress ``g`` through ``a``.

    Atoms: ``(g - add(a)) | pre(a)``.  A numeric condition ``f >= c`` on a
    fluent that ``a`` increases by ``v`` becomes ``f >= c - v``.

    ``numeric_mode`` decides how a numeric precondition of ``a`` on the
    same fluent combines with the rewritten goal condition:

    * ``"conjoin"`` (default) keeps both and normalises to the stronger one,
      which is sound;
    * ``"override"`` replaces the goal condition by the precondition.

    Returns None if ``g`` is not regressable or the result is unsatisfiable.
    """
    if numeric_mode not in ("conjoin", "override"):
        raise ValueError(f"unknown numeric_mode {numeric_mode!r}")
    if not regressable(g, a):
        return None
    atoms = (g.atoms - a.add) | a.pre
    deltas = dict(a.num_eff)
    pre_keys = {c.key for c in a.num_pre}
    conds: List[NumericCondition] = []
    for c in g.numeric:
        if numeric_mode == "override" and c.key in pre_keys:
            continue
        delta = deltas.get(c.key)
        conds.append(c if delta is None else c.with_bound(c.bound - delta))
    conds.extend(a.num_pre)
    numeric = normalise_numeric(conds)
    if numeric is None:
        return None
    return PartialState(frozenset(atoms), numeric)


def regr_seq(g: PartialState, plan: Plan, numeric_mode: str = "conjoin") -> Optional[PartialState]:
    for a in reversed(plan):
        g = regr(g, a, numeric_mode)
        if g is None:
            return None
    return g


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    step: Optional[int] = None
    reason: str = "ok"
    action: Optional[str] = None
    length: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {"valid": self.valid, "step": self.step, "reason": self.reason, "action": self.action, "length": self.length},
            sort_keys=True,
        )

    def __str__(self) -> str:
        if self.valid:
            return f"valid plan of length {self.length}"
        if self.step is None:
            return f"invalid: {self.reason}"
        return f"invalid at step {self.step} {self.action}: {self.reason}"


def validate_plan(problem: ProblemDef, plan: Plan) -> ValidationReport:
    """Simulate ``plan`` from the initial state; steps are 1-indexed."""
    s = problem.initial_state
    for i, a in enumerate(plan, 1):
        if a.name not in problem.domain.schemas:
            return ValidationReport(False, i, "unknown-action", str(a), len(plan))
        if any(o not in problem.objects for o in a.args):
            return ValidationReport(False, i, "unknown-object", str(a), len(plan))
        nxt = succ(s, a)
        if nxt is None:
            return ValidationReport(False, i, "inapplicable", str(a), len(plan))
        s = nxt
    if not is_goal(s, problem.goal):
        return ValidationReport(False, None, "goal-not-satisfied", None, len(plan))
    return ValidationReport(True, None, "ok", None, len(plan))


# ---------------------------------------------------------------- equivalence


class ProblemTooLargeError(PlanningError):
    pass


def _map_atoms(atoms: Iterable[Atom], f: Mapping[str, str]) -> frozenset:
    return frozenset(Atom(a.predicate, tuple(f[o] for o in a.args)) for a in atoms)


def _map_numeric(conds: Iterable[NumericCondition], f: Mapping[str, str]) -> frozenset:
    return frozenset(
        NumericCondition(c.function, tuple(f[o] for o in c.args), c.comparator, c.bound) for c in conds
    )


def _map_fluents(fluents: Mapping, f: Mapping[str, str]) -> Dict:
    return {(k[0], tuple(f[o] for o in k[1])): v for k, v in fluents.items()}


def is_witness(p1: ProblemDef, p2: ProblemDef, f: Mapping[str, str]) -> bool:
    """True iff ``f`` is a constant-fixing bijection mapping p1 onto p2."""
    if set(f) != set(p1.objects) or set(f.values()) != set(p2.objects) or len(set(f.values())) != len(f):
        return False
    if any(f[c] != c for c in p1.domain.constants):
        return False
    s1, s2 = p1.initial_state, p2.initial_state
    return (
        _map_atoms(s1.atoms, f) == s2.atoms
        and _map_atoms(p1.goal.atoms, f) == p2.goal.atoms
        and _map_numeric(p1.goal.numeric, f) == p2.goal.numeric
        and _map_fluents(s1.fluent_map, f) == s2.fluent_map
    )


def _signatures(p: ProblemDef) -> Dict[str, Tuple]:
    """Renaming-invariant fingerprint of each object's role."""
    sig: Dict[str, Dict] = {o: {} for o in p.objects}

    def bump(key, o):
        sig[o][key] = sig[o].get(key, 0) + 1

    for a in p.initial_state.atoms:
        for i, o in enumerate(a.args):
            bump(("s", a.predicate, i), o)
    for a in p.goal.atoms:
        for i, o in enumerate(a.args):
            bump(("g", a.predicate, i), o)
    for c in p.goal.numeric:
        for i, o in enumerate(c.args):
            bump(("n", c.function, i, c.comparator, c.bound), o)
    for (fn, args), v in p.initial_state.fluents:
        for i, o in enumerate(args):
            bump(("f", fn, i, v), o)
    return {o: tuple(sorted(d.items(), key=repr)) for o, d in sig.items()}


def find_equivalence(
    p1: ProblemDef, p2: ProblemDef, limit: int = DEFAULT_EQUIVALENCE_LIMIT
) -> Optional[Dict[str, str]]:
    """Search for an object bijection witnessing ``p1 ~ p2``.

    Backtracking over objects in order of fewest candidates; candidates must
    share the per-predicate position signature, and every atom whose
    objects are all assigned is checked as soon as it becomes ground.
    """
    if p1.domain.name != p2.domain.name:
        raise PlanningError("problems belong to different domains")
    if max(len(p1.objects), len(p2.objects)) > limit:
        raise ProblemTooLargeError(f"more than {limit} objects")
    if len(p1.objects) != len(p2.objects):
        return None
    s1, s2 = p1.initial_state, p2.initial_state
    if len(s1.atoms) != len(s2.atoms) or len(p1.goal) != len(p2.goal):
        return None
    sig1, sig2 = _signatures(p1), _signatures(p2)
    if sorted(sig1.values()) != sorted(sig2.values()):
        return None
    constants = set(p1.domain.constants)
    f: Dict[str, str] = {c: c for c in constants}
    for c in constants:
        if sig1[c] != sig2.get(c):
            return None
    free = [o for o in p1.object_names if o not in constants]
    targets = [o for o in p2.object_names if o not in constants]
    cands = {o: [t for t in targets if sig2[t] == sig1[o]] for o in free}
    order = sorted(free, key=lambda o: (len(cands[o]), o))

    # facts touching each object, to check incrementally
    facts1: Dict[str, List[Tuple[str, Atom]]] = {o: [] for o in p1.objects}
    for kind, atoms in (("s", s1.atoms), ("g", p1.goal.atoms)):
        for a in atoms:
            for o in set(a.args):
                facts1[o].append((kind, a))
    goal2 = p2.goal.atoms
    used = set(constants)

    def consistent(o: str) -> bool:
        for kind, a in facts1[o]:
            if all(x in f for x in a.args):
                img = Atom(a.predicate, tuple(f[x] for x in a.args))
                if img not in (s2.atoms if kind == "s" else goal2):
                    return False
        return True

    def search(i: int) -> bool:
        if i == len(order):
            return is_witness(p1, p2, f)
        o = order[i]
        for t in cands[o]:
            if t in used:
                continue
            f[o] = t
            used.add(t)
            if consistent(o) and search(i + 1):
                return True
            del f[o]
            used.discard(t)
        return False

    return dict(f) if search(0) else None


def map_plan(f: Mapping[str, str], plan: Plan) -> List[GroundAction]:
    """Rename the objects of every action through ``f``."""
    out = []
    for a in plan:
        missing = [o for o in a.args if o not in f]
        if missing:
            raise PlanningError(f"{a}: objects {missing} not mapped")
        out.append(a.schema.ground(tuple(f[o] for o in a.args)))
    return out


def map_problem(p: ProblemDef, f: Mapping[str, str], name: Optional[str] = None) -> ProblemDef:
    """The image of ``p`` under an object renaming."""
    objects = {f[o]: t for o, t in p.objects.items()}
    return ProblemDef(
        name=name or p.name,
        domain=p.domain,
        objects=objects,
        init=_map_atoms(p.init, f),
        goal=PartialState(_map_atoms(p.goal.atoms, f), _map_numeric(p.goal.numeric, f)),
        init_fluents=_map_fluents(p.init_fluents, f),
    )


def ground_all_actions(problem: ProblemDef) -> List[GroundAction]:
    """Every instantiation of every schema over the problem's objects,
    filtered only by parameter types."""
    out = []
    for schema in sorted(problem.domain.schemas.values(), key=lambda s: s.name):
        choices = [problem.objects_of_type(t) for _, t in schema.params]
        for args in product(*choices):
            out.append(schema.ground(args))
    return out

