"""Rule synthesis: decompose goals, plan optimally, regress, lift, rank.

A rule pairs a lifted state condition and a lifted set of unachieved goal
atoms with a lifted macro.  Rules are ranked by a precedence pair
``(-goal_block_size, macro_length)``, compared lexicographically; with
singleton goal blocks this is ``(-1, cost_to_go)``.
"""
from __future__ import annotations

import functools
import itertools
import json
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from moose.model import (
    Atom,
    DomainDef,
    GroundAction,
    NumericCondition,
    PartialState,
    PlanningError,
    ProblemDef,
    is_variable,
)
from moose.pddl import Token, parse_sexpr
from moose.planner import GroundTask, GroundingLimitError, SearchLimits, ground, optimal_plan
from moose.semantics import regr, succ_seq

logger = logging.getLogger(__name__)

PROGRAM_VERSION = 1

Precedence = Tuple[int, int]
GoalItem = Union[Atom, NumericCondition]


@dataclass(frozen=True, order=True)
class ActionCall:
    """A (possibly lifted) action: schema name plus argument terms."""

    name: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    def ground(self, binding: Mapping[str, str]) -> "ActionCall":
        return ActionCall(self.name, tuple(binding.get(t, t) for t in self.args))


@dataclass(frozen=True)
class MooseRule:
    vars: Tuple[str, ...]
    state_cond: frozenset  # of Atom
    goal_cond: frozenset  # of Atom
    actions: Tuple[ActionCall, ...]
    numeric_cond: frozenset = frozenset()  # of NumericCondition, part of the state condition
    numeric_goal: frozenset = frozenset()  # of NumericCondition, matched against unmet numeric goals

    def __post_init__(self):
        if not self.actions:
            raise PlanningError("a rule needs at least one action")
        declared = set(self.vars)
        for term in self.terms():
            if is_variable(term) and term not in declared:
                raise PlanningError(f"rule uses undeclared variable {term}")

    def terms(self) -> Iterable[str]:
        for a in itertools.chain(self.state_cond, self.goal_cond):
            yield from a.args
        for c in itertools.chain(self.numeric_cond, self.numeric_goal):
            yield from c.args
        for call in self.actions:
            yield from call.args

    @property
    def is_numeric(self) -> bool:
        return bool(self.numeric_cond or self.numeric_goal)

    @property
    def overlapping(self) -> bool:
        return bool(self.state_cond & self.goal_cond)

    def __str__(self) -> str:
        cond = ", ".join(map(str, sorted(self.state_cond))) or "-"
        if self.numeric_cond:
            cond += ", " + ", ".join(map(str, sorted(self.numeric_cond)))
        goal = ", ".join([str(a) for a in sorted(self.goal_cond)] + [str(c) for c in sorted(self.numeric_goal)]) or "-"
        acts = " ".join(map(str, self.actions))
        return f"if {cond} | goals {goal} then {acts}"


# ---------------------------------------------------------------- lifting


def lift(
    s: PartialState,
    g: Iterable[GoalItem],
    alpha: Sequence[GroundAction],
    constants: Iterable[str] = (),
) -> MooseRule:
    """Replace every non-constant object by a variable.

    ``g`` may mix atoms and numeric goal conditions.  Variables are numbered
    ``?v0, ?v1, ...`` in order of first occurrence in the sorted state
    atoms, the sorted numeric conditions, the sorted goal atoms, the sorted
    numeric goals and finally the actions.
    """
    constants = set(constants)
    names: Dict[str, str] = {}

    def var(o: str) -> str:
        if o in constants:
            return o
        if o not in names:
            names[o] = f"?v{len(names)}"
        return names[o]

    goal = sorted({x for x in g if isinstance(x, Atom)})
    goal_num = sorted({x for x in g if isinstance(x, NumericCondition)})
    state_atoms = [Atom(a.predicate, tuple(var(o) for o in a.args)) for a in sorted(s.atoms)]
    numeric = [
        NumericCondition(c.function, tuple(var(o) for o in c.args), c.comparator, c.bound) for c in sorted(s.numeric)
    ]
    goal_atoms = [Atom(a.predicate, tuple(var(o) for o in a.args)) for a in goal]
    goal_numeric = [
        NumericCondition(c.function, tuple(var(o) for o in c.args), c.comparator, c.bound) for c in goal_num
    ]
    actions = tuple(ActionCall(a.name, tuple(var(o) for o in a.args)) for a in alpha)
    return MooseRule(
        vars=tuple(names.values()),
        state_cond=frozenset(state_atoms),
        goal_cond=frozenset(goal_atoms),
        actions=actions,
        numeric_cond=frozenset(numeric),
        numeric_goal=frozenset(goal_numeric),
    )


# ---------------------------------------------------------------- canonical keys

_MAX_CANON_PERMUTATIONS = 40320


def _rename_rule(rule: MooseRule, f: Mapping[str, str]) -> Tuple[str, ...]:
    def atom(a: Atom) -> str:
        return str(Atom(a.predicate, tuple(f.get(t, t) for t in a.args)))

    def num(c: NumericCondition) -> str:
        return str(NumericCondition(c.function, tuple(f.get(t, t) for t in c.args), c.comparator, c.bound))

    return (
        "S:" + " ".join(sorted(atom(a) for a in rule.state_cond)),
        "N:" + " ".join(sorted(num(c) for c in rule.numeric_cond)),
        "G:" + " ".join(sorted(atom(a) for a in rule.goal_cond)),
        "H:" + " ".join(sorted(num(c) for c in rule.numeric_goal)),
        "A:" + " ".join(str(c.ground(f)) for c in rule.actions),
    )


@functools.lru_cache(maxsize=65536)
def canonical_form(rule: MooseRule) -> Tuple[str, ...]:
    """A key equal for two rules iff they agree up to variable renaming.

    Variables in the macro are numbered by first occurrence (the macro is
    ordered, so this is forced).  Condition-only variables are grouped by an
    occurrence signature and the lexicographically smallest rendering over
    permutations within each group is taken.
    """
    f: Dict[str, str] = {}
    for call in rule.actions:
        for t in call.args:
            if is_variable(t) and t not in f:
                f[t] = f"?c{len(f)}"
    rest = [v for v in rule.vars if v not in f]
    if not rest:
        return _rename_rule(rule, f)

    def signature(v: str) -> Tuple:
        occ = []
        for tag, atoms in (("s", rule.state_cond), ("g", rule.goal_cond)):
            for a in atoms:
                for i, t in enumerate(a.args):
                    if t == v:
                        occ.append((tag, a.predicate, i, len(a.args)))
        for tag, conds in (("n", rule.numeric_cond), ("h", rule.numeric_goal)):
            for c in conds:
                for i, t in enumerate(c.args):
                    if t == v:
                        occ.append((tag, c.function, i, c.comparator, str(c.bound)))
        return tuple(sorted(occ))

    groups: Dict[Tuple, List[str]] = {}
    for v in rest:
        groups.setdefault(signature(v), []).append(v)
    ordered = [groups[k] for k in sorted(groups)]
    slots = []
    n = len(f)
    for grp in ordered:
        slots.append([f"?c{n + i}" for i in range(len(grp))])
        n += len(grp)
    total = math.prod(math.factorial(len(g)) for g in ordered)
    if total > _MAX_CANON_PERMUTATIONS:
        # too symmetric to search exhaustively; fall back to a fixed order
        # (dedup may then miss some equal rules, never merges distinct ones)
        for grp, names in zip(ordered, slots):
            f.update(zip(sorted(grp), names))
        return _rename_rule(rule, f)
    best = None
    for choice in itertools.product(*(itertools.permutations(g) for g in ordered)):
        trial = dict(f)
        for perm, names in zip(choice, slots):
            trial.update(zip(perm, names))
        key = _rename_rule(rule, trial)
        if best is None or key < best:
            best = key
    return best


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class ProgramEntry:
    rule: MooseRule
    precedence: Precedence
    provenance: Mapping = field(default_factory=dict, compare=False)

    @property
    def key(self) -> Tuple[str, ...]:
        return canonical_form(self.rule)


@dataclass
class MooseProgram:
    """Rules sorted by ascending precedence (ties by canonical key)."""

    domain: str
    entries: List[ProgramEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries = _dedup(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def rules(self) -> List[MooseRule]:
        return [e.rule for e in self.entries]

    @property
    def keys(self) -> List[Tuple[str, ...]]:
        return [e.key for e in self.entries]

    def merge(self, other: "MooseProgram") -> "MooseProgram":
        if other.domain != self.domain:
            raise PlanningError(f"cannot merge programs for {self.domain} and {other.domain}")
        return MooseProgram(self.domain, self.entries + other.entries)

    def to_json(self) -> str:
        doc = {
            "v": PROGRAM_VERSION,
            "domain": self.domain,
            "rules": [
                {
                    "vars": list(e.rule.vars),
                    "state_cond": [str(a) for a in sorted(e.rule.state_cond)]
                    + [str(c) for c in sorted(e.rule.numeric_cond)],
                    "goal_cond": [str(a) for a in sorted(e.rule.goal_cond)]
                    + [str(c) for c in sorted(e.rule.numeric_goal)],
                    "actions": [str(c) for c in e.rule.actions],
                    "precedence": list(e.precedence),
                    "provenance": dict(e.provenance),
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=1) + "\n"

    @staticmethod
    def from_json(text: str) -> "MooseProgram":
        doc = json.loads(text)
        if doc.get("v") != PROGRAM_VERSION:
            raise PlanningError(f"unsupported program version {doc.get('v')!r}, expected {PROGRAM_VERSION}")
        entries = []
        for r in doc["rules"]:
            atoms, numeric = [], []
            for text_ in r["state_cond"]:
                item = _parse_item(text_)
                (numeric if isinstance(item, NumericCondition) else atoms).append(item)
            goal_items = [_parse_item(t) for t in r["goal_cond"]]
            goal = [x for x in goal_items if isinstance(x, Atom)]
            goal_num = [x for x in goal_items if isinstance(x, NumericCondition)]
            actions = tuple(ActionCall(a.predicate, a.args) for a in map(_parse_item, r["actions"]))
            rule = MooseRule(
                tuple(r["vars"]), frozenset(atoms), frozenset(goal), actions, frozenset(numeric), frozenset(goal_num)
            )
            entries.append(ProgramEntry(rule, tuple(r["precedence"]), r.get("provenance", {})))
        return MooseProgram(doc["domain"], entries)

    def check_domain(self, domain: DomainDef) -> None:
        if domain.name != self.domain:
            raise PlanningError(f"program is for domain {self.domain}, problem uses {domain.name}")
        for e in self.entries:
            for call in e.rule.actions:
                schema = domain.schemas.get(call.name)
                if schema is None or len(schema.params) != len(call.args):
                    raise PlanningError(f"rule action {call} does not match the domain")


def _parse_item(text: str) -> Union[Atom, NumericCondition]:
    node = parse_sexpr(text)
    words = [t.text for t in node if isinstance(t, Token)]
    if len(node) == 3 and not isinstance(node[1], Token):
        fn = [t.text for t in node[1]]
        return NumericCondition(fn[0], tuple(fn[1:]), words[0], Fraction(node[2].text))
    return Atom(words[0], tuple(words[1:]))


def _dedup(entries: Iterable[ProgramEntry]) -> List[ProgramEntry]:
    best: Dict[Tuple[str, ...], ProgramEntry] = {}
    for e in entries:
        k = e.key
        cur = best.get(k)
        if cur is None or tuple(e.precedence) < tuple(cur.precedence):
            best[k] = ProgramEntry(e.rule, tuple(e.precedence), e.provenance)
    return sorted(best.values(), key=lambda e: (tuple(e.precedence), e.key))


# ---------------------------------------------------------------- extraction


@dataclass(frozen=True)
class ExtractedRule:
    rule: MooseRule
    precedence: Precedence
    suffix_start: int
    binding: Mapping[str, str]


def extract_rules(
    alpha: Sequence[GroundAction],
    g: PartialState,
    constants: Iterable[str] = (),
    conjunctive: bool = False,
    numeric_mode: str = "conjoin",
) -> List[ExtractedRule]:
    """One rule per plan suffix, shortest first.

    ``conjunctive`` drops rules whose state and goal conditions overlap.  If
    regression fails part way, longer suffixes are abandoned.
    """
    constants = tuple(constants)
    out: List[ExtractedRule] = []
    s = g
    n = len(alpha)
    for i in range(n - 1, -1, -1):
        nxt = regr(s, alpha[i], numeric_mode)
        if nxt is None:
            logger.warning("regression failed at step %d of %d; keeping %d shorter suffix rule(s)", i + 1, n, len(out))
            break
        s = nxt
        rule = lift(s, g.items(), alpha[i:], constants)
        if conjunctive and rule.overlapping:
            continue
        binding = _lift_binding(s, g.items(), alpha[i:], constants)
        out.append(ExtractedRule(rule, (-len(g), n - i), i, binding))
    return out


def _lift_binding(s, g, alpha, constants) -> Dict[str, str]:
    """The variable -> object map :func:`lift` used (same numbering)."""
    constants = set(constants)
    names: Dict[str, str] = {}
    objs = [o for a in sorted(s.atoms) for o in a.args]
    objs += [o for c in sorted(s.numeric) for o in c.args]
    objs += [o for a in sorted({x for x in g if isinstance(x, Atom)}) for o in a.args]
    objs += [o for c in sorted({x for x in g if isinstance(x, NumericCondition)}) for o in c.args]
    objs += [o for a in alpha for o in a.args]
    for o in objs:
        if o not in constants and o not in names:
            names[o] = f"?v{len(names)}"
    return {v: o for o, v in names.items()}


# ---------------------------------------------------------------- permutations


def _unrank(rank: int, items: Sequence) -> List:
    pool = list(items)
    out = []
    for i in range(len(pool), 0, -1):
        idx, rank = divmod(rank, math.factorial(i - 1))
        out.append(pool.pop(idx))
    return out


def distinct_permutations(goal: Iterable, n_p: int, seed: Union[int, str, random.Random] = 0) -> List[List]:
    """``min(n_p, n!)`` distinct orderings, sampled uniformly without replacement.

    Items are sorted first so the result depends only on the set and seed.
    """
    if n_p < 1:
        raise ValueError("n_p must be at least 1")
    items = sorted(goal, key=_item_sort_key)
    rng = seed if isinstance(seed, random.Random) else random.Random(str(seed))
    total = math.factorial(len(items))
    k = min(n_p, total)
    if len(items) <= 20:
        return [_unrank(r, items) for r in rng.sample(range(total), k)]
    seen, out = set(), []
    while len(out) < k:
        perm = list(items)
        rng.shuffle(perm)
        t = tuple(map(_item_sort_key, perm))
        if t not in seen:
            seen.add(t)
            out.append(perm)
    return out


def _item_sort_key(item: GoalItem) -> Tuple:
    if isinstance(item, Atom):
        return (0, item.predicate, item.args)
    return (1, item.function, item.args, item.comparator, item.bound)


# ---------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SynthesisConfig:
    n_p: int = 3
    n_r: int = 1
    seed: int = 0
    heuristic: str = "hmax"
    max_expansions: Optional[int] = None
    time_limit: Optional[float] = None
    numeric_mode: str = "conjoin"

    def __post_init__(self):
        if self.n_p < 1 or self.n_r < 1:
            raise ValueError("n_p and n_r must be at least 1")

    @property
    def limits(self) -> SearchLimits:
        return SearchLimits(self.max_expansions, self.time_limit)


@dataclass
class SynthesisStats:
    problem: str
    subproblems: int = 0
    solved: int = 0
    skipped: int = 0
    rules: int = 0


def goal_blocks(order: Sequence, size: int) -> List[List]:
    """Consecutive blocks of ``size`` goals; the last may be shorter."""
    return [list(order[k : k + size]) for k in range(0, len(order), size)]


def synthesize_problem(
    problem: ProblemDef,
    cfg: SynthesisConfig = SynthesisConfig(),
    index: int = 0,
    stats: Optional[SynthesisStats] = None,
) -> MooseProgram:
    """Rules learnt from a single training problem."""
    stats = stats if stats is not None else SynthesisStats(problem.name)
    dom = problem.domain
    constants = tuple(sorted(dom.constants))
    try:
        task = ground(problem)
    except GroundingLimitError as exc:
        logger.warning("%s: %s; skipped", problem.name, exc)
        return MooseProgram(dom.name)
    goal_items: List[GoalItem] = list(problem.goal.items())
    rng = random.Random(f"{cfg.seed}:{index}")
    perms = distinct_permutations(goal_items, cfg.n_p, rng)
    conjunctive = cfg.n_r > 1
    entries: List[ProgramEntry] = []
    s0 = problem.initial_state
    for j, order in enumerate(perms):
        for size in range(1, cfg.n_r + 1):
            s = s0
            for block in goal_blocks(order, size):
                g = PartialState.of(
                    [x for x in block if isinstance(x, Atom)],
                    [x for x in block if isinstance(x, NumericCondition)],
                )
                stats.subproblems += 1
                result = optimal_plan(task.with_init_goal(s, g), cfg.limits, cfg.heuristic)
                if result.outcome == "resource-limit":
                    logger.warning("%s: planner limit on goal %s; treated as unsolvable", problem.name, g)
                if not result.solved:
                    stats.skipped += 1
                    continue
                stats.solved += 1
                plan = result.plan
                for ex in extract_rules(plan, g, constants, conjunctive, cfg.numeric_mode):
                    entries.append(
                        ProgramEntry(
                            ex.rule,
                            ex.precedence,
                            {
                                "problem": problem.name,
                                "permutation": j,
                                "goal": [str(x) for x in g.items()],
                                "plan": [str(a) for a in plan],
                                "suffix": ex.suffix_start,
                                "binding": dict(sorted(ex.binding.items())),
                            },
                        )
                    )
                nxt = succ_seq(s, plan)
                assert nxt is not None, "planner returned an inapplicable plan"
                s = nxt
    program = MooseProgram(dom.name, entries)
    stats.rules = len(program)
    return program


def synthesize(
    train: Sequence[ProblemDef],
    cfg: SynthesisConfig = SynthesisConfig(),
    domain: Optional[DomainDef] = None,
    stats: Optional[List[SynthesisStats]] = None,
) -> MooseProgram:
    """Synthesize a program from ``train``; deterministic for a fixed seed."""
    if domain is None and not train:
        return MooseProgram("")
    domain = domain or train[0].domain
    for p in train:
        if p.domain.name != domain.name:
            raise PlanningError(f"{p.name} belongs to {p.domain.name}, expected {domain.name}")
    program = MooseProgram(domain.name)
    for i, p in enumerate(train):
        st = SynthesisStats(p.name)
        program = program.merge(synthesize_problem(p, cfg, i, st))
        if stats is not None:
            stats.append(st)
    return program
