"""Core data model for lifted and ground planning constructs.

Terms are plain strings: variables carry a leading ``?``, everything else is
an object (or domain constant).  All values are immutable once built.

Typing is supported by compiling each non-root type into a unary "type
atom": problems add ``t(o)`` for every object ``o`` of type ``t`` (and each
supertype), schemas add ``t(?x)`` to the precondition of a typed parameter.
The rest of the package therefore only ever sees untyped STRIPS.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

ROOT_TYPE = "object"
COMPARATORS = (">=", ">", "=")

FluentKey = Tuple[str, Tuple[str, ...]]


class PlanningError(ValueError):
    """Base class for malformed domains, problems and plans."""


class ArityError(PlanningError):
    pass


class UnknownSymbolError(PlanningError):
    pass


def is_variable(term: str) -> bool:
    return term.startswith("?")


def substitute(args: Sequence[str], binding: Mapping[str, str]) -> Tuple[str, ...]:
    """Replace every term that has an entry in ``binding``."""
    return tuple(binding.get(t, t) for t in args)


def format_number(value: Fraction) -> str:
    """Exact decimal rendering of a rational; PDDL has no fraction syntax."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{value} has no finite decimal expansion")
    digits = max(twos, fives)
    scaled = value * 10**digits
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


@dataclass(frozen=True, order=True)
class Predicate:
    name: str
    arity: int
    arg_types: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.arg_types and len(self.arg_types) != self.arity:
            raise ArityError(f"predicate {self.name}: {len(self.arg_types)} types for arity {self.arity}")


@dataclass(frozen=True, order=True)
class FunctionSymbol:
    name: str
    arity: int
    arg_types: Tuple[str, ...] = ()


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(t) for t in self.args)

    def ground(self, binding: Mapping[str, str]) -> "Atom":
        return Atom(self.predicate, substitute(self.args, binding))


@dataclass(frozen=True, order=True)
class NumericCondition:
    """``function(args) comparator bound`` with comparator in {>=, >, =}."""

    function: str
    args: Tuple[str, ...]
    comparator: str
    bound: Fraction

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise PlanningError(f"unsupported comparator {self.comparator!r}")
        object.__setattr__(self, "bound", Fraction(self.bound))

    @property
    def key(self) -> FluentKey:
        return (self.function, self.args)

    def holds(self, value: Fraction) -> bool:
        if self.comparator == ">=":
            return value >= self.bound
        if self.comparator == ">":
            return value > self.bound
        return value == self.bound

    def ground(self, binding: Mapping[str, str]) -> "NumericCondition":
        return NumericCondition(self.function, substitute(self.args, binding), self.comparator, self.bound)

    def with_bound(self, bound: Fraction) -> "NumericCondition":
        return NumericCondition(self.function, self.args, self.comparator, bound)

    def __str__(self) -> str:
        fn = "(" + " ".join((self.function,) + self.args) + ")"
        return f"({self.comparator} {fn} {format_number(self.bound)})"


@dataclass(frozen=True, order=True)
class NumericEffect:
    """``function(args) += delta``."""

    function: str
    args: Tuple[str, ...]
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))

    @property
    def key(self) -> FluentKey:
        return (self.function, self.args)

    def ground(self, binding: Mapping[str, str]) -> "NumericEffect":
        return NumericEffect(self.function, substitute(self.args, binding), self.delta)


@dataclass(frozen=True)
class ActionSchema:
    """A lifted action.  ``params`` pairs each variable with its declared type.

    ``pre`` holds the preconditions as written; :attr:`type_atoms` are the
    compiled typing preconditions and are added by :meth:`ground`.
    """

    name: str
    params: Tuple[Tuple[str, str], ...]
    pre: FrozenSet[Atom] = frozenset()
    add: FrozenSet[Atom] = frozenset()
    delete: FrozenSet[Atom] = frozenset()
    num_pre: FrozenSet[NumericCondition] = frozenset()
    num_eff: FrozenSet[NumericEffect] = frozenset()

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(v for v, _ in self.params)

    @property
    def type_atoms(self) -> FrozenSet[Atom]:
        return frozenset(Atom(t, (v,)) for v, t in self.params if t != ROOT_TYPE)

    @property
    def full_pre(self) -> FrozenSet[Atom]:
        return self.pre | self.type_atoms

    def ground(self, args: Sequence[str]) -> "GroundAction":
        args = tuple(args)
        if len(args) != len(self.params):
            raise ArityError(f"{self.name} expects {len(self.params)} arguments, got {len(args)}")
        binding = dict(zip(self.variables, args))
        effects: Dict[FluentKey, Fraction] = {}
        for eff in self.num_eff:
            g = eff.ground(binding)
            effects[g.key] = effects.get(g.key, Fraction(0)) + g.delta
        return GroundAction(
            name=self.name,
            args=args,
            schema=self,
            pre=frozenset(a.ground(binding) for a in self.full_pre),
            add=frozenset(a.ground(binding) for a in self.add),
            delete=frozenset(a.ground(binding) for a in self.delete),
            num_pre=frozenset(c.ground(binding) for c in self.num_pre),
            num_eff=tuple(sorted(effects.items())),
        )


@dataclass(frozen=True)
class GroundAction:
    """An instantiated schema.  Identity is ``(name, args)`` only."""

    name: str
    args: Tuple[str, ...]
    schema: ActionSchema = field(compare=False, repr=False)
    pre: FrozenSet[Atom] = field(compare=False, repr=False, default=frozenset())
    add: FrozenSet[Atom] = field(compare=False, repr=False, default=frozenset())
    delete: FrozenSet[Atom] = field(compare=False, repr=False, default=frozenset())
    num_pre: FrozenSet[NumericCondition] = field(compare=False, repr=False, default=frozenset())
    num_eff: Tuple[Tuple[FluentKey, Fraction], ...] = field(compare=False, repr=False, default=())

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    def __lt__(self, other: "GroundAction") -> bool:
        return (self.name, self.args) < (other.name, other.args)

    @property
    def objects(self) -> Tuple[str, ...]:
        return self.args


@dataclass(frozen=True)
class DomainDef:
    name: str
    predicates: Mapping[str, Predicate]
    schemas: Mapping[str, ActionSchema]
    functions: Mapping[str, FunctionSymbol] = field(default_factory=dict)
    constants: Mapping[str, str] = field(default_factory=dict)
    types: Mapping[str, str] = field(default_factory=dict)
    requirements: Tuple[str, ...] = ()

    def __post_init__(self):
        clash = set(self.predicates) & set(self.functions)
        if clash:
            raise PlanningError(f"names used as both predicate and function: {sorted(clash)}")
        clash = set(self.predicates) & set(self.types)
        if clash:
            raise PlanningError(f"type names collide with predicates: {sorted(clash)}")
        for t, parent in self.types.items():
            if parent != ROOT_TYPE and parent not in self.types:
                raise UnknownSymbolError(f"type {t} has undeclared parent {parent}")
        for schema in self.schemas.values():
            self._check_schema(schema)

    def _check_schema(self, schema: ActionSchema) -> None:
        names = set(schema.variables)
        if len(names) != len(schema.params):
            raise PlanningError(f"{schema.name}: duplicate parameter")
        for _, t in schema.params:
            self.check_type(t)
        for atom in schema.pre | schema.add | schema.delete:
            self.check_atom(atom)
            for term in atom.args:
                if is_variable(term) and term not in names:
                    raise UnknownSymbolError(f"{schema.name}: free variable {term} in {atom}")
                if not is_variable(term) and term not in self.constants:
                    raise UnknownSymbolError(f"{schema.name}: unknown constant {term}")
        for item in tuple(schema.num_pre) + tuple(schema.num_eff):
            self.check_function(item.function, item.args)
            for term in item.args:
                if is_variable(term) and term not in names:
                    raise UnknownSymbolError(f"{schema.name}: free variable {term}")

    def check_type(self, t: str) -> None:
        if t != ROOT_TYPE and t not in self.types:
            raise UnknownSymbolError(f"unknown type {t}")

    def check_atom(self, atom: Atom) -> None:
        pred = self.predicates.get(atom.predicate)
        if pred is None:
            if atom.predicate in self.types and len(atom.args) == 1:
                return
            raise UnknownSymbolError(f"unknown predicate {atom.predicate}")
        if pred.arity != len(atom.args):
            raise ArityError(f"{atom}: {atom.predicate} has arity {pred.arity}")

    def check_function(self, name: str, args: Sequence[str]) -> None:
        fn = self.functions.get(name)
        if fn is None:
            raise UnknownSymbolError(f"unknown function {name}")
        if fn.arity != len(args):
            raise ArityError(f"({name} {' '.join(args)}): arity is {fn.arity}")

    def ancestors(self, t: str) -> Tuple[str, ...]:
        """``t`` followed by its supertypes, excluding the root type."""
        out = []
        while t != ROOT_TYPE:
            out.append(t)
            t = self.types[t]
        return tuple(out)

    def is_subtype(self, t: str, parent: str) -> bool:
        return parent == ROOT_TYPE or parent in self.ancestors(t)

    @property
    def type_predicates(self) -> FrozenSet[str]:
        return frozenset(self.types)


@dataclass(frozen=True)
class PartialState:
    """A conjunction of ground atoms and numeric conditions.

    No closed-world reading: it is satisfied by every state containing the
    atoms and meeting the numeric conditions.  Numeric conditions are kept
    normalised, at most one per fluent (see :func:`normalise_numeric`).
    """

    atoms: FrozenSet[Atom] = frozenset()
    numeric: FrozenSet[NumericCondition] = frozenset()

    @staticmethod
    def of(atoms: Iterable[Atom] = (), numeric: Iterable[NumericCondition] = ()) -> "PartialState":
        norm = normalise_numeric(numeric)
        if norm is None:
            raise PlanningError("inconsistent numeric conditions")
        return PartialState(frozenset(atoms), norm)

    def __len__(self) -> int:
        return len(self.atoms) + len(self.numeric)

    def items(self) -> Tuple[object, ...]:
        """Atoms then numeric conditions, each block sorted."""
        return tuple(sorted(self.atoms)) + tuple(sorted(self.numeric))

    def __str__(self) -> str:
        return "{" + ", ".join(str(x) for x in self.items()) + "}"


def normalise_numeric(conds: Iterable[NumericCondition]) -> Optional[FrozenSet[NumericCondition]]:
    """Collapse conditions per fluent to the single strongest one.

    Returns None when the conjunction is unsatisfiable, e.g. ``f = 2`` with
    ``f >= 5``.
    """
    by_key: Dict[FluentKey, list] = {}
    for c in conds:
        by_key.setdefault(c.key, []).append(c)
    out = []
    for group in by_key.values():
        eqs = {c.bound for c in group if c.comparator == "="}
        if len(eqs) > 1:
            return None
        if eqs:
            (value,) = eqs
            if not all(c.holds(value) for c in group):
                return None
            out.append(next(c for c in group if c.comparator == "="))
            continue
        # strongest lower bound; '>' beats '>=' at the same bound
        out.append(max(group, key=lambda c: (c.bound, c.comparator == ">")))
    return frozenset(out)


@dataclass(frozen=True)
class State:
    """A closed-world state: true atoms plus an exact fluent assignment."""

    atoms: FrozenSet[Atom]
    fluents: Tuple[Tuple[FluentKey, Fraction], ...] = ()

    @staticmethod
    def of(atoms: Iterable[Atom], fluents: Optional[Mapping[FluentKey, Fraction]] = None) -> "State":
        items = tuple(sorted((k, Fraction(v)) for k, v in (fluents or {}).items()))
        return State(frozenset(atoms), items)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    @cached_property
    def fluent_map(self) -> Dict[FluentKey, Fraction]:
        return dict(self.fluents)

    def value(self, key: FluentKey) -> Fraction:
        try:
            return self.fluent_map[key]
        except KeyError:
            raise UnknownSymbolError(f"no value for fluent {key}") from None

    def satisfies(self, cond: NumericCondition) -> bool:
        value = self.fluent_map.get(cond.key)
        return value is not None and cond.holds(value)

    def __str__(self) -> str:
        parts = [str(a) for a in sorted(self.atoms)]
        parts += [f"(= ({' '.join((k[0],) + k[1])}) {format_number(v)})" for k, v in self.fluents]
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class ProblemDef:
    """A planning problem.  ``objects`` maps every object (constants
    included) to its declared type."""

    name: str
    domain: DomainDef = field(repr=False)
    objects: Mapping[str, str]
    init: FrozenSet[Atom]
    goal: PartialState
    init_fluents: Mapping[FluentKey, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        dom = self.domain
        for c, t in dom.constants.items():
            if self.objects.get(c) != t:
                raise PlanningError(f"constant {c} missing from problem objects")
        for o, t in self.objects.items():
            if is_variable(o):
                raise PlanningError(f"object name {o} looks like a variable")
            dom.check_type(t)
        for atom in self.init | self.goal.atoms:
            dom.check_atom(atom)
            self._check_objects(atom.args, atom)
        for key in self.init_fluents:
            dom.check_function(*key)
            self._check_objects(key[1], key)
        for cond in self.goal.numeric:
            dom.check_function(cond.function, cond.args)
            self._check_objects(cond.args, cond)

    def _check_objects(self, args: Sequence[str], where: object) -> None:
        for o in args:
            if o not in self.objects:
                raise UnknownSymbolError(f"unknown object {o} in {where}")

    @property
    def object_names(self) -> Tuple[str, ...]:
        return tuple(sorted(self.objects))

    def objects_of_type(self, t: str) -> Tuple[str, ...]:
        return tuple(o for o in self.object_names if self.domain.is_subtype(self.objects[o], t))

    @cached_property
    def type_atoms(self) -> FrozenSet[Atom]:
        return frozenset(Atom(t, (o,)) for o, ot in self.objects.items() for t in self.domain.ancestors(ot))

    def ground_fluents(self) -> Iterator[FluentKey]:
        from itertools import product

        for fn in sorted(self.domain.functions.values()):
            types = fn.arg_types or (ROOT_TYPE,) * fn.arity
            for args in product(*(self.objects_of_type(t) for t in types)):
                yield (fn.name, tuple(args))

    @cached_property
    def initial_state(self) -> State:
        fluents: Dict[FluentKey, Fraction] = {}
        missing = 0
        for key in self.ground_fluents():
            if key in self.init_fluents:
                fluents[key] = Fraction(self.init_fluents[key])
            else:
                fluents[key] = Fraction(0)
                missing += 1
        for key, value in self.init_fluents.items():
            fluents[key] = Fraction(value)
        if missing:
            logger.warning("%s: %d fluent(s) without initial value, defaulting to 0", self.name, missing)
        return State.of(self.init | self.type_atoms, fluents)

    def with_state(self, state: State, goal: Optional[PartialState] = None) -> "ProblemDef":
        """The same problem started from ``state`` (and optionally a new goal)."""
        atoms = state.atoms - self.type_atoms
        return ProblemDef(self.name, self.domain, self.objects, atoms, self.goal if goal is None else goal, state.fluent_map)
