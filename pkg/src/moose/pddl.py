"""Reading and writing the supported PDDL fragment.

Supported: ``:strips``, ``:typing``, ``:numeric-fluents`` (one fluent per
condition, comparators >=, > and =, effects ``increase``/``decrease`` by a
constant) and ``:action-costs`` (parsed, then ignored).  Everything else is
rejected with :class:`UnsupportedFeatureError` rather than being dropped.
Identifiers are case-insensitive and canonicalised to lower case.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from moose.model import (
    ROOT_TYPE,
    ActionSchema,
    Atom,
    DomainDef,
    FunctionSymbol,
    GroundAction,
    NumericCondition,
    NumericEffect,
    PartialState,
    PlanningError,
    Predicate,
    ProblemDef,
    UnknownSymbolError,
    format_number,
)

logger = logging.getLogger(__name__)

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":numeric-fluents", ":fluents", ":action-costs"}
COST_FUNCTION = "total-cost"


class PddlSyntaxError(PlanningError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnsupportedFeatureError(PlanningError):
    pass


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


class SExpr(list):
    """A parenthesised list that remembers where it started."""

    line = 0
    column = 0


Node = Union[Token, SExpr]

_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        chunk = m.group()
        if chunk.strip() and not chunk.startswith(";"):
            tokens.append(Token(chunk.lower(), line, m.start() - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rfind("\n") + 1
    return tokens


def parse_sexpr(text: str) -> SExpr:
    """Parse exactly one top-level parenthesised expression."""
    tokens = tokenize(text)
    if not tokens:
        raise PddlSyntaxError("empty document", 1, 1)
    stack: List[SExpr] = []
    root: Optional[SExpr] = None
    for tok in tokens:
        if root is not None:
            raise PddlSyntaxError(f"unexpected {tok.text!r} after end of document", tok.line, tok.column)
        if tok.text == "(":
            node = SExpr()
            node.line, node.column = tok.line, tok.column
            stack.append(node)
        elif tok.text == ")":
            if not stack:
                raise PddlSyntaxError("unbalanced ')'", tok.line, tok.column)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            else:
                root = node
        else:
            if not stack:
                raise PddlSyntaxError(f"unexpected {tok.text!r} outside parentheses", tok.line, tok.column)
            stack[-1].append(tok)
    if stack:
        raise PddlSyntaxError("unbalanced '(' (missing ')')", stack[-1].line, stack[-1].column)
    return root


def _loc(node: Node) -> Tuple[int, int]:
    return node.line, node.column


def _err(msg: str, node: Node) -> PddlSyntaxError:
    return PddlSyntaxError(msg, *_loc(node))


def _word(node: Node, what: str = "identifier") -> str:
    if not isinstance(node, Token) or node.text in "()":
        raise _err(f"expected {what}", node)
    return node.text


def _list(node: Node, what: str = "list") -> SExpr:
    if not isinstance(node, SExpr):
        raise _err(f"expected {what}", node)
    return node


def _head(node: SExpr) -> Optional[str]:
    return node[0].text if node and isinstance(node[0], Token) else None


def _typed_list(items: Sequence[Node]) -> List[Tuple[str, str]]:
    """``a b - t c`` -> [(a, t), (b, t), (c, object)]."""
    out: List[Tuple[str, str]] = []
    pending: List[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, Token) and tok.text == "-":
            if i + 1 >= len(items):
                raise _err("type expected after '-'", tok)
            t = items[i + 1]
            if isinstance(t, SExpr):
                if _head(t) == "either":
                    raise UnsupportedFeatureError("either-types are not supported")
                raise _err("expected type name", t)
            out.extend((name, t.text) for name in pending)
            pending = []
            i += 2
            continue
        pending.append(_word(tok))
        i += 1
    out.extend((name, ROOT_TYPE) for name in pending)
    return out


def _number(node: Node) -> Fraction:
    text = _word(node, "number")
    try:
        return Fraction(text)
    except ValueError:
        raise _err(f"expected number, got {text!r}", node) from None


def _is_number(node: Node) -> bool:
    if not isinstance(node, Token):
        return False
    try:
        Fraction(node.text)
    except ValueError:
        return False
    return True


def _term_list(node: SExpr) -> Tuple[str, Tuple[str, ...]]:
    name = _word(node[0], "symbol") if node else None
    if name is None:
        raise _err("empty expression", node)
    return name, tuple(_word(t, "term") for t in node[1:])


_FLIP = {"<=": ">=", "<": ">", "=": "="}


def _numeric_condition(node: SExpr, functions: Dict[str, FunctionSymbol]) -> NumericCondition:
    op = _head(node)
    if len(node) != 3:
        raise _err(f"comparison {op} takes two operands", node)
    lhs, rhs = node[1], node[2]
    if isinstance(lhs, SExpr) and _is_number(rhs) and op in (">=", ">", "="):
        fn, args = _term_list(lhs)
        bound = _number(rhs)
        comparator = op
    elif isinstance(rhs, SExpr) and _is_number(lhs) and op in _FLIP:
        fn, args = _term_list(rhs)
        bound = _number(lhs)
        comparator = _FLIP[op]
    else:
        raise UnsupportedFeatureError(
            f"numeric condition at line {node.line} must compare one fluent with a constant using >=, > or ="
        )
    if fn not in functions:
        raise UnknownSymbolError(f"unknown function {fn} (line {node.line})")
    return NumericCondition(fn, args, comparator, bound)


def _conjuncts(node: Node) -> List[SExpr]:
    node = _list(node, "formula")
    if not node:
        return []
    if _head(node) == "and":
        out: List[SExpr] = []
        for child in node[1:]:
            out.extend(_conjuncts(child))
        return out
    return [node]


def _condition(node: Node, functions, what: str) -> Tuple[List[Atom], List[NumericCondition]]:
    atoms, nums = [], []
    for c in _conjuncts(node):
        op = _head(c)
        if op in (">=", ">", "=", "<=", "<"):
            if op == "=" and all(isinstance(x, Token) for x in c[1:]):
                raise UnsupportedFeatureError(f"equality atoms are not supported (line {c.line})")
            nums.append(_numeric_condition(c, functions))
        elif op == "not":
            if what == "goal":
                raise UnsupportedFeatureError(f"negated goal atoms are not supported (line {c.line})")
            raise UnsupportedFeatureError(f"negative preconditions are not supported (line {c.line})")
        elif op in ("or", "imply", "exists", "forall", "when"):
            raise UnsupportedFeatureError(f"'{op}' in {what} is not supported (line {c.line})")
        else:
            pred, args = _term_list(c)
            atoms.append(Atom(pred, args))
    return atoms, nums


def _effect(node: Node, functions) -> Tuple[List[Atom], List[Atom], List[NumericEffect]]:
    add, delete, num = [], [], []
    for c in _conjuncts(node):
        op = _head(c)
        if op == "not":
            if len(c) != 2:
                raise _err("'not' takes one argument", c)
            pred, args = _term_list(_list(c[1]))
            delete.append(Atom(pred, args))
        elif op in ("increase", "decrease"):
            if len(c) != 3:
                raise _err(f"'{op}' takes two arguments", c)
            fn, args = _term_list(_list(c[1], "fluent"))
            if fn == COST_FUNCTION:
                continue
            if fn not in functions:
                raise UnknownSymbolError(f"unknown function {fn} (line {c.line})")
            if not _is_number(c[2]):
                raise UnsupportedFeatureError(f"numeric effects must add a constant (line {c.line})")
            delta = _number(c[2])
            num.append(NumericEffect(fn, args, delta if op == "increase" else -delta))
        elif op in ("assign", "scale-up", "scale-down"):
            raise UnsupportedFeatureError(f"'{op}' effects are not supported (line {c.line})")
        elif op in ("when", "forall"):
            raise UnsupportedFeatureError(f"conditional/quantified effects are not supported (line {c.line})")
        else:
            pred, args = _term_list(c)
            add.append(Atom(pred, args))
    return add, delete, num


def _check_requirements(reqs: Iterable[Token]) -> Tuple[str, ...]:
    out = []
    for r in reqs:
        name = _word(r, "requirement")
        if name not in SUPPORTED_REQUIREMENTS:
            raise UnsupportedFeatureError(f"requirement {name} is not supported (line {r.line})")
        out.append(name)
    return tuple(sorted(set(out)))


def _parse_action(node: SExpr, functions) -> ActionSchema:
    name = _word(node[1], "action name")
    fields: Dict[str, Node] = {}
    i = 2
    while i < len(node):
        key = _word(node[i], "action field")
        if key not in (":parameters", ":precondition", ":effect"):
            raise UnsupportedFeatureError(f"action field {key} is not supported (line {node[i].line})")
        if i + 1 >= len(node):
            raise _err(f"missing value for {key}", node[i])
        fields[key] = node[i + 1]
        i += 2
    params = _typed_list(_list(fields.get(":parameters", SExpr()), "parameter list"))
    for v, _ in params:
        if not v.startswith("?"):
            raise _err(f"parameter {v} must start with '?'", node)
    pre, num_pre = _condition(fields.get(":precondition", SExpr()), functions, "precondition")
    add, delete, num_eff = _effect(fields.get(":effect", SExpr()), functions)
    seen = set()
    for e in num_eff:
        if e.key in seen:
            raise PlanningError(f"{name}: two effects on {e.key}")
        seen.add(e.key)
    return ActionSchema(
        name=name,
        params=tuple(params),
        pre=frozenset(pre),
        add=frozenset(add),
        delete=frozenset(delete),
        num_pre=frozenset(num_pre),
        num_eff=frozenset(num_eff),
    )


def parse_domain(text: str) -> DomainDef:
    """Parse a domain document into a :class:`DomainDef`."""
    root = parse_sexpr(text)
    if _head(root) != "define" or len(root) < 2 or _head(_list(root[1])) != "domain":
        raise _err("expected (define (domain NAME) ...)", root)
    name = _word(root[1][1], "domain name")
    requirements: Tuple[str, ...] = ()
    types: Dict[str, str] = {}
    constants: Dict[str, str] = {}
    predicates: Dict[str, Predicate] = {}
    functions: Dict[str, FunctionSymbol] = {}
    action_nodes: List[SExpr] = []
    for section in root[2:]:
        section = _list(section, "domain section")
        key = _head(section)
        if key == ":requirements":
            requirements = _check_requirements(section[1:])
        elif key == ":types":
            for t, parent in _typed_list(section[1:]):
                if t == ROOT_TYPE:
                    continue
                types[t] = parent
            for parent in list(types.values()):
                if parent != ROOT_TYPE and parent not in types:
                    types[parent] = ROOT_TYPE
        elif key == ":constants":
            constants.update(_typed_list(section[1:]))
        elif key == ":predicates":
            for p in section[1:]:
                p = _list(p, "predicate declaration")
                pname = _word(p[0], "predicate name")
                args = _typed_list(p[1:])
                if pname in predicates:
                    raise PlanningError(f"predicate {pname} declared twice")
                predicates[pname] = Predicate(pname, len(args), tuple(t for _, t in args))
        elif key == ":functions":
            items = list(section[1:])
            i = 0
            while i < len(items):
                f = items[i]
                if isinstance(f, Token) and f.text == "-":
                    i += 2
                    continue
                f = _list(f, "function declaration")
                fname = _word(f[0], "function name")
                args = _typed_list(f[1:])
                if fname != COST_FUNCTION:
                    functions[fname] = FunctionSymbol(fname, len(args), tuple(t for _, t in args))
                i += 1
        elif key == ":action":
            action_nodes.append(section)
        elif key in (":derived", ":durative-action", ":axiom"):
            raise UnsupportedFeatureError(f"{key} is not supported (line {section.line})")
        else:
            raise UnsupportedFeatureError(f"domain section {key} is not supported (line {section.line})")
    schemas: Dict[str, ActionSchema] = {}
    for node in action_nodes:
        schema = _parse_action(node, functions)
        if schema.name in schemas:
            raise PlanningError(f"action {schema.name} declared twice")
        schemas[schema.name] = schema
    return DomainDef(
        name=name,
        predicates=predicates,
        schemas=schemas,
        functions=functions,
        constants=constants,
        types=types,
        requirements=requirements,
    )


def parse_problem(text: str, domain: DomainDef) -> ProblemDef:
    """Parse a problem document against an already parsed domain."""
    root = parse_sexpr(text)
    if _head(root) != "define" or len(root) < 2 or _head(_list(root[1])) != "problem":
        raise _err("expected (define (problem NAME) ...)", root)
    name = _word(root[1][1], "problem name")
    objects: Dict[str, str] = dict(domain.constants)
    init: List[Atom] = []
    fluents: Dict[Tuple[str, Tuple[str, ...]], Fraction] = {}
    goal_atoms: List[Atom] = []
    goal_num: List[NumericCondition] = []
    for section in root[2:]:
        section = _list(section, "problem section")
        key = _head(section)
        if key == ":domain":
            dname = _word(section[1], "domain name")
            if dname != domain.name:
                logger.warning("problem %s declares domain %s, parsing against %s", name, dname, domain.name)
        elif key == ":requirements":
            _check_requirements(section[1:])
        elif key == ":objects":
            for o, t in _typed_list(section[1:]):
                if o in objects and objects[o] != t:
                    raise PlanningError(f"object {o} declared with two types")
                objects[o] = t
        elif key == ":init":
            for item in section[1:]:
                item = _list(item, "initial fact")
                if _head(item) == "=":
                    if len(item) != 3:
                        raise _err("(= FLUENT VALUE) expected", item)
                    fn, args = _term_list(_list(item[1], "fluent"))
                    if fn == COST_FUNCTION:
                        continue
                    fluents[(fn, args)] = _number(item[2])
                elif _head(item) == "not":
                    raise UnsupportedFeatureError(f"negated initial facts are meaningless (line {item.line})")
                else:
                    pred, args = _term_list(item)
                    init.append(Atom(pred, args))
        elif key == ":goal":
            atoms, nums = _condition(section[1] if len(section) > 1 else SExpr(), domain.functions, "goal")
            goal_atoms.extend(atoms)
            goal_num.extend(nums)
        elif key == ":metric":
            continue
        else:
            raise UnsupportedFeatureError(f"problem section {key} is not supported (line {section.line})")
    for o in objects:
        if o.startswith("?"):
            raise PlanningError(f"object name {o} looks like a variable")
    return ProblemDef(
        name=name,
        domain=domain,
        objects=objects,
        init=frozenset(init),
        goal=PartialState.of(goal_atoms, goal_num),
        init_fluents=fluents,
    )


# ---------------------------------------------------------------- writing


def _typed(items: Iterable[Tuple[str, str]]) -> str:
    groups: Dict[str, List[str]] = {}
    for name, t in items:
        groups.setdefault(t, []).append(name)
    parts = []
    for t in sorted(groups, key=lambda x: (x == ROOT_TYPE, x)):
        names = " ".join(sorted(groups[t]))
        parts.append(names if t == ROOT_TYPE else f"{names} - {t}")
    return " ".join(parts)


def _params(params: Sequence[Tuple[str, str]]) -> str:
    # an untyped name before a typed one would inherit its type
    if all(t == ROOT_TYPE for _, t in params):
        return " ".join(v for v, _ in params)
    return " ".join(f"{v} - {t}" for v, t in params)


def _fluent(key) -> str:
    return "(" + " ".join((key[0],) + tuple(key[1])) + ")"


def _conj(parts: Sequence[str], indent: str) -> str:
    if not parts:
        return "()"
    if len(parts) == 1:
        return parts[0]
    return "(and " + f"\n{indent}     ".join(parts) + ")"


def serialize_domain(dom: DomainDef) -> str:
    """Render a domain; ``parse_domain`` of the result equals ``dom``."""
    lines = [f"(define (domain {dom.name})"]
    if dom.requirements:
        lines.append(f"  (:requirements {' '.join(dom.requirements)})")
    if dom.types:
        lines.append(f"  (:types {_typed(dom.types.items())})")
    if dom.constants:
        lines.append(f"  (:constants {_typed(dom.constants.items())})")
    preds = []
    for p in sorted(dom.predicates.values()):
        types = p.arg_types or (ROOT_TYPE,) * p.arity
        args = _params([(f"?x{i}", t) for i, t in enumerate(types)])
        preds.append(f"({p.name}{' ' + args if args else ''})")
    lines.append("  (:predicates " + "\n               ".join(preds) + ")" if preds else "  (:predicates)")
    if dom.functions:
        fns = []
        for f in sorted(dom.functions.values()):
            types = f.arg_types or (ROOT_TYPE,) * f.arity
            args = _params([(f"?x{i}", t) for i, t in enumerate(types)])
            fns.append(f"({f.name}{' ' + args if args else ''})")
        lines.append("  (:functions " + "\n              ".join(fns) + ")")
    for schema in sorted(dom.schemas.values(), key=lambda s: s.name):
        lines.append(serialize_schema(schema))
    lines.append(")")
    return "\n".join(lines) + "\n"


def serialize_schema(schema: ActionSchema, extra_pre: Sequence[str] = ()) -> str:
    pre = [str(a) for a in sorted(schema.pre)] + [str(c) for c in sorted(schema.num_pre)] + list(extra_pre)
    eff = [str(a) for a in sorted(schema.add)] + [f"(not {a})" for a in sorted(schema.delete)]
    for e in sorted(schema.num_eff):
        op = "increase" if e.delta >= 0 else "decrease"
        eff.append(f"({op} {_fluent(e.key)} {format_number(abs(e.delta))})")
    return (
        f"  (:action {schema.name}\n"
        f"   :parameters ({_params(schema.params)})\n"
        f"   :precondition {_conj(pre, '                 ')}\n"
        f"   :effect {_conj(eff, '           ')})"
    )


def serialize_problem(prob: ProblemDef) -> str:
    """Render a problem; ``parse_problem`` of the result equals ``prob``."""
    dom = prob.domain
    objs = [(o, t) for o, t in prob.objects.items() if o not in dom.constants]
    lines = [f"(define (problem {prob.name})", f"  (:domain {dom.name})"]
    lines.append(f"  (:objects {_typed(objs)})" if objs else "  (:objects)")
    init = [str(a) for a in sorted(prob.init)]
    init += [f"(= {_fluent(k)} {format_number(v)})" for k, v in sorted(prob.init_fluents.items())]
    lines.append("  (:init " + "\n         ".join(init) + ")" if init else "  (:init)")
    goal = [str(x) for x in prob.goal.items()]
    lines.append(f"  (:goal {_conj(goal, '         ')})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- plans


def format_plan(plan: Sequence[GroundAction]) -> str:
    """IPC plan format: one ``(name obj ...)`` per line."""
    return "".join(f"{a}\n" for a in plan)


def parse_plan(text: str, problem: ProblemDef) -> List[GroundAction]:
    dom = problem.domain
    plan = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise PddlSyntaxError(f"expected (action args...), got {line!r}", lineno, 1)
        parts = line[1:-1].lower().split()
        if not parts:
            raise PddlSyntaxError("empty action", lineno, 1)
        schema = dom.schemas.get(parts[0])
        if schema is None:
            raise UnknownSymbolError(f"unknown action {parts[0]} on line {lineno}")
        for o in parts[1:]:
            if o not in problem.objects:
                raise UnknownSymbolError(f"unknown object {o} on line {lineno}")
        plan.append(schema.ground(parts[1:]))
    return plan


def load_domain(path) -> DomainDef:
    with open(path, encoding="utf-8") as fh:
        return parse_domain(fh.read())


def load_problem(path, domain: DomainDef) -> ProblemDef:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), domain)
