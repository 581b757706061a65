"""A small evaluator for exported axiom documents.

It reads the PDDL text produced by :func:`moose.pruning.export_axioms`
(derived predicates, quantifiers, equality, disjunction, negation) and
answers which ground actions are admitted in a given state.  It shares no
matching code with the rule executor, so it can serve as an independent
check of the filter semantics.
"""
from __future__ import annotations

from itertools import product
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

from moose.model import Atom
from moose.pddl import SExpr, Token, parse_sexpr

Fact = Tuple[str, Tuple[str, ...]]


def _text(node) -> str:
    return node.text


def _section(doc: SExpr, key: str) -> List[SExpr]:
    return [n for n in doc[1:] if isinstance(n, SExpr) and n and isinstance(n[0], Token) and n[0].text == key]


def _atoms_in(node, out: Set[str]) -> None:
    if isinstance(node, SExpr) and node:
        head = node[0].text if isinstance(node[0], Token) else None
        if head in ("and", "or", "not"):
            for c in node[1:]:
                _atoms_in(c, out)
        elif head == "exists":
            _atoms_in(node[2], out)
        elif head == "=":
            return
        elif head is not None:
            out.add(head)


class AxiomEvaluator:
    def __init__(self, domain_text: str, problem_text: str):
        dom = parse_sexpr(domain_text)
        prob = parse_sexpr(problem_text)
        self.constants: List[str] = []
        for sec in _section(dom, ":constants"):
            self.constants += [_text(t) for t in sec[1:]]
        self.derived: List[Tuple[str, List[str], object]] = []
        for sec in _section(dom, ":derived"):
            head = sec[1]
            self.derived.append((_text(head[0]), [_text(t) for t in head[1:]], sec[2]))
        self.actions: Dict[str, Tuple[List[str], object, Set[str]]] = {}
        for sec in _section(dom, ":action"):
            name = _text(sec[1])
            fields = {_text(sec[i]): sec[i + 1] for i in range(2, len(sec), 2)}
            params = [_text(t) for t in fields[":parameters"]]
            effects: Set[str] = set()
            _atoms_in(fields[":effect"], effects)
            self.actions[name] = (params, fields[":precondition"], effects)
        self.objects: List[str] = []
        for sec in _section(prob, ":objects"):
            self.objects += [_text(t) for t in sec[1:]]
        self.objects = sorted(set(self.objects) | set(self.constants))
        init: Set[Fact] = set()
        for sec in _section(prob, ":init"):
            for a in sec[1:]:
                init.add((_text(a[0]), tuple(_text(t) for t in a[1:])))
        derived_preds = {d[0] for d in self.derived}
        changing = set().union(*(e for _, _, e in self.actions.values())) if self.actions else set()
        self.static = frozenset(f for f in init if f[0] not in changing and f[0] not in derived_preds)

    # ------------------------------------------------------------ structure

    def dependency_graph(self) -> Dict[str, Set[str]]:
        """Derived predicate -> predicates used in its bodies."""
        graph: Dict[str, Set[str]] = {}
        for head, _, body in self.derived:
            used: Set[str] = set()
            _atoms_in(body, used)
            graph.setdefault(head, set()).update(used)
        return graph

    def is_acyclic(self) -> bool:
        graph = self.dependency_graph()
        state: Dict[str, int] = {}

        def visit(p: str) -> bool:
            if state.get(p) == 1:
                return False
            if state.get(p) == 2 or p not in graph:
                return True
            state[p] = 1
            ok = all(visit(q) for q in graph[p])
            state[p] = 2
            return ok

        return all(visit(p) for p in graph)

    # ------------------------------------------------------------ semantics

    def _holds(self, node, env: Dict[str, str], facts: Set[Fact]) -> bool:
        head = _text(node[0]) if node and isinstance(node[0], Token) else None
        if head == "and":
            return all(self._holds(c, env, facts) for c in node[1:])
        if head == "or":
            return any(self._holds(c, env, facts) for c in node[1:])
        if head == "not":
            return not self._holds(node[1], env, facts)
        if head == "=":
            a, b = (env.get(_text(t), _text(t)) for t in node[1:3])
            return a == b
        if head == "exists":
            vs = [_text(t) for t in node[1]]
            for combo in product(self.objects, repeat=len(vs)):
                if self._holds(node[2], {**env, **dict(zip(vs, combo))}, facts):
                    return True
            return False
        return (head, tuple(env.get(_text(t), _text(t)) for t in node[1:])) in facts

    def closure(self, state: Iterable[Atom]) -> Set[Fact]:
        """Base facts of ``state`` plus static facts plus all derived facts."""
        facts: Set[Fact] = {(a.predicate, a.args) for a in state} | set(self.static)
        changed = True
        while changed:
            changed = False
            for head, params, body in self.derived:
                for combo in product(self.objects, repeat=len(params)):
                    fact = (head, combo)
                    if fact in facts:
                        continue
                    if self._holds(body, dict(zip(params, combo)), facts):
                        facts.add(fact)
                        changed = True
        return facts

    def allowed(self, state: Iterable[Atom]) -> FrozenSet[Fact]:
        """Ground actions whose (filtered) precondition holds in ``state``."""
        facts = self.closure(state)
        out = set()
        for name, (params, pre, _) in self.actions.items():
            for combo in product(self.objects, repeat=len(params)):
                if self._holds(pre, dict(zip(params, combo)), facts):
                    out.add((name, combo))
        return frozenset(out)
