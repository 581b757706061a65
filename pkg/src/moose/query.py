"""Conjunctive queries over sets of ground atoms.

A state is treated as a small database with one table per predicate; a
conjunction of lifted atoms is a join.  Matching is backtracking search that
always extends the partial binding through the atom with the fewest
candidate rows under the current binding.  All candidate lists are kept
sorted so results are reproducible across processes.
"""
from __future__ import annotations

from bisect import insort
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from moose.model import Atom, is_variable

Binding = Dict[str, str]
Row = Tuple[str, ...]


class AtomIndex:
    """Per-predicate tables of argument tuples, indexed by (position, object)."""

    def __init__(self, atoms: Iterable[Atom] = ()):
        self._rows: Dict[str, List[Row]] = {}
        self._members: Dict[str, set] = {}
        self._by_pos: Dict[Tuple[str, int, str], List[Row]] = {}
        for atom in sorted(set(atoms)):
            self._append(atom)

    def _append(self, atom: Atom) -> None:
        rows = self._rows.setdefault(atom.predicate, [])
        rows.append(atom.args)
        self._members.setdefault(atom.predicate, set()).add(atom.args)
        for i, o in enumerate(atom.args):
            self._by_pos.setdefault((atom.predicate, i, o), []).append(atom.args)

    def add(self, atom: Atom) -> bool:
        if atom.args in self._members.get(atom.predicate, ()):
            return False
        insort(self._rows.setdefault(atom.predicate, []), atom.args)
        self._members.setdefault(atom.predicate, set()).add(atom.args)
        for i, o in enumerate(atom.args):
            insort(self._by_pos.setdefault((atom.predicate, i, o), []), atom.args)
        return True

    def __contains__(self, atom: Atom) -> bool:
        return atom.args in self._members.get(atom.predicate, ())

    def __len__(self) -> int:
        return sum(len(v) for v in self._rows.values())

    def rows(self, predicate: str) -> List[Row]:
        return self._rows.get(predicate, [])

    def candidates(self, atom: Atom, binding: Mapping[str, str]) -> List[Row]:
        """Rows that could match ``atom`` given ``binding`` (a superset)."""
        best: Optional[List[Row]] = None
        for i, t in enumerate(atom.args):
            o = binding.get(t, t) if is_variable(t) else t
            if is_variable(o):
                continue
            rows = self._by_pos.get((atom.predicate, i, o), [])
            if best is None or len(rows) < len(best):
                best = rows
                if not best:
                    break
        return self.rows(atom.predicate) if best is None else best


def _unify(atom: Atom, row: Row, binding: Binding) -> Optional[List[str]]:
    """Extend ``binding`` in place; return the newly bound variables or None."""
    new: List[str] = []
    for t, o in zip(atom.args, row):
        if is_variable(t):
            cur = binding.get(t)
            if cur is None:
                binding[t] = o
                new.append(t)
            elif cur != o:
                for v in new:
                    del binding[v]
                return None
        elif t != o:
            for v in new:
                del binding[v]
            return None
    return new


Check = Callable[[Binding], bool]


def match(
    goals: Sequence[Tuple[Atom, AtomIndex]],
    binding: Optional[Binding] = None,
    checks: Sequence[Tuple[frozenset, Check]] = (),
) -> Iterator[Binding]:
    """Enumerate bindings satisfying every ``(atom, index)`` pair.

    ``checks`` are side conditions ``(variables, predicate)`` evaluated as
    soon as all their variables are bound (used for numeric conditions).
    Yielded dictionaries are copies.
    """
    binding = dict(binding or {})
    remaining = list(goals)
    pending = list(checks)

    def checks_ok() -> Tuple[bool, List[Tuple[frozenset, Check]]]:
        ready = [c for c in pending if all(v in binding for v in c[0])]
        for c in ready:
            if not c[1](binding):
                return False, []
        return True, ready

    def rec() -> Iterator[Binding]:
        if not remaining:
            yield dict(binding)
            return
        # most constrained atom first
        best_i, best_rows = 0, None
        for i, (atom, index) in enumerate(remaining):
            rows = index.candidates(atom, binding)
            if best_rows is None or len(rows) < len(best_rows):
                best_i, best_rows = i, rows
                if not rows:
                    return
        atom, index = remaining.pop(best_i)
        for row in best_rows:
            new = _unify(atom, row, binding)
            if new is None:
                continue
            ok, fired = checks_ok()
            if ok:
                for c in fired:
                    pending.remove(c)
                yield from rec()
                pending.extend(fired)
            for v in new:
                del binding[v]
        remaining.insert(best_i, (atom, index))

    ok, fired = checks_ok()
    if not ok:
        return
    for c in fired:
        pending.remove(c)
    yield from rec()


def extend_free(binding: Binding, variables: Sequence[str], objects: Sequence[str]) -> Iterator[Binding]:
    """Bind the variables that ``binding`` leaves open, by enumeration."""
    free = [v for v in variables if v not in binding]
    if not free:
        yield binding
        return

    def rec(i: int) -> Iterator[Binding]:
        if i == len(free):
            yield dict(binding)
            return
        for o in objects:
            binding[free[i]] = o
            yield from rec(i + 1)
        del binding[free[i]]

    yield from rec(0)
