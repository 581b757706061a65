"""Use a learned program to prune optimal search.

Only actions that start some applicable rule macro are expanded.  The
plan cost stays optimal on these instances while fewer nodes are expanded.
The same filter can be exported as derived predicates for an external
planner; a short excerpt of that encoding is printed at the end.
"""
from moose import fixtures
from moose.planner import astar, ground
from moose.pruning import export_axioms, pruned_astar
from moose.synthesis import synthesize

program = synthesize([fixtures.load("ferry", fixtures.ferry_problem(3, 2, s)) for s in range(3)])
print(f"{'instance':<16}{'cost':>6}{'pruned':>8}{'A* exp':>9}{'pruned exp':>12}")
for seed in range(5):
    p = fixtures.load("ferry", fixtures.ferry_problem(4, 3, seed))
    task = ground(p)
    full = astar(task)
    cut = pruned_astar(p, program, task=task)
    print(f"{p.name:<16}{full.cost:>6}{cut.cost:>8}{full.stats.expansions:>9}{cut.stats.expansions:>12}")

doc = export_axioms(fixtures.load("ferry", fixtures.ferry_problem(3, 2, 0)), program)
derived = [line for line in doc.domain.splitlines() if line.strip().startswith("(:derived")]
print(f"\nexported domain has {len(derived)} derived predicates, e.g.")
print(derived[0])
