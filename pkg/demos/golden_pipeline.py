"""Learn rules from a single cake-delivery problem and replay them.

The robot must carry a cake from the backyard into the kitchen.  One
solved instance is enough to produce a four-rule program; running that
program on the same instance reproduces the four-step plan without search.
"""
from moose import fixtures
from moose.executor import instantiate
from moose.pddl import format_plan
from moose.semantics import validate_plan
from moose.synthesis import synthesize

problem = fixtures.example_problem()
print(f"problem {problem.name}: goal {sorted(map(str, problem.goal.atoms))}")

program = synthesize([problem])
print(f"\nlearned {len(program)} rules, cheapest first:")
for entry in program:
    print(f"  precedence {entry.precedence}: {entry.rule}")

result = instantiate(problem, program)
print(f"\nexecution {result.status}, {len(result.trace)} rule firing(s)")
print(format_plan(result.plan), end="")
print("validator:", validate_plan(problem, result.plan))
