"""Probe whether goals can be solved one at a time.

Gripper balls are independent: any order of greedy sub-plans works.  The
blocks instance is the classic case where stacking in the wrong order
undoes earlier work.  The corridor instance is solvable greedily, but the
concatenated plan is longer than the optimum.
"""
from moose import fixtures
from moose.analysis import summarise, tgi_greedy
from moose.planner import ground, optimal_plan

for problem in (fixtures.load("gripper", fixtures.gripper_problem(3)), fixtures.sussman_problem()):
    reports = [tgi_greedy(problem, seed) for seed in range(8)]
    summary = summarise(reports)
    print(f"{problem.name}: valid={summary.valid} invalid={summary.invalid} oor={summary.oor} val%={summary.val_percent:.1f}")
    bad = next((r for r in reports if r.outcome != "valid"), None)
    if bad is not None:
        print(f"  order {bad.goal_order} fails: {bad.sub_reason}")

corridor = fixtures.ogi_problem()
greedy = tgi_greedy(corridor, 0)
print(f"\n{corridor.name}: greedy length {greedy.length}, optimal length {optimal_plan(ground(corridor)).cost}")
