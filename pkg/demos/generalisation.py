"""Train on tiny instances, then solve instances ten times larger.

For each domain the training set has at most six objects.  The learned
program is run on growing held-out instances and every plan is checked
by the validator.
"""
import time

from moose import fixtures
from moose.executor import instantiate
from moose.semantics import validate_plan
from moose.synthesis import synthesize

TRAIN = {
    "gripper": [fixtures.gripper_problem(n, 2, s) for n in (1, 2) for s in range(-1, 4)],
    "ferry": [fixtures.ferry_problem(3, 2, s) for s in range(4)],
    "transport": [fixtures.transport_problem(3, 2, s) for s in range(4)],
}
TEST = {
    "gripper": [fixtures.gripper_problem(n) for n in (4, 16, 56)],
    "ferry": [fixtures.ferry_problem(l, c, 7) for l, c in ((4, 4), (10, 15), (25, 25))],
    "transport": [fixtures.transport_problem(l, c, 7) for l, c in ((4, 4), (10, 15), (25, 25))],
}

for domain, texts in TRAIN.items():
    program = synthesize([fixtures.load(domain, t) for t in texts])
    print(f"{domain}: {len(program)} rules from {len(texts)} training problems")
    for text in TEST[domain]:
        p = fixtures.load(domain, text)
        start = time.perf_counter()
        res = instantiate(p, program)
        ok = res.success and validate_plan(p, res.plan).valid
        print(f"  {len(p.objects):3d} objects  plan length {len(res.plan):4d}  valid={ok}  {time.perf_counter() - start:.3f}s")
