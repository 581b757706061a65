import random
from collections import Counter

import pytest
from scipy.stats import chisquare

from oracles import renaming_equal
from moose import fixtures
from moose.executor import instantiate
from moose.model import Atom, NumericCondition, PartialState, PlanningError, State
from moose.pddl import parse_plan
from moose.semantics import regr_seq, succ_seq, validate_plan
from moose.synthesis import (
    ActionCall,
    MooseProgram,
    MooseRule,
    ProgramEntry,
    SynthesisConfig,
    canonical_form,
    distinct_permutations,
    extract_rules,
    goal_blocks,
    lift,
    synthesize,
)

A = lambda p, *args: Atom(p, tuple(args))  # noqa: E731


def test_lift_single_step(example):
    plan = parse_plan(fixtures.EXAMPLE_PLAN, example)
    s = PartialState.of([A("atrobot", "kitchen"), A("holding", "cake")])
    rule = lift(s, [A("at", "cake", "kitchen")], plan[3:])
    assert rule.state_cond == {A("atrobot", "?v0"), A("holding", "?v1")}
    assert rule.goal_cond == {A("at", "?v1", "?v0")}
    assert rule.actions == (ActionCall("putdown", ("?v1", "?v0")),)
    assert set(rule.vars) == {"?v0", "?v1"}


def test_rule_needs_actions():
    with pytest.raises(PlanningError):
        MooseRule((), frozenset(), frozenset(), ())


def test_lift_constant_kept_verbatim(example):
    plan = parse_plan(fixtures.EXAMPLE_PLAN, example)
    s = PartialState.of([A("atrobot", "kitchen"), A("holding", "cake")])
    rule = lift(s, [A("at", "cake", "kitchen")], plan[3:], constants=["kitchen"])
    assert rule.vars == ("?v0",)
    assert A("atrobot", "kitchen") in rule.state_cond


def test_undeclared_variable_rejected():
    with pytest.raises(PlanningError):
        MooseRule(("?a",), frozenset({A("p", "?b")}), frozenset(), (ActionCall("x", ("?a",)),))


def test_extract_rules_on_example(example):
    plan = parse_plan(fixtures.EXAMPLE_PLAN, example)
    out = extract_rules(plan, example.goal)
    assert [e.precedence for e in out] == [(-1, 1), (-1, 2), (-1, 3), (-1, 4)]
    assert [e.suffix_start for e in out] == [3, 2, 1, 0]
    assert [len(e.rule.actions) for e in out] == [1, 2, 3, 4]
    for e in out:
        # the binding turns the rule back into the ground suffix
        ground = [c.ground(e.binding) for c in e.rule.actions]
        assert [str(c) for c in ground] == [str(a) for a in plan[e.suffix_start:]]


def test_extract_stops_at_failed_regression(example):
    plan = parse_plan(fixtures.EXAMPLE_PLAN, example)
    # the first move does not contribute to what the rest needs once the
    # goal already contains the robot position it deletes
    g = PartialState.of([A("at", "cake", "kitchen"), A("atrobot", "kitchen")])
    out = extract_rules(plan, g)
    assert 0 < len(out) <= 4


def test_conjunctive_drops_overlapping():
    dom = fixtures.domain("transport")
    move = dom.schemas["move"].ground(("a", "b"))
    g = PartialState.of([A("atrobot", "b"), A("handfree")])
    plain = extract_rules([move], g)
    conj = extract_rules([move], g, conjunctive=True)
    assert plain and plain[0].rule.overlapping
    assert conj == []


# ---------------------------------------------------------------- canonical form


def _random_rule(rng):
    preds = [("p", 1), ("q", 2), ("r", 2)]
    n_vars = rng.randint(1, 4)
    pool = [f"?t{i}" for i in range(n_vars)] + ["k"]

    def atom():
        name, ar = rng.choice(preds)
        return Atom(name, tuple(rng.choice(pool) for _ in range(ar)))

    state = frozenset(atom() for _ in range(rng.randint(0, 3)))
    goal = frozenset(atom() for _ in range(rng.randint(0, 2)))
    acts = tuple(ActionCall(rng.choice(["m", "n"]), tuple(rng.choice(pool) for _ in range(2))) for _ in range(rng.randint(1, 2)))
    used = []
    for t in [t for a in sorted(state) + sorted(goal) for t in a.args] + [t for c in acts for t in c.args]:
        if t.startswith("?") and t not in used:
            used.append(t)
    return MooseRule(tuple(used), state, goal, acts)


def _renamed(rng, rule):
    fresh = [f"?z{i}" for i in range(len(rule.vars))]
    rng.shuffle(fresh)
    f = dict(zip(rule.vars, fresh))
    sub = lambda a: Atom(a.predicate, tuple(f.get(t, t) for t in a.args))  # noqa: E731
    vars_ = list(f.values())
    rng.shuffle(vars_)
    return MooseRule(
        tuple(vars_),
        frozenset(map(sub, rule.state_cond)),
        frozenset(map(sub, rule.goal_cond)),
        tuple(ActionCall(c.name, tuple(f.get(t, t) for t in c.args)) for c in rule.actions),
    )


def test_canonical_form_invariant_under_renaming():
    rng = random.Random(8)
    for _ in range(300):
        r = _random_rule(rng)
        assert canonical_form(r) == canonical_form(_renamed(rng, r))


def test_canonical_form_matches_brute_force():
    rng = random.Random(9)
    rules = [_random_rule(rng) for _ in range(400)]
    by_shape = {}
    for r in rules:
        by_shape.setdefault((len(r.vars), len(r.state_cond), len(r.goal_cond), tuple(c.name for c in r.actions)), []).append(r)
    checked = equal = 0
    for group in by_shape.values():
        for i, r1 in enumerate(group):
            for r2 in group[i:]:
                same = renaming_equal(r1, r2)
                assert (canonical_form(r1) == canonical_form(r2)) == same
                checked += 1
                equal += same
    assert checked > 200 and equal > len(rules) // 4


def test_cheapest_rules_match_hand_written_ones(example):
    prog = synthesize([example], SynthesisConfig(n_p=1))
    first = MooseRule(
        ("?obj", "?loc"),
        frozenset({A("atrobot", "?loc"), A("holding", "?obj")}),
        frozenset({A("at", "?obj", "?loc")}),
        (ActionCall("putdown", ("?obj", "?loc")),),
    )
    second = MooseRule(
        ("?obj", "?l1", "?l2"),
        frozenset({A("atrobot", "?l1"), A("holding", "?obj")}),
        frozenset({A("at", "?obj", "?l2")}),
        (ActionCall("move", ("?l1", "?l2")), ActionCall("putdown", ("?obj", "?l2"))),
    )
    entries = {e.precedence: e.rule for e in prog}
    assert sorted(entries) == [(-1, 1), (-1, 2), (-1, 3), (-1, 4)]
    assert renaming_equal(entries[(-1, 1)], first)
    assert renaming_equal(entries[(-1, 2)], second)
    assert canonical_form(entries[(-1, 2)]) == canonical_form(second)


def test_dedup_keeps_lowest_precedence():
    r = _random_rule(random.Random(1))
    prog = MooseProgram("d", [ProgramEntry(r, (-1, 5)), ProgramEntry(_renamed(random.Random(2), r), (-1, 2))])
    assert len(prog) == 1 and prog.entries[0].precedence == (-1, 2)


# ---------------------------------------------------------------- permutations


def test_permutations_distinct_and_bounded():
    goal = [A("g", str(i)) for i in range(4)]
    perms = distinct_permutations(goal, 10, seed=3)
    assert len(perms) == 10 and len({tuple(p) for p in perms}) == 10
    assert len(distinct_permutations(goal[:2], 10, seed=3)) == 2
    assert distinct_permutations([goal[0]], 5) == [[goal[0]]]
    assert distinct_permutations([], 3) == [[]]
    with pytest.raises(ValueError):
        distinct_permutations(goal, 0)


def test_permutations_depend_on_set_not_order():
    goal = [A("g", str(i)) for i in range(5)]
    assert distinct_permutations(goal, 4, 7) == distinct_permutations(list(reversed(goal)), 4, 7)


def test_permutations_uniform():
    goal = [A("g", str(i)) for i in range(3)]
    counts = Counter(tuple(a.args[0] for a in distinct_permutations(goal, 1, seed)[0]) for seed in range(3000))
    assert len(counts) == 6
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_large_goal_permutations():
    goal = [A("g", str(i)) for i in range(25)]
    perms = distinct_permutations(goal, 3, 1)
    assert len({tuple(p) for p in perms}) == 3 and all(sorted(p) == sorted(goal) for p in perms)


def test_goal_blocks():
    assert goal_blocks([1, 2, 3, 4, 5], 2) == [[1, 2], [3, 4], [5]]
    assert goal_blocks([1, 2], 1) == [[1], [2]]
    assert goal_blocks([], 3) == []


# ---------------------------------------------------------------- synthesis


def _train(domain):
    if domain == "transport":
        return [fixtures.load("transport", fixtures.transport_problem(3, 2, s)) for s in range(3)]
    if domain == "ferry":
        return [fixtures.load("ferry", fixtures.ferry_problem(3, 2, s)) for s in range(3)]
    return [fixtures.load("gripper", fixtures.gripper_problem(n)) for n in (1, 2)]


def test_empty_training_set():
    assert len(synthesize([])) == 0
    prog = synthesize([], domain=fixtures.domain("ferry"))
    assert prog.domain == "ferry" and len(prog) == 0


def test_synthesis_is_deterministic():
    train = _train("ferry")
    a = synthesize(train, SynthesisConfig(seed=4)).to_json()
    b = synthesize(train, SynthesisConfig(seed=4)).to_json()
    assert a == b


def test_program_json_round_trip():
    prog = synthesize(_train("transport"))
    again = MooseProgram.from_json(prog.to_json())
    assert again.to_json() == prog.to_json()
    assert again.keys == prog.keys


def test_program_version_checked():
    with pytest.raises(PlanningError):
        MooseProgram.from_json('{"v": 99, "domain": "x", "rules": []}')


def test_numeric_rule_json_round_trip():
    prob = fixtures.load("counter", fixtures.counter_problem(1, 2))
    prog = synthesize([prob])
    assert any(r.is_numeric for r in prog.rules)
    assert MooseProgram.from_json(prog.to_json()).to_json() == prog.to_json()


@pytest.mark.parametrize("domain", ["transport", "ferry", "gripper"])
def test_training_growth_is_monotone(domain):
    train = _train(domain)
    prev = set()
    for k in range(1, len(train) + 1):
        keys = set(synthesize(train[:k]).keys)
        assert prev <= keys
        prev = keys


@pytest.mark.parametrize("n_r", [1, 2])
def test_precedence_tracks_macro_length(n_r):
    for e in synthesize(_train("gripper"), SynthesisConfig(n_r=n_r)):
        assert e.precedence[1] == len(e.rule.actions)
        assert e.precedence[0] == -(len(e.rule.goal_cond) + len(e.rule.numeric_goal))
        if n_r > 1:
            assert not e.rule.overlapping


@pytest.mark.parametrize("domain", ["transport", "ferry", "gripper"])
def test_rules_are_sound_where_they_came_from(domain):
    train = {p.name: p for p in _train(domain)}
    rng = random.Random(0)
    prog = synthesize(list(train.values()))
    assert len(prog) > 0
    for e in prog:
        prov = e.provenance
        p = train[prov["problem"]]
        b = prov["binding"]
        macro = [p.domain.schemas[c.name].ground(tuple(b.get(t, t) for t in c.args)) for c in e.rule.actions]
        assert [str(a) for a in macro] == prov["plan"][prov["suffix"]:]
        pre = {a.ground(b) for a in e.rule.state_cond}
        goal = {a.ground(b) for a in e.rule.goal_cond}
        assert regr_seq(PartialState.of(goal), macro).atoms == pre
        # any superset state runs the macro into the goal atoms
        noise = rng.sample(sorted(p.initial_state.atoms), 3)
        end = succ_seq(State.of(pre | set(noise)), macro)
        assert end is not None and goal <= end.atoms


@pytest.mark.parametrize("domain", ["transport", "ferry", "gripper"])
def test_program_solves_its_training_problems(domain):
    train = _train(domain)
    prog = synthesize(train)
    for p in train:
        res = instantiate(p, prog)
        assert res.success and validate_plan(p, res.plan).valid


def test_conjunctive_mode_adds_rules():
    train = _train("gripper")
    one = synthesize(train, SynthesisConfig(n_r=1, seed=0))
    two = synthesize(train, SynthesisConfig(n_r=2, seed=0))
    assert len(two) > len(one)
    assert any(e.precedence[0] == -2 for e in two)


def test_merge_rejects_other_domain():
    with pytest.raises(PlanningError):
        MooseProgram("a").merge(MooseProgram("b"))


def test_resource_limited_subproblems_are_skipped(caplog):
    prob = fixtures.load("transport", fixtures.transport_problem(4, 3, 2))
    with caplog.at_level("WARNING"):
        prog = synthesize([prob], SynthesisConfig(n_p=1, max_expansions=1, heuristic="blind"))
    assert len(prog) == 0 or all(e.precedence[1] <= 2 for e in prog)
    assert any("planner limit" in r.message for r in caplog.records)


def test_numeric_goal_rules():
    prob = fixtures.load("counter", fixtures.counter_problem(1, 3))
    prog = synthesize([prob])
    assert len(prog) == 3
    for e in prog:
        assert e.rule.is_numeric and e.precedence[1] == len(e.rule.actions)
    bounds = sorted(next(iter(e.rule.numeric_cond)).bound for e in prog)
    assert bounds == [0, 1, 2]
    for c in (next(iter(e.rule.numeric_cond)) for e in prog):
        assert isinstance(c, NumericCondition) and c.comparator == ">="


def test_numeric_goal_is_part_of_the_rule():
    prog = synthesize([fixtures.load("counter", fixtures.counter_problem(1, 3))])
    for r in prog.rules:
        (v,) = r.vars
        assert r.numeric_goal == {NumericCondition("value", (v,), ">=", 3)}
        assert r.goal_cond == frozenset()
