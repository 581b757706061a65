from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from moose import fixtures
from moose.model import (
    ActionSchema,
    ArityError,
    Atom,
    DomainDef,
    FunctionSymbol,
    NumericCondition,
    NumericEffect,
    PartialState,
    PlanningError,
    Predicate,
    ProblemDef,
    UnknownSymbolError,
    format_number,
    normalise_numeric,
)
from moose.pddl import (
    PddlSyntaxError,
    UnsupportedFeatureError,
    format_plan,
    parse_domain,
    parse_plan,
    parse_problem,
    serialize_domain,
    serialize_problem,
)


def test_transport_domain_shape(transport):
    assert sorted(transport.predicates) == ["at", "atrobot", "handfree", "holding"]
    assert {p.arity for p in transport.predicates.values()} == {0, 1, 2}
    assert sorted(transport.schemas) == ["move", "pickup", "putdown"]
    pick = transport.schemas["pickup"]
    assert pick.pre == {Atom("atrobot", ("?loc",)), Atom("at", ("?obj", "?loc")), Atom("handfree")}
    assert pick.add == {Atom("holding", ("?obj",))}
    assert pick.delete == {Atom("at", ("?obj", "?loc")), Atom("handfree")}


def test_example_problem(example):
    assert sorted(example.objects) == ["backyard", "cake", "dog", "kitchen"]
    assert example.init == {
        Atom("at", ("cake", "backyard")),
        Atom("at", ("dog", "kitchen")),
        Atom("atrobot", ("kitchen",)),
        Atom("handfree"),
    }
    assert example.goal == PartialState.of([Atom("at", ("cake", "kitchen"))])


def test_degenerate_domain_parses():
    dom = parse_domain("(define (domain empty))")
    assert dom.predicates == {} and dom.schemas == {}
    prob = parse_problem("(define (problem p) (:domain empty))", dom)
    assert prob.objects == {} and prob.init == frozenset() and len(prob.goal) == 0


def test_empty_goal(transport):
    prob = parse_problem("(define (problem p) (:domain transport) (:objects a) (:init (atRobot a)) (:goal (and)))", transport)
    assert len(prob.goal) == 0


def test_case_insensitive_identifiers(transport):
    prob = parse_problem(
        "(define (problem P) (:DOMAIN transport) (:objects A B) (:init (ATROBOT a)) (:goal (atRobot B)))", transport
    )
    assert Atom("atrobot", ("a",)) in prob.init and prob.goal.atoms == {Atom("atrobot", ("b",))}


@pytest.mark.parametrize(
    "section",
    [
        "(:derived (p ?x) (q ?x))",
        "(:durative-action a :parameters () :duration (= ?duration 1) :condition (and) :effect (and))",
    ],
)
def test_unsupported_sections_rejected(section):
    text = f"(define (domain d) (:predicates (p ?x) (q ?x)) {section})"
    with pytest.raises(UnsupportedFeatureError):
        parse_domain(text)


@pytest.mark.parametrize(
    "pre",
    ["(not (p ?x))", "(or (p ?x) (q ?x))", "(exists (?y) (p ?y))", "(= ?x ?x)", "(forall (?y) (p ?y))"],
)
def test_unsupported_conditions_rejected(pre):
    text = f"(define (domain d) (:predicates (p ?x) (q ?x)) (:action a :parameters (?x) :precondition {pre} :effect (q ?x)))"
    with pytest.raises(UnsupportedFeatureError):
        parse_domain(text)


def test_unsupported_requirement_rejected():
    with pytest.raises(UnsupportedFeatureError):
        parse_domain("(define (domain d) (:requirements :adl))")


def test_negative_goal_rejected(transport):
    with pytest.raises(UnsupportedFeatureError):
        parse_problem("(define (problem p) (:domain transport) (:objects a) (:init) (:goal (not (handFree))))", transport)


def test_unknown_object_in_goal(transport):
    with pytest.raises(UnknownSymbolError):
        parse_problem("(define (problem p) (:domain transport) (:objects a) (:init) (:goal (atRobot zz)))", transport)


def test_unknown_predicate_and_arity(transport):
    with pytest.raises(UnknownSymbolError):
        parse_problem("(define (problem p) (:domain transport) (:objects a) (:init (nope a)) (:goal (and)))", transport)
    with pytest.raises(ArityError):
        parse_problem("(define (problem p) (:domain transport) (:objects a) (:init (atRobot a a)) (:goal (and)))", transport)


def test_free_variable_in_schema_rejected():
    with pytest.raises(UnknownSymbolError):
        parse_domain("(define (domain d) (:predicates (p ?x)) (:action a :parameters () :precondition (p ?y) :effect (p ?y)))")


def test_syntax_error_has_position():
    with pytest.raises(PddlSyntaxError) as info:
        parse_domain("(define (domain d)\n  (:predicates (p ?x))")
    assert info.value.line >= 1
    with pytest.raises(PddlSyntaxError):
        parse_domain("(define (domain d)))")


def test_typing_compiles_to_type_atoms():
    dom = fixtures.domain("gripper")
    prob = fixtures.load("gripper", fixtures.gripper_problem(1))
    move = dom.schemas["move"].ground(("rooma", "roomb"))
    assert Atom("room", ("rooma",)) in move.pre and Atom("room", ("roomb",)) in move.pre
    assert Atom("ball", ("ball1",)) in prob.initial_state.atoms
    assert Atom("gripper", ("left",)) in prob.initial_state.atoms


def test_missing_fluent_defaults_to_zero(caplog):
    dom = fixtures.domain("counter")
    prob = parse_problem("(define (problem p) (:domain counter) (:objects k) (:init (counter k)) (:goal (>= (value k) 1)))", dom)
    with caplog.at_level("WARNING"):
        assert prob.initial_state.value(("value", ("k",))) == 0
    assert any("defaulting to 0" in r.message for r in caplog.records)


def test_numeric_comparators_flip():
    dom = fixtures.domain("counter")
    prob = parse_problem(
        "(define (problem p) (:domain counter) (:objects k) (:init (counter k) (= (value k) 0)) (:goal (<= 2 (value k))))",
        dom,
    )
    assert prob.goal.numeric == {NumericCondition("value", ("k",), ">=", Fraction(2))}


def test_plan_round_trip(example):
    plan = parse_plan(fixtures.EXAMPLE_PLAN, example)
    assert [str(a) for a in plan] == [
        "(move kitchen backyard)",
        "(pickup cake backyard)",
        "(move backyard kitchen)",
        "(putdown cake kitchen)",
    ]
    assert parse_plan(format_plan(plan), example) == plan


def test_plan_unknown_action(example):
    with pytest.raises(UnknownSymbolError):
        parse_plan("(fly kitchen)\n", example)


def test_fixture_round_trips():
    for name in fixtures.DOMAINS:
        dom = fixtures.domain(name)
        again = parse_domain(serialize_domain(dom))
        assert again == dom
        for text in fixtures.CORPUS[name]().values():
            prob = parse_problem(text, dom)
            assert parse_problem(serialize_problem(prob), again) == prob


def test_format_number_exact():
    assert format_number(Fraction(3)) == "3"
    assert format_number(Fraction(-1, 4)) == "-0.25"
    assert Fraction(format_number(Fraction(7, 20))) == Fraction(7, 20)
    with pytest.raises(ValueError):
        format_number(Fraction(1, 3))


def test_normalise_numeric():
    f = ("f", ())
    ge = lambda b: NumericCondition("f", (), ">=", b)  # noqa: E731
    assert normalise_numeric([ge(1), ge(3)]) == {ge(3)}
    assert normalise_numeric([ge(3), NumericCondition("f", (), ">", 3)]) == {NumericCondition("f", (), ">", 3)}
    assert normalise_numeric([ge(5), NumericCondition("f", (), "=", 2)]) is None
    assert normalise_numeric([NumericCondition("f", (), "=", 2), NumericCondition("f", (), "=", 3)]) is None
    assert f == ge(1).key


# ---------------------------------------------------------------- random round trip


@st.composite
def domains(draw):
    n_types = draw(st.integers(0, 3))
    types = {}
    for i in range(n_types):
        types[f"t{i}"] = draw(st.sampled_from(["object"] + [f"t{j}" for j in range(i)]))
    type_pool = ["object"] + list(types)
    constants = {f"k{i}": draw(st.sampled_from(type_pool)) for i in range(draw(st.integers(0, 2)))}
    preds = {}
    for i in range(draw(st.integers(1, 4))):
        arity = draw(st.integers(0, 2))
        preds[f"p{i}"] = Predicate(f"p{i}", arity, tuple(draw(st.sampled_from(type_pool)) for _ in range(arity)))
    funcs = {}
    for i in range(draw(st.integers(0, 2))):
        arity = draw(st.integers(0, 1))
        funcs[f"f{i}"] = FunctionSymbol(f"f{i}", arity, tuple(draw(st.sampled_from(type_pool)) for _ in range(arity)))
    schemas = {}
    bounds = st.integers(-8, 8).map(lambda n: Fraction(n, 4))
    for i in range(draw(st.integers(0, 3))):
        n_params = draw(st.integers(0, 3))
        params = tuple((f"?x{j}", draw(st.sampled_from(type_pool))) for j in range(n_params))
        terms = [v for v, _ in params] + list(constants)

        def atoms():
            out = set()
            for _ in range(draw(st.integers(0, 3))):
                p = draw(st.sampled_from(sorted(preds.values())))
                if p.arity and not terms:
                    continue
                out.add(Atom(p.name, tuple(draw(st.sampled_from(terms)) for _ in range(p.arity))))
            return frozenset(out)

        num_pre, num_eff, keys = set(), set(), set()
        for _ in range(draw(st.integers(0, 2)) if funcs else 0):
            f = draw(st.sampled_from(sorted(funcs.values())))
            if f.arity and not terms:
                continue
            args = tuple(draw(st.sampled_from(terms)) for _ in range(f.arity))
            num_pre.add(NumericCondition(f.name, args, draw(st.sampled_from([">=", ">", "="])), draw(bounds)))
            if (f.name, args) not in keys:
                keys.add((f.name, args))
                num_eff.add(NumericEffect(f.name, args, draw(bounds)))
        schemas[f"a{i}"] = ActionSchema(
            f"a{i}", params, atoms(), atoms(), atoms(), frozenset(num_pre), frozenset(num_eff)
        )
    reqs = [":strips"] + ([":typing"] if types else []) + ([":numeric-fluents"] if funcs else [])
    return DomainDef(f"d{draw(st.integers(0, 9))}", preds, schemas, funcs, constants, types, tuple(sorted(reqs)))


@st.composite
def problems(draw):
    dom = draw(domains())
    type_pool = ["object"] + list(dom.types)
    objects = dict(dom.constants)
    for i in range(draw(st.integers(0, 4))):
        objects[f"o{i}"] = draw(st.sampled_from(type_pool))
    names = sorted(objects)

    def atoms(k):
        out = set()
        for _ in range(draw(st.integers(0, k))):
            p = draw(st.sampled_from(sorted(dom.predicates.values())))
            if p.arity and not names:
                continue
            out.add(Atom(p.name, tuple(draw(st.sampled_from(names)) for _ in range(p.arity))))
        return out

    fluents, goal_num = {}, {}
    for f in dom.functions.values():
        if f.arity and not names:
            continue
        args = tuple(draw(st.sampled_from(names)) for _ in range(f.arity))
        fluents[(f.name, args)] = Fraction(draw(st.integers(-20, 20)), 2)
        if draw(st.booleans()):
            goal_num[(f.name, args)] = NumericCondition(
                f.name, args, draw(st.sampled_from([">=", ">", "="])), Fraction(draw(st.integers(-8, 8)), 4)
            )
    goal = PartialState.of(atoms(3), goal_num.values())
    return ProblemDef(f"q{draw(st.integers(0, 9))}", dom, objects, frozenset(atoms(5)), goal, fluents)


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(problems())
def test_random_round_trip(prob):
    dom = parse_domain(serialize_domain(prob.domain))
    assert dom == prob.domain
    assert parse_problem(serialize_problem(prob), dom) == prob


def test_objects_with_variable_names_rejected(transport):
    with pytest.raises(PlanningError):
        parse_problem("(define (problem p) (:domain transport) (:objects ?a) (:init) (:goal (and)))", transport)
