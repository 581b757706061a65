"""Desk-scale domains and instance generators.

Every generator returns PDDL problem text; :func:`load` parses it against
the matching domain.  Randomised generators take an explicit seed.
"""
from __future__ import annotations

import random
from pathlib import Path
from typing import Callable, Dict, List

from moose.model import DomainDef, ProblemDef
from moose.pddl import parse_domain, parse_problem

TRANSPORT = """
(define (domain transport)
  (:requirements :strips)
  (:predicates (at ?x ?y) (atRobot ?x) (handFree) (holding ?x))
  (:action putDown
    :parameters (?obj ?loc)
    :precondition (and (atRobot ?loc) (holding ?obj))
    :effect (and (at ?obj ?loc) (handFree) (not (holding ?obj))))
  (:action move
    :parameters (?from ?to)
    :precondition (atRobot ?from)
    :effect (and (atRobot ?to) (not (atRobot ?from))))
  (:action pickUp
    :parameters (?obj ?loc)
    :precondition (and (atRobot ?loc) (at ?obj ?loc) (handFree))
    :effect (and (holding ?obj) (not (at ?obj ?loc)) (not (handFree)))))
"""

EXAMPLE_PROBLEM = """
(define (problem cake)
  (:domain transport)
  (:objects backyard cake dog kitchen)
  (:init (at cake backyard) (at dog kitchen) (atRobot kitchen) (handFree))
  (:goal (and (at cake kitchen))))
"""

EXAMPLE_PLAN = """
(move kitchen backyard)
(pickUp cake backyard)
(move backyard kitchen)
(putDown cake kitchen)
"""

GRIPPER = """
(define (domain gripper)
  (:requirements :strips :typing)
  (:types room ball gripper)
  (:predicates (at-robby ?r - room) (at ?b - ball ?r - room) (free ?g - gripper) (carry ?b - ball ?g - gripper))
  (:action move
    :parameters (?from ?to - room)
    :precondition (at-robby ?from)
    :effect (and (at-robby ?to) (not (at-robby ?from))))
  (:action pick
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (at ?b ?r) (at-robby ?r) (free ?g))
    :effect (and (carry ?b ?g) (not (at ?b ?r)) (not (free ?g))))
  (:action drop
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (carry ?b ?g) (at-robby ?r))
    :effect (and (at ?b ?r) (free ?g) (not (carry ?b ?g)))))
"""

FERRY = """
(define (domain ferry)
  (:requirements :strips :typing)
  (:types car location)
  (:predicates (at-ferry ?l - location) (at ?c - car ?l - location) (empty-ferry) (on ?c - car))
  (:action sail
    :parameters (?from ?to - location)
    :precondition (at-ferry ?from)
    :effect (and (at-ferry ?to) (not (at-ferry ?from))))
  (:action board
    :parameters (?c - car ?l - location)
    :precondition (and (at ?c ?l) (at-ferry ?l) (empty-ferry))
    :effect (and (on ?c) (not (at ?c ?l)) (not (empty-ferry))))
  (:action debark
    :parameters (?c - car ?l - location)
    :precondition (and (on ?c) (at-ferry ?l))
    :effect (and (at ?c ?l) (empty-ferry) (not (on ?c)))))
"""

LOGISTICS = """
(define (domain logistics)
  (:requirements :strips :typing)
  (:types package truck location)
  (:predicates (at ?p - package ?l - location) (at-truck ?t - truck ?l - location) (in ?p - package ?t - truck))
  (:action drive
    :parameters (?t - truck ?from ?to - location)
    :precondition (at-truck ?t ?from)
    :effect (and (at-truck ?t ?to) (not (at-truck ?t ?from))))
  (:action load
    :parameters (?p - package ?t - truck ?l - location)
    :precondition (and (at ?p ?l) (at-truck ?t ?l))
    :effect (and (in ?p ?t) (not (at ?p ?l))))
  (:action unload
    :parameters (?p - package ?t - truck ?l - location)
    :precondition (and (in ?p ?t) (at-truck ?t ?l))
    :effect (and (at ?p ?l) (not (in ?p ?t)))))
"""

BLOCKS = """
(define (domain blocks)
  (:requirements :strips)
  (:predicates (on ?x ?y) (ontable ?x) (clear ?x) (handempty) (holding ?x))
  (:action pick-up
    :parameters (?x)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (holding ?x) (not (ontable ?x)) (not (clear ?x)) (not (handempty))))
  (:action put-down
    :parameters (?x)
    :precondition (holding ?x)
    :effect (and (ontable ?x) (clear ?x) (handempty) (not (holding ?x))))
  (:action stack
    :parameters (?x ?y)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (handempty) (not (holding ?x)) (not (clear ?y))))
  (:action unstack
    :parameters (?x ?y)
    :precondition (and (on ?x ?y) (clear ?x) (handempty))
    :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x)) (not (handempty)))))
"""

SUSSMAN = """
(define (problem sussman)
  (:domain blocks)
  (:objects a b c)
  (:init (on c a) (ontable a) (ontable b) (clear c) (clear b) (handempty))
  (:goal (and (on a b) (on b c))))
"""

# Greedy per-goal solving reaches both goals in 4 steps; the shortest plan
# takes the middle corridor in 3.
OGI = """
(define (domain corridors)
  (:requirements :strips)
  (:predicates (at ?n) (edge ?a ?b) (plain ?n) (goal1node ?n) (goal2node ?n) (bothnode ?n) (g1) (g2))
  (:action step
    :parameters (?a ?b)
    :precondition (and (at ?a) (edge ?a ?b) (plain ?b))
    :effect (and (at ?b) (not (at ?a)) (not (g1)) (not (g2))))
  (:action step-g1
    :parameters (?a ?b)
    :precondition (and (at ?a) (edge ?a ?b) (goal1node ?b))
    :effect (and (at ?b) (g1) (not (at ?a)) (not (g2))))
  (:action step-g2
    :parameters (?a ?b)
    :precondition (and (at ?a) (edge ?a ?b) (goal2node ?b))
    :effect (and (at ?b) (g2) (not (at ?a)) (not (g1))))
  (:action step-both
    :parameters (?a ?b)
    :precondition (and (at ?a) (edge ?a ?b) (bothnode ?b))
    :effect (and (at ?b) (g1) (g2) (not (at ?a)))))
"""

OGI_PROBLEM = """
(define (problem corridors)
  (:domain corridors)
  (:objects na nb nc nd ne nf ng nh ni nj)
  (:init (at na)
    (plain na) (plain nb) (plain nd) (plain nf) (plain nh) (plain ni) (plain nj)
    (goal1node nc) (goal2node ng) (bothnode ne)
    (edge na nb) (edge nb nc) (edge nc nd) (edge nd ne)
    (edge na nf) (edge nf ng) (edge ng nh) (edge nh ne)
    (edge na ni) (edge ni nj) (edge nj ne))
  (:goal (and (g1) (g2))))
"""

COUNTER = """
(define (domain counter)
  (:requirements :strips :numeric-fluents)
  (:predicates (counter ?c))
  (:functions (value ?c))
  (:action inc
    :parameters (?c)
    :precondition (counter ?c)
    :effect (increase (value ?c) 1)))
"""

NFERRY = """
(define (domain nferry)
  (:requirements :strips :typing :numeric-fluents)
  (:types car location)
  (:predicates (at-ferry ?l - location) (at ?c - car ?l - location) (on ?c - car))
  (:functions (capacity))
  (:action sail
    :parameters (?from ?to - location)
    :precondition (at-ferry ?from)
    :effect (and (at-ferry ?to) (not (at-ferry ?from))))
  (:action board
    :parameters (?c - car ?l - location)
    :precondition (and (at ?c ?l) (at-ferry ?l) (>= (capacity) 1))
    :effect (and (on ?c) (not (at ?c ?l)) (decrease (capacity) 1)))
  (:action debark
    :parameters (?c - car ?l - location)
    :precondition (and (on ?c) (at-ferry ?l))
    :effect (and (at ?c ?l) (not (on ?c)) (increase (capacity) 1))))
"""

DOMAINS: Dict[str, str] = {
    "transport": TRANSPORT,
    "gripper": GRIPPER,
    "ferry": FERRY,
    "logistics": LOGISTICS,
    "blocks": BLOCKS,
    "corridors": OGI,
    "counter": COUNTER,
    "nferry": NFERRY,
}

_domain_cache: Dict[str, DomainDef] = {}


def domain(name: str) -> DomainDef:
    if name not in _domain_cache:
        _domain_cache[name] = parse_domain(DOMAINS[name])
    return _domain_cache[name]


def load(domain_name: str, problem_text: str) -> ProblemDef:
    return parse_problem(problem_text, domain(domain_name))


def _problem(name: str, dom: str, objects: str, init: List[str], goal: List[str]) -> str:
    return (
        f"(define (problem {name})\n  (:domain {dom})\n  (:objects {objects})\n"
        f"  (:init {' '.join(init)})\n  (:goal (and {' '.join(goal)})))\n"
    )


def transport_problem(n_locations: int, n_items: int, seed: int) -> str:
    rng = random.Random(f"transport:{n_locations}:{n_items}:{seed}")
    locs = [f"l{i}" for i in range(n_locations)]
    items = [f"o{i}" for i in range(n_items)]
    init = [f"(atRobot {rng.choice(locs)})", "(handFree)"]
    init += [f"(at {o} {rng.choice(locs)})" for o in items]
    goal = [f"(at {o} {rng.choice(locs)})" for o in items]
    return _problem(f"transport-{n_locations}-{n_items}-{seed}", "transport", " ".join(locs + items), init, goal)


def gripper_problem(n_balls: int, n_rooms: int = 2, seed: int = -1) -> str:
    """Standard gripper for ``seed < 0``: balls in the first room, goal the second."""
    rooms = [f"room{chr(ord('a') + i)}" if n_rooms <= 26 else f"room{i}" for i in range(n_rooms)]
    balls = [f"ball{i + 1}" for i in range(n_balls)]
    if seed < 0:
        start, robot = {b: rooms[0] for b in balls}, rooms[0]
        target = {b: rooms[1 % n_rooms] for b in balls}
    else:
        rng = random.Random(f"gripper:{n_balls}:{n_rooms}:{seed}")
        robot = rng.choice(rooms)
        start = {b: rng.choice(rooms) for b in balls}
        target = {b: rng.choice(rooms) for b in balls}
    objects = f"{' '.join(rooms)} - room left right - gripper {' '.join(balls)} - ball"
    init = [f"(at-robby {robot})", "(free left)", "(free right)"] + [f"(at {b} {start[b]})" for b in balls]
    goal = [f"(at {b} {target[b]})" for b in balls]
    return _problem(f"gripper-{n_balls}-{n_rooms}-{seed}", "gripper", objects, init, goal)


def ferry_problem(n_locations: int, n_cars: int, seed: int) -> str:
    rng = random.Random(f"ferry:{n_locations}:{n_cars}:{seed}")
    locs = [f"l{i}" for i in range(n_locations)]
    cars = [f"c{i}" for i in range(n_cars)]
    init = [f"(at-ferry {rng.choice(locs)})", "(empty-ferry)"] + [f"(at {c} {rng.choice(locs)})" for c in cars]
    goal = [f"(at {c} {rng.choice(locs)})" for c in cars]
    objects = f"{' '.join(locs)} - location {' '.join(cars)} - car"
    return _problem(f"ferry-{n_locations}-{n_cars}-{seed}", "ferry", objects, init, goal)


def logistics_problem(n_locations: int, n_trucks: int, n_packages: int, seed: int) -> str:
    rng = random.Random(f"logistics:{n_locations}:{n_trucks}:{n_packages}:{seed}")
    locs = [f"l{i}" for i in range(n_locations)]
    trucks = [f"t{i}" for i in range(n_trucks)]
    pkgs = [f"p{i}" for i in range(n_packages)]
    init = [f"(at-truck {t} {rng.choice(locs)})" for t in trucks] + [f"(at {p} {rng.choice(locs)})" for p in pkgs]
    goal = [f"(at {p} {rng.choice(locs)})" for p in pkgs]
    objects = f"{' '.join(locs)} - location {' '.join(trucks)} - truck {' '.join(pkgs)} - package"
    return _problem(f"logistics-{n_locations}-{n_trucks}-{n_packages}-{seed}", "logistics", objects, init, goal)


def counter_problem(n_counters: int, target: int, start: int = 0) -> str:
    cs = [f"k{i}" for i in range(n_counters)]
    init = [f"(counter {c})" for c in cs] + [f"(= (value {c}) {start})" for c in cs]
    goal = [f"(>= (value {c}) {target})" for c in cs]
    return _problem(f"counter-{n_counters}-{target}", "counter", " ".join(cs), init, goal)


def nferry_problem(n_locations: int, n_cars: int, capacity: int, seed: int) -> str:
    rng = random.Random(f"nferry:{n_locations}:{n_cars}:{capacity}:{seed}")
    locs = [f"l{i}" for i in range(n_locations)]
    cars = [f"c{i}" for i in range(n_cars)]
    init = [f"(at-ferry {rng.choice(locs)})", f"(= (capacity) {capacity})"]
    init += [f"(at {c} {rng.choice(locs)})" for c in cars]
    goal = [f"(at {c} {rng.choice(locs)})" for c in cars]
    objects = f"{' '.join(locs)} - location {' '.join(cars)} - car"
    return _problem(f"nferry-{n_locations}-{n_cars}-{seed}", "nferry", objects, init, goal)


def example_problem() -> ProblemDef:
    return load("transport", EXAMPLE_PROBLEM)


def sussman_problem() -> ProblemDef:
    return load("blocks", SUSSMAN)


def ogi_problem() -> ProblemDef:
    return load("corridors", OGI_PROBLEM)


# Small instance sets used by the CLI corpus dump and the test suites.
CORPUS: Dict[str, Callable[[], Dict[str, str]]] = {
    "transport": lambda: {
        "example": EXAMPLE_PROBLEM,
        **{f"p{s}": transport_problem(3, 2, s) for s in range(4)},
    },
    "gripper": lambda: {f"p{n}": gripper_problem(n) for n in (1, 2, 3)},
    "ferry": lambda: {f"p{s}": ferry_problem(3, 2, s) for s in range(4)},
    "logistics": lambda: {f"p{s}": logistics_problem(3, 1, 2, s) for s in range(3)},
    "blocks": lambda: {"sussman": SUSSMAN},
    "corridors": lambda: {"two-goals": OGI_PROBLEM},
    "counter": lambda: {"p1": counter_problem(1, 3), "p2": counter_problem(2, 2)},
    "nferry": lambda: {f"p{s}": nferry_problem(3, 2, 1, s) for s in range(3)},
}


def dump(directory: Path) -> List[Path]:
    """Write every domain and corpus problem under ``directory/<domain>/``."""
    written = []
    for name, text in DOMAINS.items():
        d = Path(directory) / name
        d.mkdir(parents=True, exist_ok=True)
        (d / "domain.pddl").write_text(text.lstrip())
        written.append(d / "domain.pddl")
        for pname, ptext in CORPUS[name]().items():
            path = d / f"{pname}.pddl"
            path.write_text(ptext.lstrip())
            written.append(path)
    return written
