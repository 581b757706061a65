"""Learning lifted condition-action rule programs from optimal plans."""
from moose.model import (
    Atom,
    DomainDef,
    GroundAction,
    NumericCondition,
    PartialState,
    PlanningError,
    ProblemDef,
    State,
)
from moose.pddl import parse_domain, parse_plan, parse_problem, serialize_domain, serialize_problem
from moose.semantics import find_equivalence, is_goal, regr, succ, validate_plan
from moose.planner import astar, ground, optimal_plan
from moose.synthesis import MooseProgram, MooseRule, SynthesisConfig, canonical_form, lift, synthesize
from moose.executor import find_grounding, instantiate
from moose.pruning import allowed_actions, export_axioms, pruned_astar
from moose.analysis import tgi_corpus, tgi_greedy

__all__ = [
    "Atom",
    "DomainDef",
    "GroundAction",
    "MooseProgram",
    "MooseRule",
    "NumericCondition",
    "PartialState",
    "PlanningError",
    "ProblemDef",
    "State",
    "SynthesisConfig",
    "allowed_actions",
    "astar",
    "canonical_form",
    "export_axioms",
    "find_equivalence",
    "find_grounding",
    "ground",
    "instantiate",
    "is_goal",
    "lift",
    "optimal_plan",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "pruned_astar",
    "regr",
    "serialize_domain",
    "serialize_problem",
    "succ",
    "synthesize",
    "tgi_corpus",
    "tgi_greedy",
    "validate_plan",
]
