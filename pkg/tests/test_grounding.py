"""Grounding: instantiation counts, static compilation, reachability pruning, codec."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fixture_oracle
from conftest import load_fixture
from planmesh.grounding import (
    GroundAction,
    GroundingError,
    GroundTask,
    compile_statics,
    ground,
    handle_encoding_request,
    instantiate,
    relaxed_reachability_prune,
    task_from_payload,
    task_to_payload,
)
from planmesh.messaging import check_payload_schema
from planmesh.pddl import encode_text, parse_domain, parse_problem, print_domain, print_problem
from test_pddl import _domains, _problems

BW_DOMAIN = load_fixture("blocksworld-domain.pddl")
BW_PROBLEM = load_fixture("blocksworld-p01.pddl")
GRIPPER_DOMAIN = load_fixture("gripper-domain.pddl")
GRIPPER_PROBLEM = load_fixture("gripper-p01.pddl")


def _parse(domain_text, problem_text):
    domain = parse_domain(domain_text)
    return domain, parse_problem(problem_text, domain)


def _per_schema(task):
    counts = {}
    for action in task.actions:
        schema = action.name.split("(", 1)[0]
        counts[schema] = counts.get(schema, 0) + 1
    return counts


# --- instantiation ---


def test_blocksworld_instantiation_matches_oracle():
    oracle = fixture_oracle.fixture_counts(BW_DOMAIN, BW_PROBLEM)
    task = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    assert len(task.actions) == oracle["groundActions"] == 18
    assert _per_schema(task) == oracle["groundActionsPerSchema"]
    assert _per_schema(task) == {"pickup": 3, "putdown": 3, "stack": 6, "unstack": 6}


def test_gripper_instantiation_matches_oracle():
    oracle = fixture_oracle.fixture_counts(GRIPPER_DOMAIN, GRIPPER_PROBLEM)
    task = instantiate(*_parse(GRIPPER_DOMAIN, GRIPPER_PROBLEM))
    assert len(task.actions) == oracle["groundActions"] == 18
    assert _per_schema(task) == oracle["groundActionsPerSchema"]
    assert _per_schema(task) == {"move": 2, "pick": 8, "drop": 8}


def test_zero_arity_action_grounds_once():
    domain, problem = _parse(
        "(define (domain tiny) (:predicates (on)) (:action flip :parameters () :precondition (and) :effect (on)))",
        "(define (problem t1) (:domain tiny) (:objects) (:init) (:goal (on)))",
    )
    task = instantiate(domain, problem)
    assert len(task.actions) == 1
    assert task.actions[0].name == "flip()"


def test_fact_table_is_lexicographic_and_complete():
    task = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    assert list(task.facts) == sorted(task.facts)
    referenced = set(task.init) | set(task.goal_pos) | set(task.goal_neg)
    for action in task.actions:
        referenced |= action.pre_pos | action.pre_neg | action.add | action.delete
    assert referenced <= set(range(len(task.facts)))


def test_instantiation_is_deterministic():
    first = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    second = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    assert first == second
    assert first.facts == second.facts


def test_equality_filters_assignments():
    # stack/unstack carry (not (= ?x ?y)): no self-stacking actions remain.
    task = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    for action in task.actions:
        name, _, args = action.name.partition("(")
        if name in ("stack", "unstack"):
            left, right = args.rstrip(")").split(",")
            assert left != right


def test_contradictory_goal_flags_unsolvable():
    domain, problem = _parse(
        "(define (domain tiny) (:predicates (on)) (:action flip :parameters () :precondition (and) :effect (on)))",
        "(define (problem t1) (:domain tiny) (:objects) (:init) (:goal (and (on) (not (on)))))",
    )
    task = instantiate(domain, problem)
    assert task.unsolvable
    assert not (task.goal_pos & task.goal_neg)


def test_add_delete_overlap_resolves_to_add():
    domain, problem = _parse(
        "(define (domain tiny) (:predicates (on))"
        " (:action wobble :parameters () :precondition (and) :effect (and (on) (not (on)))))",
        "(define (problem t1) (:domain tiny) (:objects) (:init) (:goal (on)))",
    )
    task = instantiate(domain, problem)
    (action,) = task.actions
    assert task.facts[next(iter(action.add))] == "on()"
    assert not action.delete


def test_provenance_records_names():
    task = instantiate(*_parse(BW_DOMAIN, BW_PROBLEM))
    assert task.provenance == ("blocksworld", "sussman")


# --- static compilation ---

STATIC_DOMAIN = """
(define (domain rail)
  (:requirements :strips)
  (:predicates (linked ?a ?b) (at ?x))
  (:action go :parameters (?a ?b)
    :precondition (and (linked ?a ?b) (at ?a))
    :effect (and (at ?b) (not (at ?a)))))
"""

STATIC_PROBLEM = """
(define (problem rail-1) (:domain rail)
  (:objects n1 n2 n3)
  (:init (linked n1 n2) (linked n2 n3) (at n1))
  (:goal (at n3)))
"""


def test_statics_are_compiled_away():
    task = compile_statics(instantiate(*_parse(STATIC_DOMAIN, STATIC_PROBLEM)))
    assert all(not fact.startswith("linked(") for fact in task.facts)
    # Only the two linked moves survive; 9 - 7 statically impossible.
    assert sorted(a.name for a in task.actions) == ["go(n1,n2)", "go(n2,n3)"]
    assert all(not (a.pre_pos | a.pre_neg) - {i for i in range(len(task.facts))} for a in task.actions)


def test_statically_violated_goal_is_unsolvable():
    problem = "(define (problem rail-2) (:domain rail) (:objects n1 n2) (:init (at n1)) (:goal (linked n1 n2)))"
    task = compile_statics(instantiate(*_parse(STATIC_DOMAIN, problem)))
    assert task.unsolvable


def test_statically_satisfied_goal_is_stripped():
    problem = (
        "(define (problem rail-3) (:domain rail) (:objects n1 n2)"
        " (:init (linked n1 n2) (at n1)) (:goal (and (linked n1 n2) (at n2))))"
    )
    task = compile_statics(instantiate(*_parse(STATIC_DOMAIN, problem)))
    assert task.goal_pos == {task.facts.index("at(n2)")}
    assert not task.unsolvable


# --- relaxed reachability pruning ---

MAGIC_DOMAIN = """
(define (domain spells)
  (:predicates (magic) (awake) (rich))
  (:action conjure :parameters ()
    :precondition (magic)
    :effect (rich))
  (:action wake :parameters ()
    :precondition (and)
    :effect (awake)))
"""


def test_unreachable_actions_and_facts_are_pruned():
    problem = "(define (problem s1) (:domain spells) (:objects) (:init) (:goal (awake)))"
    task = ground(*_parse(MAGIC_DOMAIN, problem))
    assert [a.name for a in task.actions] == ["wake()"]
    assert "magic()" not in task.facts
    assert "rich()" not in task.facts
    assert not task.unsolvable


def test_unreachable_goal_flags_unsolvable_but_keeps_goal_fact():
    problem = "(define (problem s2) (:domain spells) (:objects) (:init) (:goal (rich)))"
    task = ground(*_parse(MAGIC_DOMAIN, problem))
    assert task.unsolvable
    assert "rich()" in task.facts
    assert task.goal_pos == {task.facts.index("rich()")}


def test_fully_reachable_task_survives_pruning_intact():
    base = compile_statics(instantiate(*_parse(BW_DOMAIN, BW_PROBLEM)))
    pruned = relaxed_reachability_prune(base)
    assert pruned.facts == base.facts
    assert sorted(a.name for a in pruned.actions) == sorted(a.name for a in base.actions)
    assert pruned.init == base.init and pruned.goal_pos == base.goal_pos


def test_negative_precondition_facts_survive_pruning():
    # locked() is dynamic (lock adds it) but unreachable, since lock's own
    # precondition never holds. It is still negatively referenced by the
    # surviving push action, so it must stay in the table to keep the
    # precondition expressible.
    domain = """
    (define (domain locks)
      (:requirements :negative-preconditions)
      (:predicates (locked) (open) (magic))
      (:action push :parameters ()
        :precondition (not (locked))
        :effect (open))
      (:action lock :parameters ()
        :precondition (magic)
        :effect (locked)))
    """
    problem = "(define (problem l1) (:domain locks) (:objects) (:init) (:goal (open)))"
    task = ground(*_parse(domain, problem))
    assert "locked()" in task.facts
    assert [a.name for a in task.actions] == ["push()"]
    (push,) = task.actions
    assert push.pre_neg == {task.facts.index("locked()")}


def test_static_negative_precondition_is_compiled_away():
    # Here locked() is fully static (no action touches it), so the
    # statically true precondition is stripped and the fact removed.
    domain = """
    (define (domain locks)
      (:requirements :negative-preconditions)
      (:predicates (locked) (open))
      (:action push :parameters ()
        :precondition (not (locked))
        :effect (open)))
    """
    problem = "(define (problem l2) (:domain locks) (:objects) (:init) (:goal (open)))"
    task = ground(*_parse(domain, problem))
    assert "locked()" not in task.facts
    (push,) = task.actions
    assert not push.pre_neg


# --- wire codec ---


def test_payload_round_trip():
    task = ground(*_parse(BW_DOMAIN, BW_PROBLEM))
    payload = task_to_payload(task)
    check_payload_schema(payload, "ground-task/1")
    restored = task_from_payload(payload)
    assert restored.facts == task.facts
    assert restored.init == task.init
    assert restored.actions == task.actions
    assert restored.provenance is None  # provenance never crosses the wire


def test_payload_lists_are_sorted():
    payload = task_to_payload(ground(*_parse(GRIPPER_DOMAIN, GRIPPER_PROBLEM)))
    assert payload["init"] == sorted(payload["init"])
    for entry in payload["actions"]:
        for key in ("prePos", "preNeg", "add", "del"):
            assert entry[key] == sorted(entry[key])


@pytest.mark.parametrize(
    "mutate",
    [
        lambda p: p.pop("facts"),
        lambda p: p.__setitem__("init", [999]),
        lambda p: p["actions"][0].__setitem__("add", ["x"]),
        lambda p: p.__setitem__("actions", 7),
    ],
)
def test_malformed_payload_raises(mutate):
    payload = task_to_payload(ground(*_parse(BW_DOMAIN, BW_PROBLEM)))
    mutate(payload)
    with pytest.raises(GroundingError):
        task_from_payload(payload)


def test_ground_action_rejects_add_delete_overlap():
    with pytest.raises(GroundingError):
        GroundAction("bad", frozenset(), frozenset(), frozenset({0}), frozenset({0}))


def test_ground_task_rejects_out_of_range_index():
    with pytest.raises(GroundingError):
        GroundTask(("a()",), frozenset({1}), frozenset(), frozenset(), ())


# --- the converting service ---


def test_handle_encoding_request_end_to_end():
    reply = handle_encoding_request(
        {"domain": encode_text(BW_DOMAIN), "problem": encode_text(BW_PROBLEM), "counts": {}}
    )
    check_payload_schema(reply, "ground-task/1")
    task = task_from_payload(reply)
    assert len(task.actions) == 18
    assert not task.unsolvable


def test_handle_encoding_request_bad_base64():
    with pytest.raises(Exception):
        handle_encoding_request({"domain": "@@not-base64@@", "problem": encode_text(BW_PROBLEM), "counts": {}})


# --- pruning soundness: optimal plan length is preserved ---


def test_pruning_preserves_optimal_length_on_random_tasks():
    import bfs_oracle
    import taskgen

    for payload in taskgen.tasks(seed=2026, count=60, max_facts=10, max_actions=14):
        before = bfs_oracle.optimal_length(payload)
        task = task_from_payload(payload)
        pruned = relaxed_reachability_prune(compile_statics(task))
        after_payload = task_to_payload(pruned)
        after = bfs_oracle.optimal_length(after_payload)
        assert after == before, f"pruning changed optimal length: {before} -> {after}"
        if before is None:
            # Either the flag or an empty search space must witness it.
            assert pruned.unsolvable or after is None


# --- property: instantiation count equals the oracle's assignment count ---


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_instantiation_count_matches_oracle_property(data):
    domain = data.draw(_domains())
    problem = data.draw(_problems(domain))
    domain_text, problem_text = print_domain(domain), print_problem(problem)
    oracle = fixture_oracle.fixture_counts(domain_text, problem_text)
    task = instantiate(*_parse(domain_text, problem_text))
    assert len(task.actions) == oracle["groundActions"]
