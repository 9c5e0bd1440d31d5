"""Validation: simulation semantics, failure reporting, the service shape."""

import inspect

import pytest

import taskgen
from conftest import load_fixture
from planmesh.grounding import GroundAction, GroundTask, ground, task_from_payload, task_to_payload
from planmesh.messaging import check_payload_schema
from planmesh.pddl import parse_domain, parse_problem
from planmesh.solving import bfs
from planmesh.validation import (
    FailingStep,
    PreconditionViolationError,
    UnknownActionError,
    ValidationError,
    ValidationReport,
    apply_action,
    handle_validation_request,
    report_to_payload,
    validate,
)


def _blocksworld():
    domain = parse_domain(load_fixture("blocksworld-domain.pddl"))
    problem = parse_problem(load_fixture("blocksworld-p01.pddl"), domain)
    return ground(domain, problem)


def _solved(task):
    plan, stats = bfs(task)
    assert stats.outcome == "solved"
    return list(plan.steps)


# --- apply ---


def test_apply_action_produces_successor():
    action = GroundAction("go()", frozenset({0}), frozenset({1}), frozenset({2}), frozenset({0}))
    assert apply_action(frozenset({0}), action) == frozenset({2})


def test_apply_action_lists_exact_failures():
    action = GroundAction("go()", frozenset({0, 3}), frozenset({1, 2}), frozenset(), frozenset())
    with pytest.raises(PreconditionViolationError) as err:
        apply_action(frozenset({0, 1, 2}), action)
    assert err.value.missing == (3,)
    assert err.value.violated == (1, 2)
    assert err.value.action == "go()"


# --- validate ---


def test_solver_plan_validates():
    task = _blocksworld()
    report = validate(task, _solved(task))
    assert report.valid and report.goal_satisfied
    assert report.failing_step is None
    assert report.final_state_size > 0


def test_truncated_plan_misses_goal():
    task = _blocksworld()
    report = validate(task, _solved(task)[:-1])
    assert not report.valid
    assert not report.goal_satisfied
    assert report.failing_step is None  # every step applied; the goal just isn't reached


def test_corrupted_plan_reports_first_failure():
    task = _blocksworld()
    steps = _solved(task)
    steps[0], steps[1] = steps[1], steps[0]  # the second step needs the first
    report = validate(task, steps)
    assert not report.valid
    assert report.failing_step is not None
    assert report.failing_step.index == 0
    assert report.failing_step.action == steps[0]
    assert report.failing_step.missing  # names the unsupported literals
    for fact in report.failing_step.missing:
        assert fact in task.facts


def test_failure_stops_simulation():
    # Both steps are inapplicable; only the first one is reported.
    task = GroundTask(
        ("a()", "b()"),
        frozenset(),
        frozenset({1}),
        frozenset(),
        (
            GroundAction("one()", frozenset({0}), frozenset(), frozenset({1}), frozenset()),
            GroundAction("two()", frozenset({0}), frozenset(), frozenset(), frozenset()),
        ),
    )
    report = validate(task, ["one()", "two()"])
    assert report.failing_step.index == 0
    assert report.failing_step.action == "one()"


def test_negative_precondition_violation_is_named():
    task = GroundTask(
        ("a()", "b()"),
        frozenset({0}),
        frozenset({1}),
        frozenset(),
        (GroundAction("go()", frozenset(), frozenset({0}), frozenset({1}), frozenset()),),
    )
    report = validate(task, ["go()"])
    assert report.failing_step.violated == ("a()",)
    assert report.failing_step.missing == ()


def test_unknown_action_raises():
    task = _blocksworld()
    with pytest.raises(UnknownActionError) as err:
        validate(task, ["warp(a,b)"])
    assert err.value.index == 0
    assert err.value.name == "warp(a,b)"


def test_empty_plan_judged_by_goal():
    satisfied = GroundTask(("a()",), frozenset({0}), frozenset({0}), frozenset(), ())
    unsatisfied = GroundTask(("a()",), frozenset(), frozenset({0}), frozenset(), ())
    assert validate(satisfied, []).valid
    report = validate(unsatisfied, [])
    assert not report.valid and not report.goal_satisfied


def test_negative_goal_checked_at_the_end():
    task = GroundTask(
        ("a()", "b()"),
        frozenset({0}),
        frozenset(),
        frozenset({0}),
        (GroundAction("clear()", frozenset({0}), frozenset(), frozenset({1}), frozenset({0})),),
    )
    assert not validate(task, []).valid
    assert validate(task, ["clear()"]).valid


def test_report_invariant_is_enforced():
    with pytest.raises(ValidationError):
        ValidationReport(valid=True, goal_satisfied=False, final_state_size=0)
    with pytest.raises(ValidationError):
        ValidationReport(
            valid=True,
            goal_satisfied=True,
            final_state_size=0,
            failing_step=FailingStep(0, "x()", (), ()),
        )


# --- commuting adjacent steps ---


def _footprint(action):
    return action.pre_pos | action.pre_neg | action.add | action.delete


def _combine(left, right):
    """Union of two tasks over disjoint fact ranges: all pairs commute."""
    offset = len(left["facts"])

    def shift(indices):
        return [i + offset for i in indices]

    return {
        "facts": left["facts"] + ["r" + fact for fact in right["facts"]],
        "init": left["init"] + shift(right["init"]),
        "goalPos": left["goalPos"] + shift(right["goalPos"]),
        "goalNeg": left["goalNeg"] + shift(right["goalNeg"]),
        "actions": [{**a, "name": "l" + a["name"]} for a in left["actions"]]
        + [
            {
                "name": "r" + a["name"],
                "prePos": shift(a["prePos"]),
                "preNeg": shift(a["preNeg"]),
                "add": shift(a["add"]),
                "del": shift(a["del"]),
            }
            for a in right["actions"]
        ],
        "unsolvable": False,
    }


def test_swapping_disjoint_adjacent_steps_preserves_validity():
    solvable = []
    for payload in taskgen.tasks(seed=31, count=60, max_facts=6, max_actions=10):
        plan, stats = bfs(task_from_payload(payload))
        if stats.outcome == "solved" and plan.length >= 1:
            solvable.append(payload)
    assert len(solvable) >= 6

    swaps = 0
    for left, right in zip(solvable[0::2], solvable[1::2]):
        task = task_from_payload(_combine(left, right))
        plan, stats = bfs(task)
        assert stats.outcome == "solved"
        by_name = {a.name: a for a in task.actions}
        steps = list(plan.steps)
        for i in range(len(steps) - 1):
            first, second = by_name[steps[i]], by_name[steps[i + 1]]
            if _footprint(first) & _footprint(second):
                continue
            swapped = steps[:i] + [steps[i + 1], steps[i]] + steps[i + 2 :]
            assert validate(task, swapped).valid, f"swap at {i} broke the plan"
            swaps += 1
    assert swaps >= 5  # the corpus must actually exercise the property


# --- independence from the solver ---


def test_validation_shares_no_solver_code():
    import planmesh.validation as validation

    source = inspect.getsource(validation)
    assert "solving" not in source
    assert "heuristic" not in source


# --- the validating service ---


def test_handle_validation_request_round_trip():
    task = _blocksworld()
    payload = {"task": task_to_payload(task), "plan": _solved(task)}
    check_payload_schema(payload, "validation-request/1")
    reply = handle_validation_request(payload)
    check_payload_schema(reply, "validation-report/1")
    assert reply == {"valid": True, "goalSatisfied": True, "finalStateSize": reply["finalStateSize"]}


def test_handle_validation_request_reports_failing_step():
    task = _blocksworld()
    steps = _solved(task)
    steps[0], steps[1] = steps[1], steps[0]
    reply = handle_validation_request({"task": task_to_payload(task), "plan": steps})
    check_payload_schema(reply, "validation-report/1")
    assert not reply["valid"]
    assert reply["failingStep"]["index"] == 0
    assert set(reply["failingStep"]) == {"index", "action", "missing", "violated"}


@pytest.mark.parametrize(
    "payload",
    [
        {"task": "nope", "plan": []},
        {"task": {}, "plan": []},
        {"task": None, "plan": []},
        {"plan": []},
        {"task": {}, "plan": "pickup(a)"},
        {"task": {}, "plan": [1, 2]},
    ],
)
def test_handle_validation_request_rejects_malformed(payload):
    with pytest.raises((ValidationError, Exception)):
        handle_validation_request(payload)


def test_report_payload_shape_without_failure():
    report = ValidationReport(valid=False, goal_satisfied=False, final_state_size=3)
    payload = report_to_payload(report)
    assert payload == {"valid": False, "goalSatisfied": False, "finalStateSize": 3}
    check_payload_schema(payload, "validation-report/1")
