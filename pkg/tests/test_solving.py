"""Solving: planner parsing, heuristics vs. the brute-force oracle, search."""

import math

import pytest

import bfs_oracle
import taskgen
from conftest import load_fixture
from planmesh.grounding import GroundAction, GroundTask, ground, task_from_payload, task_to_payload
from planmesh.messaging import CARRY_KEY, check_payload_schema
from planmesh.pddl import parse_domain, parse_problem
from planmesh.solving import (
    SearchConfig,
    UnknownPlannerError,
    astar,
    bfs,
    gbfs,
    goal_count,
    hadd,
    handle_solving,
    hff,
    hmax,
    parse_planner,
    plan_payload,
    relaxation_table,
    run_search,
    satisfies_goal,
    solve_task,
)
from planmesh.topology import ENCODE_STEP, PARSE_STEP, RESUME_STEP


def _fixture_task(prefix):
    domain = parse_domain(load_fixture(f"{prefix}-domain.pddl"))
    problem = parse_problem(load_fixture(f"{prefix}-p01.pddl"), domain)
    return ground(domain, problem)


def _simulate(task, steps):
    by_name = {a.name: a for a in task.actions}
    state = frozenset(task.init)
    for name in steps:
        action = by_name[name]
        assert action.pre_pos <= state and not (action.pre_neg & state), f"{name} inapplicable"
        state = (state - action.delete) | action.add
    return state


def _random_tasks(seed, count, **kwargs):
    return [task_from_payload(p) for p in taskgen.tasks(seed, count, **kwargs)]


# --- planner strings ---


@pytest.mark.parametrize(
    "text,algorithm,heuristic",
    [
        ("bfs", "bfs", "none"),
        ("astar:hmax", "astar", "hmax"),
        ("astar:goalcount", "astar", "goalcount"),
        ("gbfs:hff", "gbfs", "hff"),
        ("gbfs:hadd", "gbfs", "hadd"),
    ],
)
def test_parse_planner_accepts(text, algorithm, heuristic):
    config = parse_planner(text)
    assert (config.algorithm, config.heuristic) == (algorithm, heuristic)
    assert config.max_expansions == 1_000_000
    assert config.time_budget_ms == 30_000


@pytest.mark.parametrize(
    "text",
    ["magic:h42", "bfs:hmax", "astar", "gbfs", "astar:none", "astar:h99", "", None, 7, "BFS"],
)
def test_parse_planner_rejects(text):
    with pytest.raises(UnknownPlannerError):
        parse_planner(text)


def test_search_config_validates_directly():
    with pytest.raises(UnknownPlannerError):
        SearchConfig(algorithm="dijkstra")
    with pytest.raises(UnknownPlannerError):
        SearchConfig(algorithm="gbfs", heuristic="none")


# --- heuristics on a micro task ---


def _micro(shortcut=False):
    actions = [
        GroundAction("a1()", frozenset({0}), frozenset(), frozenset({1}), frozenset()),
        GroundAction("a2()", frozenset({1}), frozenset(), frozenset({2}), frozenset()),
    ]
    if shortcut:
        actions.append(GroundAction("a3()", frozenset({0}), frozenset(), frozenset({2}), frozenset()))
    return GroundTask(("a()", "b()", "g()"), frozenset({0}), frozenset({2}), frozenset(), tuple(actions))


def test_relaxation_chain_costs():
    task = _micro()
    state = frozenset(task.init)
    assert hmax(state, task) == 2.0
    assert hadd(state, task) == 2.0
    assert hff(state, task) == 2.0


def test_relaxation_shortcut_costs():
    task = _micro(shortcut=True)
    state = frozenset(task.init)
    assert hmax(state, task) == 1.0
    assert hadd(state, task) == 1.0
    assert hff(state, task) == 1.0


def test_relaxation_table_values():
    table = relaxation_table(frozenset({0}), _micro(), "max")
    assert table == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        relaxation_table(frozenset(), _micro(), "min")


def test_unreachable_goal_is_infinite():
    task = GroundTask(("a()", "g()"), frozenset({0}), frozenset({1}), frozenset(), ())
    state = frozenset(task.init)
    assert hmax(state, task) == math.inf
    assert hadd(state, task) == math.inf
    assert hff(state, task) == math.inf


def test_goal_count_counts_both_polarities():
    task = GroundTask(("a()", "b()"), frozenset(), frozenset({0}), frozenset({1}), ())
    assert goal_count(frozenset(), task) == 1.0  # a missing
    assert goal_count(frozenset({1}), task) == 2.0  # a missing, b violating
    assert goal_count(frozenset({0}), task) == 0.0


def test_all_heuristics_zero_on_goal_states():
    for task in _random_tasks(seed=11, count=30, max_facts=8, max_actions=12):
        distances = bfs_oracle.state_distances(task_to_payload(task))
        goal_states = [s for s in distances if satisfies_goal(s, task)]
        for state in goal_states[:5]:
            assert goal_count(state, task) == 0.0
            assert hmax(state, task) == 0.0
            assert hadd(state, task) == 0.0
            assert hff(state, task) == 0.0


def test_hmax_is_bounded_by_hadd():
    for task in _random_tasks(seed=12, count=30, max_facts=9, max_actions=14):
        for state in list(bfs_oracle.state_distances(task_to_payload(task)))[:20]:
            assert hmax(state, task) <= hadd(state, task)


def test_hmax_is_admissible():
    checked = 0
    for task in _random_tasks(seed=13, count=40, max_facts=8, max_actions=12):
        payload = task_to_payload(task)
        for state in list(bfs_oracle.state_distances(payload))[:25]:
            true_cost = bfs_oracle.goal_distance(payload, state)
            estimate = hmax(state, task)
            if true_cost is None:
                continue  # inf estimate is fine for unreachable goals too
            assert estimate <= true_cost, f"hmax {estimate} > h* {true_cost}"
            checked += 1
    assert checked > 100


def test_hmax_is_consistent():
    checked = 0
    for task in _random_tasks(seed=14, count=12, max_facts=8, max_actions=12):
        for state in list(bfs_oracle.state_distances(task_to_payload(task)))[:20]:
            here = hmax(state, task)
            for action in task.actions:
                if not (action.pre_pos <= state and not (action.pre_neg & state)):
                    continue
                there = hmax((state - action.delete) | action.add, task)
                assert here <= 1 + there, f"hmax inconsistent: {here} > 1 + {there}"
                checked += 1
    assert checked > 100


# --- search on the fixtures ---


def test_bfs_solves_blocksworld_optimally():
    task = _fixture_task("blocksworld")
    plan, stats = bfs(task)
    assert stats.outcome == "solved"
    assert plan.length == 6
    final = _simulate(task, plan.steps)
    assert satisfies_goal(final, task)


def test_astar_hmax_solves_gripper_optimally():
    task = _fixture_task("gripper")
    plan, stats = astar(task, "hmax")
    assert stats.outcome == "solved"
    assert plan.length == 5
    assert satisfies_goal(_simulate(task, plan.steps), task)


def test_gbfs_hff_finds_valid_blocksworld_plan():
    task = _fixture_task("blocksworld")
    plan, stats = gbfs(task, "hff")
    assert stats.outcome == "solved"
    assert satisfies_goal(_simulate(task, plan.steps), task)


def test_goal_already_satisfied_yields_empty_plan():
    task = GroundTask(("a()",), frozenset({0}), frozenset({0}), frozenset(), ())
    plan, stats = bfs(task)
    assert stats.outcome == "solved"
    assert plan.steps == ()
    assert stats.expanded == 0


# --- search vs. the oracle on random tasks ---


def test_bfs_matches_oracle_on_random_tasks():
    agreements = 0
    for payload in taskgen.tasks(seed=21, count=40, max_facts=10, max_actions=16):
        expected = bfs_oracle.optimal_length(payload)
        plan, stats = bfs(task_from_payload(payload))
        if expected is None:
            assert stats.outcome == "unsolvable"
        else:
            assert stats.outcome == "solved"
            assert plan.length == expected
            agreements += 1
    assert agreements >= 10  # the generator must not be degenerate


def test_astar_hmax_matches_bfs_on_random_tasks():
    solved = 0
    for payload in taskgen.tasks(seed=22, count=30, max_facts=10, max_actions=16):
        task = task_from_payload(payload)
        bfs_plan, bfs_stats = bfs(task)
        astar_plan, astar_stats = astar(task, "hmax")
        assert astar_stats.outcome == bfs_stats.outcome
        if bfs_stats.outcome == "solved":
            assert astar_plan.length == bfs_plan.length
            assert satisfies_goal(_simulate(task, astar_plan.steps), task)
            solved += 1
    assert solved >= 8


def test_astar_reopening_heuristics_stay_optimal():
    for payload in taskgen.tasks(seed=23, count=20, max_facts=9, max_actions=14):
        task = task_from_payload(payload)
        expected = bfs_oracle.optimal_length(payload)
        if expected is None:
            continue
        plan, stats = astar(task, "hmax")
        assert stats.outcome == "solved" and plan.length == expected


def test_gbfs_plans_are_valid_when_found():
    for heuristic in ("goalcount", "hadd", "hff"):
        for payload in taskgen.tasks(seed=24, count=15, max_facts=9, max_actions=14):
            task = task_from_payload(payload)
            plan, stats = gbfs(task, heuristic)
            if stats.outcome == "solved":
                assert satisfies_goal(_simulate(task, plan.steps), task)
            else:
                assert bfs_oracle.optimal_length(payload) is None


# --- outcomes and limits ---


def test_unsolvable_flag_short_circuits():
    task = GroundTask(("a()",), frozenset(), frozenset({0}), frozenset(), (), unsolvable=True)
    plan, stats = bfs(task)
    assert plan is None
    assert stats.outcome == "unsolvable"
    assert stats.expanded == 0


def test_expansion_limit_reports_resource_limit():
    task = _fixture_task("blocksworld")
    plan, stats = run_search(task, SearchConfig(algorithm="bfs", max_expansions=3))
    assert plan is None
    assert stats.outcome == "resourceLimit"
    assert stats.expanded == 3


def test_time_budget_reports_resource_limit():
    task = _fixture_task("gripper")
    plan, stats = run_search(task, SearchConfig(algorithm="bfs", time_budget_ms=0))
    assert plan is None
    assert stats.outcome == "resourceLimit"


def test_search_is_deterministic():
    task = _fixture_task("blocksworld")
    first_plan, first_stats = astar(task, "hff")
    second_plan, second_stats = astar(task, "hff")
    assert first_plan.steps == second_plan.steps
    assert (first_stats.expanded, first_stats.generated) == (second_stats.expanded, second_stats.generated)


# --- the solving service handler ---


def _request_payload(planner="bfs"):
    return {"planner": planner, "language": "pddl", "domain": "ZA==", "problem": "ZA=="}


def test_accept_phase_extends_the_slip():
    outcome = handle_solving(_request_payload("astar:hff"), "solving-request/1")
    assert not outcome.is_failure
    assert outcome.schema == "parsing-request/1"
    sub_steps, resume = outcome.extension
    assert sub_steps == (PARSE_STEP, ENCODE_STEP)
    assert resume == RESUME_STEP
    assert outcome.payload[CARRY_KEY]["planner"] == "astar:hff"
    check_payload_schema(outcome.payload, "parsing-request/1")


def test_accept_phase_rejects_unknown_planner():
    with pytest.raises(UnknownPlannerError):
        handle_solving(_request_payload("magic:h42"), "solving-request/1")


def test_resume_phase_runs_the_carried_planner():
    task = _fixture_task("blocksworld")
    payload = task_to_payload(task)
    payload[CARRY_KEY] = {"planner": "bfs"}
    outcome = handle_solving(payload, "ground-task/1")
    assert outcome.schema == "plan/1"
    check_payload_schema(outcome.payload, "plan/1")
    assert outcome.payload["outcome"] == "solved"
    assert outcome.payload["length"] == 6
    assert outcome.extension is None


def test_resume_phase_requires_a_carried_planner():
    payload = task_to_payload(_fixture_task("blocksworld"))
    with pytest.raises(UnknownPlannerError):
        handle_solving(payload, "ground-task/1")


def test_unexpected_schema_is_a_failure_outcome():
    outcome = handle_solving({}, "plan/1")
    assert outcome.is_failure
    assert "plan/1" in outcome.failure_message


def test_plan_payload_spells_out_steps():
    task = _fixture_task("blocksworld")
    reply = solve_task(task, "bfs")
    check_payload_schema(reply, "plan/1")
    assert reply["plan"] == [step["name"] for step in reply["steps"]]
    assert reply["stats"]["expanded"] > 0
    assert reply["stats"]["elapsedMs"] >= 0
    for step in reply["steps"]:
        assert step["add"] == sorted(step["add"])
        assert set(step) == {"name", "add", "del"}


def test_unsolvable_reply_is_ok_shaped():
    task = GroundTask(("a()",), frozenset(), frozenset({0}), frozenset(), (), unsolvable=True)
    reply = solve_task(task, "bfs")
    check_payload_schema(reply, "plan/1")
    assert reply["outcome"] == "unsolvable"
    assert reply["plan"] == [] and reply["length"] == 0
    assert "steps" not in reply
