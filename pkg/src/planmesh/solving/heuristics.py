"""Delete-relaxation heuristics and goal counting over ground tasks.

All heuristics map a state (frozenset of fact indices) to a float cost
estimate; ``math.inf`` marks a relaxed dead end. The relaxation table is
the least fixpoint of cost propagation through delete-free actions —
with ``max`` aggregation it yields h_max (admissible, consistent), with
``sum`` it yields h_add. h_ff extracts a relaxed plan by walking best
supporters backwards from the goal and counts its distinct actions.
"""

from __future__ import annotations

import math
from typing import Callable

from ..grounding import GroundTask

Heuristic = Callable[[frozenset[int]], float]

HEURISTIC_NAMES = ("goalcount", "hmax", "hadd", "hff")


def goal_count(state: frozenset[int], task: GroundTask) -> float:
    return float(len(task.goal_pos - state) + len(task.goal_neg & state))


def relaxation_table(state: frozenset[int], task: GroundTask, combine: str) -> list[float]:
    """Per-fact cost estimates under the delete relaxation.

    ``combine`` is "max" (h_max semantics) or "sum" (h_add semantics):
    how an action's precondition costs aggregate into its application
    cost. Facts in ``state`` cost 0; unreached facts stay at infinity.
    """
    if combine not in ("max", "sum"):
        raise ValueError(f"unknown combination {combine!r}")
    aggregate = max if combine == "max" else sum
    cost = [math.inf] * len(task.facts)
    for fact in state:
        cost[fact] = 0.0
    changed = True
    while changed:
        changed = False
        for action in task.actions:
            total = 0.0
            for fact in action.pre_pos:
                value = cost[fact]
                if value == math.inf:
                    total = math.inf
                    break
                total = aggregate((total, value))
            if total == math.inf:
                continue
            application = action.cost + total
            for fact in action.add:
                if application < cost[fact]:
                    cost[fact] = application
                    changed = True
    return cost


def hmax(state: frozenset[int], task: GroundTask) -> float:
    table = relaxation_table(state, task, "max")
    return max((table[goal] for goal in task.goal_pos), default=0.0)


def hadd(state: frozenset[int], task: GroundTask) -> float:
    table = relaxation_table(state, task, "sum")
    return sum(table[goal] for goal in task.goal_pos)


def hff(state: frozenset[int], task: GroundTask) -> float:
    """Relaxed-plan length via best-supporter backchaining.

    The best supporter of a fact is the achiever minimizing
    (application cost, action index) under the h_add table — the index
    makes extraction deterministic. Each supporting action is counted
    once, however many subgoals it serves.
    """
    table = relaxation_table(state, task, "sum")
    if any(table[goal] == math.inf for goal in task.goal_pos):
        return math.inf

    application: dict[int, float] = {}
    supporter: dict[int, int] = {}
    for index, action in enumerate(task.actions):
        total = 0.0
        for fact in action.pre_pos:
            value = table[fact]
            if value == math.inf:
                total = math.inf
                break
            total += value
        if total == math.inf:
            continue
        application[index] = action.cost + total
        for fact in action.add:
            best = supporter.get(fact)
            if best is None or (application[index], index) < (application[best], best):
                supporter[fact] = index

    plan: set[int] = set()
    seen: set[int] = set()
    agenda = [goal for goal in task.goal_pos if goal not in state]
    while agenda:
        fact = agenda.pop()
        if fact in seen:
            continue
        seen.add(fact)
        index = supporter[fact]
        if index in plan:
            continue
        plan.add(index)
        agenda.extend(fact for fact in task.actions[index].pre_pos if fact not in state)
    return float(len(plan))


def make_heuristic(name: str, task: GroundTask) -> Heuristic:
    if name == "goalcount":
        return lambda state: goal_count(state, task)
    if name == "hmax":
        return lambda state: hmax(state, task)
    if name == "hadd":
        return lambda state: hadd(state, task)
    if name == "hff":
        return lambda state: hff(state, task)
    raise ValueError(f"unknown heuristic {name!r}")
