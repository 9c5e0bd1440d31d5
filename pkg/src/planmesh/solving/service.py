"""The Solving capability: request intake and search execution.

Solving owns the planner pipeline but does none of the preparation
itself. A fresh solving-request/1 is answered with a request-and-
continue: the payload is reshaped for Parsing, the slip gains
[parse, encode] plus a resume step pointing back at this capability,
and the planner choice rides along in the payload's carry field —
workers keep no state between messages. When the pipeline returns a
ground-task/1, the carried planner string selects the search, and the
reply is a plan/1 payload whatever the outcome (solved, unsolvable, or
resourceLimit); only a malformed request or unknown planner is an
error.
"""

from __future__ import annotations

from typing import Any

from ..grounding import GroundTask, task_from_payload
from ..messaging import CARRY_KEY
from ..runtime import HandlerOutcome
from ..topology import ENCODE_STEP, PARSE_STEP, RESUME_STEP
from .search import Plan, SearchStats, parse_planner, run_search


def plan_payload(task: GroundTask, plan: Plan | None, stats: SearchStats) -> dict[str, Any]:
    """Shape a search result as a plan/1 payload.

    Besides the required fields, each plan step is spelled out with the
    facts it adds and deletes so a reader can replay the plan without
    the ground task at hand.
    """
    by_name = {action.name: action for action in task.actions}
    steps = list(plan.steps) if plan is not None else []
    payload: dict[str, Any] = {
        "outcome": stats.outcome,
        "plan": steps,
        "length": len(steps),
        "stats": {
            "expanded": stats.expanded,
            "generated": stats.generated,
            "evaluated": stats.evaluated,
            "elapsedMs": stats.elapsed_ms,
        },
    }
    if plan is not None:
        payload["steps"] = [
            {
                "name": name,
                "add": sorted(task.facts[i] for i in by_name[name].add),
                "del": sorted(task.facts[i] for i in by_name[name].delete),
            }
            for name in plan.steps
        ]
    return payload


def _accept_request(payload: dict[str, Any]) -> HandlerOutcome:
    parse_planner(payload.get("planner"))  # reject unknown planners up front
    carry = dict(payload.get(CARRY_KEY) or {})
    carry["planner"] = payload["planner"]
    forwarded = {
        "domain": payload.get("domain"),
        "problem": payload.get("problem"),
        "language": payload.get("language"),
        CARRY_KEY: carry,
    }
    return HandlerOutcome.result(
        forwarded,
        "parsing-request/1",
        sub_steps=(PARSE_STEP, ENCODE_STEP),
        resume=RESUME_STEP,
    )


def _resume(payload: dict[str, Any]) -> HandlerOutcome:
    carry = payload.get(CARRY_KEY) or {}
    config = parse_planner(carry.get("planner"))
    task = task_from_payload(payload)
    plan, stats = run_search(task, config)
    return HandlerOutcome.result(plan_payload(task, plan, stats), "plan/1")


def handle_solving(payload: Any, schema: str) -> HandlerOutcome:
    if schema == "solving-request/1":
        return _accept_request(payload)
    if schema == "ground-task/1":
        return _resume(payload)
    return HandlerOutcome.failure(f"solving cannot handle schema {schema!r}", "unexpected-schema")


def solve_task(task: GroundTask, planner: str) -> dict[str, Any]:
    """Run a planner string against an in-memory task; returns plan/1 shape."""
    config = parse_planner(planner)
    plan, stats = run_search(task, config)
    return plan_payload(task, plan, stats)
