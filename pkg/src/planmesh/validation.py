"""Plan validation by independent step-by-step simulation.

This module deliberately shares no code with the solver: it reimplements
applicability and effect application from the task definition alone, so
it can catch solver bugs instead of inheriting them. Validation walks
the plan front to back, stops at the first violation, and only then
judges the goal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .grounding import GroundAction, GroundTask, task_from_payload


class ValidationError(Exception):
    """A plan cannot even be simulated against the task."""


class UnknownActionError(ValidationError):
    def __init__(self, index: int, name: str):
        super().__init__(f"step {index}: unknown action {name!r}")
        self.index = index
        self.name = name


class PreconditionViolationError(ValidationError):
    """An action was applied in a state that does not support it."""

    def __init__(self, action: str, missing: Iterable[int], violated: Iterable[int]):
        self.action = action
        self.missing = tuple(sorted(missing))
        self.violated = tuple(sorted(violated))
        super().__init__(
            f"{action}: missing positive preconditions {list(self.missing)}, "
            f"violated negative preconditions {list(self.violated)}"
        )


def apply_action(state: frozenset[int], action: GroundAction) -> frozenset[int]:
    """Successor state, or PreconditionViolationError naming every failed literal."""
    missing = action.pre_pos - state
    violated = action.pre_neg & state
    if missing or violated:
        raise PreconditionViolationError(action.name, missing, violated)
    return (state - action.delete) | action.add


@dataclass(frozen=True)
class FailingStep:
    index: int
    action: str
    missing: tuple[str, ...]
    violated: tuple[str, ...]


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    goal_satisfied: bool
    final_state_size: int
    failing_step: FailingStep | None = None

    def __post_init__(self):
        if self.valid != (self.failing_step is None and self.goal_satisfied):
            raise ValidationError("valid must equal (no failing step and goal satisfied)")


def validate(task: GroundTask, steps: Iterable[str]) -> ValidationReport:
    """Simulate ``steps`` from the initial state.

    Unknown action names are not a verdict but a broken request and
    raise; a precondition violation is a verdict and is reported as the
    (first) failing step with the exact missing and violated literals.
    """
    by_name: dict[str, GroundAction] = {action.name: action for action in task.actions}
    state = frozenset(task.init)
    for index, name in enumerate(steps):
        action = by_name.get(name)
        if action is None:
            raise UnknownActionError(index, name)
        try:
            state = apply_action(state, action)
        except PreconditionViolationError as exc:
            return ValidationReport(
                valid=False,
                goal_satisfied=False,
                final_state_size=len(state),
                failing_step=FailingStep(
                    index=index,
                    action=name,
                    missing=tuple(task.facts[i] for i in exc.missing),
                    violated=tuple(task.facts[i] for i in exc.violated),
                ),
            )
    goal_satisfied = task.goal_pos <= state and not (task.goal_neg & state)
    return ValidationReport(valid=goal_satisfied, goal_satisfied=goal_satisfied, final_state_size=len(state))


def report_to_payload(report: ValidationReport) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "valid": report.valid,
        "goalSatisfied": report.goal_satisfied,
        "finalStateSize": report.final_state_size,
    }
    if report.failing_step is not None:
        payload["failingStep"] = {
            "index": report.failing_step.index,
            "action": report.failing_step.action,
            "missing": list(report.failing_step.missing),
            "violated": list(report.failing_step.violated),
        }
    return payload


def handle_validation_request(payload: dict[str, Any]) -> dict[str, Any]:
    """Serve one validation-request/1 payload; returns validation-report/1."""
    if not isinstance(payload.get("task"), dict):
        raise ValidationError("task must be a ground-task/1 document")
    plan = payload.get("plan")
    if not isinstance(plan, list) or not all(isinstance(name, str) for name in plan):
        raise ValidationError("plan must be a list of ground action names")
    task = task_from_payload(payload["task"])
    return report_to_payload(validate(task, plan))
