"""The Converting capability: action-schema instantiation and pruning.

Turns a parsed model into an indexed ground propositional task: every
type-consistent parameter assignment becomes one ground action (equality
constraints are resolved at instantiation time), then static facts are
compiled away and delete-relaxation reachability prunes facts and
actions that can never matter. Fact indexing is lexicographic over the
printed atom, so identical inputs ground identically everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

from .pddl import DomainAst, ProblemAst, decode_text, parse_domain, parse_problem, type_ancestry
from .pddl.parser import EQUALITY


class GroundingError(Exception):
    """A ground task (or a payload describing one) violates its invariants."""


@dataclass(frozen=True)
class GroundAction:
    """One instantiated operator; all index sets refer to the task's fact table."""

    name: str
    pre_pos: frozenset[int]
    pre_neg: frozenset[int]
    add: frozenset[int]
    delete: frozenset[int]
    cost: int = 1

    def __post_init__(self):
        if self.add & self.delete:
            raise GroundingError(f"action {self.name!r} both adds and deletes a fact")


@dataclass(frozen=True)
class GroundTask:
    facts: tuple[str, ...]
    init: frozenset[int]
    goal_pos: frozenset[int]
    goal_neg: frozenset[int]
    actions: tuple[GroundAction, ...]
    unsolvable: bool = False
    provenance: tuple[str, str] | None = field(default=None, compare=False)

    def __post_init__(self):
        bound = len(self.facts)
        indices = set(self.init) | set(self.goal_pos) | set(self.goal_neg)
        for action in self.actions:
            indices |= action.pre_pos | action.pre_neg | action.add | action.delete
        if any(i < 0 or i >= bound for i in indices):
            raise GroundingError("fact index out of range")
        if self.goal_pos & self.goal_neg:
            raise GroundingError("goalPos and goalNeg overlap")


def format_ground(name: str, args: tuple[str, ...]) -> str:
    return "{}({})".format(name, ",".join(args))


def instantiate(domain: DomainAst, problem: ProblemAst) -> GroundTask:
    """One ground action per type-consistent assignment, equality resolved.

    The fact table covers every atom occurring in init, the goal, or any
    ground action. A goal that is structurally contradictory (the same
    atom required both positive and negative) marks the task unsolvable.
    """
    ancestry = type_ancestry(domain.types)

    def fits(object_type: str, param_type: str) -> bool:
        return param_type in ancestry.get(object_type, frozenset({object_type, "object"}))

    atoms: set[str] = set()
    ground_actions: list[tuple[str, set[str], set[str], set[str], set[str]]] = []
    for schema in domain.actions:
        pools = [
            [obj.name for obj in problem.objects if fits(obj.type_name, param.type_name)]
            for param in schema.parameters
        ]
        param_names = [param.name for param in schema.parameters]
        for combo in itertools.product(*pools):
            env = dict(zip(param_names, combo))
            pre_pos: set[str] = set()
            pre_neg: set[str] = set()
            add: set[str] = set()
            delete: set[str] = set()
            consistent = True
            for literal in schema.precondition:
                atom = literal.atom
                if atom.predicate == EQUALITY:
                    left, right = (env[a] for a in atom.args)
                    if (left == right) == literal.negated:
                        consistent = False
                        break
                    continue
                fact = format_ground(atom.predicate, tuple(env[a] for a in atom.args))
                (pre_neg if literal.negated else pre_pos).add(fact)
            if not consistent:
                continue
            for literal in schema.effect:
                fact = format_ground(literal.atom.predicate, tuple(env[a] for a in literal.atom.args))
                (delete if literal.negated else add).add(fact)
            delete -= add  # an atom both added and deleted ends up true
            name = format_ground(schema.name, combo)
            ground_actions.append((name, pre_pos, pre_neg, add, delete))
            atoms |= pre_pos | pre_neg | add | delete

    init_atoms = {format_ground(a.predicate, a.args) for a in problem.init}
    goal_pos_atoms: set[str] = set()
    goal_neg_atoms: set[str] = set()
    for literal in problem.goal:
        fact = format_ground(literal.atom.predicate, literal.atom.args)
        (goal_neg_atoms if literal.negated else goal_pos_atoms).add(fact)
    unsolvable = bool(goal_pos_atoms & goal_neg_atoms)
    goal_neg_atoms -= goal_pos_atoms  # keep the structural invariant; the flag records it
    atoms |= init_atoms | goal_pos_atoms | goal_neg_atoms

    facts = tuple(sorted(atoms))
    index = {fact: i for i, fact in enumerate(facts)}
    actions = tuple(
        GroundAction(
            name=name,
            pre_pos=frozenset(index[f] for f in pre_pos),
            pre_neg=frozenset(index[f] for f in pre_neg),
            add=frozenset(index[f] for f in add),
            delete=frozenset(index[f] for f in delete),
        )
        for name, pre_pos, pre_neg, add, delete in ground_actions
    )
    return GroundTask(
        facts=facts,
        init=frozenset(index[f] for f in init_atoms),
        goal_pos=frozenset(index[f] for f in goal_pos_atoms),
        goal_neg=frozenset(index[f] for f in goal_neg_atoms),
        actions=actions,
        unsolvable=unsolvable,
        provenance=(domain.name, problem.name),
    )


def _remap(task: GroundTask, keep: set[int], actions: list[GroundAction], unsolvable: bool) -> GroundTask:
    """Rebuild the task over the kept facts; relative (lexicographic) order survives."""
    kept = [i for i in range(len(task.facts)) if i in keep]
    new_index = {old: new for new, old in enumerate(kept)}

    def translate(indices: frozenset[int]) -> frozenset[int]:
        return frozenset(new_index[i] for i in indices if i in new_index)

    return GroundTask(
        facts=tuple(task.facts[i] for i in kept),
        init=translate(task.init),
        goal_pos=translate(task.goal_pos),
        goal_neg=translate(task.goal_neg),
        actions=tuple(
            GroundAction(
                name=a.name,
                pre_pos=translate(a.pre_pos),
                pre_neg=translate(a.pre_neg),
                add=translate(a.add),
                delete=translate(a.delete),
            )
            for a in actions
        ),
        unsolvable=unsolvable,
        provenance=task.provenance,
    )


def compile_statics(task: GroundTask) -> GroundTask:
    """Remove facts no action ever adds or deletes.

    A static fact's truth value is fixed by init, so static precondition
    and goal entries are decided here: actions with a violated static
    precondition are dropped, satisfied entries are stripped, and a
    statically violated goal marks the task unsolvable.
    """
    dynamic: set[int] = set()
    for action in task.actions:
        dynamic |= action.add | action.delete
    static = set(range(len(task.facts))) - dynamic

    unsolvable = task.unsolvable
    if (task.goal_pos & static) - task.init or (task.goal_neg & static) & task.init:
        unsolvable = True

    actions: list[GroundAction] = []
    for action in task.actions:
        if (action.pre_pos & static) - task.init or (action.pre_neg & static) & task.init:
            continue  # statically impossible
        actions.append(
            GroundAction(
                name=action.name,
                pre_pos=action.pre_pos - static,
                pre_neg=action.pre_neg - static,
                add=action.add,
                delete=action.delete,
            )
        )

    keep = set(range(len(task.facts))) - static
    task = GroundTask(
        facts=task.facts,
        init=task.init,
        goal_pos=task.goal_pos - static,
        goal_neg=task.goal_neg - static,
        actions=tuple(actions),
        unsolvable=unsolvable,
        provenance=task.provenance,
    )
    return _remap(task, keep, list(task.actions), unsolvable)


def relaxed_reachability_prune(task: GroundTask) -> GroundTask:
    """Prune by the least fixpoint of delete-free applicability from init.

    Actions whose positive preconditions are unreachable are removed;
    facts that are neither reachable nor negatively referenced (by a
    surviving precondition or the goal) are removed with index
    remapping. An unreachable positive goal fact flags the task as
    provably unsolvable.
    """
    reachable = set(task.init)
    changed = True
    while changed:
        changed = False
        for action in task.actions:
            if action.pre_pos <= reachable and not action.add <= reachable:
                reachable |= action.add
                changed = True

    applicable = [a for a in task.actions if a.pre_pos <= reachable]
    unsolvable = task.unsolvable or not task.goal_pos <= reachable

    keep = set(reachable) | set(task.goal_pos) | set(task.goal_neg)
    for action in applicable:
        keep |= action.pre_neg
    actions = [
        GroundAction(
            name=a.name,
            pre_pos=a.pre_pos,
            pre_neg=a.pre_neg,
            add=a.add,
            delete=frozenset(a.delete & keep),
        )
        for a in applicable
    ]
    return _remap(task, keep, actions, unsolvable)


def ground(domain: DomainAst, problem: ProblemAst) -> GroundTask:
    """The full Converting pipeline: instantiate, compile statics, prune."""
    return relaxed_reachability_prune(compile_statics(instantiate(domain, problem)))


def task_to_payload(task: GroundTask) -> dict[str, Any]:
    """Serialize to the ground-task/1 wire shape (provenance is in-memory only)."""
    return {
        "facts": list(task.facts),
        "init": sorted(task.init),
        "goalPos": sorted(task.goal_pos),
        "goalNeg": sorted(task.goal_neg),
        "actions": [
            {
                "name": a.name,
                "prePos": sorted(a.pre_pos),
                "preNeg": sorted(a.pre_neg),
                "add": sorted(a.add),
                "del": sorted(a.delete),
            }
            for a in task.actions
        ],
        "unsolvable": task.unsolvable,
    }


def task_from_payload(payload: dict[str, Any]) -> GroundTask:
    """Parse and validate a ground-task/1 payload."""
    try:
        facts = tuple(str(f) for f in payload["facts"])
        actions = tuple(
            GroundAction(
                name=str(entry["name"]),
                pre_pos=frozenset(int(i) for i in entry["prePos"]),
                pre_neg=frozenset(int(i) for i in entry["preNeg"]),
                add=frozenset(int(i) for i in entry["add"]),
                delete=frozenset(int(i) for i in entry["del"]),
            )
            for entry in payload["actions"]
        )
        return GroundTask(
            facts=facts,
            init=frozenset(int(i) for i in payload["init"]),
            goal_pos=frozenset(int(i) for i in payload["goalPos"]),
            goal_neg=frozenset(int(i) for i in payload["goalNeg"]),
            actions=actions,
            unsolvable=bool(payload["unsolvable"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GroundingError(f"malformed ground-task payload: {exc}") from exc


def handle_encoding_request(payload: dict[str, Any]) -> dict[str, Any]:
    """Serve one parsed-model/1 payload; returns a ground-task/1 payload."""
    domain = parse_domain(decode_text("domain", payload.get("domain")))
    problem = parse_problem(decode_text("problem", payload.get("problem")), domain)
    return task_to_payload(ground(domain, problem))
