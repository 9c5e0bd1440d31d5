"""Syntax trees for the PDDL fragment.

All nodes are immutable; structural equality is the round-trip contract
for the canonical printer. Variable names keep their ``?`` prefix, so
the same ``Atom`` shape serves schemas (variable args) and ground facts
(constant args).
"""

from __future__ import annotations

from dataclasses import dataclass

ROOT_TYPE = "object"


@dataclass(frozen=True)
class TypedName:
    """A name with its declared type; untyped declarations default to object."""

    name: str
    type_name: str = ROOT_TYPE


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]

    def format(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return "({} {})".format(self.predicate, " ".join(self.args))


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def format(self) -> str:
        return f"(not {self.atom.format()})" if self.negated else self.atom.format()


@dataclass(frozen=True)
class Predicate:
    name: str
    parameters: tuple[TypedName, ...]

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass(frozen=True)
class ActionSchema:
    """An action template: conjunctive precondition, add/delete effect."""

    name: str
    parameters: tuple[TypedName, ...]
    precondition: tuple[Literal, ...]
    effect: tuple[Literal, ...]


@dataclass(frozen=True)
class DomainAst:
    name: str
    requirements: frozenset[str]
    types: tuple[tuple[str, str], ...]  # (typeName, parentType), declaration order
    predicates: tuple[Predicate, ...]
    actions: tuple[ActionSchema, ...]

    def predicate_map(self) -> dict[str, Predicate]:
        return {p.name: p for p in self.predicates}


@dataclass(frozen=True)
class ProblemAst:
    name: str
    domain_name: str
    objects: tuple[TypedName, ...]
    init: frozenset[Atom]
    goal: tuple[Literal, ...]


def type_ancestry(types: tuple[tuple[str, str], ...]) -> dict[str, frozenset[str]]:
    """Map every type to itself plus all its ancestors up to the root.

    An object of type T fits a parameter of type P iff P is in the
    ancestry of T. The parser guarantees the declarations form a tree,
    so the parent walk terminates.
    """
    parent: dict[str, str | None] = {ROOT_TYPE: None}
    parent.update(types)
    ancestry: dict[str, frozenset[str]] = {}
    for type_name in parent:
        chain: set[str] = set()
        cursor: str | None = type_name
        while cursor is not None:
            chain.add(cursor)
            cursor = parent.get(cursor)
        chain.add(ROOT_TYPE)
        ancestry[type_name] = frozenset(chain)
    return ancestry
