"""Canonical text form for parsed trees.

Printing is the inverse of parsing up to structural equality:
``parse(print(tree)) == tree``. The canonical form makes every type
explicit, sorts requirements and init atoms, and keeps declaration
order everywhere else, so identical trees print identically.
"""

from __future__ import annotations

from .ast import DomainAst, Literal, ProblemAst, TypedName


def _typed(names: tuple[TypedName, ...]) -> str:
    return " ".join(f"{item.name} - {item.type_name}" for item in names)


def _conjunction(literals: tuple[Literal, ...]) -> str:
    if not literals:
        return "(and)"
    return "(and {})".format(" ".join(lit.format() for lit in literals))


def print_domain(domain: DomainAst) -> str:
    lines = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append("  (:requirements {})".format(" ".join(sorted(domain.requirements))))
    if domain.types:
        lines.append("  (:types {})".format(" ".join(f"{name} - {parent}" for name, parent in domain.types)))
    if domain.predicates:
        lines.append("  (:predicates")
        for predicate in domain.predicates:
            inner = predicate.name if not predicate.parameters else f"{predicate.name} {_typed(predicate.parameters)}"
            lines.append(f"    ({inner})")
        lines[-1] += ")"
    for action in domain.actions:
        lines.append(f"  (:action {action.name}")
        lines.append(f"    :parameters ({_typed(action.parameters)})")
        lines.append(f"    :precondition {_conjunction(action.precondition)}")
        lines.append(f"    :effect {_conjunction(action.effect)})")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def print_problem(problem: ProblemAst) -> str:
    lines = [f"(define (problem {problem.name})"]
    lines.append(f"  (:domain {problem.domain_name})")
    if problem.objects:
        lines.append(f"  (:objects {_typed(problem.objects)})")
    atoms = sorted(problem.init, key=lambda a: (a.predicate, a.args))
    lines.append("  (:init {})".format(" ".join(a.format() for a in atoms)) if atoms else "  (:init)")
    lines.append(f"  (:goal {_conjunction(problem.goal)}))")
    return "\n".join(lines) + "\n"
