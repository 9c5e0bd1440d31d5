"""The Parsing capability's request handler.

Model texts travel as base64 strings. The language token selects one of
a set of interchangeable parsing strategies; only "pddl" ships, and the
reply carries the canonical re-printed texts plus structural counts so
downstream capabilities stay language-neutral.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass
from typing import Any

from .ast import DomainAst, ProblemAst
from .lexer import PddlError
from .parser import parse_domain, parse_problem
from .printer import print_domain, print_problem


class UnsupportedLanguageError(PddlError):
    def __init__(self, language: Any):
        super().__init__(f"unsupported modelling language {language!r}")
        self.language = language


class Base64DecodeError(PddlError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"field {field!r} is not base64-encoded UTF-8 text: {reason}")
        self.field = field


@dataclass(frozen=True)
class ParsedModel:
    domain: DomainAst
    problem: ProblemAst


class PddlStrategy:
    """Parses and re-prints the PDDL fragment."""

    language = "pddl"

    def parse(self, domain_text: str, problem_text: str) -> ParsedModel:
        domain = parse_domain(domain_text)
        problem = parse_problem(problem_text, domain)
        return ParsedModel(domain, problem)

    def print(self, model: ParsedModel) -> tuple[str, str]:
        return print_domain(model.domain), print_problem(model.problem)


LANGUAGES: dict[str, PddlStrategy] = {PddlStrategy.language: PddlStrategy()}


def decode_text(field: str, value: Any) -> str:
    if not isinstance(value, str):
        raise Base64DecodeError(field, "not a string")
    try:
        raw = base64.b64decode(value.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError, ValueError) as exc:
        raise Base64DecodeError(field, str(exc)) from exc
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise Base64DecodeError(field, f"decoded bytes are not UTF-8: {exc}") from exc


def encode_text(text: str) -> str:
    return base64.b64encode(text.encode("utf-8")).decode("ascii")


def handle_parsing_request(payload: dict[str, Any]) -> dict[str, Any]:
    """Serve one parsing-request/1 payload; returns a parsed-model/1 payload."""
    language = payload.get("language")
    strategy = LANGUAGES.get(language) if isinstance(language, str) else None
    if strategy is None:
        raise UnsupportedLanguageError(language)
    domain_text = decode_text("domain", payload.get("domain"))
    problem_text = decode_text("problem", payload.get("problem"))
    model = strategy.parse(domain_text, problem_text)
    canonical_domain, canonical_problem = strategy.print(model)
    return {
        "domain": encode_text(canonical_domain),
        "problem": encode_text(canonical_problem),
        "counts": {
            "predicates": len(model.domain.predicates),
            "actions": len(model.domain.actions),
            "objects": len(model.problem.objects),
        },
    }
