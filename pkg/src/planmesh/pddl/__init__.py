"""PDDL front end: tokenizer, parser, canonical printer, parsing service.

Covers the STRIPS+typing fragment (requirements :strips, :typing,
:negative-preconditions, :equality). Everything here is pure: the same
input text yields identical trees across runs and processes.
"""

from .ast import ActionSchema, Atom, DomainAst, Literal, Predicate, ProblemAst, TypedName, type_ancestry
from .lexer import LexError, PddlError, Token, tokenize
from .parser import (
    ArityMismatchError,
    DomainNameMismatchError,
    ParseError,
    UnboundVariableError,
    UnknownObjectError,
    UnknownPredicateError,
    UnsupportedRequirementError,
    parse_domain,
    parse_problem,
)
from .printer import print_domain, print_problem
from .service import (
    Base64DecodeError,
    ParsedModel,
    UnsupportedLanguageError,
    decode_text,
    encode_text,
    handle_parsing_request,
)

__all__ = [
    "ActionSchema",
    "ArityMismatchError",
    "Atom",
    "Base64DecodeError",
    "DomainAst",
    "DomainNameMismatchError",
    "LexError",
    "Literal",
    "ParseError",
    "ParsedModel",
    "PddlError",
    "Predicate",
    "ProblemAst",
    "Token",
    "TypedName",
    "UnboundVariableError",
    "UnknownObjectError",
    "UnknownPredicateError",
    "UnsupportedLanguageError",
    "UnsupportedRequirementError",
    "decode_text",
    "encode_text",
    "handle_parsing_request",
    "parse_domain",
    "parse_problem",
    "print_domain",
    "print_problem",
    "tokenize",
    "type_ancestry",
]
