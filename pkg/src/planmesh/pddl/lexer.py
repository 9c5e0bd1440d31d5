"""Tokenizer for the PDDL fragment.

Symbols are case-insensitive and normalized to lowercase; comments run
from ``;`` to the end of the line. Every token carries a 1-based line
and column so parse errors can point at their source.
"""

from __future__ import annotations

from dataclasses import dataclass

LPAREN = "lparen"
RPAREN = "rparen"
SYMBOL = "symbol"
KEYWORD = "keyword"
VARIABLE = "variable"
DASH = "dash"
EOF = "eof"

_NAME_FIRST = frozenset("abcdefghijklmnopqrstuvwxyz")
_NAME_REST = _NAME_FIRST | frozenset("0123456789-_")


class PddlError(Exception):
    """Base class for PDDL front-end errors."""


class LexError(PddlError):
    """An illegal character in the input text."""

    def __init__(self, line: int, column: int, char: str):
        super().__init__(f"illegal character {char!r} at {line}:{column}")
        self.line = line
        self.column = column
        self.char = char


@dataclass(frozen=True)
class Token:
    """One lexeme; ``kind`` is one of the module-level kind constants."""

    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    """Turn ``text`` into an exhaustive token stream ending in an eof token."""
    tokens: list[Token] = []
    line, column = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            column = 1
            continue
        if ch in " \t\r":
            i += 1
            column += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
                column += 1
            continue
        if ch == "(":
            tokens.append(Token(LPAREN, "(", line, column))
            i += 1
            column += 1
            continue
        if ch == ")":
            tokens.append(Token(RPAREN, ")", line, column))
            i += 1
            column += 1
            continue
        if ch == "-":
            tokens.append(Token(DASH, "-", line, column))
            i += 1
            column += 1
            continue
        if ch == "=":
            tokens.append(Token(SYMBOL, "=", line, column))
            i += 1
            column += 1
            continue
        if ch in "?:":
            j = i + 1
            if j >= n or text[j].lower() not in _NAME_FIRST:
                raise LexError(line, column, ch)
            j += 1
            while j < n and text[j].lower() in _NAME_REST:
                j += 1
            kind = VARIABLE if ch == "?" else KEYWORD
            tokens.append(Token(kind, text[i:j].lower(), line, column))
            column += j - i
            i = j
            continue
        if ch.lower() in _NAME_FIRST:
            j = i
            while j < n and text[j].lower() in _NAME_REST:
                j += 1
            tokens.append(Token(SYMBOL, text[i:j].lower(), line, column))
            column += j - i
            i = j
            continue
        raise LexError(line, column, ch)
    tokens.append(Token(EOF, "", line, column))
    return tokens
