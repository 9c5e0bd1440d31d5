"""Recursive-descent parser for the PDDL fragment.

Accepted requirements: :strips, :typing, :negative-preconditions,
:equality. Anything else is rejected loudly, never ignored. All errors
carry the 1-based line/column of the offending token. Within one form,
structural errors (unbalanced parentheses, truncated input) are
reported before semantic ones.
"""

from __future__ import annotations

from .ast import (
    ROOT_TYPE,
    ActionSchema,
    Atom,
    DomainAst,
    Literal,
    Predicate,
    ProblemAst,
    TypedName,
)
from .lexer import DASH, EOF, KEYWORD, LPAREN, RPAREN, SYMBOL, VARIABLE, PddlError, Token, tokenize

SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing", ":negative-preconditions", ":equality"})

EQUALITY = "="


class ParseError(PddlError):
    """The input does not match the grammar or violates an invariant."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{message} at {line}:{column}")
        self.line = line
        self.column = column


class UnsupportedRequirementError(ParseError):
    def __init__(self, line: int, column: int, flag: str):
        super().__init__(line, column, f"unsupported requirement {flag}")
        self.flag = flag


class ArityMismatchError(ParseError):
    def __init__(self, line: int, column: int, predicate: str, expected: int, got: int):
        super().__init__(line, column, f"predicate {predicate!r} takes {expected} arguments, got {got}")
        self.predicate = predicate
        self.expected = expected
        self.got = got


class UnboundVariableError(ParseError):
    def __init__(self, line: int, column: int, variable: str):
        super().__init__(line, column, f"variable {variable} is not bound by the parameter list")
        self.variable = variable


class UnknownPredicateError(ParseError):
    def __init__(self, line: int, column: int, predicate: str):
        super().__init__(line, column, f"unknown predicate {predicate!r}")
        self.predicate = predicate


class UnknownObjectError(ParseError):
    def __init__(self, line: int, column: int, object_name: str):
        super().__init__(line, column, f"unknown object {object_name!r}")
        self.object_name = object_name


class DomainNameMismatchError(ParseError):
    def __init__(self, line: int, column: int, expected: str, got: str):
        super().__init__(line, column, f"problem is for domain {got!r}, expected {expected!r}")
        self.expected = expected
        self.got = got


class _Stream:
    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> Token:
        return self._tokens[self._pos]

    def next(self) -> Token:
        token = self._tokens[self._pos]
        if token.kind != EOF:
            self._pos += 1
        return token

    def at(self, kind: str, text: str | None = None) -> bool:
        token = self.peek()
        return token.kind == kind and (text is None or token.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        token = self.peek()
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text if text is not None else kind
            if token.kind == EOF:
                raise ParseError(
                    token.line, token.column, f"unbalanced parentheses: expected {wanted!r} but the input ended"
                )
            raise ParseError(token.line, token.column, f"expected {wanted!r}, found {token.text!r}")
        return self.next()

    def save(self) -> int:
        return self._pos

    def restore(self, pos: int) -> None:
        self._pos = pos


def _parse_typed_list(stream: _Stream, item_kind: str, what: str) -> list[TypedName]:
    """Parse ``name... - type name... - type ...`` until a non-item token.

    A trailing group without a dash gets the root type.
    """
    out: list[TypedName] = []
    pending: list[str] = []
    while True:
        token = stream.peek()
        if token.kind == item_kind:
            pending.append(stream.next().text)
        elif token.kind == DASH:
            if not pending:
                raise ParseError(token.line, token.column, f"expected {what} names before '-'")
            stream.next()
            type_name = stream.expect(SYMBOL).text
            out.extend(TypedName(name, type_name) for name in pending)
            pending = []
        else:
            break
    out.extend(TypedName(name) for name in pending)
    return out


def _parse_atom(stream: _Stream, arg_kinds: tuple[str, ...]) -> tuple[Atom, Token]:
    stream.expect(LPAREN)
    head = stream.peek()
    if head.kind != SYMBOL:
        stream.expect(SYMBOL)  # raises with the right position/message
    stream.next()
    args: list[str] = []
    while not stream.at(RPAREN):
        token = stream.peek()
        if token.kind == EOF:
            stream.expect(RPAREN)
        if token.kind not in arg_kinds:
            raise ParseError(token.line, token.column, f"expected an argument, found {token.text!r}")
        args.append(stream.next().text)
    stream.expect(RPAREN)
    return Atom(head.text, tuple(args)), head


def _parse_literal(stream: _Stream, arg_kinds: tuple[str, ...]) -> tuple[Literal, Token]:
    if stream.at(LPAREN):
        mark = stream.save()
        stream.next()
        if stream.at(SYMBOL, "not"):
            stream.next()
            atom, head = _parse_atom(stream, arg_kinds)
            stream.expect(RPAREN)
            return Literal(atom, negated=True), head
        stream.restore(mark)
    atom, head = _parse_atom(stream, arg_kinds)
    return Literal(atom), head


def _parse_conjunction(stream: _Stream, arg_kinds: tuple[str, ...]) -> list[tuple[Literal, Token]]:
    """Parse ``(and LIT*)`` or a bare literal into a list of (literal, head token)."""
    mark = stream.save()
    stream.expect(LPAREN)
    if stream.at(SYMBOL, "and"):
        stream.next()
        literals: list[tuple[Literal, Token]] = []
        while not stream.at(RPAREN):
            if stream.at(EOF):
                stream.expect(RPAREN)
            literals.append(_parse_literal(stream, arg_kinds))
        stream.expect(RPAREN)
        return literals
    stream.restore(mark)
    return [_parse_literal(stream, arg_kinds)]


def _check_atom(
    atom: Atom,
    head: Token,
    predicates: dict[str, Predicate],
    *,
    allow_equality: bool,
) -> None:
    if atom.predicate == EQUALITY:
        if not allow_equality:
            raise ParseError(head.line, head.column, "equality atoms are only supported in action preconditions")
        if len(atom.args) != 2:
            raise ArityMismatchError(head.line, head.column, EQUALITY, 2, len(atom.args))
        return
    declared = predicates.get(atom.predicate)
    if declared is None:
        raise UnknownPredicateError(head.line, head.column, atom.predicate)
    if declared.arity != len(atom.args):
        raise ArityMismatchError(head.line, head.column, atom.predicate, declared.arity, len(atom.args))


def _check_bound(literals: list[tuple[Literal, Token]], parameters: tuple[TypedName, ...]) -> None:
    bound = {p.name for p in parameters}
    for literal, head in literals:
        for arg in literal.atom.args:
            if not arg.startswith("?"):
                raise ParseError(head.line, head.column, f"constants are not supported in action bodies: {arg!r}")
            if arg not in bound:
                raise UnboundVariableError(head.line, head.column, arg)


def _known_types(types: tuple[tuple[str, str], ...]) -> set[str]:
    return {ROOT_TYPE, *(name for name, _parent in types)}


def _check_type(where: Token, type_name: str, known: set[str]) -> None:
    if type_name not in known:
        raise ParseError(where.line, where.column, f"unknown type {type_name!r}")


def _check_type_tree_acyclic(where: Token, types: tuple[tuple[str, str], ...]) -> None:
    parent = dict(types)
    for start in parent:
        seen = {start}
        cursor = parent.get(start)
        while cursor is not None:
            if cursor in seen:
                raise ParseError(where.line, where.column, f"type declarations form a cycle at {cursor!r}")
            seen.add(cursor)
            cursor = parent.get(cursor)


def parse_domain(text: str) -> DomainAst:
    """Parse a domain definition and enforce all DomainAst invariants."""
    stream = _Stream(tokenize(text))
    stream.expect(LPAREN)
    stream.expect(SYMBOL, "define")
    stream.expect(LPAREN)
    stream.expect(SYMBOL, "domain")
    name = stream.expect(SYMBOL).text
    stream.expect(RPAREN)

    requirements: set[str] = set()
    types: tuple[tuple[str, str], ...] = ()
    predicates: list[Predicate] = []
    actions: list[ActionSchema] = []

    while not stream.at(RPAREN):
        if stream.at(EOF):
            stream.expect(RPAREN)
        stream.expect(LPAREN)
        section = stream.expect(KEYWORD)
        if section.text == ":requirements":
            while not stream.at(RPAREN):
                flag = stream.expect(KEYWORD)
                if flag.text not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirementError(flag.line, flag.column, flag.text)
                requirements.add(flag.text)
            stream.expect(RPAREN)
        elif section.text == ":types":
            declared = _parse_typed_list(stream, SYMBOL, "type")
            stream.expect(RPAREN)
            seen: set[str] = set()
            for item in declared:
                if item.name == ROOT_TYPE:
                    raise ParseError(section.line, section.column, "cannot redeclare root type 'object'")
                if item.name in seen:
                    raise ParseError(section.line, section.column, f"duplicate type {item.name!r}")
                seen.add(item.name)
            types = tuple((item.name, item.type_name) for item in declared)
            known = _known_types(types)
            for item in declared:
                _check_type(section, item.type_name, known)
            _check_type_tree_acyclic(section, types)
        elif section.text == ":predicates":
            known = _known_types(types)
            while not stream.at(RPAREN):
                if stream.at(EOF):
                    stream.expect(RPAREN)
                stream.expect(LPAREN)
                pred_name = stream.expect(SYMBOL)
                params = _parse_typed_list(stream, VARIABLE, "parameter")
                stream.expect(RPAREN)
                if any(p.name == pred_name.text for p in predicates):
                    raise ParseError(pred_name.line, pred_name.column, f"duplicate predicate {pred_name.text!r}")
                for param in params:
                    _check_type(pred_name, param.type_name, known)
                predicates.append(Predicate(pred_name.text, tuple(params)))
            stream.expect(RPAREN)
        elif section.text == ":action":
            actions.append(_parse_action(stream, types, {p.name: p for p in predicates}))
        else:
            raise ParseError(section.line, section.column, f"unexpected section {section.text!r}")
    stream.expect(RPAREN)
    stream.expect(EOF)

    return DomainAst(
        name=name,
        requirements=frozenset(requirements),
        types=types,
        predicates=tuple(predicates),
        actions=tuple(actions),
    )


def _parse_action(
    stream: _Stream,
    types: tuple[tuple[str, str], ...],
    predicates: dict[str, Predicate],
) -> ActionSchema:
    name_token = stream.expect(SYMBOL)
    stream.expect(KEYWORD, ":parameters")
    stream.expect(LPAREN)
    params = _parse_typed_list(stream, VARIABLE, "parameter")
    stream.expect(RPAREN)
    stream.expect(KEYWORD, ":precondition")
    precondition = _parse_conjunction(stream, (VARIABLE, SYMBOL))
    stream.expect(KEYWORD, ":effect")
    effect = _parse_conjunction(stream, (VARIABLE, SYMBOL))
    stream.expect(RPAREN)

    # Semantic checks, now that the form is structurally complete.
    known = _known_types(types)
    seen: set[str] = set()
    for param in params:
        if param.name in seen:
            raise ParseError(name_token.line, name_token.column, f"duplicate parameter {param.name}")
        seen.add(param.name)
        _check_type(name_token, param.type_name, known)
    parameters = tuple(params)
    for literal, head in precondition:
        _check_atom(literal.atom, head, predicates, allow_equality=True)
    _check_bound(precondition, parameters)
    for literal, head in effect:
        _check_atom(literal.atom, head, predicates, allow_equality=False)
    _check_bound(effect, parameters)

    return ActionSchema(
        name=name_token.text,
        parameters=parameters,
        precondition=tuple(lit for lit, _head in precondition),
        effect=tuple(lit for lit, _head in effect),
    )


def parse_problem(text: str, domain: DomainAst) -> ProblemAst:
    """Parse a problem definition and cross-check it against ``domain``."""
    stream = _Stream(tokenize(text))
    predicates = domain.predicate_map()
    known = _known_types(domain.types)

    stream.expect(LPAREN)
    stream.expect(SYMBOL, "define")
    stream.expect(LPAREN)
    stream.expect(SYMBOL, "problem")
    name = stream.expect(SYMBOL).text
    stream.expect(RPAREN)

    stream.expect(LPAREN)
    stream.expect(KEYWORD, ":domain")
    domain_name_token = stream.expect(SYMBOL)
    if domain_name_token.text != domain.name:
        raise DomainNameMismatchError(
            domain_name_token.line, domain_name_token.column, domain.name, domain_name_token.text
        )
    stream.expect(RPAREN)

    objects: tuple[TypedName, ...] = ()
    if stream.at(LPAREN):
        mark = stream.save()
        stream.next()
        if stream.at(KEYWORD, ":objects"):
            obj_token = stream.next()
            declared = _parse_typed_list(stream, SYMBOL, "object")
            stream.expect(RPAREN)
            seen: set[str] = set()
            for item in declared:
                if item.name in seen:
                    raise ParseError(obj_token.line, obj_token.column, f"duplicate object {item.name!r}")
                seen.add(item.name)
                _check_type(obj_token, item.type_name, known)
            objects = tuple(declared)
        else:
            stream.restore(mark)

    object_names = {o.name for o in objects}

    stream.expect(LPAREN)
    stream.expect(KEYWORD, ":init")
    init: set[Atom] = set()
    while not stream.at(RPAREN):
        if stream.at(EOF):
            stream.expect(RPAREN)
        atom, head = _parse_atom(stream, (SYMBOL,))
        _check_atom(atom, head, predicates, allow_equality=False)
        _check_ground(atom, head, object_names)
        init.add(atom)
    stream.expect(RPAREN)

    stream.expect(LPAREN)
    stream.expect(KEYWORD, ":goal")
    goal_literals = _parse_conjunction(stream, (SYMBOL,))
    stream.expect(RPAREN)

    stream.expect(RPAREN)
    stream.expect(EOF)

    for literal, head in goal_literals:
        _check_atom(literal.atom, head, predicates, allow_equality=False)
        _check_ground(literal.atom, head, object_names)

    return ProblemAst(
        name=name,
        domain_name=domain_name_token.text,
        objects=objects,
        init=frozenset(init),
        goal=tuple(lit for lit, _head in goal_literals),
    )


def _check_ground(atom: Atom, head: Token, object_names: set[str]) -> None:
    for arg in atom.args:
        if arg.startswith("?"):
            raise ParseError(head.line, head.column, f"variables are not allowed here: {arg}")
        if arg not in object_names:
            raise UnknownObjectError(head.line, head.column, arg)
