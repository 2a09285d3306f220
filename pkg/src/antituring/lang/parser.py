"""Recursive-descent parser for request programs.

Grammar::

    program := request*
    request := "MATCH" mode "(" kw ("," kw)* ")"
               ["WHERE" cond ("AND" cond)*]
               "APPLY" ident ["(" arg ("," arg)* ")"] ";"
    mode    := "ANY" | "ALL"
    cond    := ident cmp literal
    arg     := ident | literal
    literal := int | real | string

A keyword inside ``MATCH(...)`` may be an identifier, a string or a number,
so tokens such as ``"e-mail"`` or ``500`` can be matched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from antituring.lang.lexer import COMPARATORS, IDENT_RE, RESERVED, ParseError, Token, iter_tokens
from antituring.records import FieldValue

ORDERED_COMPARATORS = frozenset({"<", "<=", ">", ">="})


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int
    column: int


@dataclass(frozen=True)
class Condition:
    field: str
    comparator: str
    literal: FieldValue
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FieldRef:
    name: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Literal:
    value: FieldValue
    span: Span | None = field(default=None, compare=False, repr=False)


Arg = Union[FieldRef, Literal]


@dataclass(frozen=True)
class RequestAst:
    match_mode: str
    match_keywords: tuple[str, ...]
    conditions: tuple[Condition, ...]
    op_keyword: str
    op_args: tuple[Arg, ...]
    span: Span | None = field(default=None, compare=False, repr=False)
    op_span: Span | None = field(default=None, compare=False, repr=False)


def _span(first: Token, last: Token) -> Span:
    return Span(first.offset, last.end, first.line, first.column)


class _Parser:
    def __init__(self, text: str) -> None:
        self._source = iter_tokens(text)
        self.tokens: list[Token] = []
        self.i = 0

    @property
    def tok(self) -> Token:
        # pull lazily so a syntax error ahead of a lexical one is reported first
        while len(self.tokens) <= self.i:
            self.tokens.append(next(self._source))
        return self.tokens[self.i]

    def _error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        lexeme = tok.text if tok.kind != "EOF" else "<end of input>"
        return ParseError(message, tok.line, tok.column, lexeme)

    def _take(self, kind: str, what: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind:
            raise self._error(f"expected {what or repr(kind)}")
        self.i += 1
        return tok

    def program(self) -> list[RequestAst]:
        requests = []
        while self.tok.kind != "EOF":
            requests.append(self.request())
        return requests

    def request(self) -> RequestAst:
        first = self._take("MATCH", "'MATCH'")
        if self.tok.kind not in ("ANY", "ALL"):
            raise self._error("expected match mode ANY or ALL")
        mode = self.tok.kind
        self.i += 1
        self._take("(", "'('")
        keywords = [self.keyword()]
        while self.tok.kind == ",":
            self.i += 1
            keywords.append(self.keyword())
        self._take(")", "')' or ','")
        conditions = []
        if self.tok.kind == "WHERE":
            self.i += 1
            conditions.append(self.condition())
            while self.tok.kind == "AND":
                self.i += 1
                conditions.append(self.condition())
        self._take("APPLY", "'WHERE' or 'APPLY'")
        op = self._take("IDENT", "operation keyword")
        args = []
        if self.tok.kind == "(":
            self.i += 1
            args.append(self.arg())
            while self.tok.kind == ",":
                self.i += 1
                args.append(self.arg())
            self._take(")", "')' or ','")
        last = self._take(";", "';'")
        return RequestAst(
            match_mode=mode,
            match_keywords=tuple(keywords),
            conditions=tuple(conditions),
            op_keyword=op.value,
            op_args=tuple(args),
            span=_span(first, last),
            op_span=_span(op, op),
        )

    def keyword(self) -> str:
        tok = self.tok
        if tok.kind in ("IDENT", "STRING"):
            value = str(tok.value)
        elif tok.kind in ("INT", "REAL"):
            value = tok.text
        else:
            raise self._error("expected keyword")
        if not value:
            raise self._error("empty keyword")
        self.i += 1
        return value

    def condition(self) -> Condition:
        name = self._take("IDENT", "field name")
        cmp_tok = self.tok
        if cmp_tok.kind not in COMPARATORS:
            raise self._error("expected comparator")
        self.i += 1
        lit = self.literal()
        if isinstance(lit.value, str) and cmp_tok.kind in ORDERED_COMPARATORS:
            raise self._error("ordered comparator on string literal", cmp_tok)
        return Condition(name.value, cmp_tok.kind, lit.value, _span(name, self.tokens[self.i - 1]))

    def literal(self) -> Literal:
        tok = self.tok
        if tok.kind not in ("INT", "REAL", "STRING"):
            raise self._error("expected literal")
        self.i += 1
        return Literal(tok.value, _span(tok, tok))

    def arg(self) -> Arg:
        tok = self.tok
        if tok.kind == "IDENT":
            self.i += 1
            return FieldRef(tok.value, _span(tok, tok))
        return self.literal()


def parse_program(text: str) -> list[RequestAst]:
    """Parse every request in ``text`` or raise the first ParseError."""
    return _Parser(text).program()


def _quote(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def format_literal(value: FieldValue) -> str:
    if isinstance(value, str):
        return _quote(value)
    return repr(value)


def format_keyword(kw: str) -> str:
    if IDENT_RE.fullmatch(kw) and kw not in RESERVED:
        return kw
    return _quote(kw)


def format_request(ast: RequestAst) -> str:
    """Canonical single-line source for one request."""
    parts = [f"MATCH {ast.match_mode}(" + ", ".join(map(format_keyword, ast.match_keywords)) + ")"]
    if ast.conditions:
        conds = " AND ".join(
            f"{c.field} {c.comparator} {format_literal(c.literal)}" for c in ast.conditions
        )
        parts.append(f"WHERE {conds}")
    apply = f"APPLY {ast.op_keyword}"
    if ast.op_args:
        args = ", ".join(
            a.name if isinstance(a, FieldRef) else format_literal(a.value) for a in ast.op_args
        )
        apply += f"({args})"
    parts.append(apply)
    return " ".join(parts) + ";"


def format_program(program: list[RequestAst]) -> str:
    return "".join(format_request(ast) + "\n" for ast in program)
