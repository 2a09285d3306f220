"""Validate parsed requests against the block registry and number them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from antituring.blocks import FIELD, NUMBER, REGISTRY, FunctionalBlock
from antituring.lang.parser import (
    FieldRef,
    Literal,
    RequestAst,
    Span,
    format_request,
    parse_program,
)
from antituring.records import FieldValue


class CompileError(Exception):
    def __init__(self, message: str, span: Span | None = None) -> None:
        self.message = message
        self.span = span
        self.line = span.line if span else 0
        self.column = span.column if span else 0
        prefix = f"{self.line}:{self.column}: " if span else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Condition:
    field: str
    comparator: str
    literal: FieldValue


@dataclass(frozen=True)
class Request:
    """A compiled request.

    It carries only keywords, conditions and an operation: nothing in it can
    name a DPU, a record or a placement.
    """

    request_id: int
    match_mode: str
    keywords: tuple[str, ...]
    conditions: tuple[Condition, ...]
    op: str
    args: tuple[FieldValue, ...]
    source_text: str

    @property
    def field_arg(self) -> str | None:
        sig = REGISTRY[self.op].signature
        return self.args[0] if sig and sig[0] == FIELD else None

    def to_wire(self) -> dict:
        return {
            "request_id": self.request_id,
            "mode": self.match_mode,
            "keywords": list(self.keywords),
            "conditions": [[c.field, c.comparator, c.literal] for c in self.conditions],
            "op": self.op,
            "args": list(self.args),
        }


def _check_args(ast: RequestAst, block: FunctionalBlock) -> tuple[FieldValue, ...]:
    sig = block.signature
    args = ast.op_args
    if len(args) != len(sig):
        if sig and sig[0] == FIELD and not args:
            raise CompileError(f"{block.keyword} requires field argument", ast.op_span)
        raise CompileError(
            f"{block.keyword} takes {len(sig)} argument(s), got {len(args)}", ast.op_span
        )
    out: list[FieldValue] = []
    for kind, arg in zip(sig, args):
        if kind == FIELD:
            if not isinstance(arg, FieldRef):
                raise CompileError(f"{block.keyword} expects a field name", arg.span)
            out.append(arg.name)
        elif kind == NUMBER:
            if not (isinstance(arg, Literal) and not isinstance(arg.value, str)):
                raise CompileError(f"{block.keyword} expects a numeric literal", arg.span)
            out.append(arg.value)
    return tuple(out)


class Compiler:
    """Session-scoped compiler; request ids strictly increase per instance."""

    def __init__(self, registry: Mapping[str, FunctionalBlock] = REGISTRY, first_id: int = 1):
        self.registry = registry
        self._ids = itertools.count(first_id)

    def compile(self, ast: RequestAst) -> Request:
        block = self.registry.get(ast.op_keyword)
        if block is None:
            raise CompileError(f"unknown operation {ast.op_keyword!r}", ast.op_span)
        args = _check_args(ast, block)
        keywords = tuple(dict.fromkeys(kw.lower() for kw in ast.match_keywords))
        return Request(
            request_id=next(self._ids),
            match_mode=ast.match_mode,
            keywords=keywords,
            conditions=tuple(Condition(c.field, c.comparator, c.literal) for c in ast.conditions),
            op=block.keyword,
            args=args,
            source_text=format_request(ast),
        )

    def compile_program(self, text: str) -> list[Request]:
        return [self.compile(ast) for ast in parse_program(text)]


def compile_request(ast: RequestAst, registry: Mapping[str, FunctionalBlock] = REGISTRY,
                    request_id: int = 1) -> Request:
    return Compiler(registry, request_id).compile(ast)
