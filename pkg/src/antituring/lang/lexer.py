"""Tokenizer for ``.atm`` request scripts."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

RESERVED = frozenset({"MATCH", "ANY", "ALL", "WHERE", "AND", "APPLY"})
COMPARATORS = frozenset({"==", "!=", "<", "<=", ">", ">="})
PUNCTUATION = frozenset("(),;")

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"-?[0-9]+(?P<frac>\.[0-9]+)?(?P<exp>[eE][+-]?[0-9]+)?")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


class ParseError(Exception):
    """A positioned diagnostic. ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int, column: int, lexeme: str = "") -> None:
        self.message = message
        self.line = line
        self.column = column
        self.lexeme = lexeme
        super().__init__(f"{line}:{column}: {message}" + (f" near {lexeme!r}" if lexeme else ""))


@dataclass(frozen=True)
class Token:
    kind: str  # reserved word, comparator, punctuation, or IDENT/INT/REAL/STRING/EOF
    value: Union[str, int, float, None]
    text: str
    offset: int
    line: int
    column: int

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


class _Cursor:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def advance(self, n: int) -> None:
        for ch in self.text[self.pos : self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n


def _lex_string(cur: _Cursor) -> Token:
    text = cur.text
    start, line, col = cur.pos, cur.line, cur.col
    i = start + 1
    chars: list[str] = []
    while i < len(text):
        ch = text[i]
        if ch == '"':
            raw = text[start : i + 1]
            cur.advance(len(raw))
            return Token("STRING", "".join(chars), raw, start, line, col)
        if ch == "\n":
            break
        if ch == "\\":
            nxt = text[i + 1] if i + 1 < len(text) else ""
            if nxt not in _ESCAPES:
                # report the escape itself, not the string start
                esc_col = col + (i - start)
                raise ParseError("invalid escape sequence", line, esc_col, "\\" + nxt)
            chars.append(_ESCAPES[nxt])
            i += 2
            continue
        chars.append(ch)
        i += 1
    raise ParseError("unterminated string", line, col, text[start:i])


def tokenize(text: str) -> list[Token]:
    """Split source text into tokens, ending with a single EOF token."""
    return list(iter_tokens(text))


def iter_tokens(text: str) -> Iterator[Token]:
    """Lazy form of :func:`tokenize`; a lexical error surfaces only when reached."""
    cur = _Cursor(text)
    while cur.pos < len(text):
        ch = text[cur.pos]
        if ch in " \t\r\n\f\v":
            cur.advance(1)
            continue
        if ch == "#":
            end = text.find("\n", cur.pos)
            cur.advance((len(text) if end < 0 else end) - cur.pos)
            continue
        start, line, col = cur.pos, cur.line, cur.col
        if ch == '"':
            yield _lex_string(cur)
            continue
        if ch in PUNCTUATION:
            cur.advance(1)
            yield Token(ch, ch, ch, start, line, col)
            continue
        m = _NUMBER_RE.match(text, start)
        if m and (ch.isdigit() or ch == "-"):
            lexeme = m.group(0)
            tail = IDENT_RE.match(text, m.end())
            if tail:
                raise ParseError("malformed number", line, col, lexeme + tail.group(0))
            if m.group("frac") or m.group("exp"):
                value: int | float = float(lexeme)
                kind = "REAL"
            else:
                value = int(lexeme)
                kind = "INT"
            cur.advance(len(lexeme))
            yield Token(kind, value, lexeme, start, line, col)
            continue
        m = IDENT_RE.match(text, start)
        if m:
            word = m.group(0)
            cur.advance(len(word))
            kind = word if word in RESERVED else "IDENT"
            yield Token(kind, word, word, start, line, col)
            continue
        if ch in "=!<>":
            end = start
            while end < len(text) and text[end] in "=!<>":
                end += 1
            lexeme = text[start:end]
            if lexeme not in COMPARATORS:
                raise ParseError("unknown comparator", line, col, lexeme)
            cur.advance(len(lexeme))
            yield Token(lexeme, lexeme, lexeme, start, line, col)
            continue
        raise ParseError("illegal character", line, col, ch)
    yield Token("EOF", None, "", cur.pos, cur.line, cur.col)
