"""Line tokenizer shared by the topology and scenario parsers.

Both file formats are line oriented: ``#`` starts a comment, blank lines are
ignored, ``[name]`` opens a section and every other line is a whitespace
separated record.  Tokens remember their 1-based column so that parse errors
can point at the offending field.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .errors import InputError

_TOKEN = re.compile(r"\S+")
_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")


class ParseError(InputError):
    """Syntax error with a source position."""

    def __init__(self, message: str, line: int, column: int = 1, source: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line}:{column}: {message}")


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class Record:
    section: str
    line: int
    tokens: tuple[Token, ...]


def iter_records(text: str, sections: set[str], source: str | None = None) -> Iterator[Record]:
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = tuple(Token(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(body))
        if not tokens:
            continue
        first = tokens[0]
        if first.text.startswith("["):
            m = _SECTION.match(body.strip())
            if m is None:
                raise ParseError("malformed section header", lineno, first.column, source)
            if m.group(1) not in sections:
                raise ParseError(f"unknown section {m.group(1)!r}", lineno, first.column, source)
            section = m.group(1)
            continue
        if section is None:
            raise ParseError("record outside of any section", lineno, first.column, source)
        yield Record(section, lineno, tokens)


def parse_float(tok: Token, what: str, source: str | None = None) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {tok.text!r}", tok.line, tok.column, source) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ParseError(f"{what}: must be finite", tok.line, tok.column, source)
    return value


def parse_int(tok: Token, what: str, source: str | None = None) -> int:
    try:
        return int(tok.text, 0)
    except ValueError:
        raise ParseError(f"{what}: expected an integer, got {tok.text!r}", tok.line, tok.column, source) from None


def split_key_value(tok: Token, source: str | None = None) -> tuple[str, str]:
    key, sep, value = tok.text.partition("=")
    if not sep or not key or not value:
        raise ParseError(f"expected key=value, got {tok.text!r}", tok.line, tok.column, source)
    return key, value
