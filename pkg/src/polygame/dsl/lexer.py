"""Tokenizer for ``.psg`` sources."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import PsgSyntaxError

KEYWORDS = {
    "smg", "const", "int", "double", "bool", "matrix", "player", "endplayer",
    "module", "endmodule", "init", "true", "false", "label", "rewards",
    "endrewards", "global",
}

# longest operators first
_SYMBOLS = [
    "->", "..", "<=", ">=", "!=", "&&", "||",
    "[", "]", "(", ")", "{", "}", ",", ";", ":", "+", "-", "*", "/",
    "=", "<", ">", "&", "|", "!",
]

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<primed>[A-Za-z_][A-Za-z_0-9]*')
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"[^"\n]*")
  | (?P<symbol>""" + "|".join(re.escape(s) for s in _SYMBOLS) + r""")
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, IDENT, PRIMED, STRING, KEYWORD, SYMBOL, EOF
    value: str
    line: int
    column: int

    def __repr__(self) -> str:
        return f"{self.kind}({self.value!r})@{self.line}:{self.column}"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise PsgSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "number":
            tokens.append(Token("NUMBER", text, line, col))
        elif kind == "primed":
            tokens.append(Token("PRIMED", text[:-1], line, col))
        elif kind == "ident":
            tokens.append(Token("KEYWORD" if text in KEYWORDS else "IDENT", text, line, col))
        elif kind == "string":
            tokens.append(Token("STRING", text[1:-1], line, col))
        elif kind == "symbol":
            tokens.append(Token("SYMBOL", text, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
