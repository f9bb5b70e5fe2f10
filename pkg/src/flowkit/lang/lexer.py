from __future__ import annotations

import re
from dataclasses import dataclass

from ..model import Span

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*")
INT_RE = re.compile(r"-?[0-9]+")
OPERATORS = ("->", "=>", "==", "!=", "<=", ">=", "<", ">", "{", "}", ":", ",", ".",
             "=", "*", "(", ")", "/")


@dataclass(frozen=True)
class Tok:
    type: str  # NAME | STRING | INT | OP | ERROR | EOF
    value: str
    span: Span

    def is_op(self, value: str) -> bool:
        return self.type == "OP" and self.value == value

    def is_word(self, value: str) -> bool:
        return self.type == "NAME" and self.value == value


def tokenize(text: str, filename: str = "<input>") -> list[Tok]:
    """Split ``.fm`` text into tokens; ``#`` starts a comment."""
    text = text.replace("\r\n", "\n")
    toks: list[Tok] = []
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                toks.append(Tok("ERROR", "unterminated string", Span(filename, line, col, j - i)))
                col += j - i
                i = j
                continue
            value = text[i + 1:j]
            toks.append(Tok("STRING", value, Span(filename, line, col, j + 1 - i)))
            col += j + 1 - i
            i = j + 1
            continue
        m = INT_RE.match(text, i) if (ch.isdigit() or ch == "-") else None
        if m and not text.startswith("->", i):
            toks.append(Tok("INT", m.group(), Span(filename, line, col, len(m.group()))))
        else:
            m = NAME_RE.match(text, i)
            if m:
                toks.append(Tok("NAME", m.group(), Span(filename, line, col, len(m.group()))))
            else:
                op = next((o for o in OPERATORS if text.startswith(o, i)), None)
                if op is None:
                    toks.append(Tok("ERROR", f"unexpected character {ch!r}",
                                    Span(filename, line, col, 1)))
                    i, col = i + 1, col + 1
                    continue
                toks.append(Tok("OP", op, Span(filename, line, col, len(op))))
                i, col = i + len(op), col + len(op)
                continue
        length = len(m.group())
        i, col = i + length, col + length
    toks.append(Tok("EOF", "", Span(filename, line, col, 1)))
    return toks
