"""Tokenizer and reader for the parenthesized file formats."""

from __future__ import annotations

from .syntax import TermplanError


class DslSyntaxError(TermplanError):
    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)


class Sym(str):
    """A string token that remembers where it came from."""

    line = 0
    col = 0

    def __new__(cls, text, line=0, col=0):
        obj = super().__new__(cls, text)
        obj.line, obj.col = line, col
        return obj


class SList(list):
    line = 0
    col = 0


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield Sym(ch, line, col)
            i += 1
            col += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        yield Sym(text[i:j], line, col)
        col += j - i
        i = j


def read_all(text: str) -> list:
    """Parse every top-level expression in ``text``."""
    stack = [SList()]
    for tok in tokenize(text):
        if tok == "(":
            lst = SList()
            lst.line, lst.col = tok.line, tok.col
            stack.append(lst)
        elif tok == ")":
            if len(stack) == 1:
                raise DslSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        open_ = stack[-1]
        raise DslSyntaxError("missing ')'", open_.line, open_.col)
    return stack[0]


def read_one(text: str):
    items = read_all(text)
    if len(items) != 1:
        raise DslSyntaxError(f"expected exactly one expression, found {len(items)}")
    return items[0]


def pos(x):
    return getattr(x, "line", None), getattr(x, "col", None)


def dump(x) -> str:
    if isinstance(x, list):
        return "(" + " ".join(dump(y) for y in x) + ")"
    return str(x)
