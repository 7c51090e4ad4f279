"""Recursive-descent parser for the ``.rk`` kernel language.

Grammar::

    kernel   := 'kernel' ID '(' [param (',' param)*] ')' '{' stmt* [return] '}'
    param    := ID ':' 'i32' ['[' INT ']']
    stmt     := ID '=' expr ';' | ID '[' expr ']' '=' expr ';'
              | 'if' '(' expr ')' block ['else' block]
              | 'do' block 'while' '(' expr ')' ';'
              | 'while' '(' expr ')' block
    return   := 'return' expr ';'

``while`` is desugared to ``if (c) { do {..} while (c); }`` during parsing.
"""

from __future__ import annotations

import copy
import re

from .ast import (Assign, Bin, DoWhile, Expr, If, Index, Kernel, Num, Param, Stmt, Store,
                  Var, number_mem_ops)

KEYWORDS = {"kernel", "if", "else", "do", "while", "return", "i32"}

# lowest to highest precedence
LEVELS = [("|",), ("^",), ("&",), ("==", "!="), ("<", ">", "<=", ">="), ("<<", ">>"),
          ("+", "-"), ("*", "/", "%")]

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|//[^\n]*) |
    (?P<nl>\n) |
    (?P<num>\d+) |
    (?P<id>[A-Za-z_][A-Za-z0-9_]*) |
    (?P<op><<|>>|<=|>=|==|!=|[-+*/%&|^<>=(){}\[\];:,])
""", re.VERBOSE)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


def tokenize(text: str) -> list[tuple[str, str, int, int]]:
    toks = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind != "ws":
            value = m.group()
            if kind == "id" and value in KEYWORDS:
                kind = "kw"
            toks.append((kind, value, line, m.start() - start + 1))
        pos = m.end()
    toks.append(("eof", "", line, pos - start + 1))
    return toks


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.arrays: dict[str, int] = {}
        self.scalars: set[str] = set()

    # token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg: str, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok[2], tok[3])

    def accept(self, value: str) -> bool:
        if self.tok[1] == value and self.tok[0] in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        tok = self.tok
        if not self.accept(value):
            found = tok[1] or "end of input"
            raise self.error(f"expected '{value}', found '{found}'", tok)
        return tok

    def ident(self) -> tuple[str, tuple[int, int]]:
        tok = self.tok
        if tok[0] != "id":
            raise self.error(f"expected identifier, found '{tok[1] or 'end of input'}'")
        self.i += 1
        return tok[1], (tok[2], tok[3])

    # grammar
    def kernel(self) -> Kernel:
        self.expect("kernel")
        name, _ = self.ident()
        self.expect("(")
        params: list[Param] = []
        if not self.accept(")"):
            while True:
                params.append(self.param(params))
                if self.accept(")"):
                    break
                self.expect(",")
        self.expect("{")
        body: list[Stmt] = []
        result = None
        while not self.accept("}"):
            if self.tok[1] == "return":
                self.i += 1
                result = self.expr()
                self.expect(";")
                self.expect("}")
                break
            body.append(self.stmt())
        if self.tok[0] != "eof":
            raise self.error("trailing input after kernel")
        return Kernel(name, params, body, result)

    def param(self, seen: list[Param]) -> Param:
        name, pos = self.ident()
        if any(p.name == name for p in seen):
            raise ParseError(f"duplicate parameter '{name}'", *pos)
        self.expect(":")
        self.expect("i32")
        if self.accept("["):
            tok = self.tok
            if tok[0] != "num":
                raise self.error("expected array length")
            self.i += 1
            length = int(tok[1])
            if length <= 0:
                raise self.error("array length must be positive", tok)
            self.expect("]")
            self.arrays[name] = length
            return Param(name, length)
        self.scalars.add(name)
        return Param(name)

    def block(self) -> list[Stmt]:
        self.expect("{")
        out = []
        while not self.accept("}"):
            out.append(self.stmt())
        return out

    def stmt(self) -> Stmt:
        tok = self.tok
        pos = (tok[2], tok[3])
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = self.block() if self.accept("else") else []
            return If(cond, then, orelse, pos)
        if self.accept("do"):
            body = self.block()
            self.expect("while")
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return DoWhile(body, cond, pos)
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            body = self.block()
            return If(cond, [DoWhile(body, copy.deepcopy(cond), pos)], [], pos)
        if tok[0] == "kw" and tok[1] == "kernel":
            raise self.error("nested kernels are not supported")
        name, pos = self.ident()
        if self.accept("["):
            if name not in self.arrays:
                raise ParseError(f"'{name}' is not an array", *pos)
            index = self.expr()
            self.expect("]")
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return Store(name, index, value, pos=pos)
        if name in self.arrays:
            raise ParseError(f"cannot assign to array '{name}' as a whole", *pos)
        self.expect("=")
        value = self.expr()
        self.expect(";")
        return Assign(name, value, pos)

    def expr(self, level: int = 0) -> Expr:
        if level == len(LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok[0] == "op" and self.tok[1] in LEVELS[level]:
            tok = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = Bin(tok[1], left, right, (tok[2], tok[3]))
        return left

    def unary(self) -> Expr:
        tok = self.tok
        if self.accept("-"):
            return Bin("-", Num(0, (tok[2], tok[3])), self.unary(), (tok[2], tok[3]))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        pos = (tok[2], tok[3])
        if tok[0] == "num":
            self.i += 1
            return Num(int(tok[1]), pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok[0] == "id":
            name, pos = self.ident()
            if self.accept("["):
                if name not in self.arrays:
                    raise ParseError(f"'{name}' is not an array", *pos)
                index = self.expr()
                self.expect("]")
                return Index(name, index, pos=pos)
            if name in self.arrays:
                raise ParseError(f"array '{name}' used as a scalar", *pos)
            return Var(name, pos)
        raise self.error(f"unexpected '{tok[1] or 'end of input'}' in expression")


def _check_defined(k: Kernel) -> None:
    """Reject reads of undeclared or possibly-uninitialized scalars."""

    def expr(e: Expr, defined: set[str]) -> None:
        if isinstance(e, Var) and e.name not in defined:
            raise ParseError(f"use of undeclared or uninitialized identifier '{e.name}'", *e.pos)
        if isinstance(e, Bin):
            expr(e.left, defined)
            expr(e.right, defined)
        elif isinstance(e, Index):
            expr(e.index, defined)

    def stmts(body: list[Stmt], defined: set[str]) -> set[str]:
        defined = set(defined)
        for s in body:
            if isinstance(s, Assign):
                expr(s.value, defined)
                defined.add(s.name)
            elif isinstance(s, Store):
                expr(s.index, defined)
                expr(s.value, defined)
            elif isinstance(s, If):
                expr(s.cond, defined)
                a = stmts(s.then, defined)
                b = stmts(s.orelse, defined)
                defined |= a & b
            elif isinstance(s, DoWhile):
                inner = stmts(s.body, defined)
                expr(s.cond, inner)
                # names first assigned inside a loop body are local to it
        return defined

    final = stmts(k.body, set(k.scalars))
    if k.result is not None:
        expr(k.result, final)


def parse(text: str) -> Kernel:
    """Parse kernel source into a validated, desugared :class:`Kernel`."""
    k = Parser(text).kernel()
    _check_defined(k)
    number_mem_ops(k)
    return k
