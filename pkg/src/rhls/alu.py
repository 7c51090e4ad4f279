"""32-bit integer arithmetic shared by the interpreter and the simulator."""

from __future__ import annotations

MASK = 0xFFFFFFFF

BINOPS = ("+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>")
COMPARES = ("==", "!=", "<", ">", "<=", ">=")
TRAPPING = ("/", "%")


class Trap(Exception):
    """Runtime trap raised by both execution engines.

    ``kind`` is one of ``"div0"``, ``"oob"``.
    """

    def __init__(self, kind: str, detail: str = "", op: int | None = None):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.detail = detail
        self.op = op


def wrap(x: int) -> int:
    """Reduce to signed 32-bit two's complement."""
    x &= MASK
    return x - 0x100000000 if x & 0x80000000 else x


def binop(op: str, a: int, b: int) -> int:
    if op == "+":
        return wrap(a + b)
    if op == "-":
        return wrap(a - b)
    if op == "*":
        return wrap(a * b)
    if op in ("/", "%"):
        if b == 0:
            raise Trap("div0", f"{a} {op} 0")
        # C semantics: truncate toward zero
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return wrap(q) if op == "/" else wrap(a - q * b)
    if op == "&":
        return wrap(a & b)
    if op == "|":
        return wrap(a | b)
    if op == "^":
        return wrap(a ^ b)
    # shift amounts use the low five bits, as a hardware shifter would
    if op == "<<":
        return wrap(a << (b & 31))
    if op == ">>":
        return wrap(a >> (b & 31))
    raise ValueError(f"unknown operator {op!r}")


def compare(op: str, a: int, b: int) -> int:
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == ">":
        return int(a > b)
    if op == "<=":
        return int(a <= b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(f"unknown comparison {op!r}")


def evaluate(op: str, a: int, b: int) -> int:
    return compare(op, a, b) if op in COMPARES else binop(op, a, b)
