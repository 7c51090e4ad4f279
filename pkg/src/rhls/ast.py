"""Kernel syntax tree, pretty printer and memory-operation numbering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union


@dataclass
class Num:
    value: int
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class Var:
    name: str
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class Index:
    """Array load ``array[index]``."""

    array: str
    index: "Expr"
    mem_id: int = -1
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class Bin:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


Expr = Union[Num, Var, Index, Bin]


@dataclass
class Assign:
    name: str
    value: Expr
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class Store:
    array: str
    index: Expr
    value: Expr
    mem_id: int = -1
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class If:
    cond: Expr
    then: list["Stmt"]
    orelse: list["Stmt"]
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class DoWhile:
    body: list["Stmt"]
    cond: Expr
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


Stmt = Union[Assign, Store, If, DoWhile]


@dataclass
class Param:
    name: str
    length: int | None = None  # None for scalars

    @property
    def is_array(self) -> bool:
        return self.length is not None


@dataclass
class Kernel:
    name: str
    params: list[Param]
    body: list[Stmt]
    result: Expr | None = None

    @property
    def arrays(self) -> dict[str, int]:
        return {p.name: p.length for p in self.params if p.is_array}

    @property
    def scalars(self) -> list[str]:
        return [p.name for p in self.params if not p.is_array]


# ---------------------------------------------------------------------------

def iter_exprs(e: Expr) -> Iterator[Expr]:
    """Sub-expressions in evaluation order (operands before the node)."""
    if isinstance(e, Bin):
        yield from iter_exprs(e.left)
        yield from iter_exprs(e.right)
    elif isinstance(e, Index):
        yield from iter_exprs(e.index)
    yield e


def iter_mem_ops(stmts: list[Stmt]) -> Iterator[Index | Store]:
    """Memory operations in sequential evaluation order."""
    for s in stmts:
        if isinstance(s, Assign):
            yield from (e for e in iter_exprs(s.value) if isinstance(e, Index))
        elif isinstance(s, Store):
            yield from (e for e in iter_exprs(s.index) if isinstance(e, Index))
            yield from (e for e in iter_exprs(s.value) if isinstance(e, Index))
            yield s
        elif isinstance(s, If):
            yield from (e for e in iter_exprs(s.cond) if isinstance(e, Index))
            yield from iter_mem_ops(s.then)
            yield from iter_mem_ops(s.orelse)
        elif isinstance(s, DoWhile):
            yield from iter_mem_ops(s.body)
            yield from (e for e in iter_exprs(s.cond) if isinstance(e, Index))


def number_mem_ops(k: Kernel) -> int:
    """Assign static memory-op ids in evaluation order; returns the count."""
    n = 0
    for op in iter_mem_ops(k.body):
        op.mem_id = n
        n += 1
    if k.result is not None:
        for e in iter_exprs(k.result):
            if isinstance(e, Index):
                e.mem_id = n
                n += 1
    return n


def mem_op_arrays(k: Kernel) -> dict[int, str]:
    ops = list(iter_mem_ops(k.body))
    if k.result is not None:
        ops += [e for e in iter_exprs(k.result) if isinstance(e, Index)]
    return {op.mem_id: op.array for op in ops}


# ---------------------------------------------------------------------------
# pretty printing

def expr_source(e: Expr) -> str:
    if isinstance(e, Num):
        return str(e.value) if e.value >= 0 else f"(0 - {-e.value})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.array}[{expr_source(e.index)}]"
    return f"({expr_source(e.left)} {e.op} {expr_source(e.right)})"


def _stmts_source(stmts: list[Stmt], indent: int) -> list[str]:
    pad = "  " * indent
    lines: list[str] = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.name} = {expr_source(s.value)};")
        elif isinstance(s, Store):
            lines.append(f"{pad}{s.array}[{expr_source(s.index)}] = {expr_source(s.value)};")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({expr_source(s.cond)}) {{")
            lines += _stmts_source(s.then, indent + 1)
            lines.append(f"{pad}}} else {{")
            lines += _stmts_source(s.orelse, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, DoWhile):
            lines.append(f"{pad}do {{")
            lines += _stmts_source(s.body, indent + 1)
            lines.append(f"{pad}}} while ({expr_source(s.cond)});")
    return lines


def to_source(k: Kernel) -> str:
    params = ", ".join(f"{p.name}:i32[{p.length}]" if p.is_array else f"{p.name}:i32"
                       for p in k.params)
    lines = [f"kernel {k.name}({params}) {{"]
    lines += _stmts_source(k.body, 1)
    if k.result is not None:
        lines.append(f"  return {expr_source(k.result)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
