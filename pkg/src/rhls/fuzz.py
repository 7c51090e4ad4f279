"""Random kernel generation and differential fuzzing.

Generated kernels use one to three power-of-two arrays, loops nested at most
two deep with small trip counts, and indices masked into bounds.  Divisors
are forced odd, so the only traps left are the ones the generator cannot
produce.  About a third of the index expressions are drawn from a tiny pool
so loads and stores collide often; the rest depend on loaded data.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

from .inputs import materialize
from .parser import parse
from .pipeline import FULL, Config
from .verify import run_check

COLLIDE = 0.3
_BINOPS = ["+", "-", "*", "&", "|", "^", "<<", ">>", "+", "-"]


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        n = rng.randint(1, 3)
        self.arrays = {name: rng.choice((8, 16, 32)) for name in "abc"[:n]}
        self.scalars = [f"x{i}" for i in range(rng.randint(2, 4))]
        self.counters: list[str] = []
        self.depth = 0
        self.stores = 0

    # expressions
    def leaf(self) -> str:
        r = self.rng.random()
        pool = self.scalars + self.counters
        if r < 0.35:
            return str(self.rng.randint(0, 9))
        return self.rng.choice(pool)

    def index(self, array: str) -> str:
        mask = self.arrays[array] - 1
        if self.rng.random() < COLLIDE:
            base = self.rng.choice(["0", "1"] + self.counters[-1:])
            return f"{base} & {mask}"
        return f"({self.expr(1)}) & {mask}"

    def load(self) -> str:
        a = self.rng.choice(list(self.arrays))
        return f"{a}[{self.index(a)}]"

    def expr(self, budget: int = 2) -> str:
        r = self.rng.random()
        if budget <= 0 or r < 0.25:
            return self.leaf()
        if r < 0.5:
            return self.load() if budget > 1 or self.rng.random() < 0.5 else self.leaf()
        op = self.rng.choice(_BINOPS + ["/", "%"] * (self.rng.random() < 0.15))
        left, right = self.expr(budget - 1), self.expr(budget - 1)
        if op in ("/", "%"):
            return f"({left} {op} ({right} | 1))"
        return f"({left} {op} {right})"

    def cond(self) -> str:
        op = self.rng.choice(["<", "==", "!=", ">="])
        if self.rng.random() < 0.6:
            return f"({self.load()} & 1) {op} {self.rng.randint(0, 1)}"
        return f"{self.expr(1)} {op} {self.expr(1)}"

    # statements
    def stmt(self, pad: str) -> list[str]:
        r = self.rng.random()
        if r < 0.12 and self.depth < 2:
            return self.loop(pad)
        if r < 0.25:
            return self.branch(pad)
        if r < 0.6:
            return self.store(pad)
        return [f"{pad}{self.rng.choice(self.scalars)} = {self.expr()};"]

    def store(self, pad: str) -> list[str]:
        self.stores += 1
        a = self.rng.choice(list(self.arrays))
        return [f"{pad}{a}[{self.index(a)}] = {self.expr()};"]

    def block(self, pad: str, lo: int, hi: int) -> list[str]:
        out: list[str] = []
        for _ in range(self.rng.randint(lo, hi)):
            out += self.stmt(pad)
        return out

    def branch(self, pad: str) -> list[str]:
        lines = [f"{pad}if ({self.cond()}) {{"] + self.block(pad + "  ", 1, 2)
        if self.rng.random() < 0.6:
            lines += [f"{pad}}} else {{"] + self.block(pad + "  ", 1, 2)
        return lines + [f"{pad}}}"]

    def loop(self, pad: str) -> list[str]:
        c = f"i{len(self.counters)}"
        trips = self.rng.randint(2, 6 if self.depth == 0 else 4)
        self.depth += 1
        self.counters.append(c)
        body = self.block(pad + "  ", 1, 4)
        if self.rng.random() < 0.5:
            body += self.store(pad + "  ")
        self.counters.pop()
        self.depth -= 1
        return ([f"{pad}{c} = 0;", f"{pad}do {{"] + body
                + [f"{pad}  {c} = {c} + 1;", f"{pad}}} while ({c} < {trips});"])

    def kernel(self, name: str) -> str:
        params = ", ".join(f"{a}: i32[{n}]" for a, n in self.arrays.items())
        lines = [f"kernel {name}({params}, n: i32) {{"]
        lines += [f"  {s} = {'n' if i == 0 else i};" for i, s in enumerate(self.scalars)]
        lines += self.loop("  ")
        lines += self.block("  ", 0, 2)
        lines.append(f"  return {self.expr(1)};")
        return "\n".join(lines + ["}"]) + "\n"


def generate(seed: int) -> tuple[str, dict]:
    """Return kernel source and an input spec, both determined by ``seed``."""
    rng = random.Random(seed)
    g = _Gen(rng)
    src = g.kernel(f"fuzz{seed}")
    spec = {"args": {"n": rng.randint(-20, 20)},
            "arrays": {a: {"seed": rng.randrange(1 << 30), "lo": -64, "hi": 64}
                       for a in g.arrays}}
    return src, spec


def case_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


@dataclass
class Verdict:
    index: int
    seed: int
    passed: bool
    reason: str
    error: str | None
    cycles: int | None


def check_one(index: int, seed: int, config: Config = FULL, max_cycles: int = 200_000) -> Verdict:
    s = case_seed(seed, index)
    src, spec = generate(s)
    k = parse(src)
    memories, args = materialize(spec, k)
    r = run_check(k, memories, args, config, max_cycles=max_cycles).report
    return Verdict(index, s, r.passed, "" if r.passed else r.reason, r.error, r.cycles)


def _job(a):
    return check_one(*a)


def run_fuzz(count: int, seed: int = 0, config: Config = FULL, workers: int = 1,
             max_cycles: int = 200_000) -> Iterator[Verdict]:
    """Yield verdicts in index order."""
    jobs = [(i, seed, config, max_cycles) for i in range(count)]
    if workers <= 1:
        yield from map(_job, jobs)
        return
    with ProcessPoolExecutor(workers) as pool:
        yield from pool.map(_job, jobs, chunksize=8)


def write_repro(v: Verdict, directory: str | Path) -> Path:
    """Write ``fuzz<seed>.rk`` and its input sidecar; return the kernel path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    src, spec = generate(v.seed)
    path = d / f"fuzz{v.seed}.rk"
    path.write_text(src)
    path.with_suffix(".json").write_text(json.dumps(spec, indent=1) + "\n")
    return path


def verdict_line(v: Verdict) -> str:
    return json.dumps(asdict(v), sort_keys=True)
