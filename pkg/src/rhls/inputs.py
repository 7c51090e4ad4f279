"""Sidecar input files and the bundled corpus.

An input spec is JSON of the form::

    {"args": {"n": 3},
     "arrays": {"a": [1, 2, 3], "b": {"fill": 0}, "c": {"seed": 7, "lo": -8, "hi": 8}}}

Arrays left out are zero-filled; ``seed`` draws uniform integers in
``[lo, hi]`` (default 0..255) with a private generator.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import alu
from .ast import Kernel
from .parser import parse


class InputError(ValueError):
    pass


def materialize(spec: dict | None, kernel: Kernel) -> tuple[dict[str, list[int]], dict[str, int]]:
    spec = spec or {}
    unknown = set(spec.get("arrays", {})) - set(kernel.arrays)
    if unknown:
        raise InputError(f"inputs for undeclared arrays: {', '.join(sorted(unknown))}")
    memories = {}
    for name, length in kernel.arrays.items():
        init = spec.get("arrays", {}).get(name, {"fill": 0})
        if isinstance(init, list):
            if len(init) != length:
                raise InputError(f"array {name}: {len(init)} values for length {length}")
            values = init
        elif "fill" in init:
            values = [init["fill"]] * length
        elif "seed" in init:
            rng = random.Random(init["seed"])
            lo, hi = init.get("lo", 0), init.get("hi", 255)
            values = [rng.randint(lo, hi) for _ in range(length)]
        else:
            raise InputError(f"array {name}: expected a list, 'fill' or 'seed'")
        memories[name] = [alu.wrap(v) for v in values]
    args = dict(spec.get("args", {}))
    missing = [s for s in kernel.scalars if s not in args]
    if missing:
        raise InputError(f"missing scalar arguments: {', '.join(missing)}")
    extra = set(args) - set(kernel.scalars)
    if extra:
        raise InputError(f"arguments for undeclared scalars: {', '.join(sorted(extra))}")
    return memories, {k: alu.wrap(v) for k, v in args.items()}


@dataclass
class Case:
    name: str
    source: str
    kernel: Kernel
    memories: dict[str, list[int]]
    args: dict[str, int]


def load_case(path: str | Path) -> Case:
    """Load ``x.rk`` together with its ``x.json`` sidecar, if present."""
    path = Path(path)
    source = path.read_text()
    kernel = parse(source)
    side = path.with_suffix(".json")
    spec = json.loads(side.read_text()) if side.exists() else None
    memories, args = materialize(spec, kernel)
    return Case(path.stem, source, kernel, memories, args)


def corpus_dir() -> Path:
    return Path(str(resources.files("rhls") / "corpus"))


def load_corpus(directory: str | Path | None = None) -> list[Case]:
    d = Path(directory) if directory is not None else corpus_dir()
    return [load_case(p) for p in sorted(d.glob("*.rk"))]
