"""The fixed compilation pipeline and the four standard configurations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

from .ast import Kernel
from .buffers import BufferPolicy, place_buffers
from .build import build_rvsdg, separate_state_edges
from .disambig import disambiguate
from .ir import Netlist, Rvsdg, validate_netlist, validate_rvsdg
from .lowering import enforce_point_to_point, lower_gamma, lower_memory_ports, lower_theta
from .parser import parse

STAGES = ("parse", "rvsdg", "separate", "lower-gamma", "lower-theta", "memory-ports", "p2p",
          "disambig", "buffers")


@dataclass(frozen=True)
class Config:
    addrq: bool = True
    addrq_capacity: int = 8
    buffers: bool = True
    policy: BufferPolicy = field(default_factory=BufferPolicy)
    drop_gates: tuple = ()

    @property
    def name(self) -> str:
        base = "full" if self.addrq else "noq"
        return base if self.buffers else base + "-nobuf"

    def fingerprint(self) -> dict:
        return {"addrq": self.addrq, "addrq_capacity": self.addrq_capacity,
                "buffers": self.buffers, "fork_fifo_depth": self.policy.fork_fifo_depth,
                "ctl_fifo_depth": self.policy.ctl_fifo_depth,
                "backedge_removal": self.policy.backedge_removal,
                "drop_gates": list(self.drop_gates)}


FULL = Config()
NOQ = Config(addrq=False)
CONFIGS = {c.name: c for c in (FULL, NOQ, replace(FULL, buffers=False),
                               replace(NOQ, buffers=False))}


class StageError(Exception):
    """A stage produced an IR that fails validation."""

    def __init__(self, stage: str, violations: list):
        super().__init__(f"stage {stage}: " + "; ".join(str(v) for v in violations[:5]))
        self.stage = stage
        self.violations = violations


@dataclass
class Compiled:
    kernel: Kernel
    stages: dict = field(default_factory=dict)  # stage name -> Kernel | Rvsdg | Netlist

    @property
    def netlist(self) -> Netlist:
        return self.stages["buffers"]


def _check(stage: str, obj, validate: bool) -> None:
    if not validate:
        return
    if isinstance(obj, Rvsdg):
        v = validate_rvsdg(obj)
    elif isinstance(obj, Netlist):
        v = validate_netlist(obj, require_p2p=STAGES.index(stage) >= STAGES.index("p2p"))
    else:
        return
    if v:
        raise StageError(stage, v)


def compile_kernel(source: str | Kernel, config: Config = FULL, stop_after: str | None = None,
                   validate: bool = True,
                   on_stage: Callable[[str, object], None] | None = None) -> Compiled:
    """Run the pipeline, validating after every stage.

    Disabled passes (``addrq`` or ``buffers`` off) still record their stage,
    holding the unchanged netlist.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"unknown stage {stop_after!r}; choose from {', '.join(STAGES)}")
    k = parse(source) if isinstance(source, str) else source
    out = Compiled(k)
    steps = [
        ("parse", lambda _: k),
        ("rvsdg", lambda _: build_rvsdg(k, separate=False)),
        ("separate", separate_state_edges),
        ("lower-gamma", lower_gamma),
        ("lower-theta", lower_theta),
        ("memory-ports", lower_memory_ports),
        ("p2p", enforce_point_to_point),
        ("disambig", lambda n: disambiguate(n, config.addrq_capacity, config.drop_gates)
         if config.addrq else n),
        ("buffers", lambda n: place_buffers(n, config.policy) if config.buffers else n),
    ]
    obj = None
    for name, fn in steps:
        obj = fn(obj)
        _check(name, obj, validate)
        out.stages[name] = obj
        if on_stage is not None:
            on_stage(name, obj)
        if name == stop_after:
            break
    return out
