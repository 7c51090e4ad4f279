"""Cycle-count benchmark over the corpus: CSV table plus a bar chart."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .inputs import Case
from .pipeline import CONFIGS, Config
from .verify import run_check


@dataclass
class BenchRow:
    kernel: str
    config: str
    passed: bool
    cycles: int | None
    error: str | None = None


def run_bench(cases: list[Case], configs: dict[str, Config] | None = None,
              mem_latency: int = 1, max_cycles: int = 1_000_000) -> list[BenchRow]:
    configs = CONFIGS if configs is None else configs
    rows = []
    for c in cases:
        for name, cfg in configs.items():
            o = run_check(c.kernel, c.memories, c.args, cfg, mem_latency, max_cycles)
            r = o.report
            trapped = o.sim is not None and o.sim.trap is not None
            rows.append(BenchRow(c.name, name, r.passed and not trapped, r.cycles,
                                 "trap" if trapped else r.error))
    return rows


def cycles_table(rows: list[BenchRow]) -> dict[str, dict[str, int | None]]:
    table: dict[str, dict[str, int | None]] = {}
    for r in rows:
        table.setdefault(r.kernel, {})[r.config] = r.cycles if r.passed else None
    return table


def speedups(rows: list[BenchRow], num: str = "full", den: str = "noq") -> dict[str, float]:
    """Per-kernel cycles(num) / cycles(den) for kernels where both passed."""
    out = {}
    for k, t in cycles_table(rows).items():
        if t.get(num) and t.get(den):
            out[k] = t[num] / t[den]
    return out


def geomean(values) -> float:
    values = list(values)
    if not values:
        return float("nan")
    return math.exp(sum(math.log(v) for v in values) / len(values))


def write_csv(rows: list[BenchRow], path: str | Path, configs: list[str] | None = None) -> None:
    """One row per kernel, one column per configuration.

    Failed runs show ``FAILED``; when both ``full`` and ``noq`` ran, a ratio
    column and a final geomean row are added.
    """
    if configs is None:
        configs = list(dict.fromkeys(r.config for r in rows))
    ratio = speedups(rows)
    with_ratio = "full" in configs and "noq" in configs
    header = ["kernel"] + configs + (["full/noq"] if with_ratio else [])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for k, t in cycles_table(rows).items():
            line = [k] + ["FAILED" if t.get(c) is None else t[c] for c in configs]
            if with_ratio:
                line.append(f"{ratio[k]:.4f}" if k in ratio else "")
            w.writerow(line)
        if with_ratio and ratio:
            w.writerow(["geomean"] + [""] * len(configs) + [f"{geomean(ratio.values()):.4f}"])


def plot(rows: list[BenchRow], path: str | Path) -> None:
    """Grouped bars of cycles per kernel and configuration."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    table = cycles_table(rows)
    kernels = sorted(table)
    configs = list(dict.fromkeys(r.config for r in rows))
    width = 0.8 / max(len(configs), 1)
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(kernels)), 4))
    for j, cfg in enumerate(configs):
        xs = [i + (j - (len(configs) - 1) / 2) * width for i in range(len(kernels))]
        ys = [table[k].get(cfg) or 0 for k in kernels]
        ax.bar(xs, ys, width, label=cfg)
    ax.set_xticks(range(len(kernels)))
    ax.set_xticklabels(kernels, rotation=20)
    ax.set_ylabel("cycles")
    ratio = speedups(rows)
    if ratio:
        ax.set_title(f"cycles per configuration (geomean full/noq = {geomean(ratio.values()):.2f})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
