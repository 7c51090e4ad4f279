"""Command-line entry point: ``rhls build|run|check|fuzz|bench|viz``.

Exit codes: 0 success, 1 usage or parse error, 2 IR validation failure,
3 simulation trap (including deadlock and cycle budget), 4 equivalence
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .buffers import BufferPolicy
from .dot import to_dot
from .inputs import InputError, corpus_dir, load_corpus, materialize
from .ir import Netlist, Rvsdg, to_json
from .parser import ParseError, parse
from .pipeline import CONFIGS, STAGES, Config, StageError, compile_kernel
from .sim import SimError, simulate
from .verify import run_check

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_TRAP, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--no-addrq", action="store_true",
                   help="disable memory disambiguation (the NoQ configuration)")
    g.add_argument("--addrq-capacity", type=int, default=None, metavar="N",
                   help="entries per address queue (default 8)")
    g.add_argument("--no-buffers", action="store_true", help="skip buffer placement")
    g.add_argument("--fifo-depth", type=int, default=4, metavar="N",
                   help="transparent FIFO depth on value forks")
    g.add_argument("--ctl-fifo-depth", type=int, default=16, metavar="N",
                   help="transparent FIFO depth on control forks")
    g.add_argument("--no-backedge-removal", action="store_true",
                   help="keep every loop back-edge buffer")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--mem-latency", type=int, default=1, metavar="N")
    g.add_argument("--max-cycles", type=int, default=1_000_000, metavar="N")


def _config(a: argparse.Namespace) -> Config:
    if a.no_addrq and a.addrq_capacity is not None:
        raise UsageError("--addrq-capacity needs disambiguation; drop --no-addrq")
    try:
        policy = BufferPolicy(a.fifo_depth, a.ctl_fifo_depth,
                              backedge_removal=not a.no_backedge_removal)
    except ValueError as e:
        raise UsageError(str(e)) from None
    cap = 8 if a.addrq_capacity is None else a.addrq_capacity
    if cap < 1:
        raise UsageError("--addrq-capacity must be >= 1")
    return Config(addrq=not a.no_addrq, addrq_capacity=cap, buffers=not a.no_buffers,
                  policy=policy)


def _read_kernel(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    return parse(text)


def _inputs(a: argparse.Namespace, kernel):
    path = Path(a.inputs) if a.inputs else Path(a.file).with_suffix(".json")
    spec = None
    if a.inputs or path.exists():
        try:
            spec = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"{path}: {e}") from None
    return materialize(spec, kernel)


def _write_stage(obj, stem: str, stage: str, emit: list[str], outdir: Path) -> list[Path]:
    label = "netlist" if stage == "buffers" else stage
    written = []
    for kind in emit:
        path = outdir / f"{stem}.{label}.{kind}"
        if kind == "json":
            path.write_text(json.dumps(to_json(obj) if isinstance(obj, (Netlist, Rvsdg))
                                       else {"kernel": obj.name}, indent=1) + "\n")
        else:
            if not isinstance(obj, (Netlist, Rvsdg)):
                continue
            path.write_text(to_dot(obj, stem))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# commands

def cmd_build(a) -> int:
    k = _read_kernel(a.file)
    cfg = _config(a)
    emit = [e for e in a.emit.split(",") if e]
    bad = set(emit) - {"json", "dot"}
    if bad:
        raise UsageError(f"unknown --emit format {sorted(bad)[0]!r}; use json and/or dot")
    outdir = Path(a.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(a.file).stem
    compiled = compile_kernel(k, cfg, stop_after=a.stop_after)
    stages = list(compiled.stages) if a.all_stages else [list(compiled.stages)[-1]]
    for st in stages:
        for p in _write_stage(compiled.stages[st], stem, st, emit, outdir):
            print(p)
    return EXIT_OK


def _trace_lines(traces: dict) -> list[str]:
    events = [(cyc, op, kind, addr, data) for op, ev in traces.items()
              for kind, addr, data, cyc in ev]
    return [json.dumps({"op": op, "kind": kind, "addr": addr & 0xFFFFFFFF,
                        "data": data & 0xFFFFFFFF, "cycle": cyc})
            for cyc, op, kind, addr, data in sorted(events)]


def cmd_run(a) -> int:
    k = _read_kernel(a.file)
    cfg = _config(a)
    memories, args = _inputs(a, k)
    net = compile_kernel(k, cfg).netlist
    try:
        res = simulate(net, memories, args, a.mem_latency, a.max_cycles)
    except SimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TRAP
    if a.dump_trace:
        Path(a.dump_trace).write_text("".join(s + "\n" for s in _trace_lines(res.traces)))
    stats = dict(res.stats, config=cfg.fingerprint(), mem_latency=a.mem_latency)
    print(f"cycles: {res.cycles}")
    print(f"return: {res.ret}")
    print("stats: " + json.dumps(stats, sort_keys=True))
    if res.trap is not None:
        print(f"error: trap {res.trap.kind}: {res.trap}", file=sys.stderr)
        return EXIT_TRAP
    return EXIT_OK


def cmd_check(a) -> int:
    k = _read_kernel(a.file)
    memories, args = _inputs(a, k)
    configs = dict(CONFIGS) if a.all_configs else {"selected": _config(a)}
    status = EXIT_OK
    for cfg in configs.values():
        out = run_check(k, memories, args, cfg, a.mem_latency, a.max_cycles)
        print(f"{cfg.name:<11} {out.report}")
        if not out.report.passed:
            status = max(status, EXIT_TRAP if out.report.error else EXIT_MISMATCH)
    return status


def cmd_fuzz(a) -> int:
    from .fuzz import run_fuzz, verdict_line, write_repro

    cfg = _config(a)
    out = open(a.out, "w") if a.out else None
    failed = 0
    try:
        for v in run_fuzz(a.count, a.seed, cfg, a.jobs, a.max_cycles):
            line = verdict_line(v)
            if out:
                out.write(line + "\n")
            if not v.passed:
                failed += 1
                path = write_repro(v, a.repro_dir)
                print(f"FAIL {v.index}: {v.reason} -> {path}")
    finally:
        if out:
            out.close()
    print(f"{a.count - failed}/{a.count} passed")
    return EXIT_MISMATCH if failed else EXIT_OK


def cmd_bench(a) -> int:
    from .report import geomean, plot, run_bench, speedups, write_csv

    cases = load_corpus(a.corpus or corpus_dir())
    configs = dict(CONFIGS) if a.all_configs else {"noq": CONFIGS["noq"],
                                                   "full": CONFIGS["full"]}
    rows = run_bench(cases, configs, a.mem_latency, a.max_cycles)
    names = list(configs)
    print("kernel," + ",".join(names))
    table: dict[str, dict] = {}
    for r in rows:
        table.setdefault(r.kernel, {})[r.config] = r.cycles if r.passed else "FAILED"
    for k, t in table.items():
        print(k + "," + ",".join(str(t[c]) for c in names))
    ratio = speedups(rows)
    if ratio:
        print(f"geomean full/noq: {geomean(ratio.values()):.4f}")
    write_csv(rows, a.csv, names)
    print(f"wrote {a.csv}")
    if rows and a.png:
        plot(rows, a.png)
        print(f"wrote {a.png}")
    return EXIT_OK


def cmd_viz(a) -> int:
    k = _read_kernel(a.file)
    compiled = compile_kernel(k, _config(a), stop_after=a.stage)
    obj = compiled.stages[a.stage]
    if not isinstance(obj, (Netlist, Rvsdg)):
        raise UsageError(f"stage {a.stage} has no graph to draw")
    text = to_dot(obj, Path(a.file).stem)
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rhls", description="Dynamic HLS compiler and "
                                "elastic circuit simulator for .rk kernels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="compile to netlist JSON/DOT")
    b.add_argument("file")
    b.add_argument("--emit", default="json", help="comma list of json, dot")
    b.add_argument("--stop-after", choices=STAGES, default=None)
    b.add_argument("--all-stages", action="store_true", help="write every stage, not just the last")
    b.add_argument("-o", "--out-dir", default=".")
    _pipeline_flags(b)
    b.set_defaults(fn=cmd_build)

    r = sub.add_parser("run", help="simulate and print cycles, return value and stats")
    r.add_argument("file")
    r.add_argument("--inputs", help="input JSON (default: sidecar next to the kernel)")
    r.add_argument("--dump-trace", metavar="PATH", help="write memory events as JSON lines")
    _pipeline_flags(r)
    _sim_flags(r)
    r.set_defaults(fn=cmd_run)

    c = sub.add_parser("check", help="compare simulation with the reference interpreter")
    c.add_argument("file")
    c.add_argument("--inputs")
    c.add_argument("--all-configs", action="store_true")
    _pipeline_flags(c)
    _sim_flags(c)
    c.set_defaults(fn=cmd_check)

    f = sub.add_parser("fuzz", help="differential fuzzing with random kernels")
    f.add_argument("--count", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--jobs", type=int, default=1)
    f.add_argument("--out", help="write JSON-lines verdicts here")
    f.add_argument("--repro-dir", default="fuzz-failures")
    _pipeline_flags(f)
    _sim_flags(f)
    f.set_defaults(fn=cmd_fuzz, max_cycles=200_000)

    be = sub.add_parser("bench", help="cycle counts over a corpus, CSV plus PNG chart")
    be.add_argument("corpus", nargs="?", help="directory of .rk kernels (default: bundled)")
    be.add_argument("--csv", default="bench.csv")
    be.add_argument("--png", default="bench.png")
    be.add_argument("--all-configs", action="store_true")
    _sim_flags(be)
    be.set_defaults(fn=cmd_bench)

    v = sub.add_parser("viz", help="DOT for one pipeline stage")
    v.add_argument("file")
    v.add_argument("--stage", choices=STAGES, default="buffers")
    v.add_argument("-o", "--output")
    _pipeline_flags(v)
    v.set_defaults(fn=cmd_viz)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return a.fn(a)
    except ParseError as e:
        print(f"{getattr(a, 'file', '')}:{e}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        print(f"error: validation failed after {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
