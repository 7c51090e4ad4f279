"""Graphviz DOT export for both IR forms.

Regions and loops become nested clusters.  Edge colour follows the port
type, and memory-state edges are dashed.
"""

from __future__ import annotations

from .ir import Netlist, PortType, Rvsdg

_COLOURS = {"value": "black", "control": "blue", "state": "red", "memreq": "darkgreen",
            "memresp": "purple"}
_SHOWN_ATTRS = ("op", "value", "array", "role", "capacity", "depth", "name", "index")


def _edge_style(t: PortType | None) -> str:
    if t is None:
        return ""
    style = ', style=dashed' if t.kind == "state" else ""
    return f'color={_COLOURS.get(t.kind, "gray")}{style}'


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _label(kind: str, nid: int, attrs: dict) -> str:
    extra = [f"{k}={attrs[k]}" for k in _SHOWN_ATTRS if k in attrs]
    return _quote(" ".join([f"{kind} #{nid}"] + extra))


def netlist_to_dot(net: Netlist, name: str = "netlist") -> str:
    lines = [f"digraph {_quote(name)} {{", "  node [shape=box, fontsize=10];"]
    by_loop: dict[int | None, list[int]] = {}
    for n in net.nodes.values():
        by_loop.setdefault(n.loop, []).append(n.id)
    children: dict[int | None, list[int]] = {}
    for lid, info in sorted(net.loops.items()):
        children.setdefault(info["parent"], []).append(lid)

    def node_line(nid: int, pad: str) -> str:
        n = net.nodes[nid]
        shape = ", shape=box3d" if n.kind in ("BUF", "PRED_BUF") else ""
        if n.attrs.get("red"):
            shape += ", fontcolor=red"
        return f"{pad}n{nid} [label={_label(n.kind, nid, n.attrs)}{shape}];"

    def emit(loop: int | None, pad: str) -> None:
        for nid in sorted(by_loop.get(loop, [])):
            lines.append(node_line(nid, pad))
        for child in children.get(loop, []):
            lines.append(f"{pad}subgraph cluster_loop{child} {{")
            lines.append(f'{pad}  label="HLS-LOOP {child}"; style=rounded;')
            emit(child, pad + "  ")
            lines.append(f"{pad}}}")

    emit(None, "  ")
    for n in sorted(net.nodes.values(), key=lambda n: n.id):
        for i, src in enumerate(n.inputs):
            if src is None:
                continue
            style = _edge_style(n.in_types[i])
            lines.append(f'  n{src[0]} -> n{n.id} [taillabel="{src[1]}", headlabel="{i}", '
                         f'fontsize=8, {style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def rvsdg_to_dot(g: Rvsdg, name: str = "rvsdg") -> str:
    lines = [f"digraph {_quote(name)} {{", "  node [shape=box, fontsize=10];"]

    def origin(src: tuple) -> str:
        return f"n{src[1]}" if src[0] == "n" else f"a{src[1]}_{src[2]}"

    def emit_region(rid: int, pad: str) -> None:
        r = g.regions[rid]
        for i in range(len(r.args)):
            lines.append(f'{pad}a{rid}_{i} [label="arg {i}", shape=circle, fontsize=8];')
        for i in range(len(r.results)):
            lines.append(f'{pad}r{rid}_{i} [label="res {i}", shape=doublecircle, fontsize=8];')
        for nid in r.nodes:
            n = g.nodes[nid]
            lines.append(f"{pad}n{nid} [label={_label(n.kind, nid, n.attrs)}];")
            for k, sub in enumerate(n.subregions):
                lines.append(f"{pad}subgraph cluster_r{sub} {{")
                lines.append(f'{pad}  label="{n.kind} #{nid} region {k}"; style=rounded;')
                emit_region(sub, pad + "  ")
                lines.append(f"{pad}}}")

    emit_region(g.root, "  ")
    for r in g.regions.values():
        for nid in r.nodes:
            n = g.nodes[nid]
            for i, src in enumerate(n.inputs):
                if src is not None:
                    lines.append(f"  {origin(src)} -> n{nid} [{_edge_style(n.in_types[i])}];")
        for i, src in enumerate(r.results):
            if src is not None:
                lines.append(f"  {origin(src)} -> r{r.id}_{i} [{_edge_style(r.result_types[i])}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_dot(obj: Netlist | Rvsdg, name: str = "g") -> str:
    if isinstance(obj, Netlist):
        return netlist_to_dot(obj, name)
    if isinstance(obj, Rvsdg):
        return rvsdg_to_dot(obj, name)
    raise TypeError(f"cannot render {type(obj).__name__} as DOT")
