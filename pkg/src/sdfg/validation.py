"""Structural and semantic validation.

Every problem becomes a diagnostic; validation never throws.  An empty
diagnostic list is the well-formedness certificate the interpreter,
transformations, and code generator rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    AccessNode,
    AutoMemlet,
    ConsumeEntry,
    ConsumeExit,
    ENTRY_NODES,
    EXIT_NODES,
    GraphError,
    MapEntry,
    MapExit,
    NestedSdfg,
    Node,
    Reduce,
    SCHEDULES,
    Sdfg,
    SdfgState,
    Tasklet,
)
from .symbolic import Expr, Num


@dataclass
class Diagnostic:
    severity: str  # error | warning
    location: str
    message: str

    def to_json(self) -> dict:
        return {"severity": self.severity, "location": self.location,
                "message": self.message}

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


class _Collector:
    def __init__(self):
        self.items: list[Diagnostic] = []

    def error(self, location: str, message: str) -> None:
        self.items.append(Diagnostic("error", location, message))

    def warning(self, location: str, message: str) -> None:
        self.items.append(Diagnostic("warning", location, message))


def _has_float_literal(e: Expr) -> bool:
    if isinstance(e, Num):
        return isinstance(e.value, float)
    return any(_has_float_literal(c) for c in getattr(e, "args", ())
               ) or any(_has_float_literal(getattr(e, a)) for a in ("left", "right", "arg")
                        if hasattr(e, a))


def validate_sdfg(sdfg: Sdfg, _ancestry: tuple = ()) -> list[Diagnostic]:
    """Check an SDFG for well-formedness; returns diagnostics (never raises)."""
    out = _Collector()
    _validate_top(sdfg, out)
    for state in sdfg.states:
        _validate_state(sdfg, state, out, _ancestry)
    return out.items


def _validate_top(sdfg: Sdfg, out: _Collector) -> None:
    where = f"sdfg '{sdfg.name}'"
    names = sdfg.state_names()
    if len(names) != len(set(names)):
        out.error(where, "duplicate state names")
    if sdfg.start_state is None or sdfg.state(sdfg.start_state) is None:
        out.error(where, "missing start state")
    for t in sdfg.transitions:
        for endpoint in (t.src, t.dst):
            if sdfg.state(endpoint) is None:
                out.error(where, f"transition references unknown state '{endpoint}'")
        for lhs, _ in t.assignments:
            if lhs in sdfg.data:
                out.error(where, f"transition assigns to container name '{lhs}'")
    for name, desc in sdfg.data.items():
        if desc.kind not in ("array", "stream"):
            out.error(where, f"container '{name}' has unknown kind '{desc.kind}'")
        if desc.kind == "stream" and desc.size_bound is not None:
            out.warning(where, f"stream '{name}' declares a size bound of "
                               f"{desc.size_bound}; queues are unbounded and "
                               f"the bound is advisory")


def _validate_state(sdfg: Sdfg, state: SdfgState, out: _Collector,
                    ancestry: tuple) -> None:
    where = f"state '{state.name}'"

    try:
        state.topological_order()
    except GraphError as exc:
        out.error(where, str(exc))
        return

    try:
        tree = state.scope_of()
    except GraphError as exc:
        out.error(where, str(exc))
        tree = None

    for edge in state.edges:
        _validate_edge(sdfg, state, edge, out)

    for node_id, node in state.nodes.items():
        loc = f"{where}, node {node_id} ({node.label()})"
        if isinstance(node, AccessNode):
            if node.data not in sdfg.data:
                out.error(loc, f"access node references unknown container '{node.data}'")
        elif isinstance(node, MapEntry):
            if node.schedule not in SCHEDULES:
                out.error(loc, f"unsupported schedule '{node.schedule}'; "
                               f"accepted: {', '.join(SCHEDULES)}")
            if len(node.params) != len(node.ranges):
                out.error(loc, "map needs one range per parameter")
            for p in node.params:
                if p in sdfg.data:
                    out.error(loc, f"map parameter '{p}' shadows a container")
            for in_conn in node.ins:
                if in_conn.startswith("IN_") and f"OUT_{in_conn[3:]}" not in node.outs:
                    out.warning(loc, f"connector '{in_conn}' has no OUT_ counterpart")
        elif isinstance(node, Tasklet):
            _validate_tasklet(state, node_id, node, out, loc)
        elif isinstance(node, Reduce):
            _validate_reduce(sdfg, state, node_id, node, out, loc)
        elif isinstance(node, NestedSdfg):
            _validate_nested(sdfg, state, node, out, loc, ancestry)
        elif isinstance(node, ConsumeEntry):
            stream_edges = [e for e in state.in_edges(node_id)
                            if e.dst_conn == "IN_stream"]
            if len(stream_edges) != 1:
                out.error(loc, "consume entry needs exactly one stream input")
            else:
                src = state.nodes[stream_edges[0].src]
                if not (isinstance(src, AccessNode)
                        and sdfg.data.get(src.data, None)
                        and sdfg.data[src.data].kind == "stream"):
                    out.error(loc, "consume stream input must come from a stream")

    if tree is not None:
        for entry, exit_ in tree.exits.items():
            entry_node = state.nodes[entry]
            exit_node = state.nodes[exit_]
            if isinstance(entry_node, MapEntry) != isinstance(exit_node, MapExit):
                out.error(where, f"scope {entry} pairs mismatched entry/exit kinds")


def _validate_edge(sdfg: Sdfg, state: SdfgState, edge, out: _Collector) -> None:
    loc = f"state '{state.name}', edge {edge.id}"
    src = state.nodes.get(edge.src)
    dst = state.nodes.get(edge.dst)
    if src is None or dst is None:
        out.error(loc, "edge endpoint does not exist")
        return

    for node, conn, side in ((src, edge.src_conn, "out"), (dst, edge.dst_conn, "in")):
        if edge.memlet.is_empty and conn is None:
            continue  # ordering-only edges attach without connectors
        if isinstance(node, AccessNode):
            desc = sdfg.data.get(node.data)
            if desc is not None and desc.kind == "stream":
                expected = ("pop", "data") if side == "out" else ("push", "data")
                if conn not in expected:
                    out.error(loc, f"stream access uses connector {conn!r}; "
                                   f"expected one of {expected}")
                elif conn == "data":
                    out.error(loc, "the stream 'data' connector is declared but its "
                                   "bulk copy semantics are not implemented")
            elif conn is not None:
                out.error(loc, f"array access nodes use implicit connectors, got {conn!r}")
            continue
        conns = node.out_connectors() if side == "out" else node.in_connectors()
        if conn is None or conn not in conns:
            out.error(loc, f"connector {conn!r} does not exist on node "
                           f"{node.id} ({node.label()})")

    if isinstance(edge.memlet, AutoMemlet):
        out.error(loc, "unresolved auto-memlet; run Sdfg.finalize()")
        return
    m = edge.memlet
    if m.is_empty:
        return
    if m.data not in sdfg.data:
        out.error(loc, f"memlet references unknown container '{m.data}'")
        return
    desc = sdfg.data[m.data]
    if m.subset is None:
        out.error(loc, "non-empty memlet without a subset")
    elif m.subset.rank != desc.rank:
        out.error(loc, f"rank mismatch: subset {m.subset} is rank {m.subset.rank}, "
                       f"container '{m.data}' is rank {desc.rank}")
    if m.reindex is not None and m.subset is not None \
            and m.reindex.rank != m.subset.rank:
        out.error(loc, "reindex rank differs from subset rank")
    for sub in (m.subset, m.reindex):
        if sub is None:
            continue
        for r in sub.ranges:
            for e in (r.begin, r.end, r.stride, r.tilesize):
                if _has_float_literal(e):
                    out.error(loc, f"non-integer literal in subset {sub}")
    if m.wcr is not None and m.wcr.kind == "custom":
        prog = m.wcr.custom
        if prog is None or len(prog.inputs) != 2 or len(prog.outputs) != 1:
            out.error(loc, "custom wcr must be a binary function with one output")
    # a pop edge must leave a stream
    if edge.src_conn == "pop" and (not isinstance(src, AccessNode)
                                   or sdfg.data[src.data].kind != "stream"):
        out.error(loc, "pop connector on a non-stream source")


def _validate_tasklet(state: SdfgState, node_id: int, node: Tasklet,
                      out: _Collector, loc: str) -> None:
    seen_in: set[str] = set()
    for e in state.in_edges(node_id):
        if e.memlet.is_empty:
            continue
        if e.dst_conn in seen_in:
            out.error(loc, f"input connector '{e.dst_conn}' has multiple edges")
        seen_in.add(e.dst_conn)
    for conn in node.program.inputs:
        if conn not in seen_in:
            out.error(loc, f"input connector '{conn}' is not connected")
    for conn in node.program.outputs:
        edges = [e for e in state.out_edges(node_id) if e.src_conn == conn]
        if not edges:
            out.warning(loc, f"output connector '{conn}' is not connected")
            continue
        static = [e for e in edges if not e.memlet.is_dynamic and not e.memlet.is_empty]
        if static and conn not in node.program.assigned_on_all_paths \
                and conn not in node.program.array_writes:
            out.error(loc, f"output '{conn}' feeds a static memlet but is not "
                           f"assigned on every control path")


def _validate_reduce(sdfg: Sdfg, state: SdfgState, node_id: int, node: Reduce,
                     out: _Collector, loc: str) -> None:
    ins = [e for e in state.in_edges(node_id) if e.dst_conn == "in"]
    outs = [e for e in state.out_edges(node_id) if e.src_conn == "out"]
    if len(ins) != 1 or len(outs) != 1:
        out.error(loc, "reduce nodes take exactly one input and one output edge")
        return
    if not ins[0].memlet.is_empty and ins[0].memlet.data in sdfg.data:
        rank = sdfg.data[ins[0].memlet.data].rank
        if any(a < 0 or a >= rank for a in node.axes):
            out.error(loc, f"reduction axes {list(node.axes)} out of range for rank {rank}")


def _validate_nested(sdfg: Sdfg, state: SdfgState, node: NestedSdfg,
                     out: _Collector, loc: str, ancestry: tuple) -> None:
    inner = node.sdfg
    if any(inner is anc for anc in ancestry) or inner is sdfg:
        out.error(loc, "recursive nesting: an SDFG may not invoke itself")
        return
    unmapped = [s for s in inner.symbols if s not in node.symbol_mapping]
    if unmapped:
        out.error(loc, f"symbol mapping is not total; missing {sorted(unmapped)}")
    for conn in list(node.ins) + list(node.outs):
        if conn not in inner.data:
            out.error(loc, f"connector '{conn}' does not name an inner container")
    for name, desc in inner.data.items():
        if not desc.transient and name not in node.ins and name not in node.outs:
            out.warning(loc, f"inner container '{name}' is not bound to a connector")
    out.items.extend(
        Diagnostic(d.severity, f"{loc} -> {d.location}", d.message)
        for d in validate_sdfg(inner, ancestry + (sdfg,)))
