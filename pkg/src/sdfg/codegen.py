"""C code generation (CPU dispatcher) and optional toolchain invocation.

One translation unit per graph: nested graphs become static functions,
transients are heap-allocated (zeroed, matching the interpreter), maps turn
into for loops (parallel-CPU schedule adds an OpenMP annotation), reductions
into identity-initialized loops, consume scopes into worker loops over an
explicit growable deque, and the state machine into structured ``for``
loops where the guard pattern is detected, labeled ``goto`` dispatch
otherwise.

The emitted text is deterministic for a given graph, so golden-file diffs
are meaningful.
"""

from __future__ import annotations

import ctypes
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ir import (
    AccessNode,
    ConsumeEntry,
    DataflowEdge,
    ENTRY_NODES,
    EXIT_NODES,
    MapEntry,
    Memlet,
    NestedSdfg,
    Reduce,
    Sdfg,
    SdfgState,
    Tasklet,
    WcrFunc,
)
from .loops import GuardLoop, detect_guard_loops
from .propagation import propagate_memlets
from .symbolic import (
    Bin,
    BoolOp,
    Call,
    Cmp,
    Expr,
    Not,
    Num,
    ONE,
    Subset,
    Sym,
    simplify,
)
from .tasklets import C_HELPERS, emit_c
from .validation import validate_sdfg

_CTYPES = {"int64": "int64_t", "float64": "double"}


class CodegenError(RuntimeError):
    pass


class ToolchainError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Symbolic expressions to C
# --------------------------------------------------------------------------

class _ExprEmitter:
    def __init__(self, scalars: dict[str, str], streams: dict[str, str]):
        self.scalars = scalars  # container name -> basetype (rank-1 size-1)
        self.streams = streams  # stream name -> basetype

    def emit(self, e: Expr) -> str:
        if isinstance(e, Num):
            if isinstance(e.value, float):
                return repr(e.value)
            v = int(e.value)
            if v == -2**63:
                return "INT64_MIN"
            if abs(v) > 2**31 - 1:
                return f"{v}LL"
            return str(v)
        if isinstance(e, Sym):
            if e.name in self.scalars:
                return f"{e.name}[0]"
            return e.name
        if isinstance(e, Bin):
            left, right = self.emit(e.left), self.emit(e.right)
            if e.op == "//":
                return f"sdfg_fdiv({left}, {right})"
            if e.op == "%":
                return f"sdfg_fmod({left}, {right})"
            if e.op == "/":
                return f"((double)({left}) / (double)({right}))"
            return f"({left} {e.op} {right})"
        if isinstance(e, Call):
            if e.fn == "size":
                name = e.args[0].name
                return f"sdfg_stream_size(&{name})"
            args = [self.emit(a) for a in e.args]
            fn = "sdfg_imin" if e.fn == "min" else "sdfg_imax"
            out = args[0]
            for a in args[1:]:
                out = f"{fn}({out}, {a})"
            return out
        if isinstance(e, Cmp):
            return f"({self.emit(e.left)} {e.op} {self.emit(e.right)})"
        if isinstance(e, BoolOp):
            op = " && " if e.op == "and" else " || "
            return "(" + op.join(self.emit(a) for a in e.args) + ")"
        if isinstance(e, Not):
            return f"(!{self.emit(e.arg)})"
        raise CodegenError(f"cannot emit expression {e!r}")


_STREAM_RUNTIME = """\
typedef struct { char* buf; int64_t head, tail, cap, elem; } sdfg_stream;
static void sdfg_stream_init(sdfg_stream* s, int64_t elem) {
    s->buf = 0; s->head = s->tail = s->cap = 0; s->elem = elem;
}
static void sdfg_stream_push(sdfg_stream* s, const void* v) {
    if (s->tail == s->cap) {
        s->cap = s->cap ? 2 * s->cap : 64;
        s->buf = (char*)realloc(s->buf, (size_t)(s->cap * s->elem));
    }
    memcpy(s->buf + s->tail * s->elem, v, (size_t)s->elem);
    s->tail++;
}
static void sdfg_stream_pop(sdfg_stream* s, void* v) {
    memcpy(v, s->buf + s->head * s->elem, (size_t)s->elem);
    s->head++;
    if (s->head == s->tail) { s->head = s->tail = 0; }
}
static int64_t sdfg_stream_size(const sdfg_stream* s) { return s->tail - s->head; }
static void sdfg_stream_free(sdfg_stream* s) { free(s->buf); }
"""


@dataclass
class GeneratedCode:
    source: str
    name: str
    pointer_args: list[tuple[str, str]]  # (container, basetype)
    symbol_args: list[str]

    def signature(self) -> str:
        parts = [f"{_CTYPES[t]}* {n}" for n, t in self.pointer_args]
        parts += [f"int64_t {s}" for s in self.symbol_args]
        return f"void {self.name}({', '.join(parts)})"


# --------------------------------------------------------------------------
# Graph traversal emission
# --------------------------------------------------------------------------

class _SdfgEmitter:
    def __init__(self, sdfg: Sdfg, fn_name: str, collector: "_UnitCollector"):
        self.sdfg = sdfg
        self.fn = fn_name
        self.collector = collector
        scalars = {name: d.basetype for name, d in sdfg.data.items()
                   if d.kind == "array" and self._static_size(d) == 1}
        streams = {name: d.basetype for name, d in sdfg.data.items()
                   if d.kind == "stream"}
        self.ex = _ExprEmitter(scalars, streams)
        self.lines: list[str] = []
        self._tmp = 0

    def _static_size(self, desc) -> Optional[int]:
        total = 1
        for d in desc.dims:
            s = simplify(d)
            if not isinstance(s, Num):
                return None
            total *= int(s.value)
        return total

    def fresh(self, base: str) -> str:
        self._tmp += 1
        return f"__{base}{self._tmp}"

    def line(self, indent: int, text: str) -> None:
        self.lines.append("    " * indent + text)

    # -- index arithmetic -------------------------------------------------

    def flat_index(self, data: str, idx_exprs: list[str]) -> str:
        desc = self.sdfg.data[data]
        if desc.rank == 1:
            return idx_exprs[0]
        out = idx_exprs[0]
        for dim in range(1, desc.rank):
            out = f"({out}) * ({self.ex.emit(simplify(desc.dims[dim]))}) + ({idx_exprs[dim]})"
        return out

    def subset_origin(self, data: str, subset: Subset) -> str:
        return self.flat_index(data, [self.ex.emit(simplify(r.begin))
                                      for r in subset.ranges])

    def element_ref(self, data: str, subset: Subset,
                    lane: Optional[str] = None) -> str:
        """C lvalue for a single-point subset; ``lane`` offsets the last
        dimension (vector tiles)."""
        idx = [self.ex.emit(simplify(r.begin)) for r in subset.ranges]
        if lane:
            idx[-1] = f"({idx[-1]}) + {lane}"
        return f"{data}[{self.flat_index(data, idx)}]"

    # -- write-conflict resolution ---------------------------------------

    def wcr_update(self, indent: int, lvalue: str, wcr: Optional[WcrFunc],
                   value: str, parallel: bool) -> None:
        if wcr is None:
            self.line(indent, f"{lvalue} = {value};")
            return
        if wcr.kind in ("sum", "product"):
            op = "+=" if wcr.kind == "sum" else "*="
            if parallel:
                self.line(indent, "#pragma omp atomic")
            self.line(indent, f"{lvalue} {op} {value};")
            return
        if parallel:
            self.line(indent, "#pragma omp critical")
            self.line(indent, "{")
            indent += 1
        if wcr.kind in ("min", "max"):
            cmp = "<" if wcr.kind == "min" else ">"
            self.line(indent, f"{lvalue} = ({value} {cmp} {lvalue}) ? "
                              f"{value} : {lvalue};")
        else:
            prog = wcr.custom
            old, new = prog.inputs
            out = prog.outputs[0]
            t = _CTYPES[self._wcr_type(lvalue)]
            self.line(indent, "{")
            self.line(indent + 1, f"{t} {old} = {lvalue}; {t} {new} = {value};")
            self.line(indent + 1, f"{t} {out};")
            body = emit_c(prog, {old: "float64", new: "float64", out: "float64"})
            for ln in body.splitlines():
                self.line(indent + 1, ln)
            self.line(indent + 1, f"{lvalue} = {out};")
            self.line(indent, "}")
        if parallel:
            indent -= 1
            self.line(indent, "}")

    def _wcr_type(self, lvalue: str) -> str:
        name = lvalue.split("[")[0]
        return self.sdfg.data[name].basetype if name in self.sdfg.data \
            else "float64"

    # -- write-path resolution ---------------------------------------------

    def resolve_targets(self, state: SdfgState,
                        edge: DataflowEdge) -> list[tuple[AccessNode, Memlet]]:
        dst = state.nodes[edge.dst]
        if isinstance(dst, AccessNode):
            return [(dst, edge.memlet)]
        if isinstance(dst, EXIT_NODES):
            out_conn = "OUT_" + edge.dst_conn[3:]
            found = []
            for nxt in state.out_edges(edge.dst):
                if nxt.src_conn == out_conn:
                    found.extend(self.resolve_targets(
                        state,
                        DataflowEdge(nxt.id, edge.src, edge.src_conn,
                                     nxt.dst, nxt.dst_conn, edge.memlet)))
            return found
        raise CodegenError(
            f"unsupported write path through node {dst.id} ({dst.label()})")

    # -- node emission -----------------------------------------------------

    def emit_state_body(self, state: SdfgState, indent: int) -> None:
        tree = state.scope_of()
        top = tree.children.get(None, [])
        components = _components(state, top)
        for ci, comp in enumerate(components):
            if len(components) > 1:
                self.line(indent, f"/* connected component {ci}: components "
                                  f"may run concurrently; emitted sequentially */")
            ordered = [n for n in state.topological_order() if n in comp]
            for node_id in ordered:
                self.emit_node(state, tree, node_id, indent, parallel=False)

    def emit_node(self, state: SdfgState, tree, node_id: int, indent: int,
                  parallel: bool) -> None:
        node = state.nodes[node_id]
        if isinstance(node, AccessNode):
            self.emit_access(state, node, indent, parallel)
        elif isinstance(node, Tasklet):
            self.emit_tasklet(state, node, indent, parallel)
        elif isinstance(node, MapEntry):
            self.emit_map(state, tree, node, indent, parallel)
        elif isinstance(node, ConsumeEntry):
            self.emit_consume(state, tree, node, indent, parallel)
        elif isinstance(node, Reduce):
            self.emit_reduce(state, node, indent, parallel)
        elif isinstance(node, NestedSdfg):
            self.emit_nested(state, node, indent)
        elif isinstance(node, EXIT_NODES):
            pass
        else:
            raise CodegenError(f"cannot generate code for {node.label()}")

    def emit_access(self, state: SdfgState, node: AccessNode, indent: int,
                    parallel: bool) -> None:
        desc = self.sdfg.data[node.data]
        for e in sorted(state.in_edges(node.id), key=lambda e: e.id):
            src = state.nodes[e.src]
            if e.memlet.is_empty:
                continue
            if isinstance(src, AccessNode):
                src_kind = self.sdfg.data[src.data].kind
            elif isinstance(src, ENTRY_NODES):
                # a scope feeds this node directly: a region copy
                src_kind = self.sdfg.data[e.memlet.data].kind
            else:
                continue  # tasklet/exit writes were committed at the source
            if src_kind == "stream":
                self.emit_drain(state, e, e.memlet.data, node, indent)
            elif desc.kind == "stream":
                self.emit_push_block(state, e, node.data, indent)
            else:
                self.emit_copy(state, e, node.data, indent)
        if desc.kind == "stream":
            # bulk moves out of this stream that cross a scope boundary
            for e in sorted(state.out_edges(node.id), key=lambda e: e.id):
                if not isinstance(state.nodes[e.dst], EXIT_NODES):
                    continue
                for target, _ in self.resolve_targets(state, e):
                    self.emit_drain(state, e, node.data, target, indent)

    def emit_copy(self, state: SdfgState, e: DataflowEdge, target: str,
                  indent: int) -> None:
        m = e.memlet
        dst_subset = m.subset if m.data == target else m.reindex
        if dst_subset is None:
            raise CodegenError(f"copy edge {e.id} lacks destination indices")
        vars_ = []
        for d, (sr, dr) in enumerate(zip(m.subset.ranges, dst_subset.ranges)):
            v = self.fresh("c")
            vars_.append(v)
            self.line(indent + d, f"for (int64_t {v} = 0; {v} <= "
                                  f"{self.ex.emit(simplify(Bin('-', sr.end, sr.begin)))}; ++{v}) {{")
        src_idx = [f"({self.ex.emit(simplify(r.begin))}) + {v}"
                   for r, v in zip(m.subset.ranges, vars_)]
        dst_idx = [f"({self.ex.emit(simplify(r.begin))}) + {v}"
                   for r, v in zip(dst_subset.ranges, vars_)]
        depth = indent + len(vars_)
        self.line(depth, f"{target}[{self.flat_index(target, dst_idx)}] = "
                         f"{m.data}[{self.flat_index(m.data, src_idx)}];")
        for d in reversed(range(len(vars_))):
            self.line(indent + d, "}")

    def emit_drain(self, state: SdfgState, e: DataflowEdge, stream: str,
                   node: AccessNode, indent: int) -> None:
        basetype = self.sdfg.data[stream].basetype
        k = self.fresh("k")
        v = self.fresh("v")
        self.line(indent, f"int64_t {k} = 0;")
        self.line(indent, f"while (sdfg_stream_size(&{stream}) > 0) {{")
        self.line(indent + 1, f"{_CTYPES[basetype]} {v};")
        self.line(indent + 1, f"sdfg_stream_pop(&{stream}, &{v});")
        if self.sdfg.data[node.data].kind == "stream":
            self.line(indent + 1, f"sdfg_stream_push(&{node.data}, &{v});")
        else:
            self.line(indent + 1, f"{node.data}[{k}] = {v}; ++{k};")
        self.line(indent, "}")

    def emit_push_block(self, state: SdfgState, e: DataflowEdge, stream: str,
                        indent: int) -> None:
        raise CodegenError("array-to-stream bulk pushes are not supported")

    def emit_tasklet(self, state: SdfgState, node: Tasklet, indent: int,
                     parallel: bool) -> None:
        # each tasklet gets its own block so connector locals cannot clash
        self.line(indent, f"{{ /* {node.name} */")
        indent += 1
        prog = node.program
        types = {}
        rename = {}
        lanes: Optional[tuple[str, int]] = None
        in_edges = {e.dst_conn: e for e in state.in_edges(node.id)
                    if not e.memlet.is_empty}
        out_edges: dict[str, DataflowEdge] = {}
        for e in state.out_edges(node.id):
            if not e.memlet.is_empty:
                out_edges[e.src_conn] = e

        for conn, e in in_edges.items():
            src = state.nodes[e.src]
            data = e.memlet.data
            basetype = self.sdfg.data[data].basetype
            types[conn] = basetype
            if self.sdfg.data[data].kind == "stream":
                v = f"{conn}"
                self.line(indent, f"{_CTYPES[basetype]} {v};")
                self.line(indent, f"sdfg_stream_pop(&{data}, &{v});")
                continue
            tile = e.memlet.subset.ranges[-1].tilesize
            if conn in prog.array_reads:
                self.line(indent, f"const {_CTYPES[basetype]}* {conn} = "
                                  f"&{data}[{self.subset_origin(data, e.memlet.subset)}];")
            elif not isinstance(simplify(tile), Num) or simplify(tile) != ONE:
                width = int(simplify(tile).value)
                lanes = ("__v", width)
                self.line(indent, f"const {_CTYPES[basetype]}* {conn}__p = "
                                  f"&{data}[{self.subset_origin(data, e.memlet.subset)}];")
                rename[conn] = f"{conn}__p[__v]"
            else:
                self.line(indent, f"{_CTYPES[basetype]} {conn} = "
                                  f"{self.element_ref(data, e.memlet.subset)};")

        for conn, e in out_edges.items():
            targets = self.resolve_targets(state, e)
            basetype = self.sdfg.data[targets[0][1].data].basetype \
                if targets[0][1].data in self.sdfg.data else "float64"
            types[conn] = basetype
            tile = e.memlet.subset.ranges[-1].tilesize if e.memlet.subset else ONE
            if conn in prog.array_writes:
                target_name = targets[0][0].data
                rename[conn] = target_name  # subscript writes hit memory
            elif not isinstance(simplify(tile), Num) or simplify(tile) != ONE:
                width = int(simplify(tile).value)
                lanes = ("__v", width)
                self.line(indent, f"{_CTYPES[basetype]} {conn}__vec[{width}];")
                rename[conn] = f"{conn}__vec[__v]"
            else:
                self.line(indent, f"{_CTYPES[basetype]} {conn};")
                if e.memlet.is_dynamic:
                    self.line(indent, f"int {conn}__set = 0;")

        body_indent = indent
        if lanes:
            self.line(indent, f"for (int64_t __v = 0; __v < {lanes[1]}; ++__v) {{")
            body_indent += 1

        dyn_outputs = {c for c, e in out_edges.items()
                       if e.memlet.is_dynamic and c not in prog.array_writes}
        wcr_writes = {c: self._augment_for(c, state, out_edges[c])
                      for c in prog.array_writes if c in out_edges}
        body = emit_c(prog, types, rename=rename, indent="    " * body_indent)
        body = _mark_dynamic_sets(body, dyn_outputs, rename, "    " * body_indent)
        body = _apply_augments(body, wcr_writes, rename)
        self.lines.extend(body.splitlines())

        for conn, e in out_edges.items():
            if conn in prog.array_writes:
                continue
            m = e.memlet
            for target, tmemlet in self.resolve_targets(state, e):
                tdesc = self.sdfg.data[target.data]
                value = rename.get(conn, conn)
                if tdesc.kind == "stream":
                    push_indent = body_indent
                    if m.is_dynamic:
                        self.line(push_indent, f"if ({conn}__set) {{")
                        push_indent += 1
                    self.line(push_indent,
                              f"sdfg_stream_push(&{target.data}, &{conn});")
                    if m.is_dynamic:
                        self.line(body_indent, "}")
                    continue
                lane = "__v" if lanes and conn in rename else None
                lvalue = self.element_ref(tmemlet.data, tmemlet.subset, lane)
                commit_indent = body_indent
                if m.is_dynamic and tdesc.kind == "array" \
                        and conn not in prog.array_writes and not lanes:
                    self.line(commit_indent, f"if ({conn}__set) {{")
                    commit_indent += 1
                self.wcr_update(commit_indent, lvalue, tmemlet.wcr, value,
                                parallel)
                if m.is_dynamic and tdesc.kind == "array" and not lanes:
                    self.line(body_indent, "}")

        if lanes:
            self.line(indent, "}")
        indent -= 1
        self.line(indent, "}")

    def _augment_for(self, conn: str, state: SdfgState,
                     edge: DataflowEdge) -> Optional[str]:
        wcr = edge.memlet.wcr
        if wcr is None:
            return None
        if wcr.kind == "sum":
            return "+="
        if wcr.kind == "product":
            return "*="
        raise CodegenError("subscript writes support sum/product resolution only")

    def emit_map(self, state: SdfgState, tree, entry: MapEntry, indent: int,
                 parallel: bool) -> None:
        # data-dependent range inputs become locals before the loop nest
        for e in state.in_edges(entry.id):
            if e.dst_conn and not e.dst_conn.startswith("IN_") \
                    and not e.memlet.is_empty:
                data = e.memlet.data
                self.line(indent, f"int64_t {e.dst_conn} = (int64_t)"
                                  f"{self.element_ref(data, e.memlet.subset)};")
        inner_parallel = parallel or entry.schedule == "cpu_parallel"
        for depth, (p, r) in enumerate(zip(entry.params, entry.ranges)):
            if depth == 0 and entry.schedule == "cpu_parallel":
                self.line(indent, "#pragma omp parallel for")
            b = self.ex.emit(simplify(r.begin))
            e_ = self.ex.emit(simplify(r.end))
            s = self.ex.emit(simplify(r.stride))
            self.line(indent + depth,
                      f"for (int64_t {p} = {b}; {p} <= {e_}; {p} += {s}) {{")
        inner_indent = indent + len(entry.params)
        body = [n for n in state.topological_order()
                if n in set(tree.children.get(entry.id, [])) and n != entry.id]
        for node_id in body:
            self.emit_node(state, tree, node_id, inner_indent, inner_parallel)
        for depth in reversed(range(len(entry.params))):
            self.line(indent + depth, "}")

    def emit_consume(self, state: SdfgState, tree, entry: ConsumeEntry,
                     indent: int, parallel: bool) -> None:
        stream_edge = next(e for e in state.in_edges(entry.id)
                           if e.dst_conn == "IN_stream")
        stream = stream_edge.memlet.data
        pes = self.ex.emit(simplify(entry.num_pes))
        self.line(indent, f"/* consume scope: worker loop over an explicit "
                          f"deque '{stream}' */")
        self.line(indent, f"for (int64_t {entry.param} = 0; {entry.param} < "
                          f"{pes}; ++{entry.param}) {{")
        cond = self.ex.emit(simplify(entry.condition))
        self.line(indent + 1, f"while ({cond}) {{")
        body = [n for n in state.topological_order()
                if n in set(tree.children.get(entry.id, [])) and n != entry.id]
        for node_id in body:
            self.emit_node(state, tree, node_id, indent + 2, parallel)
        self.line(indent + 1, "}")
        self.line(indent, "}")

    def emit_reduce(self, state: SdfgState, node: Reduce, indent: int,
                    parallel: bool) -> None:
        in_edge = next(e for e in state.in_edges(node.id) if e.dst_conn == "in")
        out_edge = next(e for e in state.out_edges(node.id) if e.src_conn == "out")
        src = in_edge.memlet.data
        targets = self.resolve_targets(state, out_edge)
        target, tmemlet = targets[0]
        tdesc = self.sdfg.data[target.data]
        identity = node.wcr.identity(tdesc.basetype)
        id_lit = {float("inf"): "INFINITY", float("-inf"): "-INFINITY",
                  2**63 - 1: "INT64_MAX", -2**63: "INT64_MIN"}.get(
            identity, repr(float(identity)) if tdesc.basetype == "float64"
            else str(identity))

        # identity-initialize the target region
        tvars = []
        for d, r in enumerate(tmemlet.subset.ranges):
            v = self.fresh("t")
            tvars.append(v)
            self.line(indent + d, f"for (int64_t {v} = 0; {v} <= "
                                  f"{self.ex.emit(simplify(Bin('-', r.end, r.begin)))}; ++{v}) {{")
        t_idx = [f"({self.ex.emit(simplify(r.begin))}) + {v}"
                 for r, v in zip(tmemlet.subset.ranges, tvars)]
        self.line(indent + len(tvars),
                  f"{target.data}[{self.flat_index(target.data, t_idx)}] = {id_lit};")
        for d in reversed(range(len(tvars))):
            self.line(indent + d, "}")

        # combine every input element into its projected slot
        svars = []
        for d, r in enumerate(in_edge.memlet.subset.ranges):
            v = self.fresh("r")
            svars.append(v)
            self.line(indent + d, f"for (int64_t {v} = 0; {v} <= "
                                  f"{self.ex.emit(simplify(Bin('-', r.end, r.begin)))}; ++{v}) {{")
        s_idx = [f"({self.ex.emit(simplify(r.begin))}) + {v}"
                 for r, v in zip(in_edge.memlet.subset.ranges, svars)]
        kept = [i for i in range(len(svars)) if i not in node.axes]
        o_idx = [f"({self.ex.emit(simplify(tmemlet.subset.ranges[pos].begin))}) + {svars[i]}"
                 for pos, i in enumerate(kept)]
        lvalue = f"{target.data}[{self.flat_index(target.data, o_idx)}]"
        rvalue = f"{src}[{self.flat_index(src, s_idx)}]"
        self.wcr_update(indent + len(svars), lvalue, node.wcr, rvalue, parallel)
        for d in reversed(range(len(svars))):
            self.line(indent + d, "}")

    def emit_nested(self, state: SdfgState, node: NestedSdfg,
                    indent: int) -> None:
        inner_fn = self.collector.function_for(node.sdfg)
        args = []
        bound: dict[str, str] = {}
        for e in list(state.in_edges(node.id)) + list(state.out_edges(node.id)):
            if e.memlet.is_empty:
                continue
            conn = e.dst_conn if e.dst == node.id else e.src_conn
            if conn in bound:
                continue
            data = e.memlet.data
            if self.sdfg.data[data].kind == "stream":
                bound[conn] = f"&{data}"
            else:
                bound[conn] = f"&{data}[{self.subset_origin(data, e.memlet.subset)}]"
        for name, desc in node.sdfg.data.items():
            if desc.transient:
                continue
            if name not in bound:
                raise CodegenError(
                    f"nested container '{name}' is not bound to an edge")
            args.append(bound[name])
        for sym in node.sdfg.symbols:
            args.append(self.ex.emit(simplify(node.symbol_mapping[sym])))
        self.line(indent, f"{inner_fn}({', '.join(args)});")

    # -- state machine -----------------------------------------------------

    def emit_function(self) -> tuple[list[tuple[str, str]], list[str]]:
        sdfg = self.sdfg
        pointer_args = [(name, d.basetype) for name, d in sdfg.data.items()
                        if not d.transient and d.kind == "array"]
        symbol_args = list(sdfg.symbols)
        params = [f"{_CTYPES[t]}* {n}" for n, t in pointer_args]
        params += [f"int64_t {s}" for s in symbol_args]
        self.line(0, f"static void {self.fn}({', '.join(params)})")
        self.line(0, "{")

        for name, desc in sdfg.data.items():
            if desc.kind == "stream":
                if self._static_size(desc) != 1:
                    raise CodegenError(
                        f"stream '{name}': only single-queue streams are "
                        f"supported by the code generator")
                elem = f"sizeof({_CTYPES[desc.basetype]})"
                self.line(1, f"sdfg_stream {name}; sdfg_stream_init(&{name}, "
                             f"(int64_t){elem});")
            elif desc.transient:
                size = " * ".join(f"({self.ex.emit(simplify(d))})"
                                  for d in desc.dims)
                self.line(1, f"{_CTYPES[desc.basetype]}* {name} = "
                             f"({_CTYPES[desc.basetype]}*)calloc((size_t)({size}), "
                             f"sizeof({_CTYPES[desc.basetype]}));")

        assigned = {a for t in sdfg.transitions for a, _ in t.assignments}
        for sym in sorted(assigned - set(sdfg.symbols)):
            self.line(1, f"int64_t {sym} = 0;")

        self.emit_state_machine()

        self.line(0, "__sdfg_end:;")
        for name, desc in sdfg.data.items():
            if desc.kind == "stream":
                self.line(1, f"sdfg_stream_free(&{name});")
            elif desc.transient:
                self.line(1, f"free({name});")
        self.line(0, "}")
        return pointer_args, symbol_args

    def emit_state_machine(self) -> None:
        sdfg = self.sdfg
        loops = {lp.guard: lp for lp in detect_guard_loops(sdfg)}
        loop_bodies = {lp.body: lp for lp in loops.values()}
        order = [s.name for s in sdfg.states]
        if sdfg.start_state != order[0]:
            self.line(1, f"goto __state_{_c_ident(sdfg.start_state)};")
        emitted_in_loop = set()
        for idx, name in enumerate(order):
            if name in emitted_in_loop:
                continue
            state = sdfg.state(name)
            if name in loop_bodies:
                # reached only via its guard; the guard emits it inline
                self.line(0, f"__state_{_c_ident(name)}:; /* loop body, "
                             f"entered via its guard */")
                self.line(1, f"goto __state_{_c_ident(loop_bodies[name].guard)};")
                continue
            self.line(0, f"__state_{_c_ident(name)}:;")
            if name in loops:
                self.emit_loop(loops[name], order, idx)
                continue
            self.line(1, "{")
            self.emit_state_body(state, 2)
            self.line(1, "}")
            self.emit_dispatch(sdfg.out_transitions(name), order, idx)

    def emit_loop(self, lp: GuardLoop, order: list[str], idx: int) -> None:
        inits = {str(simplify(v)): simplify(v) for t in lp.entries
                 for a, v in t.assignments if a == lp.var}
        init = f"{lp.var} = {self.ex.emit(next(iter(inits.values())))}" \
            if len(inits) == 1 else ""
        cond = self.ex.emit(simplify(lp.condition))
        update = f"{lp.var} = {self.ex.emit(simplify(lp.update))}"
        self.line(1, f"for ({init}; {cond}; {update}) {{")
        body_state = self.sdfg.state(lp.body)
        self.emit_state_body(body_state, 2)
        self.line(1, "}")
        self.emit_dispatch(lp.exits, order, idx)

    def emit_dispatch(self, transitions, order: list[str], idx: int) -> None:
        fallthrough = order[idx + 1] if idx + 1 < len(order) else None
        for t in transitions:
            assigns = "".join(f" {a} = {self.ex.emit(simplify(v))};"
                              for a, v in t.assignments)
            target = f"goto __state_{_c_ident(t.dst)};"
            if t.condition == ONE:
                if t.dst == fallthrough and not assigns:
                    return  # textual successor: plain fallthrough
                self.line(1, f"{{{assigns} {target} }}")
                return
            cond = self.ex.emit(simplify(t.condition))
            self.line(1, f"if ({cond}) {{{assigns} {target} }}")
        self.line(1, "goto __sdfg_end;")


def _mark_dynamic_sets(body: str, dyn_outputs: set[str],
                       rename: dict[str, str], indent: str) -> str:
    if not dyn_outputs:
        return body
    out_lines = []
    for ln in body.splitlines():
        out_lines.append(ln)
        stripped = ln.strip()
        for conn in dyn_outputs:
            name = rename.get(conn, conn)
            if stripped.startswith(f"{name} = "):
                pad = ln[:len(ln) - len(ln.lstrip())]
                out_lines.append(f"{pad}{conn}__set = 1;")
    return "\n".join(out_lines)


def _apply_augments(body: str, augments: dict[str, Optional[str]],
                    rename: dict[str, str]) -> str:
    out = body
    for conn, op in augments.items():
        if op is None:
            continue
        name = rename.get(conn, conn)
        out_lines = []
        for ln in out.splitlines():
            stripped = ln.strip()
            if stripped.startswith(f"{name}[") and " = " in stripped:
                ln = ln.replace(" = ", f" {op} ", 1)
            out_lines.append(ln)
        out = "\n".join(out_lines)
    return out


def _components(state: SdfgState, top: list[int]) -> list[list[int]]:
    tree = state.scope_of()
    owner = {}
    for n in state.nodes:
        cur = n
        while tree.parent.get(cur) is not None:
            cur = tree.parent[cur]
        if isinstance(state.nodes[cur], EXIT_NODES):
            cur = state.nodes[cur].entry
            while tree.parent.get(cur) is not None:
                cur = tree.parent[cur]
        owner[n] = cur

    parent = {n: n for n in top}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in state.edges:
        a, b = owner[e.src], owner[e.dst]
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for n in top:
        groups.setdefault(find(n), []).append(n)
    return [sorted(v) for _, v in sorted(groups.items())]


def _c_ident(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name)


class _UnitCollector:
    def __init__(self):
        self.functions: dict[int, str] = {}
        self.order: list[Sdfg] = []
        self.counter = 0

    def function_for(self, sdfg: Sdfg) -> str:
        key = id(sdfg)
        if key not in self.functions:
            self.counter += 1
            self.functions[key] = f"sdfg_{_c_ident(sdfg.name)}_{self.counter}"
            self.order.append(sdfg)
        return self.functions[key]


def generate(sdfg: Sdfg) -> GeneratedCode:
    """Produce one C translation unit and the entry-point signature."""
    problems = [d for d in validate_sdfg(sdfg) if d.severity == "error"]
    if problems:
        raise CodegenError("refusing to generate code for an invalid graph:\n  "
                           + "\n  ".join(str(p) for p in problems))
    propagate_memlets(sdfg)

    collector = _UnitCollector()

    def collect(g: Sdfg) -> None:
        for nested in g.nested_sdfgs():
            collect(nested)
            collector.function_for(nested)
    collect(sdfg)
    top_fn = collector.function_for(sdfg)

    chunks = [
        "#include <stdint.h>",
        "#include <stdlib.h>",
        "#include <string.h>",
        "#include <math.h>",
        "",
        C_HELPERS,
        _STREAM_RUNTIME,
        "",
    ]
    pointer_args: list[tuple[str, str]] = []
    symbol_args: list[str] = []
    for g in collector.order:
        emitter = _SdfgEmitter(g, collector.function_for(g), collector)
        pargs, sargs = emitter.emit_function()
        chunks.append("\n".join(emitter.lines))
        chunks.append("")
        if g is sdfg:
            pointer_args, symbol_args = pargs, sargs

    entry = _c_ident(sdfg.name)
    params = [f"{_CTYPES[t]}* {n}" for n, t in pointer_args]
    params += [f"int64_t {s}" for s in symbol_args]
    args = [n for n, _ in pointer_args] + symbol_args
    chunks.append(f"void {entry}({', '.join(params)})")
    chunks.append("{")
    chunks.append(f"    {top_fn}({', '.join(args)});")
    chunks.append("}")
    return GeneratedCode("\n".join(chunks) + "\n", entry, pointer_args,
                         symbol_args)


# --------------------------------------------------------------------------
# Toolchain invocation
# --------------------------------------------------------------------------

def find_compiler() -> Optional[str]:
    env = os.environ.get("SDFG_CC")
    if env:
        return env if os.path.isabs(env) else shutil.which(env)
    for cc in ("cc", "gcc", "clang"):
        path = shutil.which(cc)
        if path:
            return path
    return None


class CompiledSdfg:
    """A loaded shared object wrapping the generated entry point."""

    def __init__(self, code: GeneratedCode, lib_path: str):
        self.code = code
        self._lib = ctypes.CDLL(lib_path)
        self._fn = getattr(self._lib, code.name)
        self._fn.restype = None

    def run(self, arrays: dict, symbols: dict) -> dict[str, np.ndarray]:
        buffers: dict[str, np.ndarray] = {}
        args = []
        for name, basetype in self.code.pointer_args:
            dtype = np.int64 if basetype == "int64" else np.float64
            buf = np.ascontiguousarray(np.asarray(arrays[name], dtype=dtype)).copy()
            buffers[name] = buf
            args.append(buf.ctypes.data_as(ctypes.POINTER(
                ctypes.c_int64 if basetype == "int64" else ctypes.c_double)))
        for sym in self.code.symbol_args:
            args.append(ctypes.c_int64(int(symbols[sym])))
        self._fn(*args)
        return buffers


def invoke_toolchain(code: GeneratedCode, flags: Optional[list[str]] = None,
                     workdir: Optional[str] = None) -> CompiledSdfg:
    """Compile the generated source into a shared library and load it.

    Raises :class:`ToolchainError` with the compiler's diagnostics verbatim;
    absence of a compiler raises with a clear message so callers can degrade
    to source-only output.
    """
    cc = find_compiler()
    if cc is None:
        raise ToolchainError("no C compiler found (set SDFG_CC or install cc)")
    tmp = workdir or tempfile.mkdtemp(prefix="sdfgc_")
    src = os.path.join(tmp, f"{code.name}.c")
    lib = os.path.join(tmp, f"lib{code.name}.so")
    with open(src, "w") as f:
        f.write(code.source)
    cmd = [cc, "-shared", "-fPIC", "-O2", src, "-o", lib, "-lm"]
    if flags:
        cmd[1:1] = list(flags)
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise ToolchainError(
            f"compiler failed ({' '.join(cmd)}):\n{proc.stderr}")
    return CompiledSdfg(code, lib)
