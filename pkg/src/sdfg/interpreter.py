"""Reference executor: the ground truth all transformation-equivalence and
code-generation tests compare against.

Execution follows the dataflow element-processing discipline: within a
state, a worklist of nodes fires whenever all input connectors have data;
scopes replicate their body per range point; consume scopes run worker
loops that pop a stream until their condition goes false at the loop head;
reductions and stream push/pop follow their lowered meanings.  After a
state drains, outgoing transitions are evaluated in insertion order and the
first true condition wins; no true condition terminates the program.

The default schedule is deterministic (insertion order).  A seed permutes
every legal choice point (ready-node picks, map instance order, consume
worker interleaving) for order-independence testing.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .ir import (
    AccessNode,
    ConsumeEntry,
    EXIT_NODES,
    DataflowEdge,
    MapEntry,
    NestedSdfg,
    Reduce,
    Sdfg,
    SdfgState,
    Tasklet,
    WcrFunc,
)
from .symbolic import Expr, UnboundSymbolError, eval_expr
from .tasklets import IndexedWrites, TaskletRuntimeError, eval_tasklet
from .validation import validate_sdfg

MAX_STATE_VISITS = 200_000

_NP_DTYPES = {"int64": np.int64, "float64": np.float64}


class InterpreterError(RuntimeError):
    pass


class DeadlockError(InterpreterError):
    pass


class OutOfBoundsError(InterpreterError):
    pass


class _Token:
    """Ordering-only edge value (empty memlets, completed boundary edges)."""

    def __repr__(self):
        return "<token>"


class _NoValue:
    """A dynamic output that was never assigned; moves nothing."""

    def __repr__(self):
        return "<no value>"


TOKEN = _Token()
NO_VALUE = _NoValue()


@dataclass
class _StreamBuf:
    shape: tuple[int, ...]
    cells: list[deque] = field(default_factory=list)

    def __post_init__(self):
        count = 1
        for d in self.shape:
            count *= d
        if not self.cells:
            self.cells = [deque() for _ in range(count)]

    def cell(self, flat_index: int) -> deque:
        return self.cells[flat_index]

    def total(self) -> int:
        return sum(len(c) for c in self.cells)


@dataclass
class TraceRecord:
    state: str
    edge: int
    data: str
    index: tuple[int, ...]
    write: bool
    syms: dict[str, int]


@dataclass
class ExecutionReport:
    outputs: dict[str, np.ndarray]
    states_visited: list[str]
    elements_moved: dict[str, int]
    total_moved: int
    tasklet_invocations: int
    trace: Optional[list[TraceRecord]] = None

    def movement_for(self, state: str, edge_id: int) -> int:
        return self.elements_moved.get(f"{state}:e{edge_id}", 0)

    def to_json(self, value_cap: int = 4096) -> dict:
        outputs = {}
        for name, arr in self.outputs.items():
            if arr.size <= value_cap:
                outputs[name] = arr.tolist()
            else:
                outputs[name] = {"truncated": True, "size": int(arr.size)}
        return {
            "outputs": outputs,
            "states_visited": self.states_visited,
            "elements_moved": dict(sorted(self.elements_moved.items())),
            "total_moved": self.total_moved,
            "tasklet_invocations": self.tasklet_invocations,
        }


def apply_wcr(wcr: WcrFunc, old, new):
    """Combine the stored value with an incoming one."""
    if wcr.kind == "sum":
        return old + new
    if wcr.kind == "product":
        return old * new
    if wcr.kind == "min":
        return np.minimum(old, new)
    if wcr.kind == "max":
        return np.maximum(old, new)
    result = eval_tasklet(wcr.custom, {wcr.custom.inputs[0]: old,
                                       wcr.custom.inputs[1]: new})
    return result[wcr.custom.outputs[0]]


class _CondEnv(Mapping):
    """Resolves condition atoms: symbols first, then scalar container reads."""

    def __init__(self, syms: dict, memory: dict, streams: dict):
        self.syms = syms
        self.memory = memory
        self.streams = streams

    def __getitem__(self, name):
        if name in self.syms:
            return self.syms[name]
        if name in self.memory:
            arr = self.memory[name]
            if arr.size != 1:
                raise InterpreterError(
                    f"condition reads non-scalar container '{name}'")
            return arr.reshape(-1)[0].item()
        raise UnboundSymbolError(name)

    def __contains__(self, name):
        return name in self.syms or name in self.memory

    def __iter__(self):
        yield from self.syms
        yield from self.memory

    def __len__(self):
        return len(self.syms) + len(self.memory)


class _Executor:
    def __init__(self, sdfg: Sdfg, memory: dict[str, np.ndarray],
                 streams: dict[str, _StreamBuf], syms: dict[str, int],
                 counters: dict[str, int], rng: Optional[random.Random],
                 trace: Optional[list[TraceRecord]], prefix: str = ""):
        self.sdfg = sdfg
        self.memory = memory
        self.streams = streams
        self.syms = dict(syms)
        self.counters = counters
        self.rng = rng
        self.trace = trace
        self.prefix = prefix
        self.states_visited: list[str] = []
        self.tasklet_invocations = 0

    # -- helpers -------------------------------------------------------

    def _edge_key(self, state: SdfgState, edge: DataflowEdge) -> str:
        return f"{self.prefix}{state.name}:e{edge.id}"

    def _count(self, state: SdfgState, edge: DataflowEdge, n: int) -> None:
        key = self._edge_key(state, edge)
        self.counters[key] = self.counters.get(key, 0) + n

    def _size_of(self, name: str) -> int:
        if name not in self.streams:
            raise InterpreterError(f"size() of non-stream '{name}'")
        return self.streams[name].total()

    def _eval(self, e: Expr, syms: Mapping) -> int:
        return eval_expr(e, syms, size_of=self._size_of)

    def _cond_env(self, syms: Mapping) -> _CondEnv:
        return _CondEnv(dict(syms), self.memory, self.streams)

    def _resolve_axes(self, state: SdfgState, edge: DataflowEdge, data: str,
                      subset, syms: Mapping) -> list[list[int]]:
        arr_shape = (self.memory[data].shape if data in self.memory
                     else self.streams[data].shape)
        axes: list[list[int]] = []
        for dim, r in enumerate(subset.ranges):
            tile = int(self._eval(r.tilesize, syms))
            pts: list[int] = []
            for p in self._range_pts(r, syms):
                pts.extend(range(p, p + tile))
            for p in pts:
                if p < 0 or p >= arr_shape[dim]:
                    raise OutOfBoundsError(
                        f"index {p} out of bounds for dimension {dim} of "
                        f"'{data}' (size {arr_shape[dim]}) via memlet "
                        f"{edge.memlet.summary()} in state '{state.name}'")
            axes.append(pts)
        return axes

    def _range_pts(self, r, syms: Mapping) -> list[int]:
        begin = int(self._eval(r.begin, syms))
        end = int(self._eval(r.end, syms))
        stride = int(self._eval(r.stride, syms))
        if stride == 0:
            raise InterpreterError(f"zero stride in range '{r}'")
        if stride > 0:
            return list(range(begin, end + 1, stride))
        return list(range(begin, end - 1, stride))

    def _read_block(self, state: SdfgState, edge: DataflowEdge,
                    syms: Mapping) -> np.ndarray:
        m = edge.memlet
        axes = self._resolve_axes(state, edge, m.data, m.subset, syms)
        block = self.memory[m.data][np.ix_(*axes)].copy()
        if self.trace is not None:
            for idx in _grid(axes):
                self.trace.append(TraceRecord(state.name, edge.id, m.data, idx,
                                              False, _intify(syms)))
        return block

    def _write_array(self, state: SdfgState, edge: DataflowEdge, target: str,
                     value, syms: Mapping) -> int:
        m = edge.memlet
        arr = self.memory[target]
        if isinstance(value, _StreamDrain):
            value = np.asarray(value.items)
        if isinstance(value, IndexedWrites):
            flat = arr.reshape(-1)
            for idx, v in value:
                if idx < 0 or idx >= flat.size:
                    raise OutOfBoundsError(
                        f"dynamic write index {idx} out of bounds for "
                        f"'{target}' (size {flat.size}) in state '{state.name}'")
                if m.wcr is not None:
                    flat[idx] = apply_wcr(m.wcr, flat[idx], v)
                else:
                    flat[idx] = v
                if self.trace is not None:
                    self.trace.append(TraceRecord(
                        state.name, edge.id, target,
                        tuple(np.unravel_index(idx, arr.shape)), True,
                        _intify(syms)))
            return len(value)
        subset = m.subset if m.data == target else m.reindex
        if subset is None:
            # stream-to-array drain lands at the start of the array
            vals = np.asarray(value).reshape(-1)
            if vals.size > arr.size:
                raise OutOfBoundsError(
                    f"drain of {vals.size} elements overflows '{target}'")
            arr.reshape(-1)[:vals.size] = vals
            return int(vals.size)
        axes = self._resolve_axes(state, edge, target, subset, syms)
        vals = np.asarray(value)
        region_shape = tuple(len(a) for a in axes)
        expected = int(np.prod(region_shape))
        if vals.size == 1 and expected == 1:
            vals = vals.reshape(region_shape)
        elif vals.size == expected:
            vals = vals.reshape(region_shape)
        else:
            raise InterpreterError(
                f"value of size {vals.size} does not fit region "
                f"{region_shape} of '{target}' in state '{state.name}'")
        ix = np.ix_(*axes)
        if m.wcr is not None:
            arr[ix] = apply_wcr(m.wcr, arr[ix], vals)
        else:
            arr[ix] = vals
        if self.trace is not None:
            for idx in _grid(axes):
                self.trace.append(TraceRecord(state.name, edge.id, target, idx,
                                              True, _intify(syms)))
        return expected

    # -- committing values through exits to their final containers ------

    def _commit(self, state: SdfgState, edge: DataflowEdge, value,
                syms: Mapping) -> None:
        """Deliver a produced value to the container(s) behind ``edge``,
        tracing through scope exit chains."""
        if isinstance(value, (_Token, _NoValue)) or edge.memlet.is_empty:
            return
        dst = state.nodes[edge.dst]
        if isinstance(dst, EXIT_NODES):
            out_conn = "OUT_" + edge.dst_conn[3:]
            for nxt in state.out_edges(edge.dst):
                if nxt.src_conn != out_conn:
                    continue
                self._boundary_actual[nxt.id] = (
                    self._boundary_actual.get(nxt.id, 0)
                    + _actual_size(value))
                self._commit(state, DataflowEdge(edge.id, edge.src, edge.src_conn,
                                                 nxt.dst, nxt.dst_conn, edge.memlet),
                             value, syms)
            return
        if isinstance(dst, AccessNode):
            desc = self.sdfg.data[dst.data]
            if desc.kind == "stream":
                if edge.dst_conn == "data" or (edge.dst_conn not in ("push", None)):
                    raise InterpreterError(
                        f"unsupported stream connector {edge.dst_conn!r}")
                self._push_stream(state, edge, dst.data, value, syms)
            else:
                self._write_array(state, edge, dst.data, value, syms)
            return
        raise InterpreterError(
            f"cannot commit value across node {dst.id} ({dst.label()}) "
            f"in state '{state.name}'")

    def _push_stream(self, state: SdfgState, edge: DataflowEdge, name: str,
                     value, syms: Mapping) -> None:
        buf = self.streams[name]
        m = edge.memlet
        cell = 0
        if m.data == name and m.subset is not None and buf.total() >= 0:
            axes = self._resolve_axes(state, edge, name, m.subset, syms)
            flat_idx = np.ravel_multi_index(tuple(a[0] for a in axes), buf.shape)
            cell = int(flat_idx)
        if isinstance(value, IndexedWrites):
            for _, v in value:
                buf.cell(cell).append(v)
        elif isinstance(value, np.ndarray):
            for v in value.reshape(-1):
                buf.cell(cell).append(v.item())
        elif isinstance(value, _StreamDrain):
            for v in value.items:
                buf.cell(cell).append(v)
        else:
            buf.cell(cell).append(value)

    # -- node firing -----------------------------------------------------

    def _produce(self, state: SdfgState, edge: DataflowEdge, value, syms: Mapping,
                 values: dict[int, Any], actual: Optional[int] = None) -> None:
        m = edge.memlet
        if m.is_empty:
            self._count(state, edge, 0)
        elif m.accesses is not None:
            self._count(state, edge, int(self._eval(m.accesses, syms)))
        else:
            self._count(state, edge, actual if actual is not None
                        else _actual_size(value))
        dst = state.nodes[edge.dst]
        if isinstance(dst, EXIT_NODES):
            self._commit(state, edge, value, syms)
        values[edge.id] = value

    def _ready(self, state: SdfgState, node_id: int, values: dict[int, Any],
               syms: Mapping) -> bool:
        for e in state.in_edges(node_id):
            if e.id not in values:
                return False
        node = state.nodes[node_id]
        if isinstance(node, AccessNode) and \
                self.sdfg.data[node.data].kind == "stream":
            # single-element pops gate on occupancy
            for e in state.out_edges(node_id):
                dst = state.nodes[e.dst]
                if isinstance(dst, Tasklet) and self.streams[node.data].total() < 1:
                    return False
        return True

    def _run_nodes(self, state: SdfgState, node_ids: list[int],
                   values: dict[int, Any], syms: dict, tree) -> None:
        pending = list(node_ids)
        while pending:
            ready = [n for n in pending if self._ready(state, n, values, syms)]
            if not ready:
                labels = [f"{n} ({state.nodes[n].label()})" for n in pending]
                raise DeadlockError(
                    f"no enabled element in state '{state.name}'; blocked nodes: "
                    f"{', '.join(labels)}")
            pick = self.rng.choice(ready) if self.rng else ready[0]
            self._fire(state, pick, values, syms, tree)
            pending.remove(pick)

    def _fire(self, state: SdfgState, node_id: int, values: dict[int, Any],
              syms: dict, tree) -> None:
        node = state.nodes[node_id]
        if isinstance(node, AccessNode):
            self._fire_access(state, node, values, syms)
        elif isinstance(node, Tasklet):
            self._fire_tasklet(state, node, values, syms)
        elif isinstance(node, MapEntry):
            self._fire_map(state, node, values, syms, tree)
        elif isinstance(node, ConsumeEntry):
            self._fire_consume(state, node, values, syms, tree)
        elif isinstance(node, Reduce):
            self._fire_reduce(state, node, values, syms)
        elif isinstance(node, NestedSdfg):
            self._fire_nested(state, node, values, syms)
        else:
            raise InterpreterError(f"cannot execute node {node_id} ({node.label()})")

    def _fire_access(self, state: SdfgState, node: AccessNode,
                     values: dict[int, Any], syms: dict) -> None:
        desc = self.sdfg.data[node.data]
        if desc.kind == "stream":
            self._fire_stream_access(state, node, values, syms)
            return
        # writes first, in edge insertion order; reads observe them
        for e in sorted(state.in_edges(node.id), key=lambda e: e.id):
            self._commit(state, e, values[e.id], syms)
        for e in sorted(state.out_edges(node.id), key=lambda e: e.id):
            if e.memlet.is_empty:
                self._produce(state, e, TOKEN, syms, values)
                continue
            block = self._read_block(state, e, syms)
            self._produce(state, e, block, syms, values, actual=int(block.size))

    def _fire_stream_access(self, state: SdfgState, node: AccessNode,
                            values: dict[int, Any], syms: dict) -> None:
        for e in sorted(state.in_edges(node.id), key=lambda e: e.id):
            val = values[e.id]
            if isinstance(val, (_Token, _NoValue)):
                continue
            self._push_stream(state, e, node.data, val, syms)
        buf = self.streams[node.data]
        for e in sorted(state.out_edges(node.id), key=lambda e: e.id):
            dst = state.nodes[e.dst]
            if isinstance(dst, (ConsumeEntry, MapEntry)) and e.dst_conn \
                    and e.dst_conn.startswith("IN_"):
                self._produce(state, e, _StreamHandle(node.data), syms, values,
                              actual=0)
            elif isinstance(dst, AccessNode):
                items = []
                for cell in buf.cells:
                    while cell:
                        items.append(cell.popleft())
                self._produce(state, e, _StreamDrain(items), syms, values,
                              actual=len(items))
            elif isinstance(dst, EXIT_NODES):
                items = []
                for cell in buf.cells:
                    while cell:
                        items.append(cell.popleft())
                self._produce(state, e, _StreamDrain(items), syms, values,
                              actual=len(items))
            else:
                if buf.total() < 1:
                    raise DeadlockError(
                        f"pop from empty stream '{node.data}' in state "
                        f"'{state.name}'")
                cell = next(c for c in buf.cells if c)
                self._produce(state, e, cell.popleft(), syms, values, actual=1)

    def _fire_tasklet(self, state: SdfgState, node: Tasklet,
                      values: dict[int, Any], syms: dict) -> None:
        inputs = {}
        for e in state.in_edges(node.id):
            if e.memlet.is_empty:
                continue
            val = values[e.id]
            if isinstance(val, (_Token, _NoValue)):
                raise InterpreterError(
                    f"input '{e.dst_conn}' of tasklet {node.id} received no data "
                    f"in state '{state.name}'")
            inputs[e.dst_conn] = _scalarize(val)
        try:
            outputs = eval_tasklet(node.program, inputs)
        except TaskletRuntimeError as exc:
            raise InterpreterError(
                f"tasklet {node.id} ('{node.name}') in state '{state.name}': "
                f"{exc}") from exc
        self.tasklet_invocations += 1
        for e in sorted(state.out_edges(node.id), key=lambda e: e.id):
            if e.memlet.is_empty:
                self._produce(state, e, TOKEN, syms, values)
            elif e.src_conn in outputs:
                self._produce(state, e, outputs[e.src_conn], syms, values)
            else:
                if not e.memlet.is_dynamic:
                    raise InterpreterError(
                        f"tasklet {node.id} did not assign output "
                        f"'{e.src_conn}' feeding a static memlet")
                self._produce(state, e, NO_VALUE, syms, values, actual=0)

    def _scope_instance(self, state: SdfgState, entry, values: dict[int, Any],
                        inst_syms: dict, tree,
                        element: Optional[Any] = None) -> None:
        inst_values: dict[int, Any] = {}
        for e in state.out_edges(entry.id):
            if e.src_conn == "OUT_stream" and isinstance(entry, ConsumeEntry):
                inst_values[e.id] = element
                self._count(state, e, 1)
                continue
            if e.memlet.is_empty:
                inst_values[e.id] = TOKEN
                self._count(state, e, 0)
                continue
            if e.memlet.data in self.streams:
                inst_values[e.id] = _StreamHandle(e.memlet.data)
                self._count(state, e, 0)
                continue
            block = self._read_block(state, e, inst_syms)
            inst_values[e.id] = _scalarize_keep(block)
            self._count(state, e, int(block.size))
            if isinstance(state.nodes[e.dst], EXIT_NODES):
                # pass-through copy threaded straight across the scope
                self._commit(state, e, block, inst_syms)
        body = list(tree.children.get(entry.id, []))
        body = [n for n in body if n != entry.id]
        self._run_nodes(state, body, inst_values, inst_syms, tree)

    def _finish_scope(self, state: SdfgState, entry_id: int, exit_id: int,
                      values: dict[int, Any], syms: dict) -> None:
        for e in sorted(state.out_edges(exit_id), key=lambda e: e.id):
            actual = self._boundary_actual.pop(e.id, 0)
            self._produce(state, e, TOKEN, syms, values, actual=actual)

    def _fire_map(self, state: SdfgState, entry: MapEntry,
                  values: dict[int, Any], syms: dict, tree) -> None:
        local = dict(syms)
        for e in state.in_edges(entry.id):
            if e.dst_conn and not e.dst_conn.startswith("IN_") \
                    and not e.memlet.is_empty:
                local[e.dst_conn] = int(_scalarize(values[e.id]))
        axes = [self._range_pts(r, local) for r in entry.ranges]
        points = list(_grid(axes))
        if self.rng:
            self.rng.shuffle(points)
        for point in points:
            inst = dict(local)
            inst.update(dict(zip(entry.params, point)))
            self._scope_instance(state, entry, values, inst, tree)
        self._finish_scope(state, entry.id, tree.exits[entry.id], values, syms)

    def _fire_consume(self, state: SdfgState, entry: ConsumeEntry,
                      values: dict[int, Any], syms: dict, tree) -> None:
        handle = None
        stream_edge = None
        for e in state.in_edges(entry.id):
            if e.dst_conn == "IN_stream":
                handle = values[e.id]
                stream_edge = e
        if stream_edge is None or not isinstance(handle, _StreamHandle):
            raise InterpreterError("consume entry without a stream handle")
        buf = self.streams[handle.name]
        num_pes = int(self._eval(entry.num_pes, syms))
        active = list(range(num_pes))
        popped = 0
        while active:
            p = self.rng.choice(active) if self.rng else active[0]
            worker_syms = dict(syms)
            worker_syms[entry.param] = p
            cond = self._eval(entry.condition, self._cond_env(worker_syms))
            if not cond:
                active.remove(p)
                continue
            if buf.total() < 1:
                raise DeadlockError(
                    f"consume condition holds but stream '{handle.name}' is "
                    f"empty in state '{state.name}'")
            cell = next(c for c in buf.cells if c)
            element = cell.popleft()
            popped += 1
            self._scope_instance(state, entry, values, worker_syms, tree,
                                 element=element)
        self._count(state, stream_edge, popped)
        self._finish_scope(state, entry.id, tree.exits[entry.id], values, syms)

    def _fire_reduce(self, state: SdfgState, node: Reduce,
                     values: dict[int, Any], syms: dict) -> None:
        in_edges = [e for e in state.in_edges(node.id) if e.dst_conn == "in"]
        out_edges = [e for e in state.out_edges(node.id) if e.src_conn == "out"]
        block = np.asarray(values[in_edges[0].id])
        if block.ndim == 0:
            block = block.reshape(1)
        axes = tuple(sorted(node.axes))
        basetype = self.sdfg.data[in_edges[0].memlet.data].basetype
        if node.wcr.kind == "custom":
            identity = node.wcr.identity(basetype)
            moved = [a for a in range(block.ndim) if a not in axes]
            out = np.full([block.shape[a] for a in moved], identity,
                          dtype=block.dtype)
            it = np.ndindex(*block.shape)
            for idx in it:
                pos = tuple(idx[a] for a in moved)
                out[pos] = apply_wcr(node.wcr, out[pos], block[idx])
        else:
            ufunc = {"sum": np.add, "product": np.multiply,
                     "min": np.minimum, "max": np.maximum}[node.wcr.kind]
            out = ufunc.reduce(block, axis=axes) if axes else block
        self._produce(state, out_edges[0], np.asarray(out), syms, values)

    def _fire_nested(self, state: SdfgState, node: NestedSdfg,
                     values: dict[int, Any], syms: dict) -> None:
        inner = node.sdfg
        inner_memory: dict[str, np.ndarray] = {}
        inner_streams: dict[str, _StreamBuf] = {}
        inner_syms = {name: int(self._eval(expr, syms))
                      for name, expr in node.symbol_mapping.items()}

        def bind(conn: str, edge: DataflowEdge) -> None:
            desc = inner.data[conn]
            m = edge.memlet
            if desc.kind == "stream":
                inner_streams[conn] = self.streams[m.data]
                return
            outer = self.memory[m.data]
            slices = []
            for r in m.subset.ranges:
                b = int(self._eval(r.begin, syms))
                e_ = int(self._eval(r.end, syms))
                s = int(self._eval(r.stride, syms))
                slices.append(slice(b, e_ + 1, s))
            view = outer[tuple(slices)]
            want = tuple(int(self._eval(d, inner_syms)) for d in desc.dims)
            reshaped = view.reshape(want)
            if reshaped.size and not np.shares_memory(outer, reshaped):
                raise InterpreterError(
                    f"region {m.subset} of '{m.data}' cannot alias inner "
                    f"container '{conn}' without copying")
            inner_memory[conn] = reshaped

        for e in state.in_edges(node.id):
            if not e.memlet.is_empty and e.dst_conn in inner.data:
                bind(e.dst_conn, e)
        for e in state.out_edges(node.id):
            if not e.memlet.is_empty and e.src_conn in inner.data \
                    and e.src_conn not in inner_memory \
                    and e.src_conn not in inner_streams:
                bind(e.src_conn, e)
        # transients private to this invocation
        for name, desc in inner.data.items():
            if name in inner_memory or name in inner_streams:
                continue
            if not desc.transient:
                raise InterpreterError(
                    f"inner container '{name}' of '{inner.name}' is not bound")
            dims = tuple(int(self._eval(d, inner_syms)) for d in desc.dims)
            if desc.kind == "stream":
                inner_streams[name] = _StreamBuf(dims)
            else:
                inner_memory[name] = np.zeros(dims, dtype=_NP_DTYPES[desc.basetype])

        sub = _Executor(inner, inner_memory, inner_streams, inner_syms,
                        self.counters, self.rng, self.trace,
                        prefix=f"{self.prefix}{inner.name}/")
        sub.execute()
        self.tasklet_invocations += sub.tasklet_invocations
        for e in sorted(state.out_edges(node.id), key=lambda e: e.id):
            self._produce(state, e, TOKEN, syms, values, actual=0)

    # -- state machine -----------------------------------------------------

    def _exec_state(self, state: SdfgState) -> None:
        tree = state.scope_of()
        values: dict[int, Any] = {}
        self._boundary_actual: dict[int, int] = {}
        top = list(tree.children.get(None, []))
        self._run_nodes(state, top, values, self.syms, tree)

    def execute(self) -> None:
        current = self.sdfg.start_state
        visits = 0
        while current is not None:
            visits += 1
            if visits > MAX_STATE_VISITS:
                raise InterpreterError(
                    f"state machine exceeded {MAX_STATE_VISITS} state executions")
            self.states_visited.append(current)
            self._exec_state(self.sdfg.state(current))
            env = self._cond_env(self.syms)
            chosen = None
            for t in self.sdfg.out_transitions(current):
                if self._eval(t.condition, env):
                    chosen = t
                    break
            if chosen is None:
                return
            for lhs, rhs in chosen.assignments:
                self.syms[lhs] = int(self._eval(rhs, env))
            current = chosen.dst


@dataclass
class _StreamHandle:
    name: str


@dataclass
class _StreamDrain:
    items: list


def _scalarize(value):
    if isinstance(value, np.ndarray) and value.size == 1:
        return value.reshape(-1)[0].item()
    return value


def _scalarize_keep(block: np.ndarray):
    if block.size == 1:
        return block.reshape(-1)[0].item()
    if 1 in block.shape and block.ndim > 1:
        return block.reshape([d for d in block.shape if d != 1] or [1])
    return block


def _actual_size(value) -> int:
    if isinstance(value, (_Token, _NoValue)):
        return 0
    if isinstance(value, IndexedWrites):
        return len(value)
    if isinstance(value, np.ndarray):
        return int(value.size)
    if isinstance(value, _StreamDrain):
        return len(value.items)
    return 1


def _grid(axes: list[list[int]]):
    if not axes:
        yield ()
        return
    if len(axes) == 1:
        for v in axes[0]:
            yield (v,)
        return
    for v in axes[0]:
        for rest in _grid(axes[1:]):
            yield (v,) + rest


def _intify(syms: Mapping) -> dict[str, int]:
    return {k: int(v) for k, v in dict(syms).items()
            if isinstance(v, (int, np.integer))}


def run(sdfg: Sdfg, arrays: Optional[Mapping[str, Any]] = None,
        symbols: Optional[Mapping[str, int]] = None, *,
        schedule_seed: Optional[int] = None, trace: bool = False,
        validate: bool = True) -> ExecutionReport:
    """Execute an SDFG on concrete inputs.

    ``arrays`` supplies every non-transient container; ``symbols`` binds
    every declared symbol.  Input buffers are copied, never mutated; the
    report's ``outputs`` hold the final contents of all non-transient
    containers.
    """
    arrays = dict(arrays or {})
    symbols = dict(symbols or {})
    if validate:
        problems = [d for d in validate_sdfg(sdfg) if d.severity == "error"]
        if problems:
            raise InterpreterError(
                "refusing to run an invalid graph:\n  "
                + "\n  ".join(str(p) for p in problems))
    missing_syms = [s for s in sdfg.symbols if s not in symbols]
    if missing_syms:
        raise InterpreterError(f"unbound symbols: {sorted(missing_syms)}")
    syms = {k: int(v) for k, v in symbols.items()}

    memory: dict[str, np.ndarray] = {}
    streams: dict[str, _StreamBuf] = {}
    for name, desc in sdfg.data.items():
        dims = tuple(int(eval_expr(d, syms)) for d in desc.dims)
        if desc.kind == "stream":
            if not desc.transient:
                raise InterpreterError(
                    f"stream '{name}' must be transient to be executable")
            streams[name] = _StreamBuf(dims)
            continue
        dtype = _NP_DTYPES[desc.basetype]
        if desc.transient:
            memory[name] = np.zeros(dims, dtype=dtype)
        elif name in arrays:
            supplied = np.asarray(arrays[name], dtype=dtype)
            if supplied.size != int(np.prod(dims)):
                raise InterpreterError(
                    f"input '{name}' has {supplied.size} elements; "
                    f"container expects {int(np.prod(dims))}")
            memory[name] = supplied.reshape(dims).copy()
        else:
            raise InterpreterError(f"missing input container '{name}'")
    unknown = [a for a in arrays if a not in sdfg.data]
    if unknown:
        raise InterpreterError(f"unknown input containers: {sorted(unknown)}")

    counters: dict[str, int] = {}
    trace_list: Optional[list[TraceRecord]] = [] if trace else None
    rng = random.Random(schedule_seed) if schedule_seed is not None else None
    executor = _Executor(sdfg, memory, streams, syms, counters, rng, trace_list)
    executor.execute()

    outputs = {name: memory[name] for name, desc in sdfg.data.items()
               if not desc.transient and desc.kind == "array"}
    return ExecutionReport(
        outputs=outputs,
        states_visited=executor.states_visited,
        elements_moved=counters,
        total_moved=sum(counters.values()),
        tasklet_invocations=executor.tasklet_invocations,
        trace=trace_list,
    )
