"""Graph-of-graphs data model: a state machine whose states are acyclic
dataflow multigraphs.

Nodes are containers (arrays, streams), tasklets, map/consume scope
entry/exit pairs, reduction nodes, and nested graph invocations.  Edges
carry memlets describing the data that moves.  Transitions between states
carry guard conditions and symbol assignments.

Construction goes through the builder methods on :class:`Sdfg` and
:class:`SdfgState`; ``add_memlet_path`` threads a memlet through scope
boundaries and leaves auto-memlet placeholders on the outer edges, which
``Sdfg.finalize`` fills by propagation.
"""

from __future__ import annotations

import copy as _copy
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from . import tasklets
from .symbolic import (
    Expr,
    Num,
    ONE,
    Subset,
    SymRange,
    accesses_expr,
    parse_expr,
    parse_subset,
)

INT64 = "int64"
FLOAT64 = "float64"
BASETYPES = (INT64, FLOAT64)

SCHEDULES = ("sequential", "cpu_parallel")

ExprLike = Union[Expr, str, int]
SubsetLike = Union[Subset, str]


def as_expr(value: ExprLike) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, int):
        return Num(value)
    return parse_expr(value)


def as_subset(value: SubsetLike) -> Subset:
    if isinstance(value, Subset):
        return value
    return parse_subset(value)


class GraphError(ValueError):
    """Structural misuse of the builder API."""


# --------------------------------------------------------------------------
# Descriptors and memlets
# --------------------------------------------------------------------------

@dataclass
class DataDesc:
    """A named memory container.  Scalars are rank-1 size-1 arrays; streams
    are grids of queues addressed like arrays but accessed with push/pop.
    """
    name: str
    basetype: str = FLOAT64
    dims: tuple[Expr, ...] = (ONE,)
    transient: bool = False
    kind: str = "array"  # array | stream
    storage: str = "heap"
    size_bound: Optional[Expr] = None  # advisory queue bound for streams

    def __post_init__(self):
        if self.basetype not in BASETYPES:
            raise GraphError(f"unsupported basetype '{self.basetype}'")
        if not self.dims:
            raise GraphError(f"container '{self.name}' needs at least one dimension")

    @property
    def rank(self) -> int:
        return len(self.dims)


WCR_KINDS = ("sum", "product", "min", "max", "custom")

_WCR_IDENTITIES = {
    ("sum", INT64): 0, ("sum", FLOAT64): 0.0,
    ("product", INT64): 1, ("product", FLOAT64): 1.0,
    ("min", INT64): 2**63 - 1, ("min", FLOAT64): float("inf"),
    ("max", INT64): -2**63, ("max", FLOAT64): float("-inf"),
}


@dataclass
class WcrFunc:
    """Write-conflict resolution: combines the value already stored with an
    incoming one.  Custom functions must bring their own identity element.
    """
    kind: str = "sum"
    custom: Optional[tasklets.TaskletProgram] = None
    custom_identity: Optional[float] = None

    def __post_init__(self):
        if self.kind not in WCR_KINDS:
            raise GraphError(f"unknown wcr kind '{self.kind}'")
        if self.kind == "custom":
            if self.custom is None or self.custom_identity is None:
                raise GraphError("custom wcr requires a function and an identity element")

    def identity(self, basetype: str):
        if self.kind == "custom":
            return self.custom_identity
        return _WCR_IDENTITIES[(self.kind, basetype)]

    def __str__(self) -> str:
        return self.kind


def wcr_from_spec(spec: Union[None, str, WcrFunc]) -> Optional[WcrFunc]:
    if spec is None or isinstance(spec, WcrFunc):
        return spec
    return WcrFunc(kind=spec)


@dataclass
class Memlet:
    """Data-movement descriptor attached to a dataflow edge.

    ``accesses`` is the number of elements moved per execution; ``None``
    means the volume is dynamic (data-dependent).  An empty memlet
    (``data is None``) carries ordering only.
    """
    data: Optional[str] = None
    subset: Optional[Subset] = None
    reindex: Optional[Subset] = None
    accesses: Optional[Expr] = None
    wcr: Optional[WcrFunc] = None
    # filled by propagation: aggregate requirement at a scope boundary
    propagated_subset: Optional[Subset] = None
    propagated_accesses: Optional[Expr] = None

    @classmethod
    def simple(cls, data: str, subset: SubsetLike,
               wcr: Union[None, str, WcrFunc] = None,
               accesses: Optional[ExprLike] = None,
               dynamic: bool = False,
               reindex: Optional[SubsetLike] = None) -> "Memlet":
        sub = as_subset(subset)
        if dynamic:
            acc = None
        elif accesses is not None:
            acc = as_expr(accesses)
        else:
            acc = accesses_expr(sub)
        return cls(data=data, subset=sub,
                   reindex=as_subset(reindex) if reindex is not None else None,
                   accesses=acc, wcr=wcr_from_spec(wcr))

    @classmethod
    def empty(cls) -> "Memlet":
        return cls()

    @property
    def is_empty(self) -> bool:
        return self.data is None

    @property
    def is_dynamic(self) -> bool:
        return not self.is_empty and self.accesses is None

    def summary(self) -> str:
        if self.is_empty:
            return "(empty)"
        vol = "dyn" if self.accesses is None else str(self.accesses)
        wcr = f" [CR: {self.wcr}]" if self.wcr else ""
        return f"{self.data}{self.subset} ({vol}){wcr}"

    def __str__(self) -> str:
        return self.summary()


class AutoMemlet(Memlet):
    """Placeholder on a scope-boundary edge, resolved by Sdfg.finalize."""

    def __init__(self, data: str):
        super().__init__(data=data)

    def summary(self) -> str:
        return f"{self.data}[?]"


# --------------------------------------------------------------------------
# Nodes
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Node:
    id: int = field(default=-1, init=False)

    def in_connectors(self) -> set[str]:
        return set()

    def out_connectors(self) -> set[str]:
        return set()

    def label(self) -> str:
        return type(self).__name__


@dataclass(eq=False)
class AccessNode(Node):
    data: str

    def label(self) -> str:
        return self.data


@dataclass(eq=False)
class Tasklet(Node):
    name: str
    program: tasklets.TaskletProgram

    def in_connectors(self) -> set[str]:
        return set(self.program.inputs)

    def out_connectors(self) -> set[str]:
        return set(self.program.outputs)

    def label(self) -> str:
        return self.name


@dataclass(eq=False)
class MapEntry(Node):
    params: list[str]
    ranges: list[SymRange]
    schedule: str = "sequential"
    ins: set[str] = field(default_factory=set)
    outs: set[str] = field(default_factory=set)

    def in_connectors(self) -> set[str]:
        return set(self.ins)

    def out_connectors(self) -> set[str]:
        return set(self.outs)

    def dynamic_range_connectors(self) -> set[str]:
        return {c for c in self.ins if not c.startswith("IN_")}

    def label(self) -> str:
        rng = ", ".join(f"{p}={r}" for p, r in zip(self.params, self.ranges))
        return f"[{rng}]"


@dataclass(eq=False)
class MapExit(Node):
    entry: int
    ins: set[str] = field(default_factory=set)
    outs: set[str] = field(default_factory=set)

    def in_connectors(self) -> set[str]:
        return set(self.ins)

    def out_connectors(self) -> set[str]:
        return set(self.outs)

    def label(self) -> str:
        return "[exit]"


@dataclass(eq=False)
class ConsumeEntry(Node):
    param: str
    num_pes: Expr
    condition: Expr
    ins: set[str] = field(default_factory=lambda: {"IN_stream"})
    outs: set[str] = field(default_factory=lambda: {"OUT_stream"})

    def in_connectors(self) -> set[str]:
        return set(self.ins)

    def out_connectors(self) -> set[str]:
        return set(self.outs)

    def label(self) -> str:
        return f"[{self.param}=0:{self.num_pes}], {self.condition}"


@dataclass(eq=False)
class ConsumeExit(Node):
    entry: int
    ins: set[str] = field(default_factory=set)
    outs: set[str] = field(default_factory=set)

    def in_connectors(self) -> set[str]:
        return set(self.ins)

    def out_connectors(self) -> set[str]:
        return set(self.outs)

    def label(self) -> str:
        return "[consume exit]"


@dataclass(eq=False)
class Reduce(Node):
    axes: tuple[int, ...]
    wcr: WcrFunc

    def in_connectors(self) -> set[str]:
        return {"in"}

    def out_connectors(self) -> set[str]:
        return {"out"}

    def label(self) -> str:
        return f"{self.wcr}, axes={list(self.axes)}"


@dataclass(eq=False)
class NestedSdfg(Node):
    sdfg: "Sdfg"
    symbol_mapping: dict[str, Expr] = field(default_factory=dict)
    ins: set[str] = field(default_factory=set)
    outs: set[str] = field(default_factory=set)

    def in_connectors(self) -> set[str]:
        return set(self.ins)

    def out_connectors(self) -> set[str]:
        return set(self.outs)

    def label(self) -> str:
        return f"invoke {self.sdfg.name}"


ENTRY_NODES = (MapEntry, ConsumeEntry)
EXIT_NODES = (MapExit, ConsumeExit)


# --------------------------------------------------------------------------
# State graphs
# --------------------------------------------------------------------------

@dataclass(eq=False)
class DataflowEdge:
    id: int
    src: int
    src_conn: Optional[str]
    dst: int
    dst_conn: Optional[str]
    memlet: Memlet


class ScopeError(GraphError):
    pass


@dataclass
class ScopeTree:
    parent: dict[int, Optional[int]]
    children: dict[Optional[int], list[int]]
    exits: dict[int, int]  # entry id -> exit id

    def nodes_in_scope(self, entry: Optional[int]) -> list[int]:
        return list(self.children.get(entry, []))


class SdfgState:
    """A named acyclic dataflow multigraph."""

    def __init__(self, name: str, sdfg: "Sdfg"):
        self.name = name
        self.sdfg = sdfg
        self.nodes: dict[int, Node] = {}
        self.edges: list[DataflowEdge] = []
        self._next_node = 0
        self._next_edge = 0

    # -- structure ---------------------------------------------------------

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def add_node(self, node: Node) -> int:
        node.id = self._next_node
        self.nodes[node.id] = node
        self._next_node += 1
        return node.id

    def remove_node(self, node_id: int) -> None:
        if any(e.src == node_id or e.dst == node_id for e in self.edges):
            raise GraphError(f"node {node_id} still has edges")
        del self.nodes[node_id]

    def add_edge(self, src: int, src_conn: Optional[str], dst: int,
                 dst_conn: Optional[str], memlet: Memlet) -> DataflowEdge:
        for endpoint in (src, dst):
            if endpoint not in self.nodes:
                raise GraphError(f"edge endpoint {endpoint} does not exist in state '{self.name}'")
        edge = DataflowEdge(self._next_edge, src, src_conn, dst, dst_conn, memlet)
        self._next_edge += 1
        self.edges.append(edge)
        return edge

    def remove_edge(self, edge: DataflowEdge) -> None:
        self.edges.remove(edge)

    def in_edges(self, node_id: int) -> list[DataflowEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def out_edges(self, node_id: int) -> list[DataflowEdge]:
        return [e for e in self.edges if e.src == node_id]

    def in_degree(self, node_id: int) -> int:
        return len(self.in_edges(node_id))

    def out_degree(self, node_id: int) -> int:
        return len(self.out_edges(node_id))

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def topological_order(self) -> list[int]:
        indeg = {n: 0 for n in self.nodes}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = [n for n in self.node_ids() if indeg[n] == 0]
        order: list[int] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for e in sorted(self.out_edges(n), key=lambda e: e.id):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
            ready.sort()
        if len(order) != len(self.nodes):
            raise GraphError(f"state '{self.name}' contains a dataflow cycle")
        return order

    # -- node builders -----------------------------------------------------

    def add_access(self, data: str) -> int:
        if data not in self.sdfg.data:
            raise GraphError(f"unknown container '{data}'")
        return self.add_node(AccessNode(data))

    def add_tasklet(self, name: str, inputs: Iterable[str], outputs: Iterable[str],
                    code: str) -> int:
        program = tasklets.parse_tasklet(code, list(inputs), list(outputs))
        return self.add_node(Tasklet(name, program))

    def add_map(self, params: Union[str, Sequence[str]],
                ranges: Union[str, Sequence[Union[str, SymRange]]],
                schedule: str = "sequential") -> tuple[int, int]:
        if isinstance(params, str):
            params = [params]
        if isinstance(ranges, str):
            ranges = [ranges]
        if len(params) != len(ranges):
            raise GraphError("one range per map parameter")
        parsed = [r if isinstance(r, SymRange) else _parse_range(r) for r in ranges]
        entry = self.add_node(MapEntry(list(params), parsed, schedule))
        exit_ = self.add_node(MapExit(entry))
        return entry, exit_

    def add_consume(self, param: str, num_pes: ExprLike,
                    condition: ExprLike) -> tuple[int, int]:
        entry = self.add_node(ConsumeEntry(param, as_expr(num_pes), as_expr(condition)))
        exit_ = self.add_node(ConsumeExit(entry))
        return entry, exit_

    def add_reduce(self, axes: Sequence[int], wcr: Union[str, WcrFunc]) -> int:
        return self.add_node(Reduce(tuple(axes), wcr_from_spec(wcr)))

    def add_nested(self, sdfg: "Sdfg", symbol_mapping: dict[str, ExprLike],
                   inputs: Iterable[str], outputs: Iterable[str]) -> int:
        mapping = {k: as_expr(v) for k, v in symbol_mapping.items()}
        node = NestedSdfg(sdfg, mapping, set(inputs), set(outputs))
        return self.add_node(node)

    # -- memlet paths ------------------------------------------------------

    def add_memlet_path(self, *path: Union[int, tuple[int, str]],
                        memlet: Memlet,
                        src_conn: Optional[str] = None,
                        dst_conn: Optional[str] = None) -> list[DataflowEdge]:
        """Connect a chain of nodes with one memlet, threading through scope
        entry/exit nodes.

        The innermost edge carries ``memlet``; edges crossing scope nodes
        get IN_*/OUT_* connectors and auto-memlets to be resolved by
        ``Sdfg.finalize``.  ``src_conn``/``dst_conn`` name the connectors on
        the first and last node of the path.
        """
        if len(path) < 2:
            raise GraphError("a memlet path needs at least two nodes")
        ids = [p for p in path]
        if memlet.is_empty:
            if len(ids) != 2:
                raise GraphError("empty memlets connect exactly two nodes")
            return [self.add_edge(ids[0], src_conn, ids[1], dst_conn, memlet)]
        name = memlet.data
        # the innermost segment carries the authored memlet: the one adjacent
        # to the deepest scope level (last when reading into a scope, first
        # when writing out of one)
        first_n = self.nodes[ids[0]]
        reads_inward = isinstance(first_n, AccessNode) or isinstance(first_n, ENTRY_NODES)
        inner_idx = len(ids) - 2 if reads_inward else 0
        edges: list[DataflowEdge] = []
        for i in range(len(ids) - 1):
            u, v = ids[i], ids[i + 1]
            un, vn = self.nodes[u], self.nodes[v]
            uconn = src_conn if i == 0 else None
            vconn = dst_conn if i == len(ids) - 2 else None
            if isinstance(un, (*ENTRY_NODES, *EXIT_NODES)) and uconn is None:
                un.ins.add(f"IN_{name}")
                un.outs.add(f"OUT_{name}")
                uconn = f"OUT_{name}"
            if isinstance(vn, (*ENTRY_NODES, *EXIT_NODES)):
                if vconn is None:
                    vn.ins.add(f"IN_{name}")
                    vn.outs.add(f"OUT_{name}")
                    vconn = f"IN_{name}"
                else:
                    # explicitly named connector on a scope node (e.g. a
                    # data-dependent range input)
                    vn.ins.add(vconn)
            if i == inner_idx:
                edges.append(self.add_edge(u, uconn, v, vconn, memlet))
                continue
            # boundary segments are shared: one edge per connector pair
            existing = next(
                (e for e in self.edges
                 if e.src == u and e.src_conn == uconn and e.dst == v
                 and e.dst_conn == vconn and isinstance(e.memlet, AutoMemlet)
                 and e.memlet.data == name), None)
            edges.append(existing if existing is not None
                         else self.add_edge(u, uconn, v, vconn, AutoMemlet(name)))
        return edges

    # -- queries -----------------------------------------------------------

    def scope_of(self) -> ScopeTree:
        """Assign every node its nearest enclosing scope entry (or None) and
        pair entries with exits; raises ScopeError on unbalanced or crossing
        scopes.
        """
        order = self.topological_order()
        parent: dict[int, Optional[int]] = {}
        exits: dict[int, int] = {}
        for v in order:
            cands: set[Optional[int]] = set()
            for e in self.in_edges(v):
                u = e.src
                un = self.nodes[u]
                if isinstance(un, ENTRY_NODES):
                    cands.add(u)
                elif isinstance(un, EXIT_NODES):
                    cands.add(parent[un.entry])
                else:
                    cands.add(parent[u])
            node = self.nodes[v]
            if isinstance(node, EXIT_NODES):
                if node.entry not in self.nodes:
                    raise ScopeError(f"exit node {v} references missing entry {node.entry}")
                if not cands:
                    raise ScopeError(f"exit node {v} is disconnected from its scope")
                if cands != {node.entry}:
                    raise ScopeError(
                        f"edges cross the scope boundary at exit node {v} "
                        f"(state '{self.name}')")
                if node.entry in exits:
                    raise ScopeError(f"entry {node.entry} has two exit nodes")
                exits[node.entry] = v
                parent[v] = parent[node.entry]
                continue
            if not cands:
                parent[v] = None
            elif len(cands) == 1:
                parent[v] = cands.pop()
            else:
                raise ScopeError(
                    f"node {v} ('{node.label()}') is reached from conflicting scopes "
                    f"{sorted(str(c) for c in cands)} in state '{self.name}'")
        for v, node in self.nodes.items():
            if isinstance(node, ENTRY_NODES) and v not in exits:
                raise ScopeError(f"entry node {v} has no matching exit (unbalanced scope)")
        # interior nodes must drain through the exit: a sink strictly inside
        # a scope is not post-dominated by it
        for v, p in parent.items():
            if p is not None and self.out_degree(v) == 0:
                raise ScopeError(
                    f"node {v} inside scope {p} has no path to the scope exit")
        children: dict[Optional[int], list[int]] = {}
        for v in order:
            if isinstance(self.nodes[v], EXIT_NODES):
                continue
            children.setdefault(parent[v], []).append(v)
        return ScopeTree(parent, children, exits)

    def build_indirection(self, base: str, index_memlet: Memlet,
                          index_src: Optional[int] = None,
                          base_src: Optional[int] = None,
                          through: Sequence[int] = (),
                          name: str = "deref") -> int:
        """Emit the indirect-access pattern for ``base[index]``: an exact
        memlet for the index value, a whole-container memlet with one access,
        and a dereference tasklet.

        ``through`` threads both memlets across scope entry nodes; source
        access nodes are created when not supplied.  Returns the tasklet id;
        its output connector is ``out``.
        """
        desc = self.sdfg.data.get(base)
        if desc is None:
            raise GraphError(f"unknown container '{base}'")
        if desc.rank != 1:
            raise GraphError(
                f"rank mismatch: indirection dereferences rank-1 containers, "
                f"'{base}' has rank {desc.rank}")
        tasklet = self.add_tasklet(name, ["table", "index"], ["out"],
                                   "out = table[index]")
        if index_src is None:
            index_src = self.add_access(index_memlet.data)
        if base_src is None:
            base_src = self.add_access(base)
        self.add_memlet_path(index_src, *through, tasklet, dst_conn="index",
                             memlet=index_memlet)
        full = Memlet.simple(base, f"[0:{desc.dims[0]} - 1]", accesses=1)
        self.add_memlet_path(base_src, *through, tasklet, dst_conn="table",
                             memlet=full)
        return tasklet


def _parse_range(text: str) -> SymRange:
    from .symbolic import parse_range
    return parse_range(text)


# --------------------------------------------------------------------------
# Interstate edges and the top-level graph
# --------------------------------------------------------------------------

@dataclass(eq=False)
class InterstateEdge:
    src: str
    dst: str
    condition: Expr = field(default_factory=lambda: ONE)
    assignments: list[tuple[str, Expr]] = field(default_factory=list)

    def label(self) -> str:
        parts = []
        if self.condition != ONE:
            parts.append(str(self.condition))
        if self.assignments:
            parts.append("; ".join(f"{k} = {v}" for k, v in self.assignments))
        return " / ".join(parts) if parts else "(always)"


class Sdfg:
    """Top-level program: states, transitions, containers, and symbols."""

    def __init__(self, name: str):
        self.name = name
        self.states: list[SdfgState] = []
        self.transitions: list[InterstateEdge] = []
        self.start_state: Optional[str] = None
        self.data: dict[str, DataDesc] = {}
        self.symbols: dict[str, str] = {}

    # -- builders ----------------------------------------------------------

    def add_state(self, name: str, is_start: bool = False) -> SdfgState:
        if any(s.name == name for s in self.states):
            raise GraphError(f"duplicate state name '{name}'")
        state = SdfgState(name, self)
        self.states.append(state)
        if is_start or self.start_state is None:
            self.start_state = name
        return state

    def add_transition(self, src: Union[str, SdfgState], dst: Union[str, SdfgState],
                       condition: Optional[ExprLike] = None,
                       assignments: Optional[Sequence[tuple[str, ExprLike]]] = None,
                       ) -> InterstateEdge:
        src_name = src if isinstance(src, str) else src.name
        dst_name = dst if isinstance(dst, str) else dst.name
        for name in (src_name, dst_name):
            if self.state(name) is None:
                raise GraphError(f"transition references unknown state '{name}'")
        cond = as_expr(condition) if condition is not None else ONE
        assigns = [(k, as_expr(v)) for k, v in (assignments or [])]
        edge = InterstateEdge(src_name, dst_name, cond, assigns)
        self.transitions.append(edge)
        return edge

    def add_array(self, name: str, dims: Sequence[ExprLike], basetype: str = FLOAT64,
                  transient: bool = False) -> DataDesc:
        return self._add_desc(DataDesc(name, basetype, tuple(as_expr(d) for d in dims),
                                       transient, "array"))

    def add_scalar(self, name: str, basetype: str = FLOAT64,
                   transient: bool = False) -> DataDesc:
        return self.add_array(name, [1], basetype, transient)

    def add_stream(self, name: str, basetype: str = FLOAT64,
                   dims: Sequence[ExprLike] = (1,), transient: bool = True,
                   size_bound: Optional[ExprLike] = None) -> DataDesc:
        bound = as_expr(size_bound) if size_bound is not None else None
        return self._add_desc(DataDesc(name, basetype, tuple(as_expr(d) for d in dims),
                                       transient, "stream", size_bound=bound))

    def _add_desc(self, desc: DataDesc) -> DataDesc:
        if desc.name in self.data:
            raise GraphError(f"duplicate container name '{desc.name}'")
        if desc.name in self.symbols:
            raise GraphError(f"'{desc.name}' already names a symbol")
        self.data[desc.name] = desc
        return desc

    def add_symbol(self, name: str, basetype: str = INT64) -> None:
        if name in self.symbols:
            raise GraphError(f"duplicate symbol '{name}'")
        if name in self.data:
            raise GraphError(f"'{name}' already names a container")
        self.symbols[name] = basetype

    # -- queries -----------------------------------------------------------

    def state(self, name: str) -> Optional[SdfgState]:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def state_names(self) -> list[str]:
        return [s.name for s in self.states]

    def out_transitions(self, state_name: str) -> list[InterstateEdge]:
        return [t for t in self.transitions if t.src == state_name]

    def in_transitions(self, state_name: str) -> list[InterstateEdge]:
        return [t for t in self.transitions if t.dst == state_name]

    def nested_sdfgs(self) -> list["Sdfg"]:
        out = []
        for state in self.states:
            for node in state.nodes.values():
                if isinstance(node, NestedSdfg):
                    out.append(node.sdfg)
        return out

    def copy(self) -> "Sdfg":
        return _copy.deepcopy(self)

    def finalize(self) -> "Sdfg":
        """Resolve auto-memlets left by ``add_memlet_path`` via propagation."""
        from .propagation import fill_auto_memlets
        fill_auto_memlets(self)
        for nested in self.nested_sdfgs():
            nested.finalize()
        return self

    def renumber(self) -> "Sdfg":
        """Assign dense node and edge ids per state (insertion order kept).

        Keeps in-memory identifiers equal to the canonical serialized form,
        which makes journal anchors stable across save/load round trips.
        """
        for state in self.states:
            mapping = {old: new for new, old in enumerate(state.node_ids())}
            new_nodes: dict[int, Node] = {}
            for old_id in state.node_ids():
                node = state.nodes[old_id]
                node.id = mapping[old_id]
                if isinstance(node, EXIT_NODES):
                    node.entry = mapping[node.entry]
                new_nodes[node.id] = node
            state.nodes = new_nodes
            state._next_node = len(new_nodes)
            for new_eid, edge in enumerate(state.edges):
                edge.id = new_eid
                edge.src = mapping[edge.src]
                edge.dst = mapping[edge.dst]
            state._next_edge = len(state.edges)
        for nested in self.nested_sdfgs():
            nested.renumber()
        return self

    def rename_state(self, old: str, new: str) -> None:
        state = self.state(old)
        if state is None:
            raise GraphError(f"unknown state '{old}'")
        if self.state(new) is not None:
            raise GraphError(f"duplicate state name '{new}'")
        state.name = new
        for t in self.transitions:
            if t.src == old:
                t.src = new
            if t.dst == old:
                t.dst = new
        if self.start_state == old:
            self.start_state = new
