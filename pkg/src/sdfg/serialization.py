"""Canonical JSON interchange for graphs, journals, diagnostics, and tensors.

The emitted form is byte-stable for a given graph (sorted keys, dense node
ids assigned in insertion order), so sha256 over the canonical bytes is a
meaningful graph identity.  Loading rejects unknown fields, naming the
offending JSON path; structural problems beyond the schema are left to
validation, which runs separately.

Symbolic expressions, ranges, and subsets serialize as their grammar text
and are re-parsed on load; tasklet code ships as source.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Optional, Union

import numpy as np

from . import ir
from .symbolic import parse_expr, parse_range, parse_subset
from .tasklets import parse_tasklet

FORMAT_GRAPH = "sdfg.json"
FORMAT_JOURNAL = "sdfg.journal.json"
SCHEMA_VERSION = 1


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------
# Emission
# --------------------------------------------------------------------------

def _wcr_doc(wcr: Optional[ir.WcrFunc]) -> Optional[dict]:
    if wcr is None:
        return None
    doc: dict[str, Any] = {"kind": wcr.kind}
    if wcr.kind == "custom":
        doc["code"] = wcr.custom.source
        doc["inputs"] = list(wcr.custom.inputs)
        doc["outputs"] = list(wcr.custom.outputs)
        doc["identity"] = wcr.custom_identity
    return doc


def _memlet_doc(m: ir.Memlet) -> dict:
    if isinstance(m, ir.AutoMemlet):
        raise SchemaError("memlet", "cannot serialize an unresolved auto-memlet; "
                                    "run Sdfg.finalize() first")
    if m.is_empty:
        return {"empty": True}
    doc: dict[str, Any] = {"data": m.data, "subset": str(m.subset)}
    if m.reindex is not None:
        doc["reindex"] = str(m.reindex)
    if m.accesses is not None:
        doc["accesses"] = str(m.accesses)
    if m.wcr is not None:
        doc["wcr"] = _wcr_doc(m.wcr)
    if m.propagated_subset is not None:
        doc["propagated"] = {"subset": str(m.propagated_subset)}
        if m.propagated_accesses is not None:
            doc["propagated"]["accesses"] = str(m.propagated_accesses)
    return doc


def _node_doc(node: ir.Node) -> dict:
    if isinstance(node, ir.AccessNode):
        return {"kind": "access", "data": node.data}
    if isinstance(node, ir.Tasklet):
        return {"kind": "tasklet", "name": node.name,
                "inputs": sorted(node.program.inputs),
                "outputs": sorted(node.program.outputs),
                "code": node.program.source}
    if isinstance(node, ir.MapEntry):
        return {"kind": "map_entry", "params": list(node.params),
                "ranges": [str(r) for r in node.ranges],
                "schedule": node.schedule,
                "ins": sorted(node.ins), "outs": sorted(node.outs)}
    if isinstance(node, ir.MapExit):
        return {"kind": "map_exit", "entry": node.entry,
                "ins": sorted(node.ins), "outs": sorted(node.outs)}
    if isinstance(node, ir.ConsumeEntry):
        return {"kind": "consume_entry", "param": node.param,
                "num_pes": str(node.num_pes), "condition": str(node.condition),
                "ins": sorted(node.ins), "outs": sorted(node.outs)}
    if isinstance(node, ir.ConsumeExit):
        return {"kind": "consume_exit", "entry": node.entry,
                "ins": sorted(node.ins), "outs": sorted(node.outs)}
    if isinstance(node, ir.Reduce):
        return {"kind": "reduce", "axes": list(node.axes),
                "wcr": _wcr_doc(node.wcr)}
    if isinstance(node, ir.NestedSdfg):
        return {"kind": "nested", "sdfg": to_json(node.sdfg),
                "symbol_mapping": {k: str(v) for k, v in
                                   sorted(node.symbol_mapping.items())},
                "ins": sorted(node.ins), "outs": sorted(node.outs)}
    raise SchemaError("node", f"unhandled node type {type(node).__name__}")


def to_json(sdfg: ir.Sdfg) -> dict:
    """Canonical document form; node ids renumbered densely per state."""
    states = []
    for state in sdfg.states:
        old_ids = state.node_ids()
        renum = {old: new for new, old in enumerate(old_ids)}
        nodes = []
        for old in old_ids:
            doc = _node_doc(state.nodes[old])
            if "entry" in doc:
                doc["entry"] = renum[doc["entry"]]
            nodes.append(doc)
        edges = []
        for e in sorted(state.edges, key=lambda e: e.id):
            edges.append({
                "src": renum[e.src], "src_conn": e.src_conn,
                "dst": renum[e.dst], "dst_conn": e.dst_conn,
                "memlet": _memlet_doc(e.memlet),
            })
        states.append({"name": state.name, "nodes": nodes, "edges": edges})
    return {
        "format": FORMAT_GRAPH,
        "version": SCHEMA_VERSION,
        "name": sdfg.name,
        "symbols": [[name, t] for name, t in sdfg.symbols.items()],
        "data": [
            {
                "name": d.name, "basetype": d.basetype,
                "dims": [str(x) for x in d.dims], "transient": d.transient,
                "kind": d.kind, "storage": d.storage,
                **({"size_bound": str(d.size_bound)}
                   if d.size_bound is not None else {}),
            }
            for d in sdfg.data.values()
        ],
        "states": states,
        "start_state": sdfg.start_state,
        "transitions": [
            {
                "src": t.src, "dst": t.dst, "condition": str(t.condition),
                "assignments": [[k, str(v)] for k, v in t.assignments],
            }
            for t in sdfg.transitions
        ],
    }


def to_json_bytes(sdfg: ir.Sdfg) -> bytes:
    return json.dumps(to_json(sdfg), sort_keys=True,
                      separators=(",", ":")).encode() + b"\n"


def graph_hash(sdfg: ir.Sdfg) -> str:
    return hashlib.sha256(to_json_bytes(sdfg)).hexdigest()


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------

def _check_keys(doc: dict, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(path, f"expected an object, found {type(doc).__name__}")
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"{path}/{sorted(unknown)[0]}", "unknown field")
    missing = required - set(doc)
    if missing:
        raise SchemaError(path, f"missing field '{sorted(missing)[0]}'")


def _wcr_from(doc: Optional[dict], path: str) -> Optional[ir.WcrFunc]:
    if doc is None:
        return None
    _check_keys(doc, {"kind", "code", "inputs", "outputs", "identity"},
                {"kind"}, path)
    if doc["kind"] == "custom":
        prog = parse_tasklet(doc["code"], list(doc["inputs"]), list(doc["outputs"]))
        return ir.WcrFunc("custom", custom=prog, custom_identity=doc["identity"])
    return ir.WcrFunc(doc["kind"])


def _memlet_from(doc: dict, path: str) -> ir.Memlet:
    _check_keys(doc, {"empty", "data", "subset", "reindex", "accesses", "wcr",
                      "propagated"}, set(), path)
    if doc.get("empty"):
        return ir.Memlet.empty()
    m = ir.Memlet(
        data=doc["data"],
        subset=parse_subset(doc["subset"]),
        reindex=parse_subset(doc["reindex"]) if "reindex" in doc else None,
        accesses=parse_expr(doc["accesses"]) if "accesses" in doc else None,
        wcr=_wcr_from(doc.get("wcr"), f"{path}/wcr"),
    )
    if "propagated" in doc:
        _check_keys(doc["propagated"], {"subset", "accesses"}, {"subset"},
                    f"{path}/propagated")
        m.propagated_subset = parse_subset(doc["propagated"]["subset"])
        if "accesses" in doc["propagated"]:
            m.propagated_accesses = parse_expr(doc["propagated"]["accesses"])
    return m


_NODE_KEYS = {
    "access": ({"kind", "data"}, {"data"}),
    "tasklet": ({"kind", "name", "inputs", "outputs", "code"},
                {"name", "inputs", "outputs", "code"}),
    "map_entry": ({"kind", "params", "ranges", "schedule", "ins", "outs"},
                  {"params", "ranges"}),
    "map_exit": ({"kind", "entry", "ins", "outs"}, {"entry"}),
    "consume_entry": ({"kind", "param", "num_pes", "condition", "ins", "outs"},
                      {"param", "num_pes", "condition"}),
    "consume_exit": ({"kind", "entry", "ins", "outs"}, {"entry"}),
    "reduce": ({"kind", "axes", "wcr"}, {"axes", "wcr"}),
    "nested": ({"kind", "sdfg", "symbol_mapping", "ins", "outs"},
               {"sdfg", "symbol_mapping"}),
}


def _node_from(doc: dict, path: str) -> ir.Node:
    kind = doc.get("kind")
    if kind not in _NODE_KEYS:
        raise SchemaError(f"{path}/kind", f"unknown node kind {kind!r}")
    allowed, required = _NODE_KEYS[kind]
    _check_keys(doc, allowed | {"kind"}, required, path)
    if kind == "access":
        return ir.AccessNode(doc["data"])
    if kind == "tasklet":
        prog = parse_tasklet(doc["code"], list(doc["inputs"]), list(doc["outputs"]))
        return ir.Tasklet(doc["name"], prog)
    if kind == "map_entry":
        node = ir.MapEntry(list(doc["params"]),
                           [parse_range(r) for r in doc["ranges"]],
                           doc.get("schedule", "sequential"))
    elif kind == "map_exit":
        node = ir.MapExit(int(doc["entry"]))
    elif kind == "consume_entry":
        node = ir.ConsumeEntry(doc["param"], parse_expr(doc["num_pes"]),
                               parse_expr(doc["condition"]))
        node.ins = set()
        node.outs = set()
    elif kind == "consume_exit":
        node = ir.ConsumeExit(int(doc["entry"]))
    elif kind == "reduce":
        return ir.Reduce(tuple(int(a) for a in doc["axes"]),
                         _wcr_from(doc["wcr"], f"{path}/wcr"))
    else:  # nested
        inner = from_json(doc["sdfg"])
        node = ir.NestedSdfg(inner,
                             {k: parse_expr(v) for k, v in
                              doc["symbol_mapping"].items()})
    node.ins = set(doc.get("ins", []))
    node.outs = set(doc.get("outs", []))
    return node


def from_json(doc: Union[dict, str, bytes]) -> ir.Sdfg:
    """Rebuild a graph from its document form.

    Schema violations raise :class:`SchemaError` with the JSON path; graphs
    that parse but are ill-formed load fine and fail validation instead.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    _check_keys(doc, {"format", "version", "name", "symbols", "data", "states",
                      "start_state", "transitions"},
                {"format", "version", "name", "states"}, "")
    if doc["format"] != FORMAT_GRAPH:
        raise SchemaError("/format", f"expected {FORMAT_GRAPH!r}")
    if doc["version"] != SCHEMA_VERSION:
        raise SchemaError("/version", f"unsupported version {doc['version']!r}")

    g = ir.Sdfg(doc["name"])
    for i, pair in enumerate(doc.get("symbols", [])):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(f"/symbols/{i}", "expected [name, basetype]")
        g.add_symbol(pair[0], pair[1])
    for i, d in enumerate(doc.get("data", [])):
        _check_keys(d, {"name", "basetype", "dims", "transient", "kind",
                        "storage", "size_bound"},
                    {"name", "basetype", "dims"}, f"/data/{i}")
        desc = ir.DataDesc(
            d["name"], d["basetype"], tuple(parse_expr(x) for x in d["dims"]),
            bool(d.get("transient", False)), d.get("kind", "array"),
            d.get("storage", "heap"),
            parse_expr(d["size_bound"]) if "size_bound" in d else None)
        g._add_desc(desc)
    for i, sdoc in enumerate(doc["states"]):
        path = f"/states/{i}"
        _check_keys(sdoc, {"name", "nodes", "edges"}, {"name", "nodes", "edges"},
                    path)
        state = g.add_state(sdoc["name"])
        for j, ndoc in enumerate(sdoc["nodes"]):
            state.add_node(_node_from(ndoc, f"{path}/nodes/{j}"))
        for j, edoc in enumerate(sdoc["edges"]):
            epath = f"{path}/edges/{j}"
            _check_keys(edoc, {"src", "src_conn", "dst", "dst_conn", "memlet"},
                        {"src", "dst", "memlet"}, epath)
            state.add_edge(int(edoc["src"]), edoc.get("src_conn"),
                           int(edoc["dst"]), edoc.get("dst_conn"),
                           _memlet_from(edoc["memlet"], f"{epath}/memlet"))
    if "start_state" in doc and doc["start_state"] is not None:
        if g.state(doc["start_state"]) is None:
            raise SchemaError("/start_state", f"unknown state {doc['start_state']!r}")
        g.start_state = doc["start_state"]
    for i, tdoc in enumerate(doc.get("transitions", [])):
        path = f"/transitions/{i}"
        _check_keys(tdoc, {"src", "dst", "condition", "assignments"},
                    {"src", "dst"}, path)
        g.add_transition(
            tdoc["src"], tdoc["dst"],
            condition=tdoc.get("condition", "1"),
            assignments=[(k, v) for k, v in tdoc.get("assignments", [])])
    return g


# --------------------------------------------------------------------------
# Journals
# --------------------------------------------------------------------------

def journal_doc(entries: list[dict], final_hash: Optional[str] = None,
                initial_hash: Optional[str] = None) -> dict:
    doc = {"format": FORMAT_JOURNAL, "version": SCHEMA_VERSION,
           "entries": entries}
    if initial_hash is not None:
        doc["initial_hash"] = initial_hash
    if final_hash is not None:
        doc["final_hash"] = final_hash
    return doc


def load_journal(doc: Union[dict, str, bytes]) -> dict:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    _check_keys(doc, {"format", "version", "entries", "final_hash",
                      "initial_hash"}, {"format", "version", "entries"}, "")
    if doc["format"] != FORMAT_JOURNAL:
        raise SchemaError("/format", f"expected {FORMAT_JOURNAL!r}")
    for i, entry in enumerate(doc["entries"]):
        _check_keys(entry, {"transformation", "state", "anchors", "expr_index",
                            "params", "meta"}, {"transformation", "anchors"},
                    f"/entries/{i}")
    return doc


# --------------------------------------------------------------------------
# Tensor files for interpreter I/O
# --------------------------------------------------------------------------

def tensors_to_json(arrays: dict[str, np.ndarray],
                    symbols: dict[str, int]) -> dict:
    return {
        "arrays": {name: np.asarray(arr).tolist() for name, arr in arrays.items()},
        "symbols": {name: int(v) for name, v in symbols.items()},
    }


def tensors_from_json(doc: Union[dict, str, bytes]) -> tuple[dict, dict]:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    _check_keys(doc, {"arrays", "symbols"}, set(), "")
    arrays = {name: np.asarray(v) for name, v in doc.get("arrays", {}).items()}
    symbols = {name: int(v) for name, v in doc.get("symbols", {}).items()}
    return arrays, symbols
