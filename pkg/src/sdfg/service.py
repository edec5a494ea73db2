"""HTTP API backing the interactive workbench.

One session, one graph, one linear history of immutable snapshots.  Reads
serve the current snapshot concurrently; mutations (apply, undo, attribute
edits, graph loads) are serialized under a lock and carry a monotonically
increasing version number — a mutation sent against a stale version is
rejected with 409.  Applying after an undo discards the undone tail.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import numpy as np

from .interpreter import run as interpret
from .ir import AccessNode, ConsumeEntry, MapEntry, Sdfg, Tasklet
from .rewriting import (
    StaleMatchError,
    apply_transformation,
    find_matches,
    registry,
)
from .serialization import (
    from_json,
    graph_hash,
    journal_doc,
    tensors_from_json,
    to_json,
)
from .symbolic import parse_expr, parse_range
from .tasklets import parse_tasklet
from .validation import validate_sdfg

OUTPUT_VALUE_CAP = 4096


class ServiceError(Exception):
    def __init__(self, status: int, message: str, extra: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.payload = {"error": message, **(extra or {})}


@dataclass
class Snapshot:
    sdfg: Sdfg
    hash: str
    entry: Optional[dict] = None  # journal entry that produced this snapshot


@dataclass
class Session:
    snapshots: list[Snapshot] = field(default_factory=list)
    current: int = -1
    version: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def load(self, sdfg: Sdfg) -> None:
        with self.lock:
            self.snapshots = [Snapshot(sdfg, graph_hash(sdfg))]
            self.current = 0
            self.version += 1

    @property
    def sdfg(self) -> Sdfg:
        if self.current < 0:
            raise ServiceError(409, "no graph loaded; POST /api/graph first")
        return self.snapshots[self.current].sdfg

    def check_version(self, payload: dict) -> None:
        asked = payload.get("version")
        if asked is not None and int(asked) != self.version:
            raise ServiceError(409, f"stale version {asked}; the session is "
                                    f"at version {self.version}")

    def push(self, sdfg: Sdfg, entry: Optional[dict]) -> None:
        self.snapshots = self.snapshots[:self.current + 1]
        self.snapshots.append(Snapshot(sdfg, graph_hash(sdfg), entry))
        self.current += 1
        self.version += 1

    def undo(self) -> None:
        if self.current <= 0:
            raise ServiceError(409, "nothing to undo")
        self.current -= 1
        self.version += 1

    def journal_entries(self) -> tuple[list[dict], bool]:
        entries = []
        replayable = True
        for snap in self.snapshots[1:self.current + 1]:
            if snap.entry is None or snap.entry.get("transformation") is None:
                replayable = False
                continue
            entries.append(snap.entry)
        return entries, replayable


def _graph_view(sdfg: Sdfg) -> dict:
    states = []
    for state in sdfg.states:
        try:
            tree = state.scope_of()
            parents = {str(k): v for k, v in tree.parent.items()}
            exits = {str(k): v for k, v in tree.exits.items()}
        except Exception:
            parents, exits = {}, {}
        nodes = []
        for node_id in state.node_ids():
            node = state.nodes[node_id]
            nodes.append({
                "id": node_id,
                "kind": type(node).__name__,
                "label": node.label(),
                "scope": parents.get(str(node_id)),
            })
        edges = [{
            "id": e.id, "src": e.src, "src_conn": e.src_conn,
            "dst": e.dst, "dst_conn": e.dst_conn,
            "label": e.memlet.summary(),
        } for e in sorted(state.edges, key=lambda e: e.id)]
        states.append({"name": state.name, "nodes": nodes, "edges": edges,
                       "scope_exits": exits})
    return {
        "name": sdfg.name,
        "states": states,
        "start_state": sdfg.start_state,
        "transitions": [{"src": t.src, "dst": t.dst, "label": t.label()}
                        for t in sdfg.transitions],
        "containers": [{
            "name": d.name, "dims": [str(x) for x in d.dims],
            "basetype": d.basetype, "transient": d.transient, "kind": d.kind,
        } for d in sdfg.data.values()],
        "symbols": list(sdfg.symbols),
    }


def _match_list(sdfg: Sdfg) -> list[dict]:
    out = []
    matches = find_matches(sdfg)
    for i, m in enumerate(matches):
        t = registry[m.transformation]
        out.append({
            "id": f"{m.transformation}#{i}@{m.anchor_digest(sdfg)}",
            "index": i,
            "transformation": m.transformation,
            "state": m.state,
            "anchors": dict(sorted(m.nodes.items())),
            "digest": m.anchor_digest(sdfg),
            "params": dict(t.default_params),
            "description": (t.__doc__ or "").strip().split("\n")[0],
        })
    return out


def _find_match(sdfg: Sdfg, payload: dict):
    matches = find_matches(sdfg, payload.get("name") or None)
    match_id = payload.get("match_id")
    if match_id:
        for i, m in enumerate(matches):
            ident = f"{m.transformation}#{_global_index(sdfg, m)}@{m.anchor_digest(sdfg)}"
            if match_id == ident or match_id.split("@")[-1] == m.anchor_digest(sdfg):
                return m
        raise ServiceError(409, f"stale match id {match_id!r}: no such match "
                                f"on the current graph")
    index = int(payload.get("index", 0))
    if not 0 <= index < len(matches):
        raise ServiceError(409, f"stale match: index {index} out of range "
                                f"({len(matches)} matches)")
    return matches[index]


def _global_index(sdfg: Sdfg, match) -> int:
    for i, m in enumerate(find_matches(sdfg)):
        if m.transformation == match.transformation and m.nodes == match.nodes \
                and m.state == match.state:
            return i
    return -1


def _edit_attribute(sdfg: Sdfg, payload: dict) -> Sdfg:
    state = sdfg.state(payload.get("state", ""))
    if state is None:
        raise ServiceError(422, f"unknown state {payload.get('state')!r}")
    target = payload.get("id")
    attribute = payload.get("attribute")
    value = payload.get("value")
    if isinstance(target, str) and target.startswith("e"):
        edge = next((e for e in state.edges if e.id == int(target[1:])), None)
        if edge is None:
            raise ServiceError(422, f"unknown edge {target!r}")
        from .symbolic import parse_subset
        if attribute == "subset":
            edge.memlet.subset = parse_subset(value)
        elif attribute == "accesses":
            edge.memlet.accesses = parse_expr(value) if value else None
        else:
            raise ServiceError(422, f"unsupported edge attribute {attribute!r}")
        return sdfg
    node = state.nodes.get(int(target)) if target is not None else None
    if node is None:
        raise ServiceError(422, f"unknown node {target!r}")
    if isinstance(node, MapEntry) and attribute == "ranges":
        ranges = value if isinstance(value, list) else [value]
        if len(ranges) != len(node.params):
            raise ServiceError(422, "one range per map parameter")
        node.ranges = [parse_range(r) for r in ranges]
    elif isinstance(node, MapEntry) and attribute == "schedule":
        node.schedule = value
    elif isinstance(node, ConsumeEntry) and attribute == "condition":
        node.condition = parse_expr(value)
    elif isinstance(node, Tasklet) and attribute == "code":
        node.program = parse_tasklet(value, node.program.inputs,
                                     node.program.outputs)
    elif isinstance(node, AccessNode) and attribute == "data":
        if value not in sdfg.data:
            raise ServiceError(422, f"unknown container {value!r}")
        node.data = value
    else:
        raise ServiceError(
            422, f"unsupported attribute {attribute!r} for "
                 f"{type(node).__name__}")
    return sdfg


class WorkbenchHandler(BaseHTTPRequestHandler):
    session: Session = None  # set by serve()/make_server()
    ui_dir: Optional[str] = None

    # -- plumbing --------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            raise ServiceError(400, f"invalid JSON body: {exc}")

    def _serve_static(self, path: str) -> None:
        rel = path.lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not full.startswith(os.path.abspath(self.ui_dir)) \
                or not os.path.isfile(full):
            self._send(404, {"error": f"not found: {path}"})
            return
        ctype = {"html": "text/html", "js": "text/javascript",
                 "css": "text/css", "map": "application/json",
                 "svg": "image/svg+xml"}.get(full.rsplit(".", 1)[-1],
                                             "application/octet-stream")
        with open(full, "rb") as f:
            body = f.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # -- routing ---------------------------------------------------------

    def do_GET(self):
        try:
            session = self.session
            if self.path == "/api/graph":
                sdfg = session.sdfg
                self._send(200, {"version": session.version,
                                 "hash": session.snapshots[session.current].hash,
                                 "view": _graph_view(sdfg),
                                 "document": to_json(sdfg)})
            elif self.path == "/api/matches":
                self._send(200, {"version": session.version,
                                 "matches": _match_list(session.sdfg)})
            elif self.path == "/api/validate":
                diags = validate_sdfg(session.sdfg)
                self._send(200, {"version": session.version,
                                 "diagnostics": [d.to_json() for d in diags]})
            elif self.path == "/api/history":
                entries = [{
                    "position": i,
                    "hash": snap.hash,
                    "transformation": (snap.entry or {}).get("transformation"),
                    "nodes": sum(len(s.nodes) for s in snap.sdfg.states),
                    "current": i == session.current,
                } for i, snap in enumerate(session.snapshots)]
                self._send(200, {"version": session.version,
                                 "history": entries,
                                 "current": session.current})
            elif self.path == "/api/gallery":
                from .gallery import fixture_names
                self._send(200, {"fixtures": fixture_names()})
            elif self.path.startswith("/api/gallery/"):
                from .gallery import UnknownFixture, fixture
                name = self.path.rsplit("/", 1)[-1]
                try:
                    self._send(200, to_json(fixture(name).sdfg))
                except UnknownFixture as exc:
                    self._send(404, {"error": str(exc)})
            elif self.path == "/api/journal":
                entries, replayable = session.journal_entries()
                doc = journal_doc(
                    entries,
                    final_hash=session.snapshots[session.current].hash,
                    initial_hash=session.snapshots[0].hash)
                doc["replayable"] = replayable
                self._send(200, doc)
            elif self.ui_dir and (self.path == "/" or not
                                  self.path.startswith("/api/")):
                self._serve_static(self.path)
            else:
                self._send(404, {"error": f"no such endpoint {self.path}"})
        except ServiceError as exc:
            self._send(exc.status, exc.payload)
        except Exception as exc:
            self._send(500, {"error": str(exc)})

    def do_POST(self):
        try:
            session = self.session
            payload = self._body()
            if self.path == "/api/graph":
                sdfg = from_json(payload)
                session.load(sdfg)
                self._send(200, {"version": session.version,
                                 "hash": session.snapshots[0].hash})
            elif self.path == "/api/apply":
                with session.lock:
                    session.check_version(payload)
                    sdfg = session.sdfg
                    match = _find_match(sdfg, payload)
                    try:
                        new_sdfg, entry = apply_transformation(
                            sdfg, match, payload.get("params") or {})
                    except StaleMatchError as exc:
                        raise ServiceError(409, str(exc))
                    session.push(new_sdfg, entry)
                    self._send(200, {"version": session.version,
                                     "hash": session.snapshots[
                                         session.current].hash,
                                     "applied": entry})
            elif self.path == "/api/undo":
                with session.lock:
                    session.check_version(payload)
                    session.undo()
                    self._send(200, {"version": session.version,
                                     "hash": session.snapshots[
                                         session.current].hash})
            elif self.path == "/api/run":
                sdfg = session.sdfg
                arrays, symbols = tensors_from_json(
                    {"arrays": payload.get("inputs", {}),
                     "symbols": payload.get("symbols", {})})
                try:
                    report = interpret(sdfg, arrays, symbols,
                                       schedule_seed=payload.get("seed"))
                except Exception as exc:
                    raise ServiceError(422, f"execution failed: {exc}")
                self._send(200, {"version": session.version,
                                 "report": report.to_json(OUTPUT_VALUE_CAP)})
            elif self.path == "/api/node":
                with session.lock:
                    session.check_version(payload)
                    candidate = session.sdfg.copy()
                    _edit_attribute(candidate, payload)
                    problems = [d.to_json() for d in validate_sdfg(candidate)
                                if d.severity == "error"]
                    if problems:
                        raise ServiceError(
                            422, "edit rejected: the result does not validate",
                            {"diagnostics": problems})
                    session.push(candidate, {"edit": {
                        "state": payload.get("state"),
                        "id": payload.get("id"),
                        "attribute": payload.get("attribute"),
                        "value": payload.get("value"),
                    }})
                    self._send(200, {"version": session.version,
                                     "hash": session.snapshots[
                                         session.current].hash})
            else:
                self._send(404, {"error": f"no such endpoint {self.path}"})
        except ServiceError as exc:
            self._send(exc.status, exc.payload)
        except Exception as exc:
            self._send(500, {"error": str(exc)})


def make_server(sdfg: Optional[Sdfg], host: str = "127.0.0.1", port: int = 0,
                ui_dir: Optional[str] = None) -> ThreadingHTTPServer:
    session = Session()
    if sdfg is not None:
        session.load(sdfg)

    handler = type("BoundHandler", (WorkbenchHandler,),
                   {"session": session,
                    "ui_dir": os.path.abspath(ui_dir) if ui_dir else None})
    return ThreadingHTTPServer((host, port), handler)


def serve(sdfg: Optional[Sdfg], host: str = "127.0.0.1", port: int = 8080,
          ui_dir: Optional[str] = None) -> None:
    server = make_server(sdfg, host, port, ui_dir)
    where = f"http://{host}:{server.server_address[1]}"
    print(f"workbench service listening on {where}", flush=True)
    if ui_dir:
        print(f"serving workbench assets from {ui_dir}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
