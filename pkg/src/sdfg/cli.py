"""Command-line surface: validate, propagate, run, match, apply, strict,
codegen, replay, serve, fixtures.

Every command is a thin wrapper over the library; exit codes are 0 (ok),
1 (validation failure), 2 (usage), 3 (runtime error).  ``--format json``
switches diagnostics, reports, and errors to machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import codegen as cg
from . import gallery
from .interpreter import run as interpret
from .propagation import propagate_memlets
from .rewriting import (
    Match,
    StaleMatchError,
    apply_strict,
    apply_transformation,
    find_matches,
    get_transformation,
    registry,
    replay_journal,
)
from .serialization import (
    from_json,
    graph_hash,
    journal_doc,
    load_journal,
    tensors_from_json,
    to_json,
    to_json_bytes,
)
from .validation import validate_sdfg

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class CliError(RuntimeError):
    def __init__(self, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.code = code


def _load_graph(path: str):
    try:
        with open(path) as f:
            return from_json(f.read())
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_USAGE)
    except Exception as exc:
        raise CliError(f"cannot load graph from {path}: {exc}")


def _write_graph(sdfg, path: str) -> None:
    with open(path, "wb") as f:
        f.write(to_json_bytes(sdfg))


def _emit(payload, args, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"--param expects key=value, got {pair!r}", EXIT_USAGE)
        key, value = pair.split("=", 1)
        try:
            out[key] = int(value)
        except ValueError:
            out[key] = value
    return out


def _match_identifier(m: Match, index: int, sdfg) -> str:
    return f"{m.transformation}#{index}@{m.anchor_digest(sdfg)}"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_validate(args) -> int:
    sdfg = _load_graph(args.graph)
    diags = validate_sdfg(sdfg)
    payload = {"diagnostics": [d.to_json() for d in diags]}
    text = "\n".join(str(d) for d in diags) or "ok: no diagnostics"
    _emit(payload, args, text)
    return EXIT_VALIDATION if any(d.severity == "error" for d in diags) else EXIT_OK


def cmd_propagate(args) -> int:
    sdfg = _load_graph(args.graph)
    warnings = propagate_memlets(sdfg)
    if args.out:
        _write_graph(sdfg, args.out)
    payload = {"warnings": [{"state": w.state, "edge": w.edge,
                             "message": w.message} for w in warnings]}
    lines = [f"warning: {w.state}/e{w.edge}: {w.message}" for w in warnings]
    _emit(payload, args, "\n".join(lines) or "propagated: no warnings")
    return EXIT_OK


def cmd_run(args) -> int:
    sdfg = _load_graph(args.graph)
    arrays, symbols = {}, {}
    if args.input:
        with open(args.input) as f:
            arrays, symbols = tensors_from_json(f.read())
    report = interpret(sdfg, arrays, symbols, schedule_seed=args.seed)
    payload = report.to_json()
    _emit(payload, args, json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_matches(args) -> int:
    sdfg = _load_graph(args.graph)
    matches = find_matches(sdfg, args.name)
    payload = {"matches": []}
    lines = []
    for i, m in enumerate(matches):
        ident = _match_identifier(m, i, sdfg)
        payload["matches"].append({"id": ident, "index": i,
                                   **m.to_json(sdfg)})
        lines.append(f"[{i}] {ident}: {m.describe(sdfg)}")
    _emit(payload, args, "\n".join(lines) or "no applicable matches")
    return EXIT_OK


def cmd_apply(args) -> int:
    sdfg = _load_graph(args.graph)
    matches = find_matches(sdfg, args.name)
    if not 0 <= args.match_index < len(matches):
        raise CliError(
            f"stale match: {args.name} has {len(matches)} match(es) on this "
            f"graph, index {args.match_index} does not exist")
    match = matches[args.match_index]
    if args.anchor and not match.anchor_digest(sdfg).startswith(args.anchor):
        raise CliError(
            f"stale match: anchor digest {match.anchor_digest(sdfg)} does not "
            f"match expected {args.anchor}")
    try:
        new_sdfg, entry = apply_transformation(sdfg, match,
                                               _parse_params(args.param))
    except StaleMatchError as exc:
        raise CliError(f"stale match: {exc}")
    _write_graph(new_sdfg, args.out)
    _append_journal(args.journal or args.out + ".journal.json",
                    [entry], new_sdfg)
    _emit({"applied": entry, "out": args.out, "hash": graph_hash(new_sdfg)},
          args, f"applied {args.name} -> {args.out}")
    return EXIT_OK


def cmd_strict(args) -> int:
    sdfg = _load_graph(args.graph)
    new_sdfg, entries = apply_strict(sdfg)
    _write_graph(new_sdfg, args.out)
    if entries:
        _append_journal(args.journal or args.out + ".journal.json",
                        entries, new_sdfg)
    _emit({"applied": entries, "out": args.out, "hash": graph_hash(new_sdfg)},
          args, f"applied {len(entries)} strict transformation(s) -> {args.out}")
    return EXIT_OK


def _append_journal(path: str, entries: list, final_sdfg) -> None:
    existing: list = []
    initial = None
    if os.path.exists(path):
        with open(path) as f:
            doc = load_journal(f.read())
        existing = doc["entries"]
        initial = doc.get("initial_hash")
    doc = journal_doc(existing + entries, final_hash=graph_hash(final_sdfg),
                      initial_hash=initial)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_replay(args) -> int:
    sdfg = _load_graph(args.graph)
    with open(args.journal) as f:
        doc = load_journal(f.read())
    result = replay_journal(sdfg, doc["entries"])
    final = graph_hash(result)
    recorded = doc.get("final_hash")
    if args.out:
        _write_graph(result, args.out)
    ok = recorded is None or recorded == final
    _emit({"hash": final, "recorded": recorded, "match": ok}, args,
          f"replayed {len(doc['entries'])} entries; hash "
          f"{'matches' if ok else 'DIFFERS from'} the recorded one")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_codegen(args) -> int:
    sdfg = _load_graph(args.graph)
    code = cg.generate(sdfg)
    os.makedirs(args.out, exist_ok=True)
    src_path = os.path.join(args.out, f"{code.name}.c")
    with open(src_path, "w") as f:
        f.write(code.source)
    build = os.path.join(args.out, "build.sh")
    with open(build, "w") as f:
        f.write("#!/bin/sh\nset -e\n"
                f"${{SDFG_CC:-cc}} -shared -fPIC -O2 {code.name}.c "
                f"-o lib{code.name}.so -lm\n")
    os.chmod(build, 0o755)
    compiled = None
    if args.compile:
        if cg.find_compiler() is None:
            print("warning: no C compiler found; emitted source only",
                  file=sys.stderr)
        else:
            cg.invoke_toolchain(code, workdir=args.out)
            compiled = os.path.join(args.out, f"lib{code.name}.so")
    _emit({"source": src_path, "build_script": build, "compiled": compiled,
           "signature": code.signature()}, args,
          f"wrote {src_path} ({code.signature()})")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    sdfg = _load_graph(args.graph) if args.graph else None
    serve(sdfg, host=args.host, port=args.port, ui_dir=args.ui)
    return EXIT_OK


def cmd_fixtures(args) -> int:
    names = gallery.fixture_names()
    if args.emit:
        os.makedirs(args.emit, exist_ok=True)
        written = []
        for name in names:
            path = os.path.join(args.emit, f"{name}.sdfg.json")
            _write_graph(gallery.fixture(name).sdfg, path)
            written.append(path)
        _emit({"written": written}, args, "\n".join(written))
    else:
        _emit({"fixtures": names}, args, "\n".join(names))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdfg",
        description="Build, validate, interpret, transform, and compile "
                    "stateful dataflow graphs.")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a graph for well-formedness")
    p.add_argument("graph")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("propagate", help="annotate scope-boundary memlets")
    p.add_argument("graph")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_propagate)

    p = sub.add_parser("run", help="execute a graph on inputs")
    p.add_argument("graph")
    p.add_argument("--input", help="JSON tensor file with arrays and symbols")
    p.add_argument("--seed", type=int, default=None,
                   help="permute the execution schedule")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("matches", help="list applicable transformations")
    p.add_argument("graph")
    p.add_argument("--name", help="restrict to one transformation")
    p.set_defaults(fn=cmd_matches)

    p = sub.add_parser("apply", help="apply one transformation match")
    p.add_argument("graph")
    p.add_argument("--name", required=True)
    p.add_argument("--match-index", type=int, default=0)
    p.add_argument("--anchor", help="expected anchor digest (stale detection)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.add_argument("--journal", help="journal path (default: <out>.journal.json)")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("strict", help="apply strict transformations to fixpoint")
    p.add_argument("graph")
    p.add_argument("--out", required=True)
    p.add_argument("--journal")
    p.set_defaults(fn=cmd_strict)

    p = sub.add_parser("codegen", help="generate C source (CPU)")
    p.add_argument("graph")
    p.add_argument("--out", required=True)
    p.add_argument("--compile", action="store_true",
                   help="also build a shared library if a compiler exists")
    p.set_defaults(fn=cmd_codegen)

    p = sub.add_parser("replay", help="re-apply a journal and verify its hash")
    p.add_argument("graph")
    p.add_argument("journal")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="start the interactive workbench service")
    p.add_argument("graph", nargs="?")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", help="directory of built workbench assets to serve")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("fixtures", help="list or export the example gallery")
    p.add_argument("--emit", metavar="DIR")
    p.set_defaults(fn=cmd_fixtures)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        if args.format == "json":
            print(json.dumps({"error": str(exc)}))
        else:
            print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # runtime failures stay machine-readable
        if args.format == "json":
            print(json.dumps({"error": str(exc)}))
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
