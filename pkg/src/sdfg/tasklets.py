"""The mini-language tasklet bodies are written in.

Concrete syntax is a validated Python subset: assignment statements,
``if``/``else`` blocks, and expressions over input connectors and locals
(arithmetic, comparisons, boolean operators, conditional expressions,
``min``/``max``/``abs``, and subscripts on array connectors).  No loops, no
calls beyond the builtins above, no attribute access.

One parsed program serves both the interpreter (:func:`eval_tasklet`) and
the code generator (:func:`emit_c`).  ``//`` and ``%`` follow floor
semantics for negative operands in both.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

ALLOWED_CALLS = ("min", "max", "abs")

_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/",
           ast.FloorDiv: "//", ast.Mod: "%"}
_CMPOPS = {ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">=",
           ast.Eq: "==", ast.NotEq: "!="}


class TaskletError(ValueError):
    def __init__(self, message: str, node: Optional[ast.AST] = None):
        if node is not None and hasattr(node, "lineno"):
            message = f"{message} (line {node.lineno}, col {node.col_offset})"
        super().__init__(message)


class TaskletRuntimeError(RuntimeError):
    pass


class IndexedWrites(list):
    """Value of an output connector written by subscript: (index, value)
    pairs in program order."""


@dataclass
class TaskletProgram:
    source: str
    inputs: list[str]
    outputs: list[str]
    body: list = field(repr=False, default_factory=list)
    assigned_on_all_paths: set[str] = field(default_factory=set)
    array_reads: set[str] = field(default_factory=set)
    array_writes: set[str] = field(default_factory=set)

    @property
    def has_branches(self) -> bool:
        return any(isinstance(s, ast.If) for s in ast.walk(ast.Module(
            body=self.body, type_ignores=[])))

    def __deepcopy__(self, memo):
        return parse_tasklet(self.source, list(self.inputs), list(self.outputs))


# --------------------------------------------------------------------------
# Parsing and validation
# --------------------------------------------------------------------------

class _Validator:
    def __init__(self, inputs: list[str], outputs: list[str]):
        self.inputs = set(inputs)
        self.outputs = set(outputs)
        self.maybe_assigned: set[str] = set()
        self.array_reads: set[str] = set()
        self.array_writes: set[str] = set()

    def block(self, stmts: list[ast.stmt]) -> set[str]:
        """Validate a statement block, returning names assigned on all paths."""
        definite: set[str] = set()
        for stmt in stmts:
            if isinstance(stmt, ast.Assign):
                definite |= self.assign(stmt)
            elif isinstance(stmt, ast.If):
                self.expr(stmt.test)
                then_set = self.block(stmt.body)
                else_set = self.block(stmt.orelse) if stmt.orelse else set()
                definite |= then_set & else_set
            else:
                raise TaskletError(
                    f"unsupported statement {type(stmt).__name__}; tasklets allow "
                    f"assignments and if/else only", stmt)
        return definite

    def assign(self, stmt: ast.Assign) -> set[str]:
        if len(stmt.targets) != 1:
            raise TaskletError("multiple assignment targets are not supported", stmt)
        target = stmt.targets[0]
        self.expr(stmt.value)
        if isinstance(target, ast.Name):
            name = target.id
            if name in self.inputs:
                raise TaskletError(f"cannot assign to input connector '{name}'", stmt)
            if name in self.array_writes:
                raise TaskletError(
                    f"output '{name}' is already written by subscript", stmt)
            self.maybe_assigned.add(name)
            return {name}
        if isinstance(target, ast.Subscript):
            if not isinstance(target.value, ast.Name):
                raise TaskletError("subscript assignment must target a connector", stmt)
            name = target.value.id
            if name not in self.outputs:
                raise TaskletError(
                    f"subscript assignment targets must be output connectors, "
                    f"not '{name}'", stmt)
            if name in self.maybe_assigned:
                raise TaskletError(
                    f"output '{name}' is already written as a scalar", stmt)
            self.expr(target.slice)
            self.array_writes.add(name)
            return set()  # element writes never cover the whole connector
        raise TaskletError("assignment target must be a name or a subscript", stmt)

    def expr(self, node: ast.expr) -> None:
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, bool)):
                raise TaskletError(f"unsupported literal {node.value!r}", node)
            return
        if isinstance(node, ast.Name):
            name = node.id
            if name in self.outputs and name not in self.maybe_assigned:
                raise TaskletError(f"output connector '{name}' is write-only", node)
            if name not in self.inputs and name not in self.maybe_assigned:
                raise TaskletError(f"use of undeclared name '{name}'", node)
            return
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise TaskletError(
                    f"unsupported operator {type(node.op).__name__}", node)
            self.expr(node.left)
            self.expr(node.right)
            return
        if isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.Not, ast.UAdd)):
                raise TaskletError(
                    f"unsupported unary operator {type(node.op).__name__}", node)
            self.expr(node.operand)
            return
        if isinstance(node, ast.BoolOp):
            for v in node.values:
                self.expr(v)
            return
        if isinstance(node, ast.Compare):
            if len(node.ops) != 1:
                raise TaskletError("chained comparisons are not supported", node)
            if type(node.ops[0]) not in _CMPOPS:
                raise TaskletError(
                    f"unsupported comparison {type(node.ops[0]).__name__}", node)
            self.expr(node.left)
            self.expr(node.comparators[0])
            return
        if isinstance(node, ast.IfExp):
            self.expr(node.test)
            self.expr(node.body)
            self.expr(node.orelse)
            return
        if isinstance(node, ast.Subscript):
            if not isinstance(node.value, ast.Name):
                raise TaskletError("subscripts apply to connectors only", node)
            name = node.value.id
            if name not in self.inputs:
                raise TaskletError(
                    f"subscript reads are limited to input connectors, "
                    f"not '{name}'", node)
            self.array_reads.add(name)
            self.expr(node.slice)
            return
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in ALLOWED_CALLS:
                raise TaskletError("only min(), max(), and abs() may be called", node)
            if node.keywords:
                raise TaskletError("keyword arguments are not supported", node)
            for a in node.args:
                self.expr(a)
            return
        raise TaskletError(f"unsupported expression {type(node).__name__}", node)


def parse_tasklet(code: str, inputs: list[str], outputs: list[str]) -> TaskletProgram:
    """Parse and validate tasklet code against its connector sets."""
    dupes = set(inputs) & set(outputs)
    if dupes:
        raise TaskletError(f"connectors cannot be both input and output: {sorted(dupes)}")
    try:
        tree = ast.parse(code)
    except SyntaxError as exc:
        raise TaskletError(f"syntax error: {exc.msg} (line {exc.lineno}, "
                           f"col {exc.offset})") from exc
    validator = _Validator(inputs, outputs)
    definite = validator.block(tree.body)
    return TaskletProgram(
        source=code,
        inputs=list(inputs),
        outputs=list(outputs),
        body=tree.body,
        assigned_on_all_paths={n for n in definite if n in set(outputs)},
        array_reads=validator.array_reads,
        array_writes=validator.array_writes,
    )


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _truthy(value: Any) -> bool:
    if isinstance(value, np.ndarray):
        raise TaskletRuntimeError("branch condition on a vector value")
    return bool(value)


def _eval_expr(node: ast.expr, env: dict) -> Any:
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise TaskletRuntimeError(f"read of unassigned name '{node.id}'")
        return env[node.id]
    if isinstance(node, ast.BinOp):
        lv = _eval_expr(node.left, env)
        rv = _eval_expr(node.right, env)
        op = _BINOPS[type(node.op)]
        try:
            if op == "+":
                return lv + rv
            if op == "-":
                return lv - rv
            if op == "*":
                return lv * rv
            if op == "/":
                return lv / rv
            if op == "//":
                return lv // rv
            return lv % rv
        except ZeroDivisionError as exc:
            raise TaskletRuntimeError("division by zero") from exc
    if isinstance(node, ast.UnaryOp):
        v = _eval_expr(node.operand, env)
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return +v
        return not _truthy(v)
    if isinstance(node, ast.BoolOp):
        if isinstance(node.op, ast.And):
            result = True
            for v in node.values:
                result = _truthy(_eval_expr(v, env))
                if not result:
                    return False
            return result
        for v in node.values:
            if _truthy(_eval_expr(v, env)):
                return True
        return False
    if isinstance(node, ast.Compare):
        lv = _eval_expr(node.left, env)
        rv = _eval_expr(node.comparators[0], env)
        op = _CMPOPS[type(node.ops[0])]
        return {"<": lv < rv, "<=": lv <= rv, ">": lv > rv,
                ">=": lv >= rv, "==": lv == rv, "!=": lv != rv}[op]
    if isinstance(node, ast.IfExp):
        if _truthy(_eval_expr(node.test, env)):
            return _eval_expr(node.body, env)
        return _eval_expr(node.orelse, env)
    if isinstance(node, ast.Subscript):
        base = _eval_expr(node.value, env)
        idx = _eval_expr(node.slice, env)
        try:
            return base[int(idx)]
        except (IndexError, TypeError) as exc:
            raise TaskletRuntimeError(f"bad subscript {idx!r}") from exc
    if isinstance(node, ast.Call):
        args = [_eval_expr(a, env) for a in node.args]
        fn = {"min": min, "max": max, "abs": abs}[node.func.id]
        return fn(*args) if node.func.id != "abs" else fn(args[0])
    raise TaskletRuntimeError(f"unsupported expression {type(node).__name__}")


def _exec_block(stmts: list, env: dict, writes: dict[str, IndexedWrites]) -> None:
    for stmt in stmts:
        if isinstance(stmt, ast.Assign):
            target = stmt.targets[0]
            value = _eval_expr(stmt.value, env)
            if isinstance(target, ast.Name):
                env[target.id] = value
            else:
                name = target.value.id
                idx = int(_eval_expr(target.slice, env))
                writes.setdefault(name, IndexedWrites()).append((idx, value))
        elif isinstance(stmt, ast.If):
            if _truthy(_eval_expr(stmt.test, env)):
                _exec_block(stmt.body, env, writes)
            elif stmt.orelse:
                _exec_block(stmt.orelse, env, writes)


def eval_tasklet(program: TaskletProgram, values: Mapping[str, Any]) -> dict[str, Any]:
    """Execute a tasklet with bound input connectors.

    Returns a value per output connector that was written; outputs fed by
    dynamic memlets may be absent.  Subscript-written outputs map to
    :class:`IndexedWrites`.
    """
    missing = [c for c in program.inputs if c not in values]
    if missing:
        raise TaskletRuntimeError(f"unbound input connectors: {missing}")
    env = {k: values[k] for k in program.inputs}
    writes: dict[str, IndexedWrites] = {}
    _exec_block(program.body, env, writes)
    out: dict[str, Any] = {}
    for name in program.outputs:
        if name in writes:
            out[name] = writes[name]
        elif name in env:
            out[name] = env[name]
    return out


# --------------------------------------------------------------------------
# C emission
# --------------------------------------------------------------------------

_C_TYPES = {"int64": "int64_t", "float64": "double"}

C_HELPERS = """\
static inline int64_t sdfg_fdiv(int64_t a, int64_t b) {
    int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}
static inline int64_t sdfg_fmod(int64_t a, int64_t b) {
    int64_t r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? r + b : r;
}
static inline int64_t sdfg_imin(int64_t a, int64_t b) { return a < b ? a : b; }
static inline int64_t sdfg_imax(int64_t a, int64_t b) { return a > b ? a : b; }
"""


class CodeEmissionError(ValueError):
    pass


class _CEmitter:
    def __init__(self, program: TaskletProgram, types: Mapping[str, str],
                 rename: Optional[Mapping[str, str]] = None):
        self.program = program
        self.types = dict(types)
        self.rename = dict(rename or {})
        self.local_types: dict[str, str] = {}
        self._infer_locals(program.body)

    # type inference ---------------------------------------------------

    def type_of(self, node: ast.expr) -> str:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or isinstance(node.value, int):
                return "int64"
            return "float64"
        if isinstance(node, ast.Name):
            if node.id in self.types:
                return self.types[node.id]
            if node.id in self.local_types:
                return self.local_types[node.id]
            raise CodeEmissionError(f"unknown type for '{node.id}'")
        if isinstance(node, ast.BinOp):
            lt, rt = self.type_of(node.left), self.type_of(node.right)
            if isinstance(node.op, ast.Div):
                return "float64"
            return "float64" if "float64" in (lt, rt) else "int64"
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.Not):
                return "int64"
            return self.type_of(node.operand)
        if isinstance(node, (ast.BoolOp, ast.Compare)):
            return "int64"
        if isinstance(node, ast.IfExp):
            a, b = self.type_of(node.body), self.type_of(node.orelse)
            return "float64" if "float64" in (a, b) else "int64"
        if isinstance(node, ast.Subscript):
            return self.type_of(node.value)
        if isinstance(node, ast.Call):
            if node.func.id == "abs":
                return self.type_of(node.args[0])
            ts = [self.type_of(a) for a in node.args]
            return "float64" if "float64" in ts else "int64"
        raise CodeEmissionError(f"cannot type {type(node).__name__}")

    def _infer_locals(self, stmts: list) -> None:
        connectors = set(self.program.inputs) | set(self.program.outputs)
        for stmt in stmts:
            if isinstance(stmt, ast.Assign) and isinstance(stmt.targets[0], ast.Name):
                name = stmt.targets[0].id
                if name in connectors:
                    continue
                t = self.type_of(stmt.value)
                prev = self.local_types.get(name)
                self.local_types[name] = ("float64" if prev == "float64" or t == "float64"
                                          else t) if prev else t
            elif isinstance(stmt, ast.If):
                self._infer_locals(stmt.body)
                self._infer_locals(stmt.orelse)

    # expression emission ------------------------------------------------

    def expr(self, node: ast.expr) -> str:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool):
                return "1" if node.value else "0"
            if isinstance(node.value, float):
                return repr(node.value)
            return str(node.value)
        if isinstance(node, ast.Name):
            return self.rename.get(node.id, node.id)
        if isinstance(node, ast.BinOp):
            op = _BINOPS[type(node.op)]
            left, right = self.expr(node.left), self.expr(node.right)
            lt, rt = self.type_of(node.left), self.type_of(node.right)
            if op == "/":
                return f"((double)({left}) / (double)({right}))"
            if op == "//":
                if "float64" in (lt, rt):
                    return f"floor((double)({left}) / (double)({right}))"
                return f"sdfg_fdiv({left}, {right})"
            if op == "%":
                if "float64" in (lt, rt):
                    raise CodeEmissionError("float modulo is not supported in generated code")
                return f"sdfg_fmod({left}, {right})"
            return f"({left} {op} {right})"
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return f"(-{self.expr(node.operand)})"
            if isinstance(node.op, ast.UAdd):
                return self.expr(node.operand)
            return f"(!({self.expr(node.operand)}))"
        if isinstance(node, ast.BoolOp):
            op = " && " if isinstance(node.op, ast.And) else " || "
            return "(" + op.join(self.expr(v) for v in node.values) + ")"
        if isinstance(node, ast.Compare):
            op = _CMPOPS[type(node.ops[0])]
            return f"({self.expr(node.left)} {op} {self.expr(node.comparators[0])})"
        if isinstance(node, ast.IfExp):
            return (f"({self.expr(node.test)} ? {self.expr(node.body)} : "
                    f"{self.expr(node.orelse)})")
        if isinstance(node, ast.Subscript):
            return f"{self.expr(node.value)}[{self.expr(node.slice)}]"
        if isinstance(node, ast.Call):
            args = [self.expr(a) for a in node.args]
            if node.func.id == "abs":
                fn = "fabs" if self.type_of(node.args[0]) == "float64" else "llabs"
                return f"{fn}({args[0]})"
            ts = [self.type_of(a) for a in node.args]
            if "float64" in ts:
                fn = "fmin" if node.func.id == "min" else "fmax"
            else:
                fn = "sdfg_imin" if node.func.id == "min" else "sdfg_imax"
            out = args[0]
            for a in args[1:]:
                out = f"{fn}({out}, {a})"
            return out
        raise CodeEmissionError(f"cannot emit {type(node).__name__}")

    def stmt(self, node, indent: str, lines: list[str]) -> None:
        if isinstance(node, ast.Assign):
            target = node.targets[0]
            value = self.expr(node.value)
            if isinstance(target, ast.Name):
                name = self.rename.get(target.id, target.id)
                tt = (self.types.get(target.id) or self.local_types.get(target.id))
                if tt == "int64" and self.type_of(node.value) == "float64":
                    value = f"(int64_t)({value})"
                lines.append(f"{indent}{name} = {value};")
            else:
                base = self.rename.get(target.value.id, target.value.id)
                lines.append(f"{indent}{base}[{self.expr(target.slice)}] = {value};")
            return
        if isinstance(node, ast.If):
            lines.append(f"{indent}if ({self.expr(node.test)}) {{")
            for s in node.body:
                self.stmt(s, indent + "    ", lines)
            if node.orelse:
                lines.append(f"{indent}}} else {{")
                for s in node.orelse:
                    self.stmt(s, indent + "    ", lines)
            lines.append(f"{indent}}}")

    def emit(self, indent: str = "") -> str:
        lines: list[str] = []
        for name, t in sorted(self.local_types.items()):
            lines.append(f"{indent}{_C_TYPES[t]} {self.rename.get(name, name)};")
        for stmt in self.program.body:
            self.stmt(stmt, indent, lines)
        return "\n".join(lines)


def emit_c(program: TaskletProgram, types: Mapping[str, str],
           rename: Optional[Mapping[str, str]] = None, indent: str = "") -> str:
    """Translate a tasklet body to C statements.

    ``types`` assigns a basetype to every connector; ``rename`` substitutes
    connector names with C lvalue expressions.  Requires the helper block
    :data:`C_HELPERS` in the translation unit.
    """
    return _CEmitter(program, types, rename).emit(indent)
