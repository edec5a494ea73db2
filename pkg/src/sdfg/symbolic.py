"""Symbolic integer expressions, ranges, and subsets.

Expressions are trees over integer (and, for conditions, float) literals,
symbols, arithmetic (+, -, *, //, %), ``min``/``max``, comparisons and
boolean connectives.  Ranges are inclusive ``begin:end:stride:tilesize``
quadruples; a subset is one range per data dimension.  The algebra kept
here (union, image under a scope parameter, access counting) is the basis
for memlet propagation and data-movement accounting.

Hulls are allowed to over-approximate; they are never allowed to drop a
point covered by an operand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Optional, Sequence, Union

Number = Union[int, float]


class SymbolicError(ValueError):
    """Base error for expression parsing and evaluation."""


class ParseError(SymbolicError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.pos = pos


class UnboundSymbolError(SymbolicError):
    def __init__(self, name: str):
        super().__init__(f"unbound symbol '{name}'")
        self.name = name


# --------------------------------------------------------------------------
# Expression nodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    def __str__(self) -> str:
        return expr_to_str(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Number


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Bin(Expr):
    op: str  # + - * / // %
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str  # min max size
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Cmp(Expr):
    op: str  # < <= > >= == !=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str  # and or
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


ZERO = Num(0)
ONE = Num(1)


# --------------------------------------------------------------------------
# Parsing (precedence-climbing)
# --------------------------------------------------------------------------

_TWO_CHAR = ("//", "<=", ">=", "==", "!=")
_ONE_CHAR = "+-*/%(),<>"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text[i:i + 2] in _TWO_CHAR:
            tokens.append(("op", text[i:i + 2], i))
            i += 2
        elif c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            tokens.append(("num", text[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in ("and", "or", "not", "min", "max", "size") else "name"
            tokens.append((kind, word, i))
            i = j
        elif c in _ONE_CHAR:
            tokens.append(("op", c, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r}", text, i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, at = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}",
                             self.text, at)

    def parse(self) -> Expr:
        e = self.or_expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing {val!r}", self.text, at)
        return e

    def or_expr(self) -> Expr:
        parts = [self.and_expr()]
        while self.peek()[1] == "or":
            self.next()
            parts.append(self.and_expr())
        return BoolOp("or", tuple(parts)) if len(parts) > 1 else parts[0]

    def and_expr(self) -> Expr:
        parts = [self.not_expr()]
        while self.peek()[1] == "and":
            self.next()
            parts.append(self.not_expr())
        return BoolOp("and", tuple(parts)) if len(parts) > 1 else parts[0]

    def not_expr(self) -> Expr:
        if self.peek()[1] == "not":
            self.next()
            return Not(self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        kind, val, at = self.peek()
        if val in ("<", "<=", ">", ">=", "==", "!="):
            self.next()
            right = self.add_expr()
            nxt = self.peek()
            if nxt[1] in ("<", "<=", ">", ">=", "==", "!="):
                raise ParseError("chained comparisons are not supported", self.text, nxt[2])
            return Cmp(val, left, right)
        return left

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            e = Bin(op, e, self.mul_expr())
        return e

    def mul_expr(self) -> Expr:
        e = self.unary_expr()
        while self.peek()[1] in ("*", "/", "//", "%"):
            op = self.next()[1]
            e = Bin(op, e, self.unary_expr())
        return e

    def unary_expr(self) -> Expr:
        if self.peek()[1] == "-":
            self.next()
            arg = self.unary_expr()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Bin("-", ZERO, arg)
        return self.atom()

    def atom(self) -> Expr:
        kind, val, at = self.next()
        if kind == "num":
            if "." in val:
                return Num(float(val))
            return Num(int(val))
        if kind == "name":
            return Sym(val)
        if kind == "kw" and val in ("min", "max", "size"):
            self.expect("(")
            args = [self.or_expr()]
            while self.peek()[1] == ",":
                self.next()
                args.append(self.or_expr())
            self.expect(")")
            if val == "size" and len(args) != 1:
                raise ParseError("size() takes one argument", self.text, at)
            if val in ("min", "max") and len(args) < 2:
                raise ParseError(f"{val}() takes at least two arguments", self.text, at)
            return Call(val, tuple(args))
        if val == "(":
            e = self.or_expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {val or 'end of input'!r}", self.text, at)


def parse_expr(text: str) -> Expr:
    """Parse an arithmetic/boolean expression over integers and identifiers."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "+": 5, "-": 5,
         "*": 6, "/": 6, "//": 6, "%": 6, "atom": 9}


def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _PREC[e.op]
    if isinstance(e, Cmp):
        return _PREC["cmp"]
    if isinstance(e, BoolOp):
        return _PREC[e.op]
    if isinstance(e, Not):
        return _PREC["not"]
    return _PREC["atom"]


def _wrap(e: Expr, parent_prec: int, right_side: bool = False) -> str:
    p = _prec(e)
    s = expr_to_str(e)
    if p < parent_prec or (right_side and p == parent_prec):
        return f"({s})"
    return s


def expr_to_str(e: Expr) -> str:
    if isinstance(e, Num):
        if isinstance(e.value, float):
            return repr(e.value)
        return str(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Bin):
        if e.op == "-" and e.left == ZERO:
            return f"-{_wrap(e.right, _PREC['*'])}"
        return f"{_wrap(e.left, _PREC[e.op])} {e.op} {_wrap(e.right, _PREC[e.op], True)}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(expr_to_str(a) for a in e.args)})"
    if isinstance(e, Cmp):
        return f"{_wrap(e.left, _PREC['cmp'])} {e.op} {_wrap(e.right, _PREC['cmp'])}"
    if isinstance(e, BoolOp):
        return f" {e.op} ".join(_wrap(a, _PREC[e.op]) for a in e.args)
    if isinstance(e, Not):
        return f"not {_wrap(e.arg, _PREC['not'])}"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def eval_expr(e: Expr, syms: Mapping[str, Number],
              size_of: Optional[Callable[[str], int]] = None) -> Number:
    """Evaluate ``e`` under a complete symbol assignment.

    ``size_of`` resolves ``size(name)`` atoms (stream occupancy) when
    conditions are evaluated by the interpreter.  Floor-division and
    modulo follow floor semantics for negative operands.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        if e.name not in syms:
            raise UnboundSymbolError(e.name)
        return syms[e.name]
    if isinstance(e, Bin):
        lv = eval_expr(e.left, syms, size_of)
        rv = eval_expr(e.right, syms, size_of)
        if e.op == "+":
            return lv + rv
        if e.op == "-":
            return lv - rv
        if e.op == "*":
            return lv * rv
        if e.op == "/":
            if rv == 0:
                raise SymbolicError(f"division by zero in '{e}'")
            return lv / rv
        if e.op == "//":
            if rv == 0:
                raise SymbolicError(f"division by zero in '{e}'")
            return lv // rv
        if e.op == "%":
            if rv == 0:
                raise SymbolicError(f"modulo by zero in '{e}'")
            return lv % rv
    if isinstance(e, Call):
        if e.fn == "min":
            return min(eval_expr(a, syms, size_of) for a in e.args)
        if e.fn == "max":
            return max(eval_expr(a, syms, size_of) for a in e.args)
        if e.fn == "size":
            if size_of is None:
                raise SymbolicError("size() is only available in runtime conditions")
            if not isinstance(e.args[0], Sym):
                raise SymbolicError("size() expects a container name")
            return size_of(e.args[0].name)
    if isinstance(e, Cmp):
        lv = eval_expr(e.left, syms, size_of)
        rv = eval_expr(e.right, syms, size_of)
        return {"<": lv < rv, "<=": lv <= rv, ">": lv > rv,
                ">=": lv >= rv, "==": lv == rv, "!=": lv != rv}[e.op]
    if isinstance(e, BoolOp):
        vals = (bool(eval_expr(a, syms, size_of)) for a in e.args)
        return all(vals) if e.op == "and" else any(vals)
    if isinstance(e, Not):
        return not bool(eval_expr(e.arg, syms, size_of))
    raise TypeError(f"not an expression: {e!r}")


def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Bin):
        return free_symbols(e.left) | free_symbols(e.right)
    if isinstance(e, Call):
        if e.fn == "size":
            return set()  # container name, not a symbol
        return set().union(*(free_symbols(a) for a in e.args))
    if isinstance(e, Cmp):
        return free_symbols(e.left) | free_symbols(e.right)
    if isinstance(e, BoolOp):
        return set().union(*(free_symbols(a) for a in e.args))
    if isinstance(e, Not):
        return free_symbols(e.arg)
    return set()


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Sym):
        return mapping.get(e.name, e)
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        if e.fn == "size":
            return e
        return Call(e.fn, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Cmp):
        return Cmp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, BoolOp):
        return BoolOp(e.op, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Not):
        return Not(substitute(e.arg, mapping))
    return e


# --------------------------------------------------------------------------
# Simplification
# --------------------------------------------------------------------------

def _as_terms(e: Expr) -> tuple[Number, dict[str, tuple[Number, Expr]]]:
    """Flatten an additive spine into (constant, {key: (coefficient, term)})."""
    if isinstance(e, Num):
        return e.value, {}
    if isinstance(e, Bin) and e.op in ("+", "-"):
        lc, lt = _as_terms(e.left)
        rc, rt = _as_terms(e.right)
        sign = 1 if e.op == "+" else -1
        const = lc + sign * rc
        for key, (coeff, term) in rt.items():
            old = lt.get(key)
            lt[key] = (old[0] + sign * coeff if old else sign * coeff, term)
        return const, lt
    coeff, term = _as_factor(e)
    key = expr_to_str(term)
    return 0, {key: (coeff, term)}


def _as_factor(e: Expr) -> tuple[Number, Expr]:
    """Split a term into (constant coefficient, remaining factor)."""
    if isinstance(e, Bin) and e.op == "*":
        if isinstance(e.left, Num):
            c, t = _as_factor(e.right)
            return e.left.value * c, t
        if isinstance(e.right, Num):
            c, t = _as_factor(e.left)
            return e.right.value * c, t
    return 1, e


def _rebuild_sum(const: Number, terms: dict[str, tuple[Number, Expr]]) -> Expr:
    parts: list[tuple[Number, Expr]] = [
        (coeff, term) for _, (coeff, term) in sorted(terms.items()) if coeff != 0
    ]
    if not parts:
        return Num(const)
    expr: Optional[Expr] = None
    for coeff, term in parts:
        piece = term if abs(coeff) == 1 else Bin("*", Num(abs(coeff)), term)
        if expr is None:
            expr = piece if coeff > 0 else Bin("-", ZERO, piece)
        else:
            expr = Bin("+" if coeff > 0 else "-", expr, piece)
    if const != 0:
        expr = Bin("+" if const > 0 else "-", expr, Num(abs(const)))
    return expr


def simplify(e: Expr) -> Expr:
    """Normalize an expression; idempotent by construction."""
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Bin):
        left, right = simplify(e.left), simplify(e.right)
        if e.op in ("+", "-"):
            const, terms = _as_terms(Bin(e.op, left, right))
            return _rebuild_sum(const, terms)
        if e.op == "*":
            if isinstance(left, Num) and isinstance(right, Num):
                return Num(left.value * right.value)
            if left == ZERO or right == ZERO:
                return ZERO
            if left == ONE:
                return right
            if right == ONE:
                return left
            # fold chained constant factors: (c1*x)*c2 -> (c1*c2)*x
            c, t = _as_factor(Bin("*", left, right))
            if c == 0:
                return ZERO
            if c == 1:
                return t
            return Bin("*", Num(c), t)
        if e.op in ("//", "/", "%"):
            if isinstance(left, Num) and isinstance(right, Num) and right.value != 0:
                if e.op == "//":
                    return Num(left.value // right.value)
                if e.op == "%":
                    return Num(left.value % right.value)
                v = left.value / right.value
                return Num(int(v)) if v == int(v) else Num(v)
            if e.op in ("//", "/") and right == ONE:
                return left
            if e.op == "%" and right == ONE:
                return ZERO
            return Bin(e.op, left, right)
        return Bin(e.op, left, right)
    if isinstance(e, Call):
        args = tuple(simplify(a) for a in e.args)
        if e.fn in ("min", "max"):
            flat: list[Expr] = []
            for a in args:
                if isinstance(a, Call) and a.fn == e.fn:
                    flat.extend(a.args)
                else:
                    flat.append(a)
            nums = [a.value for a in flat if isinstance(a, Num)]
            rest = [a for a in flat if not isinstance(a, Num)]
            if nums:
                folded = min(nums) if e.fn == "min" else max(nums)
                rest.append(Num(folded))
            # drop arguments dominated by a constant-offset sibling
            kept: list[Expr] = []
            for a in rest:
                dominated = False
                for i, b in enumerate(kept):
                    diff = simplify(Bin("-", a, b))
                    if isinstance(diff, Num):
                        better = (diff.value >= 0) if e.fn == "min" else (diff.value <= 0)
                        if better:
                            dominated = True
                        else:
                            kept[i] = a
                            dominated = True
                        break
                if not dominated:
                    kept.append(a)
            if len(kept) == 1:
                return kept[0]
            kept.sort(key=expr_to_str)
            return Call(e.fn, tuple(kept))
        return Call(e.fn, args)
    if isinstance(e, Cmp):
        left, right = simplify(e.left), simplify(e.right)
        if isinstance(left, Num) and isinstance(right, Num):
            return Num(int(eval_expr(Cmp(e.op, left, right), {})))
        return Cmp(e.op, left, right)
    if isinstance(e, BoolOp):
        return BoolOp(e.op, tuple(simplify(a) for a in e.args))
    if isinstance(e, Not):
        return Not(simplify(e.arg))
    return e


def linear_split(e: Expr, sym: str) -> Optional[tuple[Expr, Expr]]:
    """Decompose ``e`` as ``coeff * sym + rest`` with ``rest`` free of ``sym``.

    Returns None when the occurrence is not linear (inside //, %, min, max,
    or a product of two sym-dependent factors).
    """
    if sym not in free_symbols(e):
        return ZERO, e
    if isinstance(e, Sym):
        return ONE, ZERO
    if isinstance(e, Bin):
        if e.op in ("+", "-"):
            l = linear_split(e.left, sym)
            r = linear_split(e.right, sym)
            if l is None or r is None:
                return None
            return (simplify(Bin(e.op, l[0], r[0])), simplify(Bin(e.op, l[1], r[1])))
        if e.op == "*":
            lfree = sym not in free_symbols(e.left)
            rfree = sym not in free_symbols(e.right)
            if lfree and not rfree:
                inner = linear_split(e.right, sym)
                if inner is None:
                    return None
                return (simplify(Bin("*", e.left, inner[0])),
                        simplify(Bin("*", e.left, inner[1])))
            if rfree and not lfree:
                inner = linear_split(e.left, sym)
                if inner is None:
                    return None
                return (simplify(Bin("*", inner[0], e.right)),
                        simplify(Bin("*", inner[1], e.right)))
            return None
    return None


# --------------------------------------------------------------------------
# Ranges and subsets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SymRange:
    """Inclusive ``begin:end:stride:tilesize`` range.

    With tilesize t > 1 each enumerated point stands for a contiguous block
    of t elements starting at that point.
    """
    begin: Expr
    end: Expr
    stride: Expr = ONE
    tilesize: Expr = ONE

    def __str__(self) -> str:
        if self.end == self.begin and self.stride == ONE and self.tilesize == ONE:
            return str(self.begin)
        parts = [str(self.begin), str(self.end)]
        if self.stride != ONE or self.tilesize != ONE:
            parts.append(str(self.stride))
        if self.tilesize != ONE:
            parts.append(str(self.tilesize))
        return ":".join(parts)

    def free_symbols(self) -> set[str]:
        return (free_symbols(self.begin) | free_symbols(self.end)
                | free_symbols(self.stride) | free_symbols(self.tilesize))

    def subs(self, mapping: Mapping[str, Expr]) -> "SymRange":
        return SymRange(simplify(substitute(self.begin, mapping)),
                        simplify(substitute(self.end, mapping)),
                        simplify(substitute(self.stride, mapping)),
                        simplify(substitute(self.tilesize, mapping)))

    def simplified(self) -> "SymRange":
        return SymRange(simplify(self.begin), simplify(self.end),
                        simplify(self.stride), simplify(self.tilesize))

    def count_expr(self) -> Expr:
        """Symbolic number of enumerated points (assumes begin <= end)."""
        span = Bin("-", self.end, self.begin)
        return simplify(Bin("+", Bin("//", span, self.stride), ONE))


def _split_top_level(text: str, sep: str) -> list[str]:
    """Split on a separator, ignoring occurrences inside parentheses."""
    parts, depth, start = [], 0, 0
    for i, c in enumerate(text):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_range(text: str) -> SymRange:
    """Parse ``b:e:s:t`` with optional trailing components; a bare index
    ``i`` is the single-point range ``i:i``.
    """
    parts = [p.strip() for p in _split_top_level(text, ":")]
    if len(parts) > 4:
        raise ParseError("too many range components", text, 0)
    exprs = [parse_expr(p) for p in parts if p != ""]
    if len(parts) != len(exprs):
        raise ParseError("empty range component", text, 0)
    if len(exprs) == 1:
        return SymRange(exprs[0], exprs[0])
    if len(exprs) == 2:
        return SymRange(exprs[0], exprs[1])
    if len(exprs) == 3:
        return SymRange(exprs[0], exprs[1], exprs[2])
    return SymRange(exprs[0], exprs[1], exprs[2], exprs[3])


def range_points(r: SymRange, syms: Mapping[str, Number]) -> list[int]:
    """Concrete points of a fully bound range; empty when begin > end with
    positive stride.
    """
    begin = int(eval_expr(r.begin, syms))
    end = int(eval_expr(r.end, syms))
    stride = int(eval_expr(r.stride, syms))
    if stride == 0:
        raise SymbolicError(f"zero stride in range '{r}'")
    if stride > 0:
        return list(range(begin, end + 1, stride))
    return list(range(begin, end - 1, stride))


@dataclass(frozen=True)
class Subset:
    """One range per data dimension."""
    ranges: tuple[SymRange, ...]

    @property
    def rank(self) -> int:
        return len(self.ranges)

    def __str__(self) -> str:
        return "[" + ", ".join(str(r) for r in self.ranges) + "]"

    def __iter__(self) -> Iterator[SymRange]:
        return iter(self.ranges)

    def free_symbols(self) -> set[str]:
        out: set[str] = set()
        for r in self.ranges:
            out |= r.free_symbols()
        return out

    def subs(self, mapping: Mapping[str, Expr]) -> "Subset":
        return Subset(tuple(r.subs(mapping) for r in self.ranges))

    def simplified(self) -> "Subset":
        return Subset(tuple(r.simplified() for r in self.ranges))

    def points(self, syms: Mapping[str, Number]) -> Iterator[tuple[int, ...]]:
        """Enumerate concrete element indices, expanding tile blocks."""
        axes = []
        for r in self.ranges:
            tile = int(eval_expr(r.tilesize, syms))
            pts = []
            for p in range_points(r, syms):
                pts.extend(range(p, p + tile))
            axes.append(pts)

        def rec(i: int, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
            if i == len(axes):
                yield prefix
                return
            for v in axes[i]:
                yield from rec(i + 1, prefix + (v,))

        return rec(0, ())


def make_subset(*ranges: SymRange) -> Subset:
    return Subset(tuple(ranges))


def parse_subset(text: str) -> Subset:
    inner = text.strip()
    if inner.startswith("[") and inner.endswith("]"):
        inner = inner[1:-1]
    if inner.strip() == "":
        raise ParseError("empty subset", text, 0)
    return Subset(tuple(parse_range(p) for p in _split_top_level(inner, ",")))


def num_accesses(s: Subset, syms: Mapping[str, Number]) -> int:
    """Number of elements a fully-bound subset touches: per-dimension point
    count times tilesize, multiplied across dimensions.
    """
    total = 1
    for r in s.ranges:
        tile = int(eval_expr(r.tilesize, syms))
        total *= len(range_points(r, syms)) * tile
    return total


def accesses_expr(s: Subset) -> Expr:
    """Symbolic element count of a subset (assumes nonempty ranges)."""
    total: Expr = ONE
    for r in s.ranges:
        total = Bin("*", total, Bin("*", r.count_expr(), r.tilesize))
    return simplify(total)


def _gcd_expr(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(math.gcd(int(a.value), int(b.value)) or 1)
    if a == b:
        return a
    return ONE


def _single_point(r: SymRange) -> bool:
    return simplify(Bin("-", r.end, r.begin)) == ZERO


def range_union(a: SymRange, b: SymRange) -> SymRange:
    """Per-dimension covering hull of two ranges."""
    if a == b:
        return a
    begin = simplify(Call("min", (a.begin, b.begin)))
    tile_a, tile_b = a.tilesize, b.tilesize
    if tile_a == tile_b:
        end = simplify(Call("max", (a.end, b.end)))
        tile = tile_a
    else:
        # differing tile sizes: widen ends to cover the larger blocks
        end_a = simplify(Bin("-", Bin("+", a.end, tile_a), ONE))
        end_b = simplify(Bin("-", Bin("+", b.end, tile_b), ONE))
        end = simplify(Call("max", (end_a, end_b)))
        tile = ONE
    if _single_point(a) and _single_point(b):
        diff = simplify(Bin("-", b.begin, a.begin))
        stride = Num(abs(int(diff.value))) if isinstance(diff, Num) and diff.value != 0 else ONE
    else:
        offset = simplify(Bin("-", b.begin, a.begin))
        stride = _gcd_expr(a.stride, b.stride)
        if isinstance(offset, Num) and offset.value != 0:
            stride = _gcd_expr(stride, Num(abs(int(offset.value))))
    return SymRange(begin, end, stride, tile)


def subset_union(a: Subset, b: Subset) -> Subset:
    """Smallest representable covering hull; may over-approximate, never
    drops points of either operand.
    """
    if a.rank != b.rank:
        raise SymbolicError(f"rank mismatch in union: {a.rank} vs {b.rank}")
    return Subset(tuple(range_union(x, y) for x, y in zip(a.ranges, b.ranges)))


def subset_image(scope_param: str, scope_range: SymRange, s: Subset,
                 dims: Optional[Sequence[Expr]] = None) -> tuple[Subset, list[str]]:
    """Eliminate ``scope_param`` from ``s``, covering its value over every
    point of ``scope_range``.

    Nonlinear occurrences over-approximate to the full dimension (requires
    ``dims``) and are reported in the returned flag list.
    """
    p0 = scope_range.begin
    # last actually-enumerated point, not the raw inclusive end
    span = Bin("-", scope_range.end, scope_range.begin)
    plast = simplify(Bin("+", scope_range.begin,
                         Bin("*", Bin("//", span, scope_range.stride), scope_range.stride)))
    pstride = scope_range.stride

    flags: list[str] = []
    out: list[SymRange] = []
    for dim, r in enumerate(s.ranges):
        if scope_param not in r.free_symbols():
            out.append(r)
            continue
        split_b = linear_split(r.begin, scope_param)
        split_e = linear_split(r.end, scope_param)
        stride_dep = scope_param in free_symbols(r.stride) | free_symbols(r.tilesize)
        if split_b is None or split_e is None or stride_dep:
            if dims is None:
                raise SymbolicError(
                    f"nonlinear use of '{scope_param}' in dimension {dim} "
                    f"and no dimension bound available")
            flags.append(f"dimension {dim}: nonlinear use of '{scope_param}', "
                         f"over-approximated to full dimension")
            out.append(SymRange(ZERO, simplify(Bin("-", dims[dim], ONE))))
            continue
        cb, _ = split_b
        ce, _ = split_e

        def at(expr: Expr, point: Expr) -> Expr:
            return simplify(substitute(expr, {scope_param: point}))

        if isinstance(cb, Num) and isinstance(ce, Num):
            begin = at(r.begin, p0) if cb.value >= 0 else at(r.begin, plast)
            end = at(r.end, plast) if ce.value >= 0 else at(r.end, p0)
            if _single_point(r) and cb == ce:
                new_stride = simplify(Bin("*", Num(abs(int(cb.value))), pstride))
                if new_stride == ZERO:
                    new_stride = ONE
            else:
                inner_stride = r.stride if isinstance(r.stride, Num) else ONE
                outer_step = (simplify(Bin("*", Num(abs(int(cb.value))), pstride))
                              if isinstance(pstride, Num) else ONE)
                new_stride = _gcd_expr(inner_stride,
                                       outer_step if isinstance(outer_step, Num) else ONE)
            out.append(SymRange(begin, end, new_stride, r.tilesize))
        else:
            # symbolic coefficient: sign unknown, fall back to full dimension
            if dims is None:
                raise SymbolicError(
                    f"symbolic coefficient of '{scope_param}' in dimension {dim} "
                    f"and no dimension bound available")
            flags.append(f"dimension {dim}: symbolic coefficient of '{scope_param}', "
                         f"over-approximated to full dimension")
            out.append(SymRange(ZERO, simplify(Bin("-", dims[dim], ONE))))
    return Subset(tuple(out)), flags
