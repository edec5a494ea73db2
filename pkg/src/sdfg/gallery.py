"""Builder-constructed example programs with direct-evaluation oracles.

The corpus shared by tests, the CLI (`fixtures --emit`), and the workbench
gallery.  Every entry pairs a validated graph with a numpy/scalar oracle
and a generator for random desk-scale inputs, so interpreter, transformed
graphs, and generated code can all be checked against the same ground
truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ir import Memlet, Sdfg

Arrays = dict[str, np.ndarray]
Symbols = dict[str, int]


class UnknownFixture(KeyError):
    pass


@dataclass
class Fixture:
    name: str
    sdfg: Sdfg
    oracle: Callable[[Arrays, Symbols], Arrays]
    make_inputs: Callable[[np.random.Generator], tuple[Arrays, Symbols]]
    notes: str = ""


_BUILDERS: dict[str, Callable[[], Fixture]] = {}


def _register(fn: Callable[[], Fixture]) -> Callable[[], Fixture]:
    _BUILDERS[fn.__name__.replace("_build_", "")] = fn
    return fn


def fixture(name: str) -> Fixture:
    if name not in _BUILDERS:
        raise UnknownFixture(
            f"unknown fixture '{name}'; available: {', '.join(sorted(_BUILDERS))}")
    return _BUILDERS[name]()


def fixture_names() -> list[str]:
    return sorted(_BUILDERS)


# --------------------------------------------------------------------------
# laplace: double-buffered 3-point stencil inside a guarded loop
# --------------------------------------------------------------------------

@_register
def _build_laplace() -> Fixture:
    g = Sdfg("laplace")
    g.add_symbol("N")
    g.add_symbol("T")
    g.add_array("A", ["2", "N"], "float64")

    init = g.add_state("init", is_start=True)
    guard = g.add_state("guard")
    body = g.add_state("body")
    g.add_transition(init, guard, assignments=[("t", "0")])
    g.add_transition(guard, body, condition="t < T")
    g.add_transition(body, guard, assignments=[("t", "t + 1")])

    read = body.add_access("A")
    write = body.add_access("A")
    me, mx = body.add_map("i", "1:N - 2")
    t = body.add_tasklet("stencil", ["l", "c", "r"], ["o"], "o = l - 2*c + r")
    body.add_memlet_path(read, me, t, dst_conn="l",
                         memlet=Memlet.simple("A", "[t % 2, i - 1]"))
    body.add_memlet_path(read, me, t, dst_conn="c",
                         memlet=Memlet.simple("A", "[t % 2, i]"))
    body.add_memlet_path(read, me, t, dst_conn="r",
                         memlet=Memlet.simple("A", "[t % 2, i + 1]"))
    body.add_memlet_path(t, mx, write, src_conn="o",
                         memlet=Memlet.simple("A", "[(t + 1) % 2, i]"))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        A = np.array(arrays["A"], dtype=np.float64).reshape(2, symbols["N"])
        N, T = symbols["N"], symbols["T"]
        for t_ in range(T):
            src, dst = t_ % 2, (t_ + 1) % 2
            A[dst, 1:N - 1] = A[src, 0:N - 2] - 2 * A[src, 1:N - 1] + A[src, 2:N]
        return {"A": A}

    def make_inputs(rng: np.random.Generator):
        N = int(rng.integers(5, 12))
        T = int(rng.integers(1, 4))
        return {"A": rng.random((2, N))}, {"N": N, "T": T}

    return Fixture("laplace", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# matmul: multiply map feeding a reduction over the contracted axis
# --------------------------------------------------------------------------

@_register
def _build_matmul() -> Fixture:
    g = Sdfg("matmul")
    for s in ("M", "N", "K"):
        g.add_symbol(s)
    g.add_array("A", ["M", "K"], "float64")
    g.add_array("B", ["K", "N"], "float64")
    g.add_array("C", ["M", "N"], "float64")
    g.add_array("tmp", ["M", "N", "K"], "float64", transient=True)

    state = g.add_state("mult", is_start=True)
    a = state.add_access("A")
    b = state.add_access("B")
    tmp_w = state.add_access("tmp")
    c = state.add_access("C")
    me, mx = state.add_map(["i", "j", "k"], ["0:M - 1", "0:N - 1", "0:K - 1"])
    t = state.add_tasklet("mult", ["a", "b"], ["o"], "o = a * b")
    state.add_memlet_path(a, me, t, dst_conn="a", memlet=Memlet.simple("A", "[i, k]"))
    state.add_memlet_path(b, me, t, dst_conn="b", memlet=Memlet.simple("B", "[k, j]"))
    state.add_memlet_path(t, mx, tmp_w, src_conn="o",
                          memlet=Memlet.simple("tmp", "[i, j, k]"))
    red = state.add_reduce([2], "sum")
    state.add_edge(tmp_w, None, red, "in",
                   Memlet.simple("tmp", "[0:M - 1, 0:N - 1, 0:K - 1]"))
    state.add_edge(red, "out", c, None, Memlet.simple("C", "[0:M - 1, 0:N - 1]"))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        A = np.asarray(arrays["A"], dtype=np.float64)
        B = np.asarray(arrays["B"], dtype=np.float64)
        return {"A": A, "B": B, "C": A @ B}

    def make_inputs(rng: np.random.Generator):
        M, N, K = (int(rng.integers(2, 6)) for _ in range(3))
        return ({"A": rng.random((M, K)), "B": rng.random((K, N)),
                 "C": rng.random((M, N))}, {"M": M, "N": N, "K": K})

    return Fixture("matmul", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# spmv: CSR sparse matrix-vector product with a data-dependent inner range
# and an indirect read of the dense vector
# --------------------------------------------------------------------------

@_register
def _build_spmv() -> Fixture:
    g = Sdfg("spmv")
    for s in ("H", "W", "nnz"):
        g.add_symbol(s)
    g.add_array("A_row", ["H + 1"], "int64")
    g.add_array("A_col", ["nnz"], "int64")
    g.add_array("A_val", ["nnz"], "float64")
    g.add_array("x", ["W"], "float64")
    g.add_array("b", ["H"], "float64")
    g.add_array("x_val", ["1"], "float64", transient=True)

    state = g.add_state("spmv", is_start=True)
    row = state.add_access("A_row")
    col = state.add_access("A_col")
    val = state.add_access("A_val")
    xin = state.add_access("x")
    bout = state.add_access("b")

    ome, omx = state.add_map("i", "0:H - 1")
    ime, imx = state.add_map("j", "row_b:row_e - 1")
    state.add_memlet_path(row, ome, ime, dst_conn="row_b",
                          memlet=Memlet.simple("A_row", "[i]"))
    state.add_memlet_path(row, ome, ime, dst_conn="row_e",
                          memlet=Memlet.simple("A_row", "[i + 1]"))

    deref = state.build_indirection("x", Memlet.simple("A_col", "[j]"),
                                    index_src=col, base_src=xin,
                                    through=(ome, ime))
    xv = state.add_access("x_val")
    state.add_edge(deref, "out", xv, None, Memlet.simple("x_val", "[0]"))

    mac = state.add_tasklet("mac", ["a", "in_x"], ["out"], "out = a * in_x")
    state.add_memlet_path(val, ome, ime, mac, dst_conn="a",
                          memlet=Memlet.simple("A_val", "[j]"))
    state.add_edge(xv, None, mac, "in_x", Memlet.simple("x_val", "[0]"))
    state.add_memlet_path(mac, imx, omx, bout, src_conn="out",
                          memlet=Memlet.simple("b", "[i]", wcr="sum", accesses=1))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        H, W = symbols["H"], symbols["W"]
        dense = np.zeros((H, W))
        rowptr = np.asarray(arrays["A_row"], dtype=np.int64)
        colidx = np.asarray(arrays["A_col"], dtype=np.int64)
        vals = np.asarray(arrays["A_val"], dtype=np.float64)
        for i in range(H):
            for jj in range(rowptr[i], rowptr[i + 1]):
                dense[i, colidx[jj]] += vals[jj]
        return {"b": dense @ np.asarray(arrays["x"], dtype=np.float64)}

    def make_inputs(rng: np.random.Generator):
        H = int(rng.integers(3, 8))
        W = int(rng.integers(3, 8))
        dense = rng.random((H, W)) * (rng.random((H, W)) < 0.4)
        arrays = csr_parts(dense)
        arrays["x"] = rng.random(W)
        arrays["b"] = np.zeros(H)
        nnz = len(arrays["A_val"])
        return arrays, {"H": H, "W": W, "nnz": nnz}

    return Fixture("spmv", g, oracle, make_inputs)


def csr_parts(dense: np.ndarray) -> Arrays:
    """Row-pointer/column/value triplet of a dense matrix; zero entries are
    dropped, with one explicit zero kept when the matrix is entirely empty
    so the value containers stay allocatable."""
    rows, cols, vals = [0], [], []
    for i in range(dense.shape[0]):
        for j in range(dense.shape[1]):
            if dense[i, j] != 0:
                cols.append(j)
                vals.append(dense[i, j])
        rows.append(len(cols))
    if not vals:  # keep nnz >= 1 so the containers stay allocatable
        cols.append(0)
        vals.append(0.0)
        rows = [0] + [1] * dense.shape[0]
    return {"A_row": np.array(rows, dtype=np.int64),
            "A_col": np.array(cols, dtype=np.int64),
            "A_val": np.array(vals, dtype=np.float64)}


# --------------------------------------------------------------------------
# fibonacci: seed a stream, then consume it with P workers until empty
# --------------------------------------------------------------------------

@_register
def _build_fibonacci() -> Fixture:
    g = Sdfg("fibonacci")
    g.add_symbol("P")
    g.add_array("n_in", ["1"], "int64")
    g.add_array("out", ["1"], "int64")
    g.add_stream("S", "int64")

    state = g.add_state("fib", is_start=True)
    n = state.add_access("n_in")
    seed = state.add_tasklet("seed", ["nv"], ["sv"], "sv = nv")
    s_in = state.add_access("S")
    state.add_edge(n, None, seed, "nv", Memlet.simple("n_in", "[0]"))
    state.add_edge(seed, "sv", s_in, "push", Memlet.simple("S", "[0]"))

    ce, cx = state.add_consume("p", "P", "size(S) > 0")
    state.add_edge(s_in, "pop", ce, "IN_stream",
                   Memlet.simple("S", "[0]", dynamic=True))
    worker = state.add_tasklet(
        "worker", ["v"], ["res", "p1", "p2"],
        "if v < 2:\n"
        "    res = v\n"
        "else:\n"
        "    p1 = v - 1\n"
        "    p2 = v - 2")
    state.add_edge(ce, "OUT_stream", worker, "v",
                   Memlet.simple("S", "[0]", dynamic=True))
    state.add_memlet_path(worker, cx, state.add_access("out"), src_conn="res",
                          memlet=Memlet.simple("out", "[0]", wcr="sum", dynamic=True))
    s_out = state.add_access("S")
    state.add_memlet_path(worker, cx, s_out, src_conn="p1", dst_conn="push",
                          memlet=Memlet.simple("S", "[0]", dynamic=True))
    state.add_memlet_path(worker, cx, s_out, src_conn="p2", dst_conn="push",
                          memlet=Memlet.simple("S", "[0]", dynamic=True))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        n_val = int(np.asarray(arrays["n_in"]).reshape(-1)[0])
        a, b = 0, 1
        for _ in range(n_val):
            a, b = b, a + b
        return {"out": np.array([a], dtype=np.int64)}

    def make_inputs(rng: np.random.Generator):
        n_val = int(rng.integers(0, 13))
        return ({"n_in": np.array([n_val], dtype=np.int64),
                 "out": np.zeros(1, dtype=np.int64)},
                {"P": int(rng.integers(1, 5))})

    return Fixture(
        "fibonacci", g, oracle, make_inputs,
        notes="The worker body is a reconstruction: a popped value below two "
              "contributes itself to the sum; larger values push their two "
              "predecessors.")


# --------------------------------------------------------------------------
# query: filter a column into a stream, count the survivors
# --------------------------------------------------------------------------

@_register
def _build_query() -> Fixture:
    g = Sdfg("query")
    g.add_symbol("N")
    g.add_array("col", ["N"], "float64")
    g.add_array("thr", ["1"], "float64")
    g.add_array("out_vals", ["N"], "float64")
    g.add_array("count", ["1"], "int64")
    g.add_stream("S", "float64")

    state = g.add_state("filter", is_start=True)
    col = state.add_access("col")
    thr = state.add_access("thr")
    me, mx = state.add_map("i", "0:N - 1")
    t = state.add_tasklet("pred", ["v", "limit"], ["sv", "c"],
                          "if v > limit:\n    sv = v\n    c = 1")
    state.add_memlet_path(col, me, t, dst_conn="v",
                          memlet=Memlet.simple("col", "[i]"))
    state.add_memlet_path(thr, me, t, dst_conn="limit",
                          memlet=Memlet.simple("thr", "[0]"))
    s_acc = state.add_access("S")
    state.add_memlet_path(t, mx, s_acc, src_conn="sv", dst_conn="push",
                          memlet=Memlet.simple("S", "[0]", dynamic=True))
    cnt = state.add_access("count")
    state.add_memlet_path(t, mx, cnt, src_conn="c",
                          memlet=Memlet.simple("count", "[0]", wcr="sum",
                                               dynamic=True))
    vals = state.add_access("out_vals")
    state.add_edge(s_acc, "pop", vals, None,
                   Memlet.simple("S", "[0]", dynamic=True))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        colv = np.asarray(arrays["col"], dtype=np.float64)
        limit = float(np.asarray(arrays["thr"]).reshape(-1)[0])
        picked = colv[colv > limit]
        out = np.array(arrays["out_vals"], dtype=np.float64).copy()
        out[:picked.size] = picked
        return {"out_vals": out,
                "count": np.array([picked.size], dtype=np.int64)}

    def make_inputs(rng: np.random.Generator):
        N = int(rng.integers(4, 16))
        return ({"col": rng.random(N) * 10.0, "thr": np.array([5.0]),
                 "out_vals": np.zeros(N), "count": np.zeros(1, dtype=np.int64)},
                {"N": N})

    return Fixture("query", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# histogram: dynamic-index conflicting writes resolved by summation
# --------------------------------------------------------------------------

@_register
def _build_histogram() -> Fixture:
    g = Sdfg("histogram")
    for s in ("H", "W", "B"):
        g.add_symbol(s)
    g.add_array("img", ["H", "W"], "int64")
    g.add_array("hist", ["B"], "int64")

    state = g.add_state("bin", is_start=True)
    img = state.add_access("img")
    hist = state.add_access("hist")
    me, mx = state.add_map(["i", "j"], ["0:H - 1", "0:W - 1"])
    t = state.add_tasklet("bump", ["v"], ["h"], "h[v] = 1")
    state.add_memlet_path(img, me, t, dst_conn="v",
                          memlet=Memlet.simple("img", "[i, j]"))
    state.add_memlet_path(t, mx, hist, src_conn="h",
                          memlet=Memlet.simple("hist", "[0:B - 1]", wcr="sum",
                                               accesses=1))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        img_v = np.asarray(arrays["img"], dtype=np.int64)
        counts = np.bincount(img_v.ravel(), minlength=symbols["B"])
        return {"hist": np.asarray(arrays["hist"], dtype=np.int64) + counts}

    def make_inputs(rng: np.random.Generator):
        H, W = int(rng.integers(3, 9)), int(rng.integers(3, 9))
        B = int(rng.integers(4, 9))
        return ({"img": rng.integers(0, B, size=(H, W)),
                 "hist": np.zeros(B, dtype=np.int64)},
                {"H": H, "W": W, "B": B})

    return Fixture("histogram", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# indirection: gather y[i] = x[ind[i]] through the indirect-access pattern
# --------------------------------------------------------------------------

@_register
def _build_indirection() -> Fixture:
    g = Sdfg("indirection")
    g.add_symbol("W")
    g.add_symbol("M")
    g.add_array("x", ["W"], "float64")
    g.add_array("ind", ["M"], "int64")
    g.add_array("y", ["M"], "float64")

    state = g.add_state("gather", is_start=True)
    me, mx = state.add_map("i", "0:M - 1")
    deref = state.build_indirection("x", Memlet.simple("ind", "[i]"),
                                    through=(me,))
    y = state.add_access("y")
    state.add_memlet_path(deref, mx, y, src_conn="out",
                          memlet=Memlet.simple("y", "[i]"))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        x = np.asarray(arrays["x"], dtype=np.float64)
        ind = np.asarray(arrays["ind"], dtype=np.int64)
        return {"y": x[ind]}

    def make_inputs(rng: np.random.Generator):
        W, M = int(rng.integers(3, 10)), int(rng.integers(2, 8))
        return ({"x": rng.random(W), "ind": rng.integers(0, W, size=M),
                 "y": np.zeros(M)}, {"W": W, "M": M})

    return Fixture("indirection", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# branching: data-dependent state transition
# --------------------------------------------------------------------------

@_register
def _build_branching() -> Fixture:
    g = Sdfg("branching")
    g.add_array("a", ["1"], "int64")
    g.add_array("out", ["1"], "int64")

    start = g.add_state("start", is_start=True)
    then_s = g.add_state("then")
    else_s = g.add_state("else")
    g.add_transition(start, then_s, condition="a != 0")
    g.add_transition(start, else_s)

    for st, value in ((then_s, 1), (else_s, 2)):
        t = st.add_tasklet("write", [], ["o"], f"o = {value}")
        acc = st.add_access("out")
        st.add_edge(t, "o", acc, None, Memlet.simple("out", "[0]"))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        a = int(np.asarray(arrays["a"]).reshape(-1)[0])
        return {"out": np.array([1 if a != 0 else 2], dtype=np.int64)}

    def make_inputs(rng: np.random.Generator):
        return ({"a": np.array([int(rng.integers(0, 2))], dtype=np.int64),
                 "out": np.zeros(1, dtype=np.int64)}, {})

    return Fixture("branching", g, oracle, make_inputs)


# --------------------------------------------------------------------------
# mandelbrot: per-pixel convergence loop in a nested graph under a 2-D map
# --------------------------------------------------------------------------

def _build_pixel_loop() -> Sdfg:
    inner = Sdfg("pixel_loop")
    inner.add_symbol("K")
    inner.add_array("c_r", ["1"], "float64")
    inner.add_array("c_i", ["1"], "float64")
    inner.add_array("steps", ["1"], "int64")
    inner.add_array("zr", ["1"], "float64", transient=True)
    inner.add_array("zi", ["1"], "float64", transient=True)
    inner.add_array("cnt", ["1"], "int64", transient=True)

    body = inner.add_state("step", is_start=True)
    fin = inner.add_state("fin")
    inner.add_transition(body, body,
                         condition="zr * zr + zi * zi < 4.0 and cnt < K")
    inner.add_transition(body, fin)

    t = body.add_tasklet(
        "iterate", ["r", "im", "cr", "ci", "n"], ["r2", "im2", "n2"],
        "r2 = r*r - im*im + cr\n"
        "im2 = 2*r*im + ci\n"
        "n2 = n + 1")
    for conn, data in (("r", "zr"), ("im", "zi"), ("cr", "c_r"),
                       ("ci", "c_i"), ("n", "cnt")):
        body.add_edge(body.add_access(data), None, t, conn,
                      Memlet.simple(data, "[0]"))
    for conn, data in (("r2", "zr"), ("im2", "zi"), ("n2", "cnt")):
        body.add_edge(t, conn, body.add_access(data), None,
                      Memlet.simple(data, "[0]"))

    cnt_r = fin.add_access("cnt")
    steps_w = fin.add_access("steps")
    fin.add_edge(cnt_r, None, steps_w, None,
                 Memlet.simple("cnt", "[0]", reindex="[0]"))
    return inner


@_register
def _build_mandelbrot() -> Fixture:
    g = Sdfg("mandelbrot")
    for s in ("W", "H", "K"):
        g.add_symbol(s)
    g.add_array("CR", ["W"], "float64")
    g.add_array("CI", ["H"], "float64")
    g.add_array("IT", ["H", "W"], "int64")

    state = g.add_state("pixels", is_start=True)
    cr = state.add_access("CR")
    ci = state.add_access("CI")
    it = state.add_access("IT")
    me, mx = state.add_map(["py", "px"], ["0:H - 1", "0:W - 1"])
    inv = state.add_nested(_build_pixel_loop(), {"K": "K"},
                           inputs=["c_r", "c_i"], outputs=["steps"])
    state.add_memlet_path(cr, me, inv, dst_conn="c_r",
                          memlet=Memlet.simple("CR", "[px]"))
    state.add_memlet_path(ci, me, inv, dst_conn="c_i",
                          memlet=Memlet.simple("CI", "[py]"))
    state.add_memlet_path(inv, mx, it, src_conn="steps",
                          memlet=Memlet.simple("IT", "[py, px]"))
    g.finalize()

    def oracle(arrays: Arrays, symbols: Symbols) -> Arrays:
        CR = np.asarray(arrays["CR"], dtype=np.float64)
        CI = np.asarray(arrays["CI"], dtype=np.float64)
        K = symbols["K"]
        out = np.zeros((CI.size, CR.size), dtype=np.int64)
        for py in range(CI.size):
            for px in range(CR.size):
                zr = zi = 0.0
                n = 0
                while True:
                    zr, zi, n = (zr * zr - zi * zi + CR[px],
                                 2 * zr * zi + CI[py], n + 1)
                    if not (zr * zr + zi * zi < 4.0 and n < K):
                        break
                out[py, px] = n
        return {"IT": out}

    def make_inputs(rng: np.random.Generator):
        W, H = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        return ({"CR": rng.uniform(-2, 0.5, W), "CI": rng.uniform(-1.2, 1.2, H),
                 "IT": np.zeros((H, W), dtype=np.int64)},
                {"W": W, "H": H, "K": 12})

    return Fixture("mandelbrot", g, oracle, make_inputs,
                   notes="Reduced to a scalar convergence loop per pixel.")
