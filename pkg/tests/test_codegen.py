import numpy as np
import pytest

import xform_fixtures as xf
from sdfg.codegen import (
    CodegenError,
    ToolchainError,
    find_compiler,
    generate,
    invoke_toolchain,
)
from sdfg.gallery import fixture, fixture_names
from sdfg.interpreter import run
from sdfg.rewriting import apply_transformation, find_matches

needs_cc = pytest.mark.skipif(find_compiler() is None,
                              reason="no C toolchain available")


def compile_and_compare(fx, seeds=range(3), rtol=1e-9):
    code = generate(fx.sdfg)
    prog = invoke_toolchain(code)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        arrays, symbols = fx.make_inputs(rng)
        expected = run(fx.sdfg, arrays, symbols).outputs
        got = prog.run(arrays, symbols)
        for name, exp in expected.items():
            if exp.dtype.kind == "i":
                np.testing.assert_array_equal(got[name].reshape(exp.shape), exp,
                                              err_msg=f"{fx.name}:{name}")
            else:
                np.testing.assert_allclose(got[name].reshape(exp.shape), exp,
                                           rtol=rtol, err_msg=f"{fx.name}:{name}")


class TestGenerate:
    def test_empty_sdfg(self):
        from sdfg.ir import Sdfg
        g = Sdfg("empty")
        g.add_state("only", is_start=True)
        code = generate(g)
        assert "void empty(" in code.source

    def test_deterministic_text(self):
        a = generate(fixture("matmul").sdfg).source
        b = generate(fixture("matmul").sdfg).source
        assert a == b

    def test_matmul_has_triple_loop_and_reduction(self):
        code = generate(fixture("matmul").sdfg).source
        assert code.count("for (int64_t") >= 3
        assert "+=" in code

    def test_laplace_guard_loop_becomes_for(self):
        code = generate(fixture("laplace").sdfg).source
        assert "for (t = 0; (t < T); t = (t + 1))" in code

    def test_entry_signature_order(self):
        code = generate(fixture("matmul").sdfg)
        assert [n for n, _ in code.pointer_args] == ["A", "B", "C"]
        assert code.symbol_args == ["M", "N", "K"]


@needs_cc
class TestCompiledEquivalence:
    @pytest.mark.parametrize("name", ["matmul", "laplace", "histogram",
                                      "indirection", "query", "branching",
                                      "mandelbrot", "spmv", "fibonacci"])
    def test_fixture_matches_interpreter(self, name):
        compile_and_compare(fixture(name))

    def test_matmul_chain_post_transformation(self):
        fx = fixture("matmul")
        g1, _ = apply_transformation(fx.sdfg,
                                     find_matches(fx.sdfg, "MapReduceFusion")[0])
        g2, _ = apply_transformation(g1, find_matches(g1, "MapTiling")[0],
                                     {"tile": 4})
        g3, _ = apply_transformation(g2, find_matches(g2, "LocalStorage")[0],
                                     {"data": "B"})
        for g in (g1, g2, g3):
            fx2 = type(fx)(fx.name, g, fx.oracle, fx.make_inputs)
            compile_and_compare(fx2, seeds=range(2))

    def test_laplace_post_map_to_for_loop(self):
        fx = fixture("laplace")
        g, _ = apply_transformation(fx.sdfg,
                                    find_matches(fx.sdfg, "MapToForLoop")[0])
        fx2 = type(fx)(fx.name, g, fx.oracle, fx.make_inputs)
        compile_and_compare(fx2, seeds=range(2))

    def test_vectorized_scale(self):
        fx = xf.scale_1d(16)
        g, _ = apply_transformation(fx.sdfg,
                                    find_matches(fx.sdfg, "Vectorization")[0],
                                    {"width": 4})
        fx2 = type(fx)(fx.name, g, fx.oracle, fx.make_inputs)
        compile_and_compare(fx2, seeds=range(2))

    def test_parallel_schedule_compiles(self):
        fx = xf.scale_1d(16)
        from sdfg.ir import MapEntry
        for n in fx.sdfg.states[0].nodes.values():
            if isinstance(n, MapEntry):
                n.schedule = "cpu_parallel"
        code = generate(fx.sdfg)
        assert "#pragma omp parallel for" in code.source
        compile_and_compare(fx, seeds=range(2))

    def test_laplace_large(self):
        fx = fixture("laplace")
        code = generate(fx.sdfg)
        prog = invoke_toolchain(code)
        rng = np.random.default_rng(0)
        A = rng.random((2, 128))
        expected = fx.oracle({"A": A}, {"N": 128, "T": 16})["A"]
        got = prog.run({"A": A}, {"N": 128, "T": 16})["A"].reshape(2, 128)
        np.testing.assert_allclose(got, expected, rtol=1e-9)

    def test_compiles_without_warnings(self):
        import subprocess
        import tempfile
        import os
        code = generate(fixture("matmul").sdfg)
        with tempfile.TemporaryDirectory() as tmp:
            src = os.path.join(tmp, "m.c")
            with open(src, "w") as f:
                f.write(code.source)
            proc = subprocess.run(
                [find_compiler(), "-shared", "-fPIC", "-O2", src, "-o",
                 os.path.join(tmp, "m.so"), "-lm"],
                capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stderr.strip() == ""

    def test_injected_bad_flag_gives_structured_error(self):
        code = generate(fixture("matmul").sdfg)
        with pytest.raises(ToolchainError, match="compiler failed"):
            invoke_toolchain(code, flags=["-fdefinitely-not-a-flag"])


@needs_cc
class TestCrossProductRegression:
    """Compiled output equals the interpreter on every library
    transformation's fixture, before and after applying it."""

    @pytest.mark.parametrize("name", sorted([
        "MapCollapse", "MapExpansion", "MapFusion", "MapInterchange",
        "MapReduceFusion", "MapTiling", "DoubleBuffering", "LocalStorage",
        "LocalStream", "Vectorization", "MapToForLoop", "StateFusion",
        "InlineSDFG", "RedundantArray",
    ]))
    def test_pre_and_post(self, name):
        from test_transformations import CASES
        builder, params, index = CASES[name]
        fx = builder()
        compile_and_compare(fx, seeds=range(2))
        after, _ = apply_transformation(fx.sdfg,
                                        find_matches(fx.sdfg, name)[index],
                                        params)
        fx2 = type(fx)(fx.name, after, fx.oracle, fx.make_inputs)
        compile_and_compare(fx2, seeds=range(2))


@needs_cc
class TestTaskletCodegenAgreement:
    def test_random_tasklets_match_eval(self):
        import ctypes
        import subprocess
        import tempfile
        import os
        import random
        from sdfg.tasklets import C_HELPERS, emit_c, eval_tasklet, parse_tasklet

        rng = random.Random(42)
        cases = []
        for i in range(25):
            expr = self._random_expr(rng, depth=3)
            cases.append((f"case{i}", f"out = {expr}"))

        fns = []
        for name, code in cases:
            prog = parse_tasklet(code, ["a", "b", "c"], ["out"])
            body = emit_c(prog, {"a": "float64", "b": "float64",
                                 "c": "float64", "out": "float64"},
                          indent="    ")
            fns.append(f"double {name}(double a, double b, double c) {{\n"
                       f"    double out;\n{body}\n    return out;\n}}")
        source = ("#include <stdint.h>\n#include <math.h>\n"
                  + C_HELPERS + "\n" + "\n".join(fns) + "\n")
        with tempfile.TemporaryDirectory() as tmp:
            src = os.path.join(tmp, "t.c")
            lib = os.path.join(tmp, "t.so")
            with open(src, "w") as f:
                f.write(source)
            subprocess.run([find_compiler(), "-shared", "-fPIC", "-O1", src,
                            "-o", lib, "-lm"], check=True, capture_output=True)
            dll = ctypes.CDLL(lib)
            for name, code in cases:
                fn = getattr(dll, name)
                fn.restype = ctypes.c_double
                fn.argtypes = [ctypes.c_double] * 3
                prog = parse_tasklet(code, ["a", "b", "c"], ["out"])
                for trial in range(5):
                    vals = {k: float(rng.randint(1, 9)) for k in "abc"}
                    expected = eval_tasklet(prog, vals)["out"]
                    got = fn(vals["a"], vals["b"], vals["c"])
                    assert got == pytest.approx(float(expected), rel=1e-12), \
                        (name, code, vals)

    @staticmethod
    def _random_expr(rng, depth):
        if depth == 0 or rng.random() < 0.3:
            return rng.choice(["a", "b", "c", str(rng.randint(1, 5))])
        op = rng.choice(["+", "-", "*", "+", "-"])
        left = TestTaskletCodegenAgreement._random_expr(rng, depth - 1)
        right = TestTaskletCodegenAgreement._random_expr(rng, depth - 1)
        if rng.random() < 0.2:
            cond = f"{left} > {right}"
            return (f"({left} {op} {right}) if ({cond}) else "
                    f"({right})")
        return f"({left} {op} {right})"
