import numpy as np
import pytest

from sdfg.gallery import fixture
from sdfg.interpreter import run
from sdfg.ir import MapEntry, Memlet, Sdfg
from sdfg.propagation import propagate_memlets
from sdfg.symbolic import Subset, eval_expr, parse_subset


def boundary_edges(state):
    out = []
    for e in state.edges:
        if e.dst_conn and e.dst_conn.startswith("IN_"):
            if isinstance(state.nodes[e.dst], MapEntry):
                out.append(e)
        if e.src_conn and e.src_conn.startswith("OUT_"):
            out.append(e)
    return out


def points_of(subset: Subset, syms) -> set:
    return set(subset.points(syms))


class TestScopeImages:
    def test_parametric_element_access(self):
        # interior A[i] over i = 0:N-1 propagates to A[0:N-1] with N accesses
        g = Sdfg("scale")
        g.add_symbol("N")
        g.add_array("A", ["N"], "float64")
        g.add_array("B", ["N"], "float64")
        s = g.add_state("s", is_start=True)
        me, mx = s.add_map("i", "0:N - 1")
        t = s.add_tasklet("t", ["a"], ["b"], "b = 2 * a")
        s.add_memlet_path(s.add_access("A"), me, t, dst_conn="a",
                          memlet=Memlet.simple("A", "[i]"))
        s.add_memlet_path(t, mx, s.add_access("B"), src_conn="b",
                          memlet=Memlet.simple("B", "[i]"))
        g.finalize()
        propagate_memlets(g)
        outer = next(e for e in s.edges if e.dst_conn == "IN_A")
        assert str(outer.memlet.propagated_subset) == "[0:N - 1]"
        assert eval_expr(outer.memlet.propagated_accesses, {"N": 6}) == 6

    def test_stencil_neighborhood(self):
        fx = fixture("laplace")
        propagate_memlets(fx.sdfg)
        body = fx.sdfg.state("body")
        outer = next(e for e in body.edges if e.dst_conn == "IN_A")
        syms = {"N": 6, "t": 0}
        # enumerate interior accesses for N=6 and compare point sets
        expected = set()
        for i in range(1, 5):
            for off in (-1, 0, 1):
                expected.add((0, i + off))
        assert points_of(outer.memlet.propagated_subset, syms) == expected
        assert eval_expr(outer.memlet.propagated_accesses, syms) == 3 * 4

    def test_empty_memlet_stays_empty(self):
        g = Sdfg("emptymemlet")
        g.add_array("B", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        me, mx = s.add_map("i", "0:3")
        t = s.add_tasklet("t", [], ["b"], "b = 1")
        empty_edge = s.add_edge(me, None, t, None, Memlet.empty())
        s.add_memlet_path(t, mx, s.add_access("B"), src_conn="b",
                          memlet=Memlet.simple("B", "[i]"))
        g.finalize()
        propagate_memlets(g)
        assert empty_edge.memlet.is_empty
        assert empty_edge.memlet.propagated_subset is None

    def test_data_dependent_range_falls_back_to_full_dimension(self):
        fx = fixture("spmv")
        warnings = propagate_memlets(fx.sdfg)
        assert any("data-dependent" in w.message for w in warnings)
        state = fx.sdfg.state("spmv")
        # the A_val read at the outer map boundary covers the full container
        outer = next(e for e in state.edges if e.dst_conn == "IN_A_val")
        assert str(outer.memlet.propagated_subset) == "[0:nnz - 1]"
        assert outer.memlet.propagated_accesses is None


class TestSoundnessAgainstExecution:
    @pytest.mark.parametrize("name,arrays,symbols", [
        ("laplace", {"A": np.arange(12.0).reshape(2, 6)}, {"N": 6, "T": 3}),
        ("matmul", {"A": np.arange(6.0).reshape(2, 3),
                    "B": np.arange(12.0).reshape(3, 4),
                    "C": np.zeros((2, 4))}, {"M": 2, "N": 4, "K": 3}),
    ])
    def test_traced_accesses_lie_in_propagated_subsets(self, name, arrays, symbols):
        fx = fixture(name)
        propagate_memlets(fx.sdfg)
        report = run(fx.sdfg, arrays, symbols, trace=True)
        for state in fx.sdfg.states:
            tree = state.scope_of()
            for entry, exit_ in tree.exits.items():
                entry_node = state.nodes[entry]
                if not isinstance(entry_node, MapEntry):
                    continue
                read_bounds, write_bounds = {}, {}
                for e in state.in_edges(entry):
                    if e.dst_conn and e.dst_conn.startswith("IN_") \
                            and e.memlet.propagated_subset is not None:
                        read_bounds[e.memlet.data] = e.memlet.propagated_subset
                for e in state.out_edges(exit_):
                    if e.memlet.propagated_subset is not None:
                        write_bounds[e.memlet.data] = e.memlet.propagated_subset
                interior_ids = {e.id for e in state.edges
                                if e.src == entry or e.dst == exit_}
                for rec in report.trace:
                    if rec.state != state.name or rec.edge not in interior_ids:
                        continue
                    bounds = write_bounds if rec.write else read_bounds
                    if rec.data not in bounds:
                        continue
                    allowed = points_of(bounds[rec.data], rec.syms)
                    assert rec.index in allowed, (
                        f"access {rec.data}{rec.index} outside propagated "
                        f"{bounds[rec.data]}")

    def test_analytic_counts_match_interpreter(self):
        fx = fixture("laplace")
        propagate_memlets(fx.sdfg)
        symbols = {"N": 8, "T": 3}
        report = run(fx.sdfg, {"A": np.zeros((2, 8))}, symbols)
        body = fx.sdfg.state("body")
        state_execs = report.states_visited.count("body")
        outer = next(e for e in body.edges if e.dst_conn == "IN_A")
        expected = 0
        for t in range(symbols["T"]):
            expected += eval_expr(outer.memlet.propagated_accesses,
                                  {**symbols, "t": t})
        assert report.movement_for("body", outer.id) == expected
        assert state_execs == symbols["T"]


class TestMonotonicity:
    def test_propagated_subset_contains_each_interior_image(self):
        fx = fixture("laplace")
        propagate_memlets(fx.sdfg)
        body = fx.sdfg.state("body")
        outer = next(e for e in body.edges if e.dst_conn == "IN_A")
        syms = {"N": 7, "t": 1}
        allowed = points_of(outer.memlet.propagated_subset, syms)
        me = next(n for n, node in body.nodes.items()
                  if isinstance(node, MapEntry))
        for e in body.out_edges(me):
            if e.memlet.is_empty:
                continue
            for i in range(1, 6):
                inst = points_of(e.memlet.subset, {**syms, "i": i})
                assert inst <= allowed
