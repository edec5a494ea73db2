import pytest

from sdfg.gallery import fixture, fixture_names
from sdfg.ir import Memlet, Sdfg
from sdfg.validation import validate_sdfg


def errors(sdfg):
    return [d for d in validate_sdfg(sdfg) if d.severity == "error"]


class TestCleanFixtures:
    @pytest.mark.parametrize("name", fixture_names())
    def test_no_diagnostics(self, name):
        assert errors(fixture(name).sdfg) == []


class TestStructuralErrors:
    def test_rank_mismatch(self):
        g = Sdfg("bad")
        g.add_array("x", ["4"], "float64")
        g.add_array("y", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        t = s.add_tasklet("t", ["a"], ["b"], "b = a")
        s.add_edge(s.add_access("x"), None, t, "a", Memlet.simple("x", "[0, 0]"))
        s.add_edge(t, "b", s.add_access("y"), None, Memlet.simple("y", "[0]"))
        msgs = [d.message for d in errors(g)]
        assert any("rank mismatch" in m for m in msgs)

    def test_unbalanced_scope(self):
        fx = fixture("matmul")
        g = fx.sdfg
        state = g.state("mult")
        clean_count = len(errors(g))
        # drop the exit's outgoing edge and the exit node itself
        from sdfg.ir import MapExit
        exit_id = next(n for n, node in state.nodes.items()
                       if isinstance(node, MapExit))
        for e in list(state.edges):
            if e.src == exit_id or e.dst == exit_id:
                state.remove_edge(e)
        state.remove_node(exit_id)
        found = errors(g)
        assert len(found) == clean_count + 1
        assert "exit" in found[0].message or "scope" in found[0].message

    def test_unknown_container_in_memlet(self):
        g = Sdfg("bad2")
        g.add_array("x", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        a = s.add_access("x")
        b = s.add_access("x")
        t = s.add_tasklet("t", ["v"], ["o"], "o = v")
        edge = s.add_edge(a, None, t, "v", Memlet.simple("x", "[0]"))
        edge.memlet.data = "ghost"
        s.add_edge(t, "o", b, None, Memlet.simple("x", "[1]"))
        assert any("ghost" in d.message for d in errors(g))

    def test_missing_connector(self):
        g = Sdfg("bad3")
        g.add_array("x", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        a = s.add_access("x")
        b = s.add_access("x")
        t = s.add_tasklet("t", ["v"], ["o"], "o = v")
        s.add_edge(a, None, t, "nope", Memlet.simple("x", "[0]"))
        s.add_edge(t, "o", b, None, Memlet.simple("x", "[0]"))
        assert any("connector" in d.message for d in errors(g))

    def test_bad_schedule(self):
        fx = fixture("matmul")
        state = fx.sdfg.state("mult")
        from sdfg.ir import MapEntry
        me = next(n for n in state.nodes.values() if isinstance(n, MapEntry))
        me.schedule = "gpu_device"
        assert any("schedule" in d.message for d in errors(fx.sdfg))

    def test_stream_data_connector_rejected(self):
        g = Sdfg("bad4")
        g.add_stream("S", "float64")
        g.add_array("x", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        s.add_edge(s.add_access("x"), None, s.add_access("S"), "data",
                   Memlet.simple("x", "[0:3]"))
        assert any("data" in d.message and "stream" in d.message.lower()
                   for d in errors(g))

    def test_recursive_nesting_rejected(self):
        g = Sdfg("outer")
        g.add_array("x", ["1"], "float64")
        s = g.add_state("s", is_start=True)
        inv = s.add_nested(g, {}, inputs=["x"], outputs=[])
        s.add_edge(s.add_access("x"), None, inv, "x", Memlet.simple("x", "[0]"))
        assert any("recursive" in d.message for d in errors(g))

    def test_partial_symbol_mapping(self):
        inner = Sdfg("inner")
        inner.add_symbol("K")
        inner.add_array("v", ["1"], "float64")
        si = inner.add_state("si", is_start=True)
        t = si.add_tasklet("t", [], ["o"], "o = 1")
        si.add_edge(t, "o", si.add_access("v"), None, Memlet.simple("v", "[0]"))
        outer = Sdfg("outer")
        outer.add_array("v", ["1"], "float64")
        s = outer.add_state("s", is_start=True)
        inv = s.add_nested(inner, {}, inputs=[], outputs=["v"])
        s.add_edge(inv, "v", s.add_access("v"), None, Memlet.simple("v", "[0]"))
        assert any("symbol mapping" in d.message for d in errors(outer))

    def test_static_output_must_cover_all_paths(self):
        g = Sdfg("bad5")
        g.add_array("x", ["4"], "float64")
        g.add_array("y", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        t = s.add_tasklet("t", ["v"], ["o"], "if v > 0:\n    o = v")
        s.add_edge(s.add_access("x"), None, t, "v", Memlet.simple("x", "[0]"))
        s.add_edge(t, "o", s.add_access("y"), None, Memlet.simple("y", "[0]"))
        assert any("every control path" in d.message for d in errors(g))

    def test_scope_bypass_edge_rejected(self):
        g = Sdfg("bypass")
        g.add_array("x", ["4"], "float64")
        g.add_array("y", ["4"], "float64")
        s = g.add_state("s", is_start=True)
        xa = s.add_access("x")
        ya = s.add_access("y")
        me, mx = s.add_map("i", "0:3")
        t = s.add_tasklet("t", ["a"], ["b"], "b = a")
        s.add_memlet_path(xa, me, t, dst_conn="a", memlet=Memlet.simple("x", "[i]"))
        s.add_memlet_path(t, mx, ya, src_conn="b", memlet=Memlet.simple("y", "[i]"))
        g.finalize()
        # an edge that leaves the scope without passing the exit
        s.add_edge(t, "b", s.add_access("y"), None, Memlet.simple("y", "[0]"))
        assert any("scope" in d.message for d in errors(g))
