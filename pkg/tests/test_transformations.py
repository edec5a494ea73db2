import itertools

import numpy as np
import pytest

import xform_fixtures as xf
from sdfg.gallery import fixture
from sdfg.interpreter import run
from sdfg.ir import AccessNode, MapEntry, MapExit, Sdfg, Tasklet, Memlet
from sdfg.rewriting import (
    Match,
    StaleMatchError,
    apply_strict,
    apply_transformation,
    find_matches,
    registry,
    replay_journal,
)
from sdfg.rewriting.engine import find_pattern_matches
from sdfg.rewriting.matching import (
    Pattern,
    PatternNode,
    StateGraph,
    find_embeddings,
    path_pattern,
)
from sdfg.serialization import graph_hash
from sdfg.validation import validate_sdfg


def errors(g):
    return [d for d in validate_sdfg(g) if d.severity == "error"]


def assert_equivalent(before: Sdfg, after: Sdfg, make_inputs, runs=5, seed0=0):
    for seed in range(seed0, seed0 + runs):
        rng = np.random.default_rng(seed)
        arrays, symbols = make_inputs(rng)
        a = run(before, arrays, symbols)
        b = run(after, arrays, symbols)
        assert a.outputs.keys() == b.outputs.keys()
        for name in a.outputs:
            exp = a.outputs[name]
            if exp.dtype.kind == "i":
                np.testing.assert_array_equal(b.outputs[name], exp, err_msg=name)
            else:
                np.testing.assert_allclose(b.outputs[name], exp, rtol=1e-9,
                                           err_msg=name)


# fixture builder + transformation name + params + how to pick the match
CASES = {
    "MapCollapse": (xf.nested_scale, {}, 0),
    "MapExpansion": (xf.flat_scale_2d, {"split": 1}, 0),
    "MapFusion": (xf.two_stage_pipeline, {}, 0),
    "MapInterchange": (xf.nested_scale, {}, 0),
    "MapReduceFusion": (lambda: fixture("matmul"), {}, 0),
    "MapTiling": (xf.scale_1d, {"tile": 4}, 0),
    "DoubleBuffering": (xf.looped_pipeline, {}, 0),
    "LocalStorage": (xf.tiled_matmul, {"data": "B"}, 0),
    "LocalStream": (lambda: fixture("query"), {}, 0),
    "Vectorization": (xf.scale_1d, {"width": 4}, 0),
    "MapToForLoop": (xf.scale_1d, {}, 0),
    "StateFusion": (xf.two_states, {}, 0),
    "InlineSDFG": (xf.nested_invoke, {}, 0),
    "RedundantArray": (xf.copy_chain, {}, 0),
}


class TestLibrarySemanticsPreservation:
    @pytest.mark.parametrize("name", sorted(CASES))
    def test_equivalent_and_valid(self, name):
        builder, params, index = CASES[name]
        fx = builder()
        matches = find_matches(fx.sdfg, name)
        assert matches, f"no applicable match for {name} on {fx.name}"
        after, entry = apply_transformation(fx.sdfg, matches[index], params)
        assert errors(after) == []
        assert_equivalent(fx.sdfg, after, fx.make_inputs)
        assert entry["transformation"] == name

    @pytest.mark.parametrize("name", sorted(CASES))
    def test_apply_does_not_mutate_input(self, name):
        builder, params, index = CASES[name]
        fx = builder()
        before_hash = graph_hash(fx.sdfg)
        matches = find_matches(fx.sdfg, name)
        apply_transformation(fx.sdfg, matches[index], params)
        assert graph_hash(fx.sdfg) == before_hash


class TestSpecificRewrites:
    def test_collapse_merges_parameters(self):
        fx = xf.nested_scale()
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapCollapse")[0])
        state = after.states[0]
        entries = [n for n in state.nodes.values() if isinstance(n, MapEntry)]
        assert len(entries) == 1
        assert entries[0].params == ["i", "j"]

    def test_expansion_then_collapse_roundtrip(self):
        fx = xf.flat_scale_2d()
        expanded, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapExpansion")[0])
        state = expanded.states[0]
        assert len([n for n in state.nodes.values()
                    if isinstance(n, MapEntry)]) == 2
        collapsed, _ = apply_transformation(
            expanded, find_matches(expanded, "MapCollapse")[0])
        entries = [n for n in collapsed.states[0].nodes.values()
                   if isinstance(n, MapEntry)]
        assert len(entries) == 1 and entries[0].params == ["i", "j"]
        assert_equivalent(fx.sdfg, collapsed, fx.make_inputs, runs=2)

    def test_tiling_partition_arithmetic(self):
        fx = xf.scale_1d(16)
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapTiling")[0], {"tile": 4})
        entries = sorted((n for n in after.states[0].nodes.values()
                          if isinstance(n, MapEntry)), key=lambda n: n.id)
        outer, inner = entries
        assert str(outer.ranges[0]) == "0:15:4"
        assert str(inner.ranges[0]) == "i_t:min(15, i_t + 3)"

    def test_tiling_non_dividing_covers_every_point_once(self):
        fx = xf.scale_1d(10)
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapTiling")[0], {"tile": 4})
        entries = sorted((n for n in after.states[0].nodes.values()
                          if isinstance(n, MapEntry)), key=lambda n: n.id)
        outer, inner = entries
        seen = []
        from sdfg.symbolic import range_points
        for it in range_points(outer.ranges[0], {}):
            seen.extend(range_points(inner.ranges[0], {"i_t": it}))
        assert seen == list(range(10))

    def test_vectorization_keeps_element_volume(self):
        fx = xf.scale_1d(16)
        before = run(fx.sdfg, *fx.make_inputs(np.random.default_rng(0)))
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "Vectorization")[0], {"width": 4})
        report = run(after, *fx.make_inputs(np.random.default_rng(0)))
        state = after.states[0]
        read = next(e for e in state.edges
                    if e.dst_conn == "a" and not e.memlet.is_empty)
        assert str(read.memlet.subset.ranges[-1].tilesize) == "4"
        assert report.movement_for("s", read.id) == 16
        assert before.movement_for("s", read.id) == 16

    def test_map_to_for_loop_builds_guarded_loop(self):
        fx = xf.scale_1d(8)
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapToForLoop")[0])
        assert len(after.states) >= 2
        from sdfg.loops import detect_guard_loops
        loops = detect_guard_loops(after)
        assert len(loops) == 1 and loops[0].var == "i"

    def test_local_storage_reindexes_reads(self):
        fx = xf.tiled_matmul()
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "LocalStorage")[0], {"data": "B"})
        assert "local_B" in after.data
        assert after.data["local_B"].transient
        state = next(s for s in after.states if s.name == "mult")
        rel = [e for e in state.edges
               if not e.memlet.is_empty and e.memlet.data == "local_B"
               and e.dst_conn == "b"]
        assert rel and "k - k_t" in str(rel[0].memlet.subset)

    def test_local_storage_changes_boundary_counters(self):
        fx = xf.tiled_matmul()
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "LocalStorage")[0], {"data": "B"})
        rng = np.random.default_rng(5)
        arrays, symbols = fx.make_inputs(rng)
        r_before = run(fx.sdfg, arrays, symbols)
        r_after = run(after, arrays, symbols)
        np.testing.assert_allclose(r_after.outputs["C"], r_before.outputs["C"],
                                   rtol=1e-9)
        assert r_after.elements_moved != r_before.elements_moved

    def test_double_buffering_structure(self):
        fx = xf.looped_pipeline()
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "DoubleBuffering")[0])
        assert str(after.data["buf"].dims[0]) == "2"
        assigned = [a for t in after.transitions for a, _ in t.assignments]
        assert "buf_db" in assigned

    def test_redundant_array_removes_one_node(self):
        fx = xf.copy_chain()
        state = fx.sdfg.states[0]
        before_nodes = len(state.nodes)
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "RedundantArray")[0])
        assert len(after.states[0].nodes) == before_nodes - 1
        assert "tmp" not in after.data
        writes = [e for e in after.states[0].edges
                  if not e.memlet.is_empty and e.memlet.data == "out"]
        assert writes  # producer now writes the copy target directly

    def test_inline_splices_nested_state(self):
        fx = xf.nested_invoke()
        after, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "InlineSDFG")[0])
        state = after.states[0]
        assert not any(hasattr(n, "sdfg") for n in state.nodes.values())
        assert any(isinstance(n, MapEntry) for n in state.nodes.values())


class TestStrictPass:
    def test_fixpoint_removes_fusible_states_and_redundant_array(self):
        g = Sdfg("strictable")
        g.add_symbol("N")
        g.add_array("x", ["N"], "float64")
        g.add_array("out", ["N"], "float64")
        g.add_array("tmp", ["N"], "float64", transient=True)
        s1 = g.add_state("a", is_start=True)
        me, mx = s1.add_map("i", "0:N - 1")
        t = s1.add_tasklet("neg", ["a"], ["b"], "b = -a")
        tmp = s1.add_access("tmp")
        s1.add_memlet_path(s1.add_access("x"), me, t, dst_conn="a",
                           memlet=Memlet.simple("x", "[i]"))
        s1.add_memlet_path(t, mx, tmp, src_conn="b",
                           memlet=Memlet.simple("tmp", "[i]"))
        s1.add_edge(tmp, None, s1.add_access("out"), None,
                    Memlet.simple("tmp", "[0:N - 1]", reindex="[0:N - 1]"))
        s2 = g.add_state("b")
        g.add_transition(s1, s2)
        t2 = s2.add_tasklet("done", [], ["o"], "o = 1")
        g.add_array("flag", ["1"], "int64")
        s2.add_edge(t2, "o", s2.add_access("flag"), None,
                    Memlet.simple("flag", "[0]"))
        g.finalize()

        before_states = len(g.states)
        before_nodes = sum(len(s.nodes) for s in g.states)
        after, entries = apply_strict(g)
        names = [e["transformation"] for e in entries]
        assert "RedundantArray" in names and "StateFusion" in names
        assert len(after.states) == before_states - 1
        assert sum(len(s.nodes) for s in after.states) == before_nodes - 1
        assert errors(after) == []

    def test_idempotent_on_strict_graph(self):
        fx = fixture("laplace")
        once, entries = apply_strict(fx.sdfg)
        assert entries == []
        assert graph_hash(once) == graph_hash(fx.sdfg)

    def test_fusion_leaves_no_redundant_transient(self):
        fx = fixture("matmul")
        fused, _ = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapReduceFusion")[0])
        assert "tmp" not in fused.data


class TestJournals:
    def test_replay_reproduces_hash(self):
        fx = fixture("matmul")
        g1, e1 = apply_transformation(
            fx.sdfg, find_matches(fx.sdfg, "MapReduceFusion")[0])
        g2, e2 = apply_transformation(
            g1, find_matches(g1, "MapTiling")[0], {"tile": 4})
        g3, e3 = apply_transformation(
            g2, find_matches(g2, "LocalStorage")[0], {"data": "B"})
        final = graph_hash(g3)
        replayed = replay_journal(fx.sdfg, [e1, e2, e3])
        assert graph_hash(replayed) == final

    def test_stale_match_rejected(self):
        fx = fixture("matmul")
        match = find_matches(fx.sdfg, "MapReduceFusion")[0]
        g1, _ = apply_transformation(fx.sdfg, match)
        with pytest.raises(StaleMatchError):
            apply_transformation(g1, match)


def brute_force_embeddings(pattern, state):
    """Exhaustive oracle: try every injective node assignment."""
    graph = StateGraph(state)
    ids = graph.node_ids()
    names = [p.name for p in pattern.nodes]
    found = []
    for combo in itertools.permutations(ids, len(names)):
        mapping = dict(zip(names, combo))
        ok = all(pattern.nodes[i].admits(graph, combo[i])
                 for i in range(len(names)))
        ok = ok and all(graph.has_edge(mapping[u], mapping[v])
                        for u, v in pattern.edges)
        if ok:
            found.append(mapping)
    return sorted(found, key=lambda m: tuple(m[n] for n in names))


def random_state(rng: np.random.Generator, max_nodes: int = 12) -> Sdfg:
    g = Sdfg("random")
    g.add_array("d", ["16"], "float64", transient=True)
    s = g.add_state("s", is_start=True)
    n = int(rng.integers(2, max_nodes + 1))
    kinds = []
    for i in range(n):
        k = rng.integers(0, 3)
        if k == 0:
            kinds.append(s.add_access("d"))
        elif k == 1:
            kinds.append(s.add_node(MapEntry(["z"], [])))
        else:
            kinds.append(s.add_node(MapExit(0)))
    for _ in range(int(rng.integers(1, 2 * n))):
        u, v = rng.integers(0, n, size=2)
        if u < v:  # keep it acyclic
            s.add_edge(int(kinds[u]), None, int(kinds[v]), None, Memlet.empty())
    return g


class TestMatchingOracle:
    PATTERNS = {
        "path2-access": path_pattern(PatternNode("a", (AccessNode,)),
                                     PatternNode("b", (AccessNode,))),
        "triple": path_pattern(PatternNode("me", (MapEntry,)),
                               PatternNode("t", (Tasklet,)),
                               PatternNode("mx", (MapExit,))),
        "wild-pair": path_pattern(PatternNode("x"), PatternNode("y")),
    }

    @pytest.mark.parametrize("pname", sorted(PATTERNS))
    def test_vf2_equals_brute_force_on_random_graphs(self, pname):
        pattern = self.PATTERNS[pname]
        for seed in range(50):
            g = random_state(np.random.default_rng(seed))
            state = g.states[0]
            fast = find_embeddings(pattern, StateGraph(state))
            slow = brute_force_embeddings(pattern, state)
            assert fast == slow, f"seed {seed}"

    def test_embeddings_on_access_chain(self):
        g = Sdfg("chain")
        g.add_array("d", ["4"], "float64", transient=True)
        s = g.add_state("s", is_start=True)
        nodes = [s.add_access("d") for _ in range(4)]
        for a, b in zip(nodes, nodes[1:]):
            s.add_edge(a, None, b, None, Memlet.empty())
        pattern = self.PATTERNS["path2-access"]
        found = find_embeddings(pattern, StateGraph(s))
        assert len(found) == 3

    def test_redundant_array_pattern_on_copy_chain(self):
        fx = xf.copy_chain()
        matches = find_matches(fx.sdfg, "RedundantArray")
        assert len(matches) == 1
        named = {k: fx.sdfg.states[0].nodes[v].data
                 for k, v in matches[0].nodes.items()}
        assert named == {"in_array": "tmp", "out_array": "out"}

    def test_no_matches_without_transient_copies(self):
        fx = xf.scale_1d()
        assert find_matches(fx.sdfg, "RedundantArray") == []
