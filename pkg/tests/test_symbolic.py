import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfg.symbolic import (
    Num,
    ParseError,
    Subset,
    Sym,
    SymbolicError,
    SymRange,
    UnboundSymbolError,
    accesses_expr,
    eval_expr,
    expr_to_str,
    make_subset,
    num_accesses,
    parse_expr,
    parse_range,
    parse_subset,
    range_points,
    simplify,
    subset_image,
    subset_union,
)


class TestParseEval:
    def test_array_width_expression(self):
        # 2033-wide array dimensioned as N-1 elements of interior
        assert eval_expr(parse_expr("N-1"), {"N": 2033}) == 2032

    def test_literal(self):
        assert eval_expr(parse_expr("0"), {}) == 0

    def test_floordiv(self):
        # direct integer arithmetic: (7+1)//2 == 4
        assert eval_expr(parse_expr("(N+1)//2"), {"N": 7}) == 4

    def test_symbol_lookup(self):
        assert eval_expr(Sym("i"), {"i": 5}) == 5
        assert eval_expr(parse_expr("i+1"), {"i": 2}) == 3

    def test_data_dependent_width(self):
        # row-pointer difference, the width of a data-dependent range
        e = parse_expr("A_row_i1 - A_row_i")
        assert eval_expr(e, {"A_row_i": 2, "A_row_i1": 5}) == 3

    def test_floor_semantics_for_negatives(self):
        assert eval_expr(parse_expr("-7 // 2"), {}) == -4
        assert eval_expr(parse_expr("-7 % 2"), {}) == 1

    def test_unbound_symbol_named(self):
        with pytest.raises(UnboundSymbolError, match="zzz"):
            eval_expr(parse_expr("zzz + 1"), {})

    def test_division_by_zero(self):
        with pytest.raises(SymbolicError, match="zero"):
            eval_expr(parse_expr("1 // (i - 1)"), {"i": 1})

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError, match="position"):
            parse_expr("1 + + +")
        with pytest.raises(ParseError):
            parse_expr("a @ b")

    def test_min_max_and_conditions(self):
        assert eval_expr(parse_expr("min(3, N)"), {"N": 7}) == 3
        assert eval_expr(parse_expr("max(3, N)"), {"N": 7}) == 7
        assert eval_expr(parse_expr("i < 4 and not (i == 0)"), {"i": 2}) is True
        assert eval_expr(parse_expr("i < 4 or i > 10"), {"i": 12}) is True

    def test_size_atom_requires_resolver(self):
        e = parse_expr("size(S) > 0")
        assert eval_expr(e, {}, size_of=lambda name: 3) is True
        with pytest.raises(SymbolicError):
            eval_expr(e, {})


class TestSimplify:
    @pytest.mark.parametrize("text,expected", [
        ("i + 1 - 1", "i"),
        ("2*i - i", "i"),
        ("0 + j * 1", "j"),
        ("i * 0 + 3 * 4", "12"),
        ("min(i, i + 1)", "i"),
        ("max(i, i + 1)", "i + 1"),
        ("(N + 1) // 1", "N + 1"),
        ("i % 1", "0"),
    ])
    def test_rules(self, text, expected):
        assert expr_to_str(simplify(parse_expr(text))) == expected

    @given(st.text(alphabet="ijkN123+-* ()", min_size=1, max_size=24))
    @settings(max_examples=200, deadline=None)
    def test_simplify_idempotent(self, text):
        try:
            e = parse_expr(text)
        except ParseError:
            return
        once = simplify(e)
        assert simplify(once) == once

    @given(st.text(alphabet="ijkN123+-*%/ ()", min_size=1, max_size=24),
           st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5), st.integers(1, 9))
    @settings(max_examples=200, deadline=None)
    def test_print_parse_eval_roundtrip(self, text, i, j, k, n):
        syms = {"i": i, "j": j, "k": k, "N": n}
        try:
            e = parse_expr(text)
            expected = eval_expr(e, syms)
        except (ParseError, SymbolicError):
            return
        assert eval_expr(parse_expr(expr_to_str(e)), syms) == expected
        assert eval_expr(simplify(e), syms) == expected


class TestRanges:
    def test_three_instances(self):
        # a map over three instances expands to points 0, 1, 2
        assert range_points(parse_range("0:2"), {}) == [0, 1, 2]

    def test_stride(self):
        assert range_points(parse_range("0:15:4"), {}) == [0, 4, 8, 12]

    def test_empty(self):
        assert range_points(parse_range("5:4"), {}) == []

    def test_zero_stride_rejected(self):
        with pytest.raises(SymbolicError, match="stride"):
            range_points(SymRange(Num(0), Num(3), Num(0)), {})

    def test_count_formula(self):
        r = parse_range("2:11:3")
        pts = range_points(r, {})
        assert len(pts) == (11 - 2) // 3 + 1

    def test_parse_defaults_and_print(self):
        r = parse_range("0:N-1")
        assert str(r) == "0:N - 1"
        assert str(parse_range("i")) == "i"
        assert str(parse_range("0:15:4:2")) == "0:15:4:2"

    def test_tilesize_in_points(self):
        s = parse_subset("[0:4:4:2]")
        assert [p[0] for p in s.points({})] == [0, 1, 4, 5]


class TestSubsetAlgebra:
    def test_union_adjacent_hull(self):
        u = subset_union(parse_subset("[0:3]"), parse_subset("[4:7]"))
        assert str(u) == "[0:7]"

    def test_union_symbolic_points(self):
        u = subset_union(parse_subset("[i]"), parse_subset("[i+1]"))
        assert str(u) == "[i:i + 1]"
        # validate by point enumeration for i in 0..4
        for i in range(5):
            pts = set(u.points({"i": i}))
            assert {(i,), (i + 1,)} <= pts

    def test_union_idempotent(self):
        s = parse_subset("[0:N-1, k]")
        assert subset_union(s, s) == s.simplified()

    def test_union_rank_mismatch(self):
        with pytest.raises(SymbolicError, match="rank"):
            subset_union(parse_subset("[0:3]"), parse_subset("[0:3, 0:3]"))

    def test_image_per_instance_element(self):
        # per-instance element access over the full map range
        img, flags = subset_image("i", parse_range("0:N-1"), parse_subset("[i]"))
        assert str(img) == "[0:N - 1]" and not flags

    def test_image_stencil_neighborhood(self):
        img, flags = subset_image("i", parse_range("1:N-2"), parse_subset("[i-1:i+1]"))
        assert str(img) == "[0:N - 1]" and not flags

    def test_image_preserves_stride(self):
        img, _ = subset_image("i", parse_range("0:7:2"), parse_subset("[i]"))
        expected = set()
        for i in range_points(parse_range("0:7:2"), {}):
            expected.update(parse_subset("[i]").subs({"i": Num(i)}).points({}))
        assert set(img.points({})) == expected
        assert str(img.ranges[0].stride) == "2"

    def test_image_nonlinear_flagged(self):
        img, flags = subset_image("i", parse_range("0:7"), parse_subset("[(i*i)%5]"),
                                  dims=[Num(5)])
        assert flags and str(img) == "[0:4]"

    def test_num_accesses(self):
        assert num_accesses(parse_subset("[0:7]"), {}) == 8
        assert num_accesses(parse_subset("[0:M-1, k]"), {"M": 4, "k": 1}) == 4
        assert num_accesses(parse_subset("[0:1, 0:1]"), {}) == 4

    def test_accesses_expr(self):
        e = accesses_expr(parse_subset("[0:N-1, k]"))
        assert eval_expr(e, {"N": 6, "k": 0}) == 6


ranges = st.builds(
    lambda b, w, s: SymRange(Num(b), Num(b + w), Num(s)),
    st.integers(-3, 6), st.integers(0, 8), st.integers(1, 3),
)


class TestCoverageProperties:
    @given(ranges, ranges)
    @settings(max_examples=150, deadline=None)
    def test_union_covers_operands(self, r1, r2):
        a, b = make_subset(r1), make_subset(r2)
        u = subset_union(a, b)
        pts = set(u.points({}))
        assert set(a.points({})) <= pts
        assert set(b.points({})) <= pts

    @given(ranges, st.integers(-2, 2), st.integers(-3, 3))
    @settings(max_examples=150, deadline=None)
    def test_image_covers_instances(self, prange, coeff, offset):
        sub = make_subset(SymRange(
            simplify(parse_expr(f"{coeff}*i + {offset}")),
            simplify(parse_expr(f"{coeff}*i + {offset + 1}")),
        ))
        img, _ = subset_image("i", prange, sub)
        pts = set(img.points({}))
        for i in range_points(prange, {}):
            assert set(sub.subs({"i": Num(i)}).points({})) <= pts
