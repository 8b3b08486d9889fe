import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import contingency_tables
from qlab import cones as cn
from qlab.cones import BoundaryConfig, CorneredOpenBook, Piece, PieceType, Verdict

# one V0 piece of multiplicity 2 meeting two V1 pieces
SPLIT = BoundaryConfig((2,), (1, 1))


def matrices(books):
    return sorted(tuple(b.matrix.ravel()) for b in books)


def test_enumeration_examples():
    for n in (1, 2, 3, 4):
        books = cn.enumerate_admissible_books(BoundaryConfig((n,), (1,) * n))
        assert len(books) == 1
        assert [(q.k0, q.multiplicity) for q in books[0].quadrants] == [(0, 1)] * n
        assert sorted(q.k1 for q in books[0].quadrants) == list(range(n))
    single = cn.enumerate_admissible_books(BoundaryConfig((1,), (1,)))
    assert len(single) == 1 and len(single[0].quadrants) == 1


def test_split_config_has_one_book_with_half_density():
    # with a single V0 piece the pairing is forced, so the count is one
    books = cn.enumerate_admissible_books(SPLIT)
    assert len(books) == 1
    assert cn.book_density(books[0]) == Fraction(1, 2) == Fraction(SPLIT.q, 4)


def test_enumeration_matches_contingency_oracle():
    for cfg in cn.boundary_configs(4, 3):
        got = matrices(cn.enumerate_admissible_books(cfg))
        ref = sorted(tuple(m.ravel()) for m in contingency_tables(cfg.q0, cfg.q1))
        assert got == ref


def test_infeasible_and_precondition():
    assert cn.enumerate_admissible_books(BoundaryConfig((2,), (1,))) == []
    with pytest.raises(ValueError):
        cn.enumerate_admissible_books(BoundaryConfig((1, 1), (2,)), max_sheets=1)


def test_density_examples():
    cfg = BoundaryConfig((3,), (3,))
    book = CorneredOpenBook(cfg, (cn.Quadrant(0, 0, 3),))
    assert cn.book_density(book) == Fraction(3, 4)
    for cfg in (SPLIT, BoundaryConfig((2, 1), (1, 2))):
        for b in cn.enumerate_admissible_books(cfg):
            assert abs(cn.quadrature_density(b) - float(cn.book_density(b))) < 1e-3


def test_every_book_has_density_q_over_4():
    for cfg in cn.boundary_configs(4, 3):
        for b in cn.enumerate_admissible_books(cfg):
            assert b.is_admissible()
            assert cn.book_density(b) == Fraction(cfg.q, 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.data())
def test_enumeration_closed_under_sheet_reordering(q0, data):
    q1 = data.draw(st.permutations(q0))
    cfg = BoundaryConfig(tuple(q0), tuple(q1))
    books = cn.enumerate_admissible_books(cfg)
    assert len(set(matrices(books))) == len(books)
    for b in books:
        shuffled = data.draw(st.permutations(b.quadrants))
        again = CorneredOpenBook(cfg, tuple(shuffled))
        assert CorneredOpenBook.from_matrix(cfg, again.matrix) == b


def test_book_serialization_round_trip():
    for b in cn.enumerate_admissible_books(BoundaryConfig((2, 1), (1, 2))):
        text = b.dumps()
        assert CorneredOpenBook.loads(text) == b
        assert '"density": "3/4"' in text


def test_classify_examples():
    res = cn.classify_2d_cone([("TYPE1", 2), ("TYPE1", 1)])
    assert res.verdict is Verdict.MINIMAL_BOOK and res.density == Fraction(3, 4) and res.q == 3
    res = cn.classify_2d_cone([("TYPE1", 2), ("TYPE3", 1)])
    assert res.verdict is Verdict.DENSITY_ABOVE_Q4 and res.density == Fraction(2, 4) + Fraction(1, 4)
    res = cn.classify_2d_cone([("TYPE1", 1), ("FULL_PLANE", 1)])
    assert res.verdict is Verdict.INADMISSIBLE and res.density == Fraction(5, 4)
    res = cn.classify_2d_cone([("TYPE1", 2), ("TYPE2", 1), ("TYPE1", 1)])
    assert res.verdict is Verdict.INADMISSIBLE


def test_classify_with_labelled_boundary():
    pieces = [Piece(PieceType.TYPE1, 1, (0, 0)), Piece(PieceType.TYPE1, 1, (0, 1))]
    assert cn.classify_2d_cone(pieces, SPLIT).verdict is Verdict.MINIMAL_BOOK
    # the same-side piece moves one unit from V1_2 to V1_1, the TYPE1 pair puts it back
    pieces = [Piece(PieceType.TYPE1, 2, (0, 0)), Piece(PieceType.TYPE3, 1, (1, 1, 0))]
    res = cn.classify_2d_cone(pieces, SPLIT)
    assert res.verdict is Verdict.DENSITY_ABOVE_Q4 and res.density == Fraction(3, 4)


def test_inconsistent_bookkeeping_raises():
    with pytest.raises(cn.BookkeepingError):
        cn.classify_2d_cone([Piece(PieceType.TYPE1, 1, (0, 0))], SPLIT)
    with pytest.raises(cn.BookkeepingError):
        cn.classify_2d_cone([("TYPE2", 1)])
    with pytest.raises(cn.BookkeepingError):
        cn.classify_2d_cone([("TYPE1", -1)])
    with pytest.raises(cn.BookkeepingError):
        cn.classify_2d_cone([Piece(PieceType.TYPE3, 1, (0, 0, 0))], SPLIT)


def test_census_inequality_and_equality_case():
    rows = cn.census(3, 2)
    assert rows
    for row in rows:
        q = Fraction(row.config.q, 4)
        assert row.classification.density >= q
        assert (row.classification.density == q) == row.all_type1
        assert (row.classification.verdict is Verdict.MINIMAL_BOOK) == row.all_type1


def test_census_minimal_rows_are_exactly_the_books():
    rows = cn.census(3, 2)
    minimal = [r for r in rows if r.classification.verdict is Verdict.MINIMAL_BOOK]
    books = sum(len(cn.enumerate_admissible_books(c)) for c in cn.boundary_configs(3, 2))
    assert len(minimal) == books
    for r in minimal:
        mat = np.zeros((r.config.n0, r.config.n1), dtype=int)
        for p in r.pieces:
            mat[p.ends] += p.multiplicity
        assert CorneredOpenBook.from_matrix(r.config, mat).is_admissible()


def test_uniqueness_gap_examples():
    assert cn.uniqueness_gap(BoundaryConfig((1,), (1,))) == cn.INF
    assert cn.uniqueness_gap(SPLIT) == cn.INF
    assert cn.uniqueness_gap(BoundaryConfig((2,), (3,))) == cn.INF
    gap = cn.uniqueness_gap(BoundaryConfig((1, 1), (1, 1)))
    assert 0 < gap < math.inf


def test_book_measures_separate_distinct_books():
    cfg = BoundaryConfig((1, 1), (1, 1))
    books = cn.enumerate_admissible_books(cfg)
    assert len(books) == 2
    m = cn.book_measure(books[0])
    assert m.total == pytest.approx(2 * cn.book_measure(CorneredOpenBook(cfg, books[0].quadrants[:1])).total)
