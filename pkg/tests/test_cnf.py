import pytest
from hypothesis import given, strategies as st

from handoff_sat.cnf import (DimacsError, Formula, negate, parse_dimacs, to_dimacs, to_internal,
                             write_dimacs)
from handoff_sat.generators import gen_sr_pair


def test_parse_single_unit():
    f = parse_dimacs("p cnf 1 1\n1 0")
    assert f == Formula(1, ((1,),))


def test_parse_two_clauses():
    f = parse_dimacs("p cnf 2 2\n1 -2 0\n2 0")
    assert f.num_vars == 2
    assert f.clauses == ((1, -2), (2,))


def test_parse_rejects_out_of_range_literal():
    with pytest.raises(DimacsError, match="out of range"):
        parse_dimacs("p cnf 1 1\n2 0")


@pytest.mark.parametrize("text", [
    "p cnf 2\n1 0",
    "p dnf 2 1\n1 0",
    "p cnf x 1\n1 0",
    "1 0\n",
    "",
])
def test_parse_rejects_bad_header(text):
    with pytest.raises(DimacsError):
        parse_dimacs(text)


def test_parse_missing_terminator():
    with pytest.raises(DimacsError, match="terminating 0"):
        parse_dimacs("p cnf 2 1\n1 2")


def test_parse_clause_count_mismatch():
    with pytest.raises(DimacsError, match="declares 2"):
        parse_dimacs("p cnf 2 2\n1 2 0")


def test_parse_whitespace_comments_and_multiline_clauses():
    f = parse_dimacs("c hello\n  p  cnf 3 2 \n1\t-3\n 0 2 3 0\n\n")
    assert f.clauses == ((1, -3), (2, 3))


def test_parse_dedups_and_drops_tautologies():
    f = parse_dimacs("p cnf 2 3\n1 1 2 0\n1 -1 0\n-2 0\n")
    assert f.clauses == ((1, 2), (-2,))
    assert f.tautologies_dropped == 1


def test_formula_rejects_variable_zero():
    with pytest.raises(ValueError):
        Formula(2, ((0, 1),))


def test_write_contains_header_and_clause():
    text = write_dimacs(Formula(1, ((1,),)))
    assert "p cnf 1 1" in text
    assert "1 0" in text.splitlines()


def test_write_empty_formula():
    assert write_dimacs(Formula(0, ())).strip() == "p cnf 0 0"
    assert parse_dimacs(write_dimacs(Formula(0, ()))) == Formula(0, ())


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_sr10(seed):
    pair = gen_sr_pair(10, seed)
    for f in (pair.sat, pair.unsat):
        assert parse_dimacs(write_dimacs(f)).canonical() == f.canonical()


clauses_st = st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v])), min_size=1, max_size=5),
             max_size=12)))


@given(clauses_st)
def test_round_trip_property(data):
    n, clauses = data
    f = Formula.from_clauses(n, clauses)
    assert parse_dimacs(write_dimacs(f, ["generated"])).canonical() == f.canonical()


@given(st.integers(-10**6, 10**6).filter(bool))
def test_literal_encoding(lit):
    assert negate(negate(lit)) == lit
    assert to_dimacs(to_internal(lit)) == lit
    assert to_internal(-lit) == to_internal(lit) ^ 1
