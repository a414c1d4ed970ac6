from __future__ import annotations

import pytest
from hypothesis import given, settings

from helpers import FIX, c, instances, text
from omd.errors import (
    ArityMismatch,
    ExistentialInCategoricalPosition,
    ExistentialInEgd,
    NegationOutsideNC,
    ParseError,
)
from omd.logic import UCQ, Atom, Constant, Null, Variable
from omd.syntax import (
    normalize_timestamp,
    parse_instance,
    parse_program,
    parse_query,
    program_splits,
    serialize_instance,
    serialize_program,
    serialize_query,
)

PROGRAMS = sorted(p.name for p in FIX.glob("*.dlp"))
FACTS = sorted(p.name for p in FIX.glob("*.facts"))
QUERIES = sorted(p.name for p in FIX.glob("*.q"))


def test_rule_kinds_and_labels():
    p = parse_program("""
        R(a, b).
        s1: R(X, Y) -> S(Y, Z).
        e: S(X, Y), S(X, Z) -> Y = Z.
        @closed P.
        n: R(X, Y), not P(X) -> #false.
    """)
    assert p.facts == [Atom("R", c("a", "b"))]
    (t,) = p.tgds
    assert t.label == "s1" and t.existentials == [Variable("Z")]
    (e,) = p.egds
    assert (e.left, e.right) == (Variable("Y"), Variable("Z"))
    (n,) = p.ncs
    assert n.negated == (Atom("P", (Variable("X"),)),)


def test_categorical_split_and_dimension_block():
    p = parse_program(text("hospital.dlp"))
    assert p.md
    ws = p.categoricals["WorkSchedules"]
    assert ws.categories == ("Unit", "Day") and ws.split == 2
    assert {d.name for d in p.dimensions} == {"Hospital", "Temporal"}
    assert program_splits(p)["Shifts"] == 2


def test_timestamps_are_normalised():
    assert normalize_timestamp("12:10-Sep/1/2016") == "2016/09/01-12:10"
    assert normalize_timestamp("Aug/21/2016") == "2016/08/21"
    assert normalize_timestamp("tom waits") == "tom waits"
    (a,) = parse_instance('Day("Sep/6/2016").')
    assert a.args == (Constant("2016/09/06"),)


def test_nulls_in_instances():
    inst = parse_instance("R(a, ?z3).")
    assert Null(3) in inst.nulls()


def test_query_with_union_and_comparison():
    q = parse_query("?(X) :- R(X, b), X != c | P(X).")
    assert isinstance(q, UCQ) and len(q.disjuncts) == 2
    assert parse_query("?() :- R(X, X).").arity == 0


@pytest.mark.parametrize("src,exc", [
    ("R(a, b). R(a).", ArityMismatch),
    ("R(X, Y), not P(X) -> S(X).", NegationOutsideNC),
    ("R(X) -> X = Z.", ExistentialInEgd),
    ("@md. @categorical C(Unit; N). R(X) -> C(Z; X).", ExistentialInCategoricalPosition),
    ("R(a, b)", ParseError),
    ("R(X) -> S(X) .. ", ParseError),
])
def test_parse_errors(src, exc):
    with pytest.raises(exc):
        parse_program(src)


def test_parse_error_has_location():
    with pytest.raises(ParseError) as info:
        parse_program("R(a).\nS(b,, c).")
    assert info.value.line == 2


@pytest.mark.parametrize("name", PROGRAMS)
def test_program_round_trip(name):
    p = parse_program(text(name))
    once = serialize_program(p)
    again = parse_program(once)
    assert again == p
    assert serialize_program(again) == once


@pytest.mark.parametrize("name", FACTS)
def test_instance_round_trip(name):
    inst = parse_instance(text(name))
    dump = serialize_instance(inst)
    assert parse_instance(dump) == inst
    assert serialize_instance(parse_instance(dump)) == dump


@pytest.mark.parametrize("name", QUERIES)
def test_query_round_trip(name):
    q = parse_query(text(name))
    assert parse_query(serialize_query(q)) == q


@settings(max_examples=100, deadline=None)
@given(instances())
def test_random_instance_round_trip(inst):
    assert parse_instance(serialize_instance(inst)) == inst


def test_quoted_constants_survive():
    inst = parse_instance('T("tom waits", "a\\"b", 37.0).')
    assert parse_instance(serialize_instance(inst)) == inst
