from __future__ import annotations

import pytest
from hypothesis import given, settings

from helpers import c, load, md_ontologies
from omd.dimensions import (
    DimensionInstance,
    DimensionSchema,
    MDOntology,
    classify_navigation,
    generate_basic_constraints,
    rollup,
    validate_dimension,
    validate_dimensional_tgd,
    validate_ontology,
    validate_schema,
)
from omd.errors import NotComparable
from omd.logic import Atom, Constant, Instance, Variable, atom
from omd.rules import TGD
from omd.syntax import parse_program


@pytest.fixture(scope="module")
def hospital():
    return MDOntology.from_program(load("hospital.dlp"))


def _dim(ont, name):
    for s, inst in ont.dims:
        if s.name == name:
            return s, inst
    raise KeyError(name)


def dfs_rollup(inst: DimensionInstance, low: str, high: str) -> set:
    """Oracle: depth-first walk up the child-parent pairs from each member."""
    succ: dict = {}
    for e, f in inst.pairs():
        succ.setdefault(e, set()).add(f)
    out = set()
    for e in inst.category_members(low):
        stack, seen = [e], set()
        while stack:
            x = stack.pop()
            for f in succ.get(x, ()):
                if f not in seen:
                    seen.add(f)
                    stack.append(f)
        out |= {(e, f) for f in seen if inst.membership(f) == high}
    return out


def test_hospital_fixture_is_clean(hospital):
    assert validate_ontology(hospital).violations == []


def test_schema_shape(hospital):
    s, _ = _dim(hospital, "Hospital")
    assert s.base == "Ward" and s.top == "AllHospital"
    assert s.ancestors("Ward") == {"Unit", "Institution", "AllHospital"}
    assert s.reaches("Unit", "Unit") and not s.reaches("Unit", "Ward")


@pytest.mark.parametrize("dim,low,high", [
    ("Hospital", "Ward", "Unit"),
    ("Hospital", "Ward", "Institution"),
    ("Hospital", "Unit", "AllHospital"),
    ("Temporal", "Day", "Year"),
    ("Temporal", "Time", "Month"),
])
def test_rollup_matches_dfs(hospital, dim, low, high):
    _, inst = _dim(hospital, dim)
    got = rollup(inst, low, high)
    assert got == dfs_rollup(inst, low, high)
    assert got


def test_rollup_ward_unit_values(hospital):
    _, inst = _dim(hospital, "Hospital")
    got = rollup(inst, "Ward", "Unit")
    assert (Constant("w1"), Constant("standard")) in got
    assert (Constant("w3"), Constant("intensive")) in got


def test_rollup_rejects_incomparable(hospital):
    _, inst = _dim(hospital, "Hospital")
    with pytest.raises(NotComparable):
        rollup(inst, "Unit", "Ward")


def test_schema_cycle_is_reported():
    s = DimensionSchema("D", ("A", "B"), (("A", "B", "AB"), ("B", "A", "BA")))
    assert validate_schema(s).violations


def test_instance_violations():
    s = DimensionSchema("D", ("A", "B", "All"), (("A", "B", "AB"), ("B", "All", "BAll")))
    facts = Instance([
        atom("A", "x"), atom("B", "p"), atom("B", "q"), atom("All", "all"),
        atom("AB", "x", "p"), atom("AB", "x", "q"), atom("BAll", "p", "all"),
    ])
    codes = {v.code for v in validate_dimension(s, DimensionInstance.from_instance(s, facts)).violations}
    assert "single-parent" in codes
    assert "all-unreachable" in codes  # q never reaches all


def test_cross_dimension_member_is_rejected():
    p = parse_program("""
        @md.
        @dimension A { K. }
        @dimension B { L. }
        K(m). L(m).
    """)
    codes = {v.code for v in validate_ontology(MDOntology.from_program(p)).violations}
    assert "cross-dimension-member" in codes


def test_basic_constraints(hospital):
    bc = generate_basic_constraints(hospital)
    labels = {r.label for r in (*bc.ncs, *bc.egds)}
    assert {"key_WardUnit", "ref_WardUnit_1", "ref_WardUnit_2", "ref_Shifts_1"} <= labels
    keyed = generate_basic_constraints(hospital, with_categorical_keys=True)
    assert any(e.label.startswith("ckey_Shifts") for e in keyed.egds)


def test_navigation_directions(hospital):
    s1, s2 = hospital.tgds[:2]
    assert classify_navigation(s1, hospital).kind == "upward"
    assert classify_navigation(s2, hospital).kind == "downward"
    assert classify_navigation(s1, hospital).steps == {"Hospital": [("upward", 1)]}


def test_dimensional_tgd_shape_errors(hospital):
    W, D, N, S, U = (Variable(v) for v in "WDNSU")
    bad = TGD((Atom("Shifts", (W, D, N, S)),), (Atom("WorkSchedules", (U, D, N, S)),))
    codes = {v.code for v in validate_dimensional_tgd(bad, hospital).violations}
    assert "existential-categorical" in codes
    join = TGD((Atom("Shifts", (W, D, N, S)), Atom("Shifts", (W, D, S, N))),
               (Atom("Shifts", (W, D, N, S)),))
    codes = {v.code for v in validate_dimensional_tgd(join, hospital).violations}
    assert "join-noncategorical" in codes


@settings(max_examples=50, deadline=None)
@given(md_ontologies())
def test_generated_ontologies_validate(po):
    _, ont = po
    assert validate_ontology(ont).violations == []
    for schema, inst in ont.dims:
        for low in schema.categories:
            for high in schema.ancestors(low):
                assert rollup(inst, low, high) == dfs_rollup(inst, low, high)


def test_membership_lookup(hospital):
    _, inst = _dim(hospital, "Hospital")
    assert inst.membership(Constant("w2")) == "Ward"
    assert inst.membership(Constant("nope")) is None
    assert c("w1") == (Constant("w1"),)
