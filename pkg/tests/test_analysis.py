from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import VARS, layered_programs, load, md_ontologies
from omd.analysis import (
    FD,
    INFINITE,
    Separability,
    build_dependency_graph,
    check_non_conflicting_fds,
    check_separability_syntactic,
    classify,
    compute_ranks,
    fd_from_egd,
    is_sticky,
    is_weakly_acyclic,
    is_weakly_sticky,
    mark_variables,
    non_conflicting,
    normalize_heads,
    show,
)
from omd.dimensions import MDOntology
from omd.logic import Atom, Variable
from omd.rules import TGD
from omd.syntax import parse_program


def oracle_ranks(g) -> dict:
    """Rank by walk lengths: inf when a special-edge cycle reaches the node,
    otherwise the longest special count found by Bellman-Ford relaxation."""
    succ: dict = {v: set() for v in g.vertices}
    for u, v, _ in g.edges:
        succ[u].add(v)

    def reach(src):
        seen, stack = {src}, [src]
        while stack:
            for y in succ[stack.pop()]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    reaches = {v: reach(v) for v in g.vertices}
    bad = set()
    for u, v, special in g.edges:
        if special and u in reaches[v]:
            bad |= reaches[v]
    rank = {v: (math.inf if v in bad else 0) for v in g.vertices}
    for _ in range(len(g.vertices) + 1):
        for u, v, special in g.edges:
            if v in bad:
                continue
            rank[v] = max(rank[v], rank[u] + (1 if special else 0))
    return rank


def _ranks(name, rich=True):
    r = compute_ranks(build_dependency_graph(normalize_heads(load(name).tgds), rich))
    return {show(p): v for p, v in r.items()}


def test_weakly_acyclic_ranks_and_wa():
    assert _ranks("weakly-acyclic.dlp") == {"U[1]": 0, "R[1]": 0, "P[1]": 0, "R[2]": 1, "P[2]": 1}
    assert is_weakly_acyclic(load("weakly-acyclic.dlp").tgds)


def test_not_sticky_marking():
    rep = classify(load("not-sticky.dlp").tgds)
    assert rep.marked.render() == [
        "R(X^,Y), P(X^,Z^) -> S(X,Y,Z).",
        "S(X^,Y,Z^) -> U(Y).",
        "U(X) -> R(Y,X).",
    ]
    assert not rep.sticky


def test_ws_join_ws_but_prime_not():
    p, q = load("ws-join.dlp").tgds, load("ws-join-prime.dlp").tgds
    assert is_weakly_sticky(p) and not is_weakly_sticky(q)
    assert {k for k, v in _ranks("ws-join.dlp").items() if v != INFINITE} == {"U[1]"}
    assert all(v == INFINITE for v in _ranks("ws-join-prime.dlp").values())


def test_hospital_infinite_positions():
    ranks = _ranks("hospital.dlp")
    assert {k for k, v in ranks.items() if v == INFINITE} == {"WorkSchedules[4]", "Shifts[4]"}
    rep = classify(load("hospital.dlp").tgds)
    assert not rep.weakly_acyclic and rep.weakly_sticky


def test_same_shift_is_not_ws():
    rep = classify(load("same-shift.dlp").tgds)
    assert not rep.weakly_sticky
    assert [str(v) for _, v in rep.ws_witnesses] == ["S"]


def test_frontier_only_variant_is_weaker():
    # without edges from non-frontier body positions the Shifts cycle looks finite
    frontier = _ranks("hospital.dlp", rich=False)
    assert all(v != INFINITE for v in frontier.values())


def test_multi_atom_heads_are_normalised():
    (r,) = parse_program("R(X) -> S(X, Z), T(Z).").tgds
    parts = normalize_heads([r])
    assert len(parts) == 3
    assert all(len(p.head) == 1 for p in parts)


def test_report_json_schema():
    js = classify(load("ws-join.dlp").tgds).to_json()
    assert js["schema"] == "omd.classify/1"
    assert js["ranks"]["R[1]"] == "inf"
    assert js["classes"] == {"WA": False, "Sticky": False, "WS": True}


def test_fd_and_conflicts():
    p = parse_program("""
        T(X, Y) -> R(X, Y, Z).
        R(X, Y, Z), R(X, Y2, Z2) -> Y = Y2.
    """)
    (e,) = p.egds
    fd = fd_from_egd(e)
    assert fd == FD("R", frozenset({1}), frozenset({2}))
    # the head covers the key with a non-existential beyond it: conflicting
    assert not non_conflicting(p.tgds, [fd])
    ok = parse_program("T(X) -> R(X, Y, Z).").tgds
    (chk,) = check_non_conflicting_fds(ok, [fd])
    assert chk.non_conflicting and chk.condition == "c"
    other = parse_program("T(X) -> Q(X).").tgds
    assert check_non_conflicting_fds(other, [fd])[0].condition == "a"


def test_syntactic_separability():
    therm = load("therm.dlp")
    ont = MDOntology.from_program(therm)
    assert check_separability_syntactic(therm.tgds, therm.egds, ont) is Separability.SEPARABLE
    keys = load("board-keys.dlp")
    ont = MDOntology.from_program(keys)
    assert check_separability_syntactic(keys.tgds, keys.egds, ont) is Separability.UNKNOWN


@st.composite
def tgd_sets(draw):
    preds = (("R", 2), ("S", 2), ("U", 1))
    rules = []
    for i in range(draw(st.integers(1, 4))):
        body = []
        for _ in range(draw(st.integers(1, 3))):
            p, k = draw(st.sampled_from(preds))
            body.append(Atom(p, tuple(draw(st.sampled_from(VARS[:3])) for _ in range(k))))
        bvars = sorted({t for a in body for t in a.args}, key=str)
        pool = bvars + [Variable("E")]
        p, k = draw(st.sampled_from(preds))
        rules.append(TGD(tuple(body), (Atom(p, tuple(draw(st.sampled_from(pool)) for _ in range(k))),),
                         label=f"g{i}"))
    return rules


@settings(max_examples=200, deadline=None)
@given(tgd_sets())
def test_ranks_match_walk_oracle(tgds):
    for rich in (True, False):
        g = build_dependency_graph(normalize_heads(tgds), rich)
        assert compute_ranks(g) == oracle_ranks(g)


@settings(max_examples=200, deadline=None)
@given(tgd_sets())
def test_class_inclusions(tgds):
    rep = classify(tgds)
    if rep.weakly_acyclic or rep.sticky:
        assert rep.weakly_sticky


@settings(max_examples=100, deadline=None)
@given(tgd_sets())
def test_rich_ranks_dominate_frontier_ranks(tgds):
    rich = compute_ranks(build_dependency_graph(tgds, True))
    front = compute_ranks(build_dependency_graph(tgds, False))
    assert all(rich[p] >= front[p] for p in front)


@settings(max_examples=100, deadline=None)
@given(tgd_sets())
def test_marking_is_closed(tgds):
    marked = mark_variables(tgds)
    positions = marked.marked_positions()
    for i, r in enumerate(tgds):
        for h in r.head:
            for j, t in enumerate(h.args, start=1):
                if (h.predicate, j) in positions and t in r.body_variables:
                    assert marked.is_marked(i, t)


@settings(max_examples=50, deadline=None)
@given(layered_programs())
def test_layered_programs_are_weakly_acyclic(p):
    assert is_weakly_acyclic(p.tgds)


@settings(max_examples=100, deadline=None)
@given(md_ontologies())
def test_md_ontologies_are_weakly_sticky(po):
    prog, ont = po
    assert classify(prog.tgds, ont=ont).weakly_sticky


def test_sticky_simple():
    assert is_sticky(load("weakly-acyclic.dlp").tgds)
    assert not is_sticky(load("not-sticky.dlp").tgds)


@pytest.mark.parametrize("name", ["weakly-acyclic.dlp", "not-sticky.dlp", "ws-join.dlp", "ws-join-prime.dlp",
                                  "hospital.dlp", "same-shift.dlp", "infinite-chain.dlp"])
def test_fixture_ranks_match_oracle(name):
    g = build_dependency_graph(normalize_heads(load(name).tgds))
    assert compute_ranks(g) == oracle_ranks(g)
