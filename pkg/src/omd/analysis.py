"""Static analysis of tgd sets: dependency graph, ranks, marking, classes.

Positions are ``(predicate, i)`` pairs with 1-based ``i`` and print as
``P[i]``.  Infinite rank is represented by ``math.inf``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import networkx as nx

from .dimensions import MDOntology
from .logic import Atom, Variable, variables_of
from .rules import EGD, TGD

Position = tuple  # (predicate, 1-based index)
INFINITE = math.inf


def show(p: Position) -> str:
    return f"{p[0]}[{p[1]}]"


# -- normal form ------------------------------------------------------------

def normalize_heads(tgds: Iterable[TGD]) -> list[TGD]:
    """Split conjunctive heads through an auxiliary predicate.

    ``body -> ∃z̄ H1, H2`` becomes ``body -> ∃z̄ Aux(v̄)`` plus
    ``Aux(v̄) -> Hi`` where v̄ lists all head variables.
    """
    out: list[TGD] = []
    for i, r in enumerate(tgds):
        if len(r.head) == 1:
            out.append(r)
            continue
        name = f"Aux_{r.label or i}"
        aux = Atom(name, tuple(r.head_variables))
        out.append(TGD(r.body, (aux,), r.builtins, r.label, r.layer))
        for j, h in enumerate(r.head, start=1):
            out.append(TGD((aux,), (h,), (), f"{r.label or i}_h{j}", r.layer))
    return out


def _occurrences(atoms: Iterable[Atom]) -> dict[Variable, list[Position]]:
    occ: dict[Variable, list[Position]] = {}
    for a in atoms:
        for i, t in enumerate(a.args, start=1):
            if isinstance(t, Variable):
                occ.setdefault(t, []).append((a.predicate, i))
    return occ


# -- dependency graph and ranks ---------------------------------------------

@dataclass(frozen=True)
class DependencyGraph:
    vertices: frozenset
    edges: frozenset  # (source, target, special)

    def special_edges(self) -> set[tuple]:
        return {(u, v) for u, v, s in self.edges if s}

    def ordinary_edges(self) -> set[tuple]:
        return {(u, v) for u, v, s in self.edges if not s}


def build_dependency_graph(tgds: Iterable[TGD], rich: bool = True) -> DependencyGraph:
    """Ordinary edges follow frontier variables into the head.

    Special edges run into every existential head position.  With ``rich``
    (the default) they start at every body position holding a variable;
    otherwise only at positions of frontier variables.  The rich variant is
    the one under which the running hospital ontology has the infinite-rank
    positions WorkSchedules[4] and Shifts[4].
    """
    vertices: set[Position] = set()
    edges: set[tuple] = set()
    for r in tgds:
        for a in (*r.body, *r.head):
            vertices.update((a.predicate, i) for i in range(1, a.arity + 1))
        body_occ = _occurrences(r.body)
        head_occ = _occurrences(r.head)
        existentials = set(r.existentials)
        ex_positions = [p for v in existentials for p in head_occ.get(v, ())]
        for x, body_positions in body_occ.items():
            in_head = x in head_occ
            for p in body_positions:
                if in_head:
                    for q in head_occ[x]:
                        edges.add((p, q, False))
                if in_head or rich:
                    for q in ex_positions:
                        edges.add((p, q, True))
    return DependencyGraph(frozenset(vertices), frozenset(edges))


def compute_ranks(g: DependencyGraph) -> dict[Position, float]:
    """Longest special-edge count over paths ending at each position.

    Strongly connected components with an internal special edge, and
    everything reachable from them, get ``math.inf``.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(g.vertices)
    for u, v, special in g.edges:
        if graph.has_edge(u, v):
            graph[u][v]["special"] = graph[u][v]["special"] or special
        else:
            graph.add_edge(u, v, special=special)
    cond = nx.condensation(graph)
    member_of = cond.graph["mapping"]
    comp_rank: dict[int, float] = {}
    for c in nx.topological_sort(cond):
        members = cond.nodes[c]["members"]
        rank: float = 0
        for v in members:
            for u in graph.predecessors(v):
                special = 1 if graph[u][v]["special"] else 0
                cu = member_of[u]
                if cu == c:
                    if special:
                        rank = INFINITE
                    continue
                rank = max(rank, comp_rank[cu] + special)
        comp_rank[c] = rank
    return {v: comp_rank[member_of[v]] for v in graph.nodes}


def finite_positions(ranks: dict[Position, float]) -> set[Position]:
    return {p for p, r in ranks.items() if r != INFINITE}


def is_weakly_acyclic(tgds: Iterable[TGD], rich: bool = True) -> bool:
    ranks = compute_ranks(build_dependency_graph(normalize_heads(tgds), rich))
    return all(r != INFINITE for r in ranks.values())


# -- marking ----------------------------------------------------------------

@dataclass(frozen=True)
class MarkedProgram:
    rules: tuple
    marked: tuple  # per rule: frozenset of marked body variables

    def is_marked(self, rule_index: int, v: Variable) -> bool:
        return v in self.marked[rule_index]

    def marked_positions(self) -> set[Position]:
        out: set[Position] = set()
        for r, marks in zip(self.rules, self.marked):
            for v, ps in _occurrences(r.body).items():
                if v in marks:
                    out.update(ps)
        return out

    def render(self) -> list[str]:
        """Rules with marked body variables suffixed by ``^``."""
        lines = []
        for r, marks in zip(self.rules, self.marked):
            def term(t, marks=marks):
                s = str(t)
                return s + "^" if isinstance(t, Variable) and t in marks else s
            body = ", ".join(f"{a.predicate}({','.join(term(t) for t in a.args)})" for a in r.body)
            head = ", ".join(str(h) for h in r.head)
            lines.append(f"{body} -> {head}.")
        return lines


def mark_variables(tgds: Iterable[TGD]) -> MarkedProgram:
    rules = tuple(tgds)
    marks: list[set[Variable]] = []
    for r in rules:
        head_sets = [set(h.variables()) for h in r.head]
        marks.append({x for x in r.body_variables if any(x not in hs for hs in head_sets)})
    changed = True
    while changed:
        changed = False
        positions: set[Position] = set()
        for r, m in zip(rules, marks):
            for v, ps in _occurrences(r.body).items():
                if v in m:
                    positions.update(ps)
        for r, m in zip(rules, marks):
            head_occ = _occurrences(r.head)
            for x in r.body_variables:
                if x not in m and any(p in positions for p in head_occ.get(x, ())):
                    m.add(x)
                    changed = True
    return MarkedProgram(rules, tuple(frozenset(m) for m in marks))


def _repeated(r: TGD) -> dict[Variable, list[Position]]:
    occ = _occurrences(r.body)
    return {v: ps for v, ps in occ.items() if len(ps) > 1}


def is_sticky(tgds: Iterable[TGD]) -> bool:
    marked = mark_variables(normalize_heads(tgds))
    return not any(
        v in marks for r, marks in zip(marked.rules, marked.marked) for v in _repeated(r)
    )


def weak_stickiness_witnesses(tgds: Iterable[TGD], rich: bool = True) -> list[tuple[TGD, Variable]]:
    """(rule, variable) pairs breaking weak stickiness."""
    rules = normalize_heads(tgds)
    marked = mark_variables(rules)
    finite = finite_positions(compute_ranks(build_dependency_graph(rules, rich)))
    bad = []
    for r, marks in zip(marked.rules, marked.marked):
        for v, ps in _repeated(r).items():
            if v in marks and not any(p in finite for p in ps):
                bad.append((r, v))
    return bad


def is_weakly_sticky(tgds: Iterable[TGD], rich: bool = True) -> bool:
    return not weak_stickiness_witnesses(tgds, rich)


# -- separability and non-conflict ------------------------------------------

class Separability(Enum):
    SEPARABLE = "Separable"
    UNKNOWN = "Unknown"


def check_separability_syntactic(tgds: Iterable[TGD], egds: Iterable[EGD], ont: MDOntology) -> Separability:
    """Separable when every egd head variable sits in a categorical body position.

    Never reports non-separability: the semantic property is undecidable.
    ``tgds`` is accepted for signature symmetry; the condition only inspects
    the egds against the ontology's categorical positions.
    """
    del tgds
    for e in egds:
        occ = _occurrences(e.body)
        for v in (e.left, e.right):
            if not any(ont.is_categorical_position(p, i) for p, i in occ.get(v, ())):
                return Separability.UNKNOWN
    return Separability.SEPARABLE


@dataclass(frozen=True)
class FD:
    predicate: str
    lhs: frozenset
    rhs: frozenset

    def __str__(self) -> str:
        left = ",".join(f"{self.predicate}[{i}]" for i in sorted(self.lhs))
        right = ",".join(f"{self.predicate}[{i}]" for i in sorted(self.rhs))
        return f"{{{left}}} -> {{{right}}}"


def fd_from_egd(e: EGD) -> FD | None:
    """Recognise ``R(x̄), R(x̄') -> y = y'`` key/FD shapes."""
    if len(e.body) != 2 or e.body[0].predicate != e.body[1].predicate:
        return None
    a, b = e.body
    lhs = frozenset(
        i for i, (s, t) in enumerate(zip(a.args, b.args), start=1)
        if s == t and isinstance(s, Variable)
    )
    rhs = frozenset(
        i for i, (s, t) in enumerate(zip(a.args, b.args), start=1)
        if {s, t} == {e.left, e.right}
    )
    if not rhs:
        return None
    return FD(a.predicate, lhs, rhs)


@dataclass(frozen=True)
class ConflictCheck:
    tgd: TGD
    fd: FD
    non_conflicting: bool
    condition: str | None  # "a", "b", "c" or None when conflicting


def check_non_conflicting_fds(tgds: Iterable[TGD], fds: Iterable[FD]) -> list[ConflictCheck]:
    out = []
    fds = list(fds)
    for r in tgds:
        for fd in fds:
            out.append(_conflict_check(r, fd))
    return out


def non_conflicting(tgds: Iterable[TGD], fds: Iterable[FD]) -> bool:
    return all(c.non_conflicting for c in check_non_conflicting_fds(tgds, fds))


def _conflict_check(r: TGD, fd: FD) -> ConflictCheck:
    heads = [h for h in r.head if h.predicate == fd.predicate]
    if not heads:
        return ConflictCheck(r, fd, True, "a")
    existentials = set(r.existentials)
    verdict = "b"
    for h in heads:
        u = frozenset(i for i, t in enumerate(h.args, start=1) if t not in existentials)
        if not u >= fd.lhs:
            continue
        counts = Counter(t for t in h.args if t in existentials)
        if u == fd.lhs and all(n == 1 for n in counts.values()):
            verdict = "c"
            continue
        return ConflictCheck(r, fd, False, None)
    return ConflictCheck(r, fd, True, verdict)


# -- whole-program report ---------------------------------------------------

@dataclass
class ClassificationReport:
    ranks: dict
    marked: MarkedProgram
    weakly_acyclic: bool
    sticky: bool
    weakly_sticky: bool
    separability: Separability | None = None
    ws_witnesses: list = field(default_factory=list)

    def to_json(self) -> dict:
        def rank(r: float):
            return "inf" if r == INFINITE else int(r)

        return {
            "schema": "omd.classify/1",
            "ranks": {show(p): rank(r) for p, r in sorted(self.ranks.items())},
            "marking": self.marked.render(),
            "classes": {
                "WA": self.weakly_acyclic,
                "Sticky": self.sticky,
                "WS": self.weakly_sticky,
            },
            "separability": self.separability.value if self.separability else None,
        }

    def render(self) -> str:
        def yn(b: bool) -> str:
            return "yes" if b else "no"

        lines = ["ranks:"]
        for p, r in sorted(self.ranks.items()):
            lines.append(f"  {show(p)}\t{'inf' if r == INFINITE else int(r)}")
        lines.append("marking:")
        lines.extend(f"  {line}" for line in self.marked.render())
        if self.separability is not None:
            lines.append(f"separability: {self.separability.value}")
        lines.append(f"WA: {yn(self.weakly_acyclic)}, Sticky: {yn(self.sticky)}, WS: {yn(self.weakly_sticky)}")
        return "\n".join(lines) + "\n"


def classify(tgds: list[TGD], egds: list[EGD] = (), ont: MDOntology | None = None,
             rich: bool = True) -> ClassificationReport:
    rules = normalize_heads(tgds)
    ranks = compute_ranks(build_dependency_graph(rules, rich))
    marked = mark_variables(rules)
    witnesses = weak_stickiness_witnesses(tgds, rich)
    sep = check_separability_syntactic(tgds, egds, ont) if ont is not None and egds else None
    return ClassificationReport(
        ranks=ranks,
        marked=marked,
        weakly_acyclic=all(r != INFINITE for r in ranks.values()),
        sticky=is_sticky(tgds),
        weakly_sticky=not witnesses,
        separability=sep,
        ws_witnesses=witnesses,
    )


def all_variables(tgds: Iterable[TGD]) -> list[Variable]:
    return variables_of(a for r in tgds for a in (*r.body, *r.head))
