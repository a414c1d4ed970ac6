"""Dimension schemas and instances, categorical relations, basic constraints.

A dimension is a lattice of categories (unary predicates) linked by
child-parent predicates.  Its instance is read straight from the category
and child-parent facts of an extensional instance.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import NotComparable
from .logic import Atom, Instance, Term, Variable
from .rules import EGD, NC, TGD, CategoricalPredicate, Program


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    witness: tuple = ()

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, *witness: object) -> None:
        self.violations.append(Violation(code, message, tuple(witness)))

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def __bool__(self) -> bool:
        return self.ok


# -- schema -----------------------------------------------------------------

@dataclass(frozen=True)
class DimensionSchema:
    """Categories plus child-parent edges (child, parent, predicate)."""

    name: str
    categories: tuple
    edges: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    def parents(self, k: str) -> list[str]:
        return [p for c, p, _ in self.edges if c == k]

    def children(self, k: str) -> list[str]:
        return [c for c, p, _ in self.edges if p == k]

    @property
    def tops(self) -> list[str]:
        return [k for k in self.categories if not self.parents(k)]

    @property
    def bases(self) -> list[str]:
        return [k for k in self.categories if not self.children(k)]

    @property
    def top(self) -> str | None:
        tops = self.tops
        return tops[0] if len(tops) == 1 else None

    @property
    def base(self) -> str | None:
        bases = self.bases
        return bases[0] if len(bases) == 1 else None

    @property
    def child_parent_predicates(self) -> list[str]:
        return [p for _, _, p in self.edges]

    def edge_for(self, predicate: str) -> tuple[str, str] | None:
        for c, p, name in self.edges:
            if name == predicate:
                return c, p
        return None

    def ancestors(self, k: str) -> set[str]:
        """Categories reachable by one or more ↗ steps."""
        seen: set[str] = set()
        stack = list(self.parents(k))
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(self.parents(x))
        return seen

    def reaches(self, low: str, high: str) -> bool:
        """low ↗* high (reflexive)."""
        return low == high or high in self.ancestors(low)


def validate_schema(schema: DimensionSchema) -> ValidationReport:
    rep = ValidationReport()
    cats = set(schema.categories)
    preds: dict[str, int] = defaultdict(int)
    for c, p, name in schema.edges:
        preds[name] += 1
        if c not in cats or p not in cats:
            rep.add("unknown-category", f"edge {name} links undeclared categories", c, p)
        if c == p:
            rep.add("reflexive-edge", f"{c} is its own parent", c)
    for name, n in preds.items():
        if n > 1:
            rep.add("duplicate-predicate", f"{name} is bound to {n} edges", name)
    for k in schema.categories:
        if k in schema.ancestors(k) and all(c != p for c, p, _ in schema.edges if c == k):
            rep.add("cycle", f"category {k} lies on a cycle", k)
    tops = schema.tops
    if len(tops) != 1:
        rep.add("top", f"expected one top category, found {len(tops)}", *tops)
    else:
        top = tops[0]
        for k in schema.categories:
            if not schema.reaches(k, top):
                rep.add("top-unreachable", f"{k} does not reach {top}", k)
    bases = schema.bases
    if len(bases) != 1:
        rep.add("base", f"expected one base category, found {len(bases)}", *bases)
    for c, p, name in schema.edges:
        for mid in schema.categories:
            if mid in (c, p):
                continue
            if schema.reaches(c, mid) and schema.reaches(mid, p):
                rep.add("shortcut", f"edge {c}->{p} bypasses {mid}", c, p, mid)
                break
    return rep


# -- instance ---------------------------------------------------------------

@dataclass
class DimensionInstance:
    schema: DimensionSchema
    members: dict  # Constant -> category (first seen)
    lt: set  # (child member, parent member, predicate)
    conflicts: dict = field(default_factory=dict)  # member -> set of categories

    @classmethod
    def from_instance(cls, schema: DimensionSchema, instance: Instance) -> "DimensionInstance":
        members: dict = {}
        conflicts: dict = defaultdict(set)
        for k in schema.categories:
            for (m,) in sorted(instance.tuples(k), key=str):
                if m in members and members[m] != k:
                    conflicts[m] |= {members[m], k}
                members.setdefault(m, k)
        lt = set()
        for _, _, p in schema.edges:
            for e, f in instance.tuples(p):
                lt.add((e, f, p))
        return cls(schema, members, lt, dict(conflicts))

    def membership(self, member: Term) -> str | None:
        return self.members.get(member)

    def category_members(self, k: str) -> set:
        return {m for m, c in self.members.items() if c == k}

    def pairs(self) -> set[tuple]:
        return {(e, f) for e, f, _ in self.lt}


def validate_dimension(schema: DimensionSchema, inst: DimensionInstance) -> ValidationReport:
    rep = validate_schema(schema)
    for m, cats in sorted(inst.conflicts.items(), key=lambda kv: str(kv[0])):
        rep.add("membership-conflict", f"{m} belongs to {sorted(cats)}", m)
    parents_by: dict = defaultdict(set)
    for e, f, p in sorted(inst.lt, key=str):
        edge = schema.edge_for(p)
        if edge is None:
            continue
        c, k = edge
        if inst.membership(e) != c or inst.membership(f) != k:
            rep.add("parallel", f"{p}({e},{f}) does not follow {c}->{k}", e, f)
        parents_by[(e, k)].add(f)
    for (e, k), fs in sorted(parents_by.items(), key=str):
        if len(fs) > 1:
            rep.add("single-parent", f"{e} has {len(fs)} parents in {k}", e, *sorted(fs, key=str))
    top = schema.top
    if top is not None:
        alls = inst.category_members(top)
        if len(alls) != 1:
            rep.add("all-member", f"top category {top} has {len(alls)} members", *sorted(alls, key=str))
        else:
            (all_member,) = alls
            up = _closure(inst.pairs())
            for m in sorted(inst.members, key=str):
                if m != all_member and (m, all_member) not in up:
                    rep.add("all-unreachable", f"{m} does not roll up to {all_member}", m)
    return rep


def _closure(pairs: set[tuple]) -> set[tuple]:
    """Transitive closure by semi-naive iteration."""
    succ: dict = defaultdict(set)
    for a, b in pairs:
        succ[a].add(b)
    closure = set(pairs)
    delta = set(pairs)
    while delta:
        new = {(a, c) for a, b in delta for c in succ.get(b, ())} - closure
        closure |= new
        delta = new
    return closure


def rollup(inst: DimensionInstance, low: str, high: str) -> set[tuple]:
    """{(e, e') | e in low, e' in high, e <* e'}."""
    schema = inst.schema
    if low == high or not schema.reaches(low, high):
        raise NotComparable(low, high)
    closure = _closure(inst.pairs())
    return {
        (e, f) for e, f in closure
        if inst.membership(e) == low and inst.membership(f) == high
    }


# -- MD ontology ------------------------------------------------------------

@dataclass
class MDOntology:
    schemas: list
    instance: Instance
    categoricals: dict
    tgds: list = field(default_factory=list)
    egds: list = field(default_factory=list)
    ncs: list = field(default_factory=list)

    @classmethod
    def from_program(cls, program: Program) -> "MDOntology":
        cats = dict(program.categoricals)
        for name, split in program.splits.items():
            if name not in cats:
                arity = program.arities().get(name, split)
                cats[name] = CategoricalPredicate(
                    name, (None,) * split, tuple(f"a{i}" for i in range(split + 1, arity + 1))
                )
        return cls(
            schemas=list(program.dimensions),
            instance=Instance(program.facts),
            categoricals=cats,
            tgds=[r for r in program.tgds if r.layer == "core"],
            egds=[r for r in program.egds if r.layer == "core"],
            ncs=[r for r in program.ncs if r.layer == "core"],
        )

    @property
    def dims(self) -> list[tuple[DimensionSchema, DimensionInstance]]:
        return [(s, DimensionInstance.from_instance(s, self.instance)) for s in self.schemas]

    def category_predicates(self) -> set[str]:
        return {k for s in self.schemas for k in s.categories}

    def child_parent_predicates(self) -> set[str]:
        return {p for s in self.schemas for p in s.child_parent_predicates}

    def child_parent(self, predicate: str) -> tuple[DimensionSchema, str, str] | None:
        for s in self.schemas:
            edge = s.edge_for(predicate)
            if edge:
                return s, edge[0], edge[1]
        return None

    def dimension_of_category(self, k: str) -> DimensionSchema | None:
        for s in self.schemas:
            if k in s.categories:
                return s
        return None

    def is_categorical_position(self, predicate: str, position: int) -> bool:
        """Positions whose values are category members (1-based)."""
        if predicate in self.categoricals:
            return self.categoricals[predicate].is_categorical(position)
        return predicate in self.category_predicates() or predicate in self.child_parent_predicates()


@dataclass
class BasicConstraints:
    ncs: tuple
    egds: tuple


def generate_basic_constraints(ont: MDOntology, with_categorical_keys: bool = False) -> BasicConstraints:
    x, x2, y, z = Variable("X"), Variable("X2"), Variable("Y"), Variable("Z")
    ncs: list[NC] = []
    egds: list[EGD] = []
    for s in ont.schemas:
        for c, p, name in s.edges:
            body = (Atom(name, (x, x2)),)
            ncs.append(NC(body, (Atom(c, (x,)),), label=f"ref_{name}_1"))
            ncs.append(NC(body, (Atom(p, (x2,)),), label=f"ref_{name}_2"))
            egds.append(EGD((Atom(name, (x, y)), Atom(name, (x, z))), y, z, label=f"key_{name}"))
    for cp in ont.categoricals.values():
        xs = tuple(Variable(f"X{i}") for i in range(1, cp.split + 1))
        ys = tuple(Variable(f"Y{i}") for i in range(1, len(cp.attributes) + 1))
        for pos, k in cp.categorical_positions:
            if k is None:
                continue
            ncs.append(NC((Atom(cp.name, xs + ys),), (Atom(k, (xs[pos - 1],)),),
                          label=f"ref_{cp.name}_{pos}"))
        if with_categorical_keys and ys:
            zs = tuple(Variable(f"Z{i}") for i in range(1, len(ys) + 1))
            for j, pos in enumerate(cp.noncategorical_positions):
                egds.append(EGD(
                    (Atom(cp.name, xs + ys), Atom(cp.name, xs + zs)), ys[j], zs[j],
                    label=f"ckey_{cp.name}_{pos}",
                ))
    return BasicConstraints(tuple(ncs), tuple(egds))


def _positions(atoms: Iterable[Atom]) -> dict[Variable, list[tuple[str, int]]]:
    occ: dict[Variable, list[tuple[str, int]]] = defaultdict(list)
    for a in atoms:
        for i, t in enumerate(a.args, start=1):
            if isinstance(t, Variable):
                occ[t].append((a.predicate, i))
    return occ


def validate_dimensional_tgd(sigma: TGD, ont: MDOntology) -> ValidationReport:
    rep = ValidationReport()
    cps = ont.child_parent_predicates()
    for a in sigma.body:
        if a.predicate not in ont.categoricals and a.predicate not in cps:
            rep.add("body-predicate", f"{a.predicate} is neither categorical nor child-parent", a.predicate)
    if len(sigma.head) != 1 or sigma.head[0].predicate not in ont.categoricals:
        rep.add("head-predicate", "head must be a single categorical atom")
        return rep
    head = sigma.head[0]
    cat = ont.categoricals[head.predicate]
    existentials = set(sigma.existentials)
    occ = _positions(sigma.body)

    def categorical_source(v: Variable) -> bool:
        return any(ont.is_categorical_position(p, i) for p, i in occ.get(v, ()))

    def noncategorical_source(v: Variable) -> bool:
        return any(
            p in ont.categoricals and not ont.is_categorical_position(p, i)
            for p, i in occ.get(v, ())
        )

    for i, t in enumerate(head.args, start=1):
        if not isinstance(t, Variable):
            continue
        if cat.is_categorical(i):
            if t in existentials:
                rep.add("existential-categorical", f"existential {t} at {head.predicate}[{i}]", t)
            elif not categorical_source(t):
                rep.add("head-categorical-source", f"{t} at {head.predicate}[{i}] has no categorical source", t)
        elif t not in existentials and not noncategorical_source(t):
            rep.add("head-noncategorical-source", f"{t} at {head.predicate}[{i}] has no non-categorical source", t)
    for v, places in occ.items():
        if len(places) > 1:
            bad = [f"{p}[{i}]" for p, i in places if not ont.is_categorical_position(p, i)]
            if bad:
                rep.add("join-noncategorical", f"join variable {v} occurs at {', '.join(bad)}", v)
    return rep


@dataclass(frozen=True)
class Navigation:
    kind: str  # static | upward | downward | mixed
    steps: dict  # dimension name -> list of (direction, step count)


def classify_navigation(sigma: TGD, ont: MDOntology) -> Navigation:
    cp_atoms = [a for a in sigma.body if ont.child_parent(a.predicate) and a.arity == 2]
    cat_body_vars = {
        t for a in sigma.body if a.predicate in ont.categoricals
        for i, t in enumerate(a.args, start=1)
        if isinstance(t, Variable) and ont.is_categorical_position(a.predicate, i)
    }
    head_vars = {t for a in sigma.head for t in a.args if isinstance(t, Variable)}
    steps: dict[str, list] = defaultdict(list)

    def walk(start: Atom, forward: bool) -> int | None:
        # forward: child -> parent (upward); otherwise parent -> child
        length, cur, used = 1, start, {start}
        while True:
            nxt_var = cur.args[1] if forward else cur.args[0]
            if nxt_var in head_vars:
                return length
            follow = [
                a for a in cp_atoms if a not in used
                and (a.args[0] if forward else a.args[1]) == nxt_var
            ]
            if not follow:
                return None
            cur = follow[0]
            used.add(cur)
            length += 1

    for a in cp_atoms:
        dim = ont.child_parent(a.predicate)[0].name
        child, parent = a.args
        if child in cat_body_vars:
            n = walk(a, True)
            if n is not None:
                steps[dim].append(("upward", n))
        if parent in cat_body_vars:
            n = walk(a, False)
            if n is not None:
                steps[dim].append(("downward", n))
    directions = {d for moves in steps.values() for d, _ in moves}
    if not directions:
        kind = "static"
    elif len(directions) == 1:
        kind = directions.pop()
    else:
        kind = "mixed"
    return Navigation(kind, dict(steps))


def validate_ontology(ont: MDOntology) -> ValidationReport:
    """Dimension checks, the cross-dimension partition, and rule shapes."""
    rep = ValidationReport()
    owner: dict = {}
    for schema, inst in ont.dims:
        rep.extend(validate_dimension(schema, inst))
        for m in inst.members:
            if m in owner and owner[m] != schema.name:
                rep.add("cross-dimension-member", f"{m} occurs in {owner[m]} and {schema.name}", m)
            owner.setdefault(m, schema.name)
    known = ont.category_predicates()
    for cp in ont.categoricals.values():
        for pos, k in cp.categorical_positions:
            if k is not None and k not in known:
                rep.add("unknown-category", f"{cp.name}[{pos}] is bound to undeclared {k}", cp.name, k)
    for sigma in ont.tgds:
        sub = validate_dimensional_tgd(sigma, ont)
        for v in sub.violations:
            rep.violations.append(Violation(v.code, f"{sigma.label or sigma}: {v.message}", v.witness))
    return rep

