"""Contextual ontologies for data quality and the QualityQA algorithm.

A context program uses layers:

* ``core``: the MD ontology (dimensions, categorical data, dimensional rules);
* ``nickname``: ``R(x̄) -> R'(x̄)`` copies of source predicates (generated
  when missing);
* ``quality``: definitions of quality predicates;
* ``version``: definitions of quality versions ``R^q``.

Source predicates are declared with ``@source``, external ones with
``@external``.  Quality answers are obtained by renaming the query to the
quality schema, unfolding the version and quality definitions into a UCQ,
and answering that UCQ with certain-answer semantics over the MD ontology
plus the imported source data and the external data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count

import networkx as nx

from .answering import AnswerSet, certain_answers
from .chase import ChaseOptions, run_chase
from .errors import (
    ArityMismatch,
    LayeringViolation,
    MissingQualityVersion,
    RecursiveDefinition,
    UndefinedQualityPredicate,
    UnknownSourcePredicate,
)
from .logic import (
    UCQ,
    Atom,
    Comparison,
    ConjunctiveQuery,
    Instance,
    Query,
    Variable,
    as_ucq,
    evaluate_query,
    find_homomorphisms,
    strip_null_answers,
    substitute,
)
from .rules import TGD, Program


def nickname(pred: str) -> str:
    return f"{pred}'"


def quality_version(pred: str) -> str:
    return f"{pred}^q"


@dataclass
class ContextualOntology:
    source: dict  # R -> arity
    data: Instance  # D over the source schema
    md: Program  # the core MD ontology, with its dimensional and categorical facts
    external: Instance  # E
    external_schema: dict
    nicknames: list = field(default_factory=list)
    quality_defs: list = field(default_factory=list)
    version_defs: list = field(default_factory=list)
    quality_predicates: dict = field(default_factory=dict)

    def imported(self) -> list[Atom]:
        """D′: the source facts pushed through the nickname rules."""
        inst = Instance(self.data)
        out: list[Atom] = []
        for r in self.nicknames:
            for theta in find_homomorphisms(r.body, inst):
                out.extend(substitute(r.head, theta))
        return out

    def md_program(self) -> Program:
        """𝒪^M with extensional data E ∪ D′ added to its facts."""
        return self.md.with_rules(facts=[*self.md.facts, *self.external, *self.imported()])

    def quality_schema(self) -> set[str]:
        return set(self.quality_predicates) | {quality_version(r) for r in self.source}


def build_context(program: Program, data: Instance | None = None) -> ContextualOntology:
    """Split a layered context program into its components and validate them.

    ``data`` is the source instance D; when omitted, the program's facts over
    source predicates are used.
    """
    source = dict(program.sources)
    external_schema = dict(program.external)
    src_facts = [a for a in program.facts if a.predicate in source]
    ext_facts = [a for a in program.facts if a.predicate in external_schema]
    md_facts = [a for a in program.facts if a.predicate not in source and a.predicate not in external_schema]
    if data is None:
        data = Instance(src_facts)
    for a in data:
        if a.predicate not in source:
            raise UnknownSourcePredicate(a.predicate)
        if a.arity != source[a.predicate]:
            raise ArityMismatch(f"{a.predicate} has arity {source[a.predicate]}, fact {a} does not")

    by_layer: dict[str, list[TGD]] = {"core": [], "nickname": [], "quality": [], "version": []}
    for r in program.tgds:
        by_layer[r.layer].append(r)
    quality_preds = dict(program.quality)
    for r in by_layer["quality"]:
        for h in r.head:
            quality_preds.setdefault(h.predicate, h.arity)

    nick = list(by_layer["nickname"])
    named = {h.predicate for r in nick for h in r.head}
    for name, n in sorted(source.items()):
        if nickname(name) not in named:
            xs = tuple(Variable(f"X{i}") for i in range(1, n + 1))
            nick.append(TGD((Atom(name, xs),), (Atom(nickname(name), xs),), label=f"nick_{name}",
                            layer="nickname"))

    versions = {quality_version(r): r for r in source}
    md = program.with_rules(
        facts=md_facts,
        tgds=by_layer["core"],
        egds=[e for e in program.egds if e.layer == "core"],
        ncs=[c for c in program.ncs if c.layer == "core"],
    )
    md.queries = []
    ctx = ContextualOntology(
        source=source,
        data=data,
        md=md,
        external=Instance(ext_facts),
        external_schema=external_schema,
        nicknames=nick,
        quality_defs=by_layer["quality"],
        version_defs=by_layer["version"],
        quality_predicates=quality_preds,
    )
    _validate(ctx, program, versions)
    return ctx


def _validate(ctx: ContextualOntology, program: Program, versions: dict[str, str]) -> None:
    upper = set(ctx.quality_predicates) | set(versions)
    nick_preds = {nickname(r) for r in ctx.source}
    arities = program.arities()

    for r in ctx.md.rules():
        atoms = [*r.body, *getattr(r, "head", ()), *getattr(r, "negated", ())]
        for a in atoms:
            if a.predicate in upper:
                raise LayeringViolation(f"{a.predicate} is used in the core ontology: {r}")
            if a.predicate in ctx.source:
                raise LayeringViolation(f"source predicate {a.predicate} is used in the core ontology: {r}")

    for name, n in ctx.source.items():
        for other in (nickname(name), quality_version(name)):
            if other in arities and arities[other] != n:
                raise ArityMismatch(f"{other} has arity {arities[other]}, {name} has {n}")
    for r in ctx.nicknames:
        if len(r.body) != 1 or len(r.head) != 1 or r.body[0].predicate not in ctx.source \
                or r.head[0].predicate != nickname(r.body[0].predicate):
            raise LayeringViolation(f"not a nickname rule: {r}")

    allowed_body = nick_preds | set(ctx.external_schema) | set(ctx.quality_predicates) | _md_predicates(ctx)
    for r in ctx.quality_defs:
        for h in r.head:
            if h.predicate not in ctx.quality_predicates:
                raise LayeringViolation(f"{h.predicate} is not a quality predicate: {r}")
        _check_body(r, allowed_body)
    defined_versions = set()
    for r in ctx.version_defs:
        for h in r.head:
            if h.predicate not in versions:
                raise LayeringViolation(f"{h.predicate} is not a quality version: {r}")
            defined_versions.add(h.predicate)
        _check_body(r, allowed_body)
    for name in sorted(ctx.source):
        if quality_version(name) not in defined_versions:
            raise MissingQualityVersion(f"no rule defines {quality_version(name)}")


def _md_predicates(ctx: ContextualOntology) -> set[str]:
    preds = set(ctx.md.dimension_predicates()) | set(ctx.md.categoricals) | set(ctx.md.splits)
    preds |= {a.predicate for a in ctx.md.facts}
    for r in ctx.md.tgds:
        preds |= {a.predicate for a in (*r.body, *r.head)}
    return preds


def _check_body(r: TGD, allowed: set[str]) -> None:
    for a in r.body:
        if a.predicate not in allowed:
            raise LayeringViolation(f"{a.predicate} may not occur in the body of {r}")
    if not r.is_datalog:
        raise LayeringViolation(f"quality definitions must be plain Datalog: {r}")


# -- step 1: renaming -------------------------------------------------------

def rewrite_to_quality(q: Query, source: dict | set) -> Query:
    def rename(cq: ConjunctiveQuery) -> ConjunctiveQuery:
        body = []
        for a in cq.body:
            if a.predicate not in source:
                raise UnknownSourcePredicate(a.predicate)
            body.append(Atom(quality_version(a.predicate), a.args))
        return ConjunctiveQuery(cq.head, tuple(body), cq.builtins)

    if isinstance(q, UCQ):
        return UCQ(tuple(rename(d) for d in q.disjuncts), q.width)
    return rename(q)


# -- steps 2 and 3: unfolding -----------------------------------------------

def _check_nonrecursive(defs: list[TGD]) -> None:
    g = nx.DiGraph()
    for r in defs:
        for h in r.head:
            for b in r.body:
                g.add_edge(h.predicate, b.predicate)
    try:
        cycle = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        return
    raise RecursiveDefinition(" -> ".join(u for u, _ in cycle))


def _walk(t, s: dict):
    while isinstance(t, Variable) and t in s:
        t = s[t]
    return t


def _unify(xs: tuple, ys: tuple, s: dict) -> dict | None:
    s = dict(s)
    for x, y in zip(xs, ys):
        x, y = _walk(x, s), _walk(y, s)
        if x == y:
            continue
        if isinstance(x, Variable):
            s[x] = y
        elif isinstance(y, Variable):
            s[y] = x
        else:
            return None
    return s


def _apply(t, s: dict):
    return _walk(t, s)


def _apply_cq(head: tuple, body: list[Atom], builtins: list[Comparison], s: dict):
    def atom(a: Atom) -> Atom:
        return Atom(a.predicate, tuple(_apply(t, s) for t in a.args))

    def cmp(c: Comparison) -> Comparison:
        return Comparison(c.op, _apply(c.left, s), _apply(c.right, s))

    return (tuple(_apply(t, s) for t in head), [atom(a) for a in body], [cmp(c) for c in builtins])


def _rename_apart(r: TGD, fresh) -> TGD:
    n = next(fresh)
    ren = {v: Variable(f"{v.name}_{n}") for v in (*r.body_variables, *r.head_variables)}

    def term(t):
        return ren.get(t, t)

    def atom(a: Atom) -> Atom:
        return Atom(a.predicate, tuple(term(t) for t in a.args))

    return TGD(tuple(atom(a) for a in r.body), tuple(atom(a) for a in r.head),
               tuple(Comparison(c.op, term(c.left), term(c.right)) for c in r.builtins),
               r.label, r.layer)


def _constant_builtins_hold(builtins: list[Comparison]) -> bool:
    for c in builtins:
        if not isinstance(c.left, Variable) and not isinstance(c.right, Variable) and not c.holds({}):
            return False
    return True


def unfold(q: Query, defs: list[TGD]) -> UCQ:
    """Replace every atom over a defined predicate by the bodies of its definitions.

    Each choice of defining rules per atom gives one disjunct; the process
    repeats until no defined predicate is left.  Predicates without rules
    pass through unchanged.
    """
    _check_nonrecursive(defs)
    by_pred: dict[str, list[TGD]] = {}
    for r in defs:
        if len(r.head) != 1:
            raise ValueError(f"definitions need a single head atom: {r}")
        by_pred.setdefault(r.head[0].predicate, []).append(r)
    fresh = count(1)
    todo = list(as_ucq(q).disjuncts)
    done: list[ConjunctiveQuery] = []
    seen: set = set()
    while todo:
        cq = todo.pop(0)
        idx = next((i for i, a in enumerate(cq.body) if a.predicate in by_pred), None)
        if idx is None:
            key = (cq.head, cq.body, cq.builtins)
            if key not in seen:
                seen.add(key)
                done.append(cq)
            continue
        target = cq.body[idx]
        for r in by_pred[target.predicate]:
            r = _rename_apart(r, fresh)
            s = _unify(r.head[0].args, target.args, {})
            if s is None:
                continue
            body = [*cq.body[:idx], *r.body, *cq.body[idx + 1:]]
            head, body, builtins = _apply_cq(cq.head, body, [*cq.builtins, *r.builtins], s)
            if not _constant_builtins_hold(builtins):
                continue
            builtins = [c for c in builtins if isinstance(c.left, Variable) or isinstance(c.right, Variable)]
            todo.append(ConjunctiveQuery(head, tuple(body), tuple(builtins)))
    return UCQ(tuple(done), as_ucq(q).arity)


@dataclass
class QualityRewriting:
    quality: Query  # Q^q
    contextual: UCQ  # Q^c
    md: UCQ  # Q^M


def rewrite(ctx: ContextualOntology, q: Query) -> QualityRewriting:
    """Steps 1 to 3 of QualityQA."""
    qq = rewrite_to_quality(q, ctx.source)
    qc = unfold(qq, ctx.version_defs)
    qm = unfold(qc, ctx.quality_defs)
    extensional = {a.predicate for a in ctx.external}
    for d in qm.disjuncts:
        for a in d.body:
            if a.predicate in ctx.quality_schema() and a.predicate not in extensional:
                raise UndefinedQualityPredicate(f"{a.predicate} has no definition and no data")
    return QualityRewriting(qq, qc, qm)


def quality_answers(ctx: ContextualOntology, q: Query, opts: ChaseOptions | None = None) -> AnswerSet:
    """Step 4: certain answers of the unfolded UCQ over 𝒪^M with E ∪ D′."""
    rw = rewrite(ctx, q)
    return certain_answers(ctx.md_program(), rw.md, opts)


def open_atomic_query(pred: str, arity: int) -> ConjunctiveQuery:
    xs = tuple(Variable(f"X{i}") for i in range(1, arity + 1))
    return ConjunctiveQuery(xs, (Atom(pred, xs),))


def core_quality_version(ctx: ContextualOntology, opts: ChaseOptions | None = None) -> Instance:
    """All quality answers to the open atomic queries, as an instance over ℛ."""
    out = Instance()
    for name, n in sorted(ctx.source.items()):
        ans = quality_answers(ctx, open_atomic_query(name, n), opts)
        for row in ans.tuples:
            out.add(Atom(name, row))
    return out


# -- materialisation route --------------------------------------------------

def _naive_fixpoint(rules: list[TGD], inst: Instance) -> Instance:
    inst = inst.copy()
    changed = True
    while changed:
        changed = False
        for r in rules:
            for theta in list(find_homomorphisms(r.body, inst, r.builtins, ordered=False)):
                for a in substitute(r.head, theta):
                    changed |= inst.add(a)
    return inst


def materialize_quality(ctx: ContextualOntology, opts: ChaseOptions | None = None) -> Instance:
    """Chase 𝒪^M, then compute quality predicates and versions bottom-up.

    This treats the MD layer as extensional for the upper Datalog layers and
    serves as an independent route to the same answers.
    """
    res = run_chase(ctx.md_program(), opts or ChaseOptions())
    return _naive_fixpoint([*ctx.quality_defs, *ctx.version_defs], res.instance)


def materialized_answers(ctx: ContextualOntology, q: Query, opts: ChaseOptions | None = None) -> set[tuple]:
    inst = materialize_quality(ctx, opts)
    return strip_null_answers(evaluate_query(rewrite_to_quality(q, ctx.source), inst))

