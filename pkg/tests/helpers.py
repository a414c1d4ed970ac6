"""Independent oracles and hypothesis strategies shared by the test modules.

The oracles deliberately avoid the engine's own search code: homomorphisms
are enumerated over the active domain, Datalog is evaluated by naive
iteration, and ranks come from longest special-edge walks.
"""
from __future__ import annotations

import itertools
from pathlib import Path

from hypothesis import strategies as st

from omd.cli import fixtures_dir
from omd.logic import Atom, Comparison, Constant, Instance, Null, Variable
from omd.rules import TGD, CategoricalPredicate, Program
from omd.syntax import parse_instance, parse_program, parse_query

FIX: Path = fixtures_dir()


def text(name: str) -> str:
    return (FIX / name).read_text(encoding="utf-8")


def load(name: str) -> Program:
    return parse_program(text(name))


def load_facts(name: str) -> Instance:
    return parse_instance(text(name))


def load_query(name: str):
    return parse_query(text(name))


def c(*names: str) -> tuple:
    return tuple(Constant(n) for n in names)


# -- brute-force homomorphisms -----------------------------------------------

def brute_homs(pattern, inst: Instance, conditions=()) -> list[dict]:
    """Every total assignment of the pattern variables over adom that works."""
    pattern = list(pattern)
    vs = sorted({t for a in pattern for t in a.args if isinstance(t, Variable)}, key=str)
    dom = sorted(inst.adom(), key=str)
    facts = inst.atom_set()
    out = []
    for image in itertools.product(dom, repeat=len(vs)):
        theta = dict(zip(vs, image))
        ground = [Atom(a.predicate, tuple(theta.get(t, t) for t in a.args)) for a in pattern]
        if all(g in facts for g in ground) and all(cnd.holds(theta) for cnd in conditions):
            out.append(theta)
    return out


def freeze(thetas) -> set:
    return {frozenset(t.items()) for t in thetas}


# -- naive Datalog -----------------------------------------------------------

def naive_datalog(facts, rules) -> set[Atom]:
    """Fixpoint of existential-free rules by naive iteration with brute_homs."""
    cur = set(facts)
    while True:
        inst = Instance(cur)
        new = set(cur)
        for r in rules:
            for theta in brute_homs(r.body, inst, r.builtins):
                for h in r.head:
                    new.add(Atom(h.predicate, tuple(theta.get(t, t) for t in h.args)))
        if new == cur:
            return cur
        cur = new


# -- instances up to null renaming ------------------------------------------

def isomorphic(a: Instance, b: Instance) -> bool:
    """Equal up to a bijective renaming of nulls (brute force, small inputs)."""
    if len(a) != len(b):
        return False
    na = sorted(a.nulls(), key=lambda n: n.id)
    nb = sorted(b.nulls(), key=lambda n: n.id)
    if len(na) != len(nb):
        return False
    target = b.atom_set()
    for perm in itertools.permutations(nb):
        m = dict(zip(na, perm))
        mapped = {Atom(x.predicate, tuple(m.get(t, t) for t in x.args)) for x in a.atom_set()}
        if mapped == target:
            return True
    return False


def satisfies_tgds(inst: Instance, tgds) -> bool:
    for r in tgds:
        for theta in brute_homs(r.body, inst, r.builtins):
            frontier = {v: theta[v] for v in r.frontier}
            exist = r.existentials
            dom = sorted(inst.adom(), key=str)
            ok = False
            for image in itertools.product(dom, repeat=len(exist)):
                full = {**frontier, **dict(zip(exist, image))}
                if all(Atom(h.predicate, tuple(full.get(t, t) for t in h.args)) in inst
                       for h in r.head):
                    ok = True
                    break
            if not ok:
                return False
    return True


def constant_model(facts, tgds, star: str = "star") -> Instance:
    """A model built by witnessing every existential with one fixed constant."""
    rules = []
    for r in tgds:
        sub = {z: Constant(star) for z in r.existentials}
        head = tuple(Atom(h.predicate, tuple(sub.get(t, t) for t in h.args)) for h in r.head)
        rules.append(TGD(r.body, head, r.builtins, r.label))
    return Instance(naive_datalog(facts, rules))


# -- strategies --------------------------------------------------------------

CONSTS = ["a", "b", "c", "d"]
VARS = [Variable(n) for n in ("X", "Y", "Z", "W")]


@st.composite
def instances(draw, preds=(("P", 1), ("R", 2), ("S", 2)), max_size=12):
    atoms = draw(st.lists(
        st.sampled_from(preds).flatmap(
            lambda pa: st.tuples(st.just(pa[0]), st.tuples(*[st.sampled_from(CONSTS)] * pa[1]))
        ),
        max_size=max_size,
    ))
    return Instance(Atom(p, tuple(Constant(x) for x in args)) for p, args in atoms)


@st.composite
def patterns(draw, preds=(("P", 1), ("R", 2), ("S", 2)), max_atoms=3):
    term = st.one_of(st.sampled_from(VARS[:3]), st.sampled_from(CONSTS).map(Constant))
    n = draw(st.integers(1, max_atoms))
    out = []
    for _ in range(n):
        p, k = draw(st.sampled_from(preds))
        out.append(Atom(p, tuple(draw(term) for _ in range(k))))
    return out


@st.composite
def datalog_programs(draw):
    """Safe existential-free rules over P/1, R/2, S/2, T/2 plus up to 20 facts."""
    preds = (("P", 1), ("R", 2), ("S", 2), ("T", 2))
    facts = draw(instances(preds[:3], max_size=20)).sorted_atoms()
    rules = []
    for i in range(draw(st.integers(1, 4))):
        body = draw(patterns(preds, max_atoms=2))
        bvars = sorted({t for a in body for t in a.args if isinstance(t, Variable)}, key=str)
        p, k = draw(st.sampled_from(preds))
        pool = bvars + [Constant(x) for x in CONSTS[:2]]
        head = Atom(p, tuple(draw(st.sampled_from(pool)) for _ in range(k)))
        rules.append(TGD(tuple(body), (head,), label=f"r{i}"))
    return Program(facts=facts, tgds=rules)


@st.composite
def layered_programs(draw, max_facts=6):
    """Programs with existentials whose rules only climb P0 < P1 < P2 < P3.

    The predicate order guarantees termination of every chase variant.
    """
    levels = [f"P{i}" for i in range(4)]
    base = draw(st.lists(st.tuples(st.sampled_from(CONSTS[:3]), st.sampled_from(CONSTS[:3])),
                         min_size=1, max_size=max_facts))
    facts = [Atom("P0", c(x, y)) for x, y in base]
    rules = []
    for i in range(draw(st.integers(1, 4))):
        lo = draw(st.integers(0, 2))
        hi = draw(st.integers(lo + 1, 3))
        nb = draw(st.integers(1, 2))
        body = [Atom(levels[draw(st.integers(0, lo))],
                     (draw(st.sampled_from(VARS[:3])), draw(st.sampled_from(VARS[:3]))))
                for _ in range(nb)]
        bvars = sorted({t for a in body for t in a.args}, key=str)
        head_pool = bvars + [Variable("E1"), Variable("E2")]
        head = Atom(levels[hi], (draw(st.sampled_from(head_pool)), draw(st.sampled_from(head_pool))))
        rules.append(TGD(tuple(body), (head,), label=f"l{i}"))
    return Program(facts=facts, tgds=rules)


# -- random MD ontologies ----------------------------------------------------

_HOSPITAL = """
@md.
@dimension Hospital {
  Ward. Unit. Institution. AllHospital.
  WardUnit: Ward -> Unit.
  UnitInstitution: Unit -> Institution.
  InstitutionAllHospital: Institution -> AllHospital.
}
@dimension Temporal {
  Day. Month. AllTemporal.
  DayMonth: Day -> Month.
  MonthAllTemporal: Month -> AllTemporal.
}
Ward(w1). Ward(w2). Unit(u1). Unit(u2). Institution(h1). AllHospital(all_h).
WardUnit(w1, u1). WardUnit(w2, u2). UnitInstitution(u1, h1). UnitInstitution(u2, h1).
InstitutionAllHospital(h1, all_h).
Day(d1). Day(d2). Month(m1). AllTemporal(all_t).
DayMonth(d1, m1). DayMonth(d2, m1). MonthAllTemporal(m1, all_t).
"""

_CATS = ["Ward", "Unit", "Institution", "Day", "Month"]
_UP = {"Ward": ("WardUnit", "Unit"), "Unit": ("UnitInstitution", "Institution"),
       "Day": ("DayMonth", "Month")}
_MEMBERS = {"Ward": ["w1", "w2"], "Unit": ["u1", "u2"], "Institution": ["h1"],
            "Day": ["d1", "d2"], "Month": ["m1"]}


@st.composite
def md_ontologies(draw):
    """Validator-clean MD ontologies: up to 6 categorical predicates, 10 tgds.

    Each tgd reads one categorical atom, optionally navigates one
    child-parent step up or down from a categorical variable, and writes a
    categorical head whose non-categorical values are copied or invented.
    """
    from omd.dimensions import MDOntology

    n_pred = draw(st.integers(1, 6))
    cats: dict[str, CategoricalPredicate] = {}
    for i in range(n_pred):
        m = draw(st.integers(1, 2))
        n = draw(st.integers(0, 2))
        cats[f"C{i}"] = CategoricalPredicate(
            f"C{i}", tuple(draw(st.sampled_from(_CATS)) for _ in range(m)),
            tuple(f"N{j}" for j in range(n)))
    prog = parse_program(_HOSPITAL)
    prog.categoricals.update(cats)
    facts = list(prog.facts)
    for cp in cats.values():
        for _ in range(draw(st.integers(0, 2))):
            args = [draw(st.sampled_from(_MEMBERS[k])) for k in cp.categories]
            args += [draw(st.sampled_from(["v1", "v2"])) for _ in cp.attributes]
            facts.append(Atom(cp.name, c(*args)))
    down = {parent: (pred, child) for child, (pred, parent) in _UP.items()}
    tgds = []
    names = sorted(cats)
    for i in range(draw(st.integers(1, 10))):
        src = cats[draw(st.sampled_from(names))]
        xs = [Variable(f"X{j}") for j in range(src.split)]
        ys = [Variable(f"Y{j}") for j in range(len(src.attributes))]
        body = [Atom(src.name, tuple(xs + ys))]
        # category of each available categorical variable
        avail = dict(zip(xs, src.categories))
        j = draw(st.integers(0, src.split - 1))
        move = draw(st.sampled_from(["none", "up", "down"]))
        k = src.categories[j]
        if move == "up" and k in _UP:
            pred, parent = _UP[k]
            v = Variable("U")
            body.append(Atom(pred, (xs[j], v)))
            avail[v] = parent
        elif move == "down" and k in down:
            pred, child = down[k]
            v = Variable("D")
            body.append(Atom(pred, (v, xs[j])))
            avail[v] = child
        tgt = cats[draw(st.sampled_from(names))]
        args = []
        for want in tgt.categories:
            fits = [v for v, kk in avail.items() if kk == want]
            if not fits:
                break
            args.append(draw(st.sampled_from(fits)))
        else:
            for e in range(len(tgt.attributes)):
                pool = ys + [Variable(f"E{e}")]
                args.append(draw(st.sampled_from(pool)))
            tgds.append(TGD(tuple(body), (Atom(tgt.name, tuple(args)),), label=f"t{i}"))
    prog = prog.with_rules(tgds=tgds, facts=facts)
    return prog, MDOntology.from_program(prog)


def null(i: int) -> Null:
    return Null(i)


def le(a, b) -> Comparison:
    return Comparison("<=", a, b)
