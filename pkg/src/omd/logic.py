"""Terms, atoms, instances, homomorphisms and conjunctive-query evaluation.

Every other module builds on the small vocabulary defined here.  Terms are
immutable values; an :class:`Instance` is a mutable set of ground atoms with
per-position indexes, cheap to copy for snapshots.
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .errors import UnboundVariable, UnknownPredicate


# -- terms ------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return render_constant(self.name)


@dataclass(frozen=True, slots=True)
class Null:
    """A labeled null; ids are handed out by a monotone counter."""

    id: int

    def __str__(self) -> str:
        return f"?z{self.id}"


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Constant, Null, Variable]
GroundTerm = Union[Constant, Null]
Assignment = dict  # Variable -> GroundTerm

_BARE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"-?\d+(\.\d+)?\Z")


def render_constant(name: str) -> str:
    if _BARE.match(name) or _NUMBER.match(name):
        return name
    escaped = name.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def numeric_value(name: str) -> float | None:
    if _NUMBER.match(name):
        return float(name)
    return None


def term_key(t: Term) -> tuple:
    """Total order on terms: constants, then nulls, then variables."""
    if isinstance(t, Constant):
        num = numeric_value(t.name)
        if num is not None:
            return (0, 0, num, t.name)
        return (0, 1, 0.0, t.name)
    if isinstance(t, Null):
        return (1, 0, float(t.id), "")
    return (2, 0, 0.0, t.name)


def is_ground(t: Term) -> bool:
    return not isinstance(t, Variable)


# -- atoms ------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple

    def __post_init__(self) -> None:
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> list[Variable]:
        return [a for a in self.args if isinstance(a, Variable)]

    def is_ground(self) -> bool:
        return all(not isinstance(a, Variable) for a in self.args)

    def sort_key(self) -> tuple:
        return (self.predicate, tuple(term_key(a) for a in self.args))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"


def atom(predicate: str, *args: object) -> Atom:
    """Convenience constructor: uppercase/underscore strings become variables."""
    terms = []
    for a in args:
        if isinstance(a, (Constant, Null, Variable)):
            terms.append(a)
        elif isinstance(a, str) and (a[:1].isupper() or a[:1] == "_"):
            terms.append(Variable(a))
        else:
            terms.append(Constant(str(a)))
    return Atom(predicate, tuple(terms))


def variables_of(atoms: Iterable[Atom]) -> list[Variable]:
    """Variables in order of first occurrence."""
    seen: dict[Variable, None] = {}
    for a in atoms:
        for t in a.args:
            if isinstance(t, Variable):
                seen.setdefault(t, None)
    return list(seen)


# -- builtins ---------------------------------------------------------------

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True, slots=True)
class Comparison:
    op: str
    left: Term
    right: Term

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op}")

    def variables(self) -> list[Variable]:
        return [t for t in (self.left, self.right) if isinstance(t, Variable)]

    def holds(self, theta: Mapping[Variable, Term]) -> bool:
        return compare(self.op, _resolve(self.left, theta), _resolve(self.right, theta))

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


def _resolve(t: Term, theta: Mapping[Variable, Term]) -> Term:
    if isinstance(t, Variable):
        try:
            return theta[t]
        except KeyError:
            raise UnboundVariable(t) from None
    return t


def compare(op: str, a: Term, b: Term) -> bool:
    """Order comparison over constants.

    Numbers compare numerically when both sides are numeric, everything else
    lexicographically on the canonical text.  Anything involving a null is
    false, including ``!=``: nulls are never assumed to differ.
    """
    if not (isinstance(a, Constant) and isinstance(b, Constant)):
        return False
    na, nb = numeric_value(a.name), numeric_value(b.name)
    x, y = (na, nb) if na is not None and nb is not None else (a.name, b.name)
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    return x >= y


# -- instances --------------------------------------------------------------

class Instance:
    """A finite set of ground atoms indexed by predicate and position."""

    __slots__ = ("_rel", "_idx")

    def __init__(self, atoms: Iterable[Atom] = ()) -> None:
        self._rel: dict[str, set[tuple]] = defaultdict(set)
        self._idx: dict[tuple, set[tuple]] = defaultdict(set)
        for a in atoms:
            self.add(a)

    def add(self, a: Atom) -> bool:
        if not a.is_ground():
            raise ValueError(f"instances hold ground atoms only: {a}")
        rel = self._rel[a.predicate]
        if a.args in rel:
            return False
        rel.add(a.args)
        for i, t in enumerate(a.args):
            self._idx[(a.predicate, i, t)].add(a.args)
        return True

    def discard(self, a: Atom) -> bool:
        rel = self._rel.get(a.predicate)
        if not rel or a.args not in rel:
            return False
        rel.remove(a.args)
        for i, t in enumerate(a.args):
            bucket = self._idx[(a.predicate, i, t)]
            bucket.discard(a.args)
            if not bucket:
                del self._idx[(a.predicate, i, t)]
        if not rel:
            del self._rel[a.predicate]
        return True

    def __contains__(self, a: object) -> bool:
        if not isinstance(a, Atom):
            return False
        rel = self._rel.get(a.predicate)
        return rel is not None and a.args in rel

    def __iter__(self) -> Iterator[Atom]:
        return iter(self.sorted_atoms())

    def __len__(self) -> int:
        return sum(len(r) for r in self._rel.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.atom_set() == other.atom_set()

    def __repr__(self) -> str:
        return "Instance({" + ", ".join(str(a) for a in self.sorted_atoms()) + "})"

    def atom_set(self) -> frozenset[Atom]:
        return frozenset(Atom(p, args) for p, rel in self._rel.items() for args in rel)

    def sorted_atoms(self) -> list[Atom]:
        out = [Atom(p, args) for p, rel in self._rel.items() for args in rel]
        out.sort(key=Atom.sort_key)
        return out

    def predicates(self) -> list[str]:
        return sorted(p for p, rel in self._rel.items() if rel)

    def tuples(self, predicate: str) -> set[tuple]:
        return set(self._rel.get(predicate, ()))

    def count(self, predicate: str) -> int:
        return len(self._rel.get(predicate, ()))

    def adom(self) -> set[GroundTerm]:
        return {t for rel in self._rel.values() for args in rel for t in args}

    def nulls(self) -> set[Null]:
        return {t for t in self.adom() if isinstance(t, Null)}

    def copy(self) -> "Instance":
        new = Instance()
        for p, rel in self._rel.items():
            new._rel[p] = set(rel)
        for k, v in self._idx.items():
            new._idx[k] = set(v)
        return new

    def candidates(self, predicate: str, bound: Mapping[int, Term]) -> list[tuple]:
        """Tuples of ``predicate`` agreeing with ``bound`` (position -> term)."""
        rel = self._rel.get(predicate)
        if not rel:
            return []
        best: set[tuple] | None = None
        for i, t in bound.items():
            bucket = self._idx.get((predicate, i, t))
            if not bucket:
                return []
            if best is None or len(bucket) < len(best):
                best = bucket
        pool = rel if best is None else best
        if len(bound) <= 1:
            return list(pool)
        return [args for args in pool if all(args[i] == t for i, t in bound.items())]

    def atoms_with(self, term: GroundTerm) -> list[Atom]:
        out = []
        for p, rel in self._rel.items():
            if not rel:
                continue
            arity = len(next(iter(rel)))
            hit: set[tuple] = set()
            for i in range(arity):
                hit |= self._idx.get((p, i, term), set())
            out.extend(Atom(p, args) for args in hit)
        return out

    def replace_term(self, old: GroundTerm, new: GroundTerm) -> int:
        """Replace ``old`` by ``new`` everywhere; returns the number of atoms rewritten."""
        touched = self.atoms_with(old)
        for a in touched:
            self.discard(a)
        for a in touched:
            self.add(Atom(a.predicate, tuple(new if t == old else t for t in a.args)))
        return len(touched)


# -- substitution and homomorphisms -----------------------------------------

def substitute_atom(a: Atom, theta: Mapping[Variable, Term]) -> Atom:
    return Atom(a.predicate, tuple(_resolve(t, theta) for t in a.args))


def substitute(atoms: Iterable[Atom], theta: Mapping[Variable, Term]) -> list[Atom]:
    """Apply ``theta`` to every variable; raises UnboundVariable on a miss."""
    return [substitute_atom(a, theta) for a in atoms]


def _bind(a: Atom, args: tuple, theta: dict) -> dict | None:
    new = None
    for t, v in zip(a.args, args):
        if isinstance(t, Variable):
            cur = theta.get(t) if new is None else new.get(t)
            if cur is None:
                if new is None:
                    new = dict(theta)
                new[t] = v
            elif cur != v:
                return None
        elif t != v:
            return None
    return theta if new is None else new


def _search(
    atoms: list[Atom],
    target: Instance,
    theta: dict,
    conditions: list[Comparison],
) -> Iterator[dict]:
    if conditions:
        pending = []
        for c in conditions:
            if all(v in theta for v in c.variables()):
                if not c.holds(theta):
                    return
            else:
                pending.append(c)
        conditions = pending
    if not atoms:
        if conditions:
            # a condition over variables the pattern never binds
            raise UnboundVariable(conditions[0].variables()[0])
        yield theta
        return
    # most-constrained atom first
    best_i, best_n = 0, -1
    for i, a in enumerate(atoms):
        n = sum(1 for t in a.args if not isinstance(t, Variable) or t in theta)
        if n > best_n:
            best_i, best_n = i, n
    chosen = atoms[best_i]
    rest = atoms[:best_i] + atoms[best_i + 1:]
    bound = {}
    for i, t in enumerate(chosen.args):
        if isinstance(t, Variable):
            if t in theta:
                bound[i] = theta[t]
        else:
            bound[i] = t
    for args in target.candidates(chosen.predicate, bound):
        ext = _bind(chosen, args, theta)
        if ext is not None:
            yield from _search(rest, target, ext, conditions)


def find_homomorphisms(
    pattern: Iterable[Atom],
    target: Instance,
    conditions: Iterable[Comparison] = (),
    partial: Mapping[Variable, Term] | None = None,
    ordered: bool = True,
) -> Iterator[dict]:
    """Yield every assignment θ extending ``partial`` with θ(pattern) ⊆ target.

    Constants and nulls in the pattern only match themselves.  With
    ``ordered`` the stream is sorted by the images of the pattern variables
    taken in order of first occurrence.
    """
    pattern = list(pattern)
    theta = dict(partial or {})
    found = _search(pattern, target, theta, list(conditions))
    if not ordered:
        return found
    order = variables_of(pattern)
    results = list(found)
    results.sort(key=lambda th: tuple(term_key(th[v]) for v in order))
    return iter(results)


def exists_homomorphism(
    pattern: Iterable[Atom],
    target: Instance,
    conditions: Iterable[Comparison] = (),
    partial: Mapping[Variable, Term] | None = None,
) -> bool:
    for _ in find_homomorphisms(pattern, target, conditions, partial, ordered=False):
        return True
    return False


def instance_homomorphism(source: Instance, target: Instance) -> dict | None:
    """A map from ``source`` into ``target`` fixing constants, nulls free.

    Only meant for test oracles (universality checks); it is a plain
    backtracking search with no optimisation beyond the position indexes.
    """
    as_var = {n: Variable(f"_N{n.id}") for n in source.nulls()}
    pattern = [
        Atom(a.predicate, tuple(as_var.get(t, t) for t in a.args))
        for a in source.sorted_atoms()
    ]
    for theta in find_homomorphisms(pattern, target, ordered=False):
        return {n: theta[v] for n, v in as_var.items()}
    return None


# -- conjunctive queries ----------------------------------------------------

@dataclass(frozen=True)
class ConjunctiveQuery:
    """``head`` lists answer terms (usually variables); empty means boolean."""

    head: tuple
    body: tuple
    builtins: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "builtins", tuple(self.builtins))
        body_vars = set(variables_of(self.body))
        for t in self.head:
            if isinstance(t, Variable) and t not in body_vars:
                raise ValueError(f"answer variable {t} does not occur in the body")
        for c in self.builtins:
            for v in c.variables():
                if v not in body_vars:
                    raise ValueError(f"builtin variable {v} does not occur in the body")

    @property
    def free_vars(self) -> list[Variable]:
        return [t for t in self.head if isinstance(t, Variable)]

    @property
    def arity(self) -> int:
        return len(self.head)

    @property
    def is_boolean(self) -> bool:
        return not self.head

    def predicates(self) -> set[str]:
        return {a.predicate for a in self.body}

    def __str__(self) -> str:
        parts = [str(a) for a in self.body] + [str(c) for c in self.builtins]
        return f"?({','.join(str(t) for t in self.head)}) :- {', '.join(parts)}."


@dataclass(frozen=True)
class UCQ:
    """A union of CQs.  ``width`` fixes the arity of an empty (false) union."""

    disjuncts: tuple
    width: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "disjuncts", tuple(self.disjuncts))
        if not self.disjuncts and self.width is None:
            raise ValueError("a UCQ needs at least one disjunct")
        arities = {q.arity for q in self.disjuncts}
        if self.width is not None:
            arities.add(self.width)
        if len(arities) != 1:
            raise ValueError("UCQ disjuncts must share one arity")

    @property
    def arity(self) -> int:
        return self.width if self.width is not None else self.disjuncts[0].arity

    @property
    def is_boolean(self) -> bool:
        return self.arity == 0

    def predicates(self) -> set[str]:
        out: set[str] = set()
        for q in self.disjuncts:
            out |= q.predicates()
        return out


Query = Union[ConjunctiveQuery, UCQ]


def as_ucq(q: Query) -> UCQ:
    return q if isinstance(q, UCQ) else UCQ((q,))


def evaluate_cq(
    q: ConjunctiveQuery,
    instance: Instance,
    schema: Mapping[str, int] | None = None,
) -> set[tuple]:
    """All answers of ``q`` on ``instance``; a true boolean query gives {()}.

    When ``schema`` (predicate -> arity) is given, body atoms over unknown
    predicates raise UnknownPredicate.
    """
    if schema is not None:
        for a in q.body:
            if a.predicate not in schema:
                raise UnknownPredicate(a.predicate)
    out: set[tuple] = set()
    for theta in find_homomorphisms(q.body, instance, q.builtins, ordered=False):
        out.add(tuple(_resolve(t, theta) for t in q.head))
        if q.is_boolean:
            break
    return out


def evaluate_query(q: Query, instance: Instance, schema: Mapping[str, int] | None = None) -> set[tuple]:
    out: set[tuple] = set()
    for d in as_ucq(q).disjuncts:
        out |= evaluate_cq(d, instance, schema)
    return out


def strip_null_answers(answers: Iterable[tuple]) -> set[tuple]:
    return {t for t in answers if all(isinstance(x, Constant) for x in t)}


def sorted_answers(answers: Iterable[tuple]) -> list[tuple]:
    return sorted(answers, key=lambda row: tuple(term_key(t) for t in row))


@dataclass
class NullFactory:
    """Monotone source of fresh labeled nulls."""

    next_id: int = 1
    issued: list = field(default_factory=list)

    def fresh(self) -> Null:
        n = Null(self.next_id)
        self.next_id += 1
        self.issued.append(n)
        return n
