"""Rule forms (tgds, egds, ncs) and the program container."""
from __future__ import annotations

from dataclasses import dataclass, field

from .logic import Atom, Comparison, Query, Variable, variables_of

LAYERS = ("core", "nickname", "quality", "version")


@dataclass(frozen=True)
class TGD:
    """body -> ∃ȳ head; head variables missing from the body are existential."""

    body: tuple
    head: tuple
    builtins: tuple = ()
    label: str | None = None
    layer: str = "core"

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "builtins", tuple(self.builtins))
        if not self.head:
            raise ValueError("a tgd needs at least one head atom")

    @property
    def body_variables(self) -> list[Variable]:
        return variables_of(self.body)

    @property
    def head_variables(self) -> list[Variable]:
        return variables_of(self.head)

    @property
    def existentials(self) -> list[Variable]:
        body = set(self.body_variables)
        return [v for v in self.head_variables if v not in body]

    @property
    def frontier(self) -> list[Variable]:
        head = set(self.head_variables)
        return [v for v in self.body_variables if v in head]

    @property
    def is_datalog(self) -> bool:
        return not self.existentials

    def __str__(self) -> str:
        return _render(self.label, self.body, self.builtins, ", ".join(str(a) for a in self.head))


@dataclass(frozen=True)
class EGD:
    body: tuple
    left: Variable
    right: Variable
    builtins: tuple = ()
    label: str | None = None
    layer: str = "core"

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "builtins", tuple(self.builtins))

    @property
    def body_variables(self) -> list[Variable]:
        return variables_of(self.body)

    def __str__(self) -> str:
        return _render(self.label, self.body, self.builtins, f"{self.left} = {self.right}")


@dataclass(frozen=True)
class NC:
    """Negative constraint; ``negated`` atoms are checked against closed extensions."""

    body: tuple
    negated: tuple = ()
    builtins: tuple = ()
    label: str | None = None
    layer: str = "core"

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "negated", tuple(self.negated))
        object.__setattr__(self, "builtins", tuple(self.builtins))

    def __str__(self) -> str:
        lits = [str(a) for a in self.body] + [f"not {a}" for a in self.negated]
        lits += [str(c) for c in self.builtins]
        prefix = f"{self.label}: " if self.label else ""
        return f"{prefix}{', '.join(lits)} -> #false."


Rule = TGD | EGD | NC


def _render(label: str | None, body: tuple, builtins: tuple, head: str) -> str:
    lits = [str(a) for a in body] + [str(c) for c in builtins]
    prefix = f"{label}: " if label else ""
    return f"{prefix}{', '.join(lits)} -> {head}."


@dataclass(frozen=True)
class CategoricalPredicate:
    """R(C1,...,Cm; N1,...,Nn).  ``categories`` may hold None when unknown."""

    name: str
    categories: tuple
    attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "attributes", tuple(self.attributes))

    @property
    def arity(self) -> int:
        return len(self.categories) + len(self.attributes)

    @property
    def split(self) -> int:
        return len(self.categories)

    @property
    def categorical_positions(self) -> list[tuple[int, str | None]]:
        return [(i + 1, c) for i, c in enumerate(self.categories)]

    @property
    def noncategorical_positions(self) -> list[int]:
        return list(range(self.split + 1, self.arity + 1))

    def is_categorical(self, position: int) -> bool:
        """``position`` is 1-based."""
        return 1 <= position <= self.split


@dataclass
class Program:
    """A parsed source program: declarations, facts, rules and queries."""

    facts: list = field(default_factory=list)
    tgds: list = field(default_factory=list)
    egds: list = field(default_factory=list)
    ncs: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    predicates: dict = field(default_factory=dict)
    dimensions: list = field(default_factory=list)
    categoricals: dict = field(default_factory=dict)
    splits: dict = field(default_factory=dict)
    closed: list = field(default_factory=list)
    sources: dict = field(default_factory=dict)
    external: dict = field(default_factory=dict)
    quality: dict = field(default_factory=dict)
    md: bool = False

    # -- derived views ------------------------------------------------------

    def rules(self) -> list:
        return [*self.tgds, *self.egds, *self.ncs]

    def dimension_predicates(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for d in self.dimensions:
            for k in d.categories:
                out[k] = 1
            for _, _, p in d.edges:
                out[p] = 2
        return out

    def closed_predicates(self) -> set[str]:
        return set(self.dimension_predicates()) | set(self.closed)

    def split_of(self, predicate: str) -> int | None:
        if predicate in self.categoricals:
            return self.categoricals[predicate].split
        return self.splits.get(predicate)

    def arities(self) -> dict[str, int]:
        out: dict[str, int] = dict(self.predicates)
        out.update(self.dimension_predicates())
        for table in (self.sources, self.external, self.quality):
            out.update(table)
        for c in self.categoricals.values():
            out.setdefault(c.name, c.arity)
        for a in self.all_atoms():
            out.setdefault(a.predicate, a.arity)
        return out

    def all_atoms(self) -> list[Atom]:
        out: list[Atom] = list(self.facts)
        for r in self.tgds:
            out.extend(r.body)
            out.extend(r.head)
        for r in self.egds:
            out.extend(r.body)
        for r in self.ncs:
            out.extend(r.body)
            out.extend(r.negated)
        for q in self.queries:
            for d in getattr(q, "disjuncts", (q,)):
                out.extend(d.body)
        return out

    def with_rules(self, tgds=None, egds=None, ncs=None, facts=None) -> "Program":
        """Shallow copy with some rule lists replaced."""
        return Program(
            facts=list(self.facts if facts is None else facts),
            tgds=list(self.tgds if tgds is None else tgds),
            egds=list(self.egds if egds is None else egds),
            ncs=list(self.ncs if ncs is None else ncs),
            queries=list(self.queries),
            predicates=dict(self.predicates),
            dimensions=list(self.dimensions),
            categoricals=dict(self.categoricals),
            splits=dict(self.splits),
            closed=list(self.closed),
            sources=dict(self.sources),
            external=dict(self.external),
            quality=dict(self.quality),
            md=self.md,
        )


def query_atoms(q: Query) -> list[Atom]:
    return [a for d in getattr(q, "disjuncts", (q,)) for a in d.body]


def comparison_vars(cs: tuple[Comparison, ...]) -> list[Variable]:
    return [v for c in cs for v in c.variables()]
