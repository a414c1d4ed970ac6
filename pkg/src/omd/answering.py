"""Certain-answer query answering on top of the chase."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .analysis import Separability, check_separability_syntactic
from .chase import ChaseOptions, ChaseResult, nc_violations, run_chase
from .dimensions import MDOntology
from .errors import Indeterminate
from .logic import (
    Comparison,
    ConjunctiveQuery,
    Query,
    as_ucq,
    evaluate_query,
    find_homomorphisms,
    sorted_answers,
    strip_null_answers,
)
from .rules import Program

ROUTE_COMBINED = "combined"
ROUTE_SEPARABLE = "separable"


@dataclass
class AnswerSet:
    tuples: set = field(default_factory=set)
    trivially_true: bool = False
    incomplete: bool = False
    warnings: list = field(default_factory=list)
    witness: str | None = None
    route: str = ROUTE_COMBINED

    @property
    def holds(self) -> bool:
        """Truth value of a boolean query."""
        return self.trivially_true or () in self.tuples

    def sorted(self) -> list[tuple]:
        return sorted_answers(self.tuples)


def _derived_predicates(program: Program) -> set[str]:
    return {h.predicate for r in program.tgds for h in r.head}


def egd_violation_queries(program: Program) -> list[tuple]:
    """For each egd, its body as a BCQ with ``left != right``."""
    return [(e, ConjunctiveQuery((), e.body, (*e.builtins, Comparison("!=", e.left, e.right))))
            for e in program.egds]


def _fast_path_applies(program: Program) -> bool:
    if not program.egds or not program.md:
        return False
    ont = MDOntology.from_program(program)
    return check_separability_syntactic(program.tgds, program.egds, ont) is Separability.SEPARABLE


@dataclass
class _Saturation:
    chase: ChaseResult
    route: str
    failure: str | None = None


def _saturate(program: Program, opts: ChaseOptions, fast_path: bool) -> _Saturation:
    if fast_path and _fast_path_applies(program):
        res = run_chase(program, opts, egds=[])
        for e, q in egd_violation_queries(program):
            for theta in find_homomorphisms(q.body, res.instance, q.builtins, ordered=True):
                return _Saturation(res, ROUTE_SEPARABLE, f"{theta[e.left]} ≠ {theta[e.right]}")
        return _Saturation(res, ROUTE_SEPARABLE)
    res = run_chase(program, opts)
    return _Saturation(res, ROUTE_COMBINED, str(res.witness) if res.failed else None)


def certain_answers(program: Program, q: Query, opts: ChaseOptions | None = None,
                    fast_path: bool = True) -> AnswerSet:
    """Null-free answers of ``q`` on the chase, after the failure and nc checks."""
    opts = opts or ChaseOptions()
    sat = _saturate(program, opts, fast_path)
    out = AnswerSet(route=sat.route)
    if sat.failure:
        out.trivially_true = True
        out.witness = f"chase failed: {sat.failure}"
        return out
    violations = nc_violations(program.ncs, sat.chase.instance, program.closed_predicates())
    if violations:
        nc, theta = violations[0]
        out.trivially_true = True
        out.witness = f"negative constraint {nc.label or nc} violated"
        return out
    out.tuples = strip_null_answers(evaluate_query(q, sat.chase.instance))
    if sat.chase.truncated:
        used = {a.predicate for d in as_ucq(q).disjuncts for a in d.body}
        if used & _derived_predicates(program):
            out.incomplete = True
            out.warnings.append("IncompleteAnswer: the chase was truncated")
    return out


@dataclass(frozen=True)
class Consistency:
    consistent: bool
    witness: str | None = None

    def __bool__(self) -> bool:
        return self.consistent


def is_consistent(program: Program, opts: ChaseOptions | None = None) -> Consistency:
    """Inconsistent iff the combined chase fails or some nc body is entailed.

    Raises Indeterminate when the chase was truncated without a violation.
    """
    opts = opts or ChaseOptions()
    res = run_chase(program, opts)
    if res.failed:
        return Consistency(False, str(res.witness))
    violations = nc_violations(program.ncs, res.instance, program.closed_predicates())
    if violations:
        nc, _ = violations[0]
        return Consistency(False, f"negative constraint {nc.label or nc} violated")
    if res.truncated:
        raise Indeterminate("the chase was truncated before any violation was found")
    return Consistency(True)


class ProbeVerdict(Enum):
    AGREEMENT = "ConsistentWithAgreement"
    DISAGREEMENT = "Disagreement"
    CHASE_FAILED = "ChaseFailed"


@dataclass(frozen=True)
class ProbeResult:
    verdict: ProbeVerdict
    witness: object = None


def semantic_separability_probe(program: Program, queries: Iterable[ConjunctiveQuery],
                                opts: ChaseOptions | None = None) -> ProbeResult:
    """Compare boolean answers with and without the egds.

    A disagreement shows the tgds and egds are not separable on this data.
    Agreement on a finite query list proves nothing in general.
    """
    opts = opts or ChaseOptions()
    with_egds = run_chase(program, opts)
    if with_egds.failed:
        return ProbeResult(ProbeVerdict.CHASE_FAILED, with_egds.witness)
    without = run_chase(program, opts, egds=[])
    if with_egds.truncated or without.truncated:
        raise Indeterminate("a probe chase was truncated")
    for q in queries:
        a = strip_null_answers(evaluate_query(q, with_egds.instance))
        b = strip_null_answers(evaluate_query(q, without.instance))
        if a != b:
            return ProbeResult(ProbeVerdict.DISAGREEMENT, q)
    return ProbeResult(ProbeVerdict.AGREEMENT)
