"""The chase: tgd steps with null invention, egd merging, nc checking.

Scheduling is level by level.  Each level takes a snapshot of all
(rule, assignment) triggers, ordered by rule index and then by the
assignment images, and fires those still applicable when their turn comes.
With eager egd interleaving all egds are enforced to quiescence before the
first tgd step and after every tgd step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import NegatedOpenPredicate, NotApplicable
from .logic import (
    Atom,
    Constant,
    Instance,
    Null,
    NullFactory,
    Term,
    Variable,
    exists_homomorphism,
    find_homomorphisms,
    substitute,
    substitute_atom,
    term_key,
    variables_of,
)
from .rules import EGD, NC, TGD, Program

VARIANTS = ("restricted", "oblivious")
INTERLEAVING = ("eager", "none")


@dataclass(frozen=True)
class ChaseOptions:
    variant: str = "restricted"
    max_steps: int | None = None
    max_null_depth: int | None = None
    subsume_dominated: bool = False
    egd_interleaving: str = "eager"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown chase variant {self.variant!r}")
        if self.egd_interleaving not in INTERLEAVING:
            raise ValueError(f"unknown egd interleaving {self.egd_interleaving!r}")
        if self.variant == "oblivious" and self.max_steps is None and self.max_null_depth is None:
            raise ValueError("the oblivious chase needs max_steps or max_null_depth")


class Outcome(Enum):
    TERMINATED = "Terminated"
    TRUNCATED = "Truncated"
    FAILED = "Failed"


@dataclass(frozen=True)
class Failure:
    """An egd asked to equate two distinct constants."""

    egd: EGD
    left: Constant
    right: Constant

    def __str__(self) -> str:
        return f"{self.left} ≠ {self.right}"


@dataclass
class ChaseStats:
    steps: int = 0
    nulls: int = 0
    merges: int = 0


@dataclass
class ChaseState:
    instance: Instance
    nulls: NullFactory = field(default_factory=NullFactory)
    depth: dict = field(default_factory=dict)
    applied: set = field(default_factory=set)
    null_substitution: dict = field(default_factory=dict)
    stats: ChaseStats = field(default_factory=ChaseStats)
    trace: list = field(default_factory=list)

    @classmethod
    def start(cls, atoms: Iterable[Atom]) -> "ChaseState":
        inst = Instance(atoms)
        nulls = NullFactory(next_id=max((n.id for n in inst.nulls()), default=0) + 1)
        return cls(inst, nulls)

    def resolve(self, t: Term) -> Term:
        return self.null_substitution.get(t, t) if isinstance(t, Null) else t


@dataclass
class ChaseResult:
    outcome: Outcome
    instance: Instance
    stats: ChaseStats
    null_substitution: dict
    witness: Failure | None = None
    trace: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.outcome is Outcome.FAILED

    @property
    def truncated(self) -> bool:
        return self.outcome is Outcome.TRUNCATED


def _key(rule_index: int, rule: TGD, theta: dict) -> tuple:
    return (rule_index, tuple(theta[v] for v in rule.body_variables))


def _body_holds(rule, theta: dict, inst: Instance) -> bool:
    return all(a in inst for a in substitute(rule.body, theta)) and all(
        c.holds(theta) for c in rule.builtins
    )


def is_applicable(state: ChaseState, rule: TGD, theta: dict, variant: str = "restricted",
                  rule_index: int = 0) -> bool:
    if not _body_holds(rule, theta, state.instance):
        return False
    if variant == "oblivious":
        return _key(rule_index, rule, theta) not in state.applied
    frontier = {v: theta[v] for v in rule.frontier}
    return not exists_homomorphism(rule.head, state.instance, partial=frontier)


def null_depth(state: ChaseState, rule: TGD, theta: dict) -> int:
    return 1 + max((state.depth.get(theta[v], 0) for v in rule.body_variables), default=0)


def tgd_step(state: ChaseState, rule: TGD, theta: dict, variant: str = "restricted",
             rule_index: int = 0) -> ChaseState:
    """Fire ``rule`` under ``theta``; existential variables get fresh nulls."""
    if not is_applicable(state, rule, theta, variant, rule_index):
        raise NotApplicable(f"{rule} under {_show(theta)}")
    depth = null_depth(state, rule, theta)
    full = dict(theta)
    for z in rule.existentials:
        n = state.nulls.fresh()
        state.depth[n] = depth
        full[z] = n
        state.stats.nulls += 1
    added = [a for a in substitute(rule.head, full) if state.instance.add(a)]
    state.applied.add(_key(rule_index, rule, theta))
    state.stats.steps += 1
    state.trace.append(("tgd", rule.label or rule_index, tuple(str(a) for a in added)))
    return state


def _merge(state: ChaseState, old: Null, new: Term) -> None:
    state.instance.replace_term(old, new)
    for k, v in state.null_substitution.items():
        if v == old:
            state.null_substitution[k] = new
    state.null_substitution[old] = new
    if state.applied:
        def fix(t):
            return new if t == old else t
        state.applied = {(i, tuple(fix(t) for t in img)) for i, img in state.applied}
    state.stats.merges += 1


def egd_step(state: ChaseState, egd: EGD, theta: dict) -> ChaseState | Failure:
    """Equate θ(left) and θ(right).

    Distinct constants give a Failure; a constant absorbs a null; between
    nulls the older (smaller id) absorbs the younger.
    """
    if not _body_holds(egd, theta, state.instance):
        raise NotApplicable(f"{egd} under {_show(theta)}")
    a, b = theta[egd.left], theta[egd.right]
    if a == b:
        raise NotApplicable(f"{egd}: both sides are already {a}")
    if isinstance(a, Constant) and isinstance(b, Constant):
        lo, hi = sorted((a, b), key=term_key)
        return Failure(egd, lo, hi)
    if isinstance(a, Constant):
        keep, drop = a, b
    elif isinstance(b, Constant):
        keep, drop = b, a
    else:
        keep, drop = (a, b) if a.id < b.id else (b, a)
    _merge(state, drop, keep)
    state.trace.append(("egd", egd.label, f"{drop} := {keep}"))
    return state


def enforce_egds(state: ChaseState, egds: list[EGD]) -> Failure | None:
    """Apply egd steps until none is applicable."""
    changed = True
    while changed:
        changed = False
        for e in egds:
            for theta in find_homomorphisms(e.body, state.instance, e.builtins):
                theta = {v: state.resolve(t) for v, t in theta.items()}
                if theta[e.left] == theta[e.right] or not _body_holds(e, theta, state.instance):
                    continue
                out = egd_step(state, e, theta)
                if isinstance(out, Failure):
                    return out
                changed = True
    return None


def dominated_atoms(inst: Instance) -> list[Atom]:
    """Atoms B mapped into another atom A by a null-only substitution.

    Only atoms whose nulls occur nowhere else are considered, so dropping
    them is a retraction and keeps the instance universal.
    """
    out = []
    for b in inst.sorted_atoms():
        nulls = {t for t in b.args if isinstance(t, Null)}
        if not nulls or any(len(inst.atoms_with(n)) > 1 for n in nulls):
            continue
        as_var = {n: Variable(f"_D{n.id}") for n in nulls}
        pattern = Atom(b.predicate, tuple(as_var.get(t, t) for t in b.args))
        for theta in find_homomorphisms([pattern], inst, ordered=False):
            if substitute_atom(pattern, theta) != b:
                out.append(b)
                break
    return out


def subsume(inst: Instance) -> int:
    removed = 0
    while True:
        dropped = dominated_atoms(inst)
        if not dropped:
            return removed
        # drop one per round: two atoms may dominate each other
        inst.discard(dropped[0])
        removed += 1


def run_chase(program: Program, opts: ChaseOptions | None = None,
              instance: Iterable[Atom] = (), tgds: list[TGD] | None = None,
              egds: list[EGD] | None = None) -> ChaseResult:
    """Chase the program's facts plus ``instance`` with its tgds and egds."""
    opts = opts or ChaseOptions()
    tgds = list(program.tgds if tgds is None else tgds)
    egds = list(program.egds if egds is None else egds)
    if opts.egd_interleaving == "none":
        egds = []
    state = ChaseState.start([*program.facts, *instance])

    def result(outcome: Outcome, witness: Failure | None = None) -> ChaseResult:
        if opts.subsume_dominated and outcome is not Outcome.FAILED:
            subsume(state.instance)
        return ChaseResult(outcome, state.instance, state.stats, dict(state.null_substitution),
                           witness, state.trace)

    failure = enforce_egds(state, egds)
    if failure:
        return result(Outcome.FAILED, failure)
    truncated = False
    while True:
        triggers = [
            (i, r, theta)
            for i, r in enumerate(tgds)
            for theta in find_homomorphisms(r.body, state.instance, r.builtins)
        ]
        fired = False
        for i, r, theta in triggers:
            theta = {v: state.resolve(t) for v, t in theta.items()}
            if not is_applicable(state, r, theta, opts.variant, i):
                continue
            if opts.max_steps is not None and state.stats.steps >= opts.max_steps:
                return result(Outcome.TRUNCATED)
            if opts.max_null_depth is not None and r.existentials \
                    and null_depth(state, r, theta) > opts.max_null_depth:
                truncated = True
                continue
            tgd_step(state, r, theta, opts.variant, i)
            fired = True
            failure = enforce_egds(state, egds)
            if failure:
                return result(Outcome.FAILED, failure)
        if not fired:
            break
    return result(Outcome.TRUNCATED if truncated else Outcome.TERMINATED)


# -- negative constraints ---------------------------------------------------

@dataclass(frozen=True)
class NCCheck:
    consistent: bool
    nc: NC | None = None
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.consistent

    def describe(self) -> str:
        if self.consistent:
            return "consistent"
        body = ", ".join(str(a) for a in substitute(self.nc.body, self.witness))
        name = self.nc.label or str(self.nc)
        return f"violated {name}: {body}"


def nc_violations(ncs: Iterable[NC], inst: Instance, closed: set[str]) -> list[tuple[NC, dict]]:
    out = []
    for nc in ncs:
        for a in nc.negated:
            if a.predicate not in closed:
                raise NegatedOpenPredicate(a.predicate)
        for theta in find_homomorphisms(nc.body, inst, nc.builtins):
            if any(substitute_atom(a, theta) in inst for a in nc.negated):
                continue
            out.append((nc, theta))
            break
    return out


def check_ncs(program: Program, inst: Instance | ChaseResult) -> NCCheck:
    """Evaluate each nc body as a BCQ; negated atoms read the closed extensions."""
    if isinstance(inst, ChaseResult):
        inst = inst.instance
    found = nc_violations(program.ncs, inst, program.closed_predicates())
    if found:
        nc, theta = found[0]
        return NCCheck(False, nc, theta)
    return NCCheck(True)


def _show(theta: dict) -> str:
    order = variables_of([Atom("_", tuple(theta))]) if theta else []
    return "{" + ", ".join(f"{v}↦{theta[v]}" for v in order) + "}"
