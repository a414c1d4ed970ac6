"""Text formats: programs (.dlp), instances (.facts) and queries (.q).

Grammar summary::

    % comment
    @md.                                   @layer core|nickname|quality|version.
    @predicate R/2.                        @closed Unit, Ward.
    @source Temperatures/4.                @external Supply/2.
    @quality TakenWithTherm/3.
    @categorical WorkSchedules(Unit, Day; Nurse, Speciality).
    @dimension Hospital { Ward. WardUnit: Ward -> Unit. }
    R(a, b).                               fact
    s1: Shifts(W,D;N,S), WardUnit(W,U) -> WorkSchedules(U,D;N,T).
    WardUnit(X,Y), WardUnit(X,Z) -> Y = Z.
    WorkSchedules(U,D;N,T), not Unit(U) -> #false.
    ?(X) :- R(X,b), R(X,d) | P(X,X).

Variables start with an uppercase letter or ``_``; constants are lowercase
identifiers, numbers or double-quoted strings.  Quoted timestamps such as
``"12:10-Sep/1/2016"`` are normalised to ``"2016/09/01-12:10"`` so that the
usual string order is chronological.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .dimensions import DimensionSchema
from .errors import (
    ArityMismatch,
    ExistentialInCategoricalPosition,
    ExistentialInEgd,
    NegationOutsideNC,
    ParseError,
)
from .logic import (
    UCQ,
    Atom,
    Comparison,
    ConjunctiveQuery,
    Constant,
    Instance,
    Null,
    Query,
    Variable,
    render_constant,
    variables_of,
)
from .rules import EGD, LAYERS, NC, TGD, CategoricalPredicate, Program

_MONTHS = {m: i for i, m in enumerate(
    ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"], start=1)}
_STAMP = re.compile(r"(?:(\d{1,2}):(\d{2})\s*[- ]\s*)?([A-Za-z]{3})/(\d{1,2})/(\d{4})\Z")


def normalize_timestamp(text: str) -> str:
    """``12:10-Sep/1/2016`` -> ``2016/09/01-12:10``; other text is returned as is."""
    m = _STAMP.match(text.strip())
    if not m or m.group(3).lower() not in _MONTHS:
        return text
    hh, mm, mon, day, year = m.groups()
    out = f"{year}/{_MONTHS[mon.lower()]:02d}/{int(day):02d}"
    if hh is not None:
        out += f"-{int(hh):02d}:{mm}"
    return out


# -- lexer ------------------------------------------------------------------

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"%[^\n]*"),
    ("ARROW", r"->"),
    ("IF", r":-"),
    ("OP", r"!=|<=|>=|<|>|="),
    ("FALSE", r"\#false\b"),
    ("DIRECTIVE", r"@[a-z]+"),
    ("NULL", r"\?z\d+"),
    ("QMARK", r"\?"),
    ("NUMBER", r"-?\d+(?:\.\d+)?(?![A-Za-z_])"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"'),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_]*(?:'+|\^[A-Za-z0-9_]+)?"),
    ("LPAREN", r"\("),
    ("RPAREN", r"\)"),
    ("LBRACE", r"\{"),
    ("RBRACE", r"\}"),
    ("COMMA", r","),
    ("SEMI", r";"),
    ("COLON", r":"),
    ("PIPE", r"\|"),
    ("SLASH", r"/"),
    ("DOT", r"\."),
]
_LEXER = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _LEXER.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("WS", "COMMENT"):
            out.append(Token(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    out.append(Token("EOF", "", line, pos - line_start + 1))
    return out


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


# -- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, allow_nulls: bool = False) -> None:
        self.toks = tokenize(text)
        self.i = 0
        self.allow_nulls = allow_nulls
        self.prog = Program()
        self.layer = "core"
        self.arity_seen: dict[str, tuple[int, int, int]] = {}
        self.anon = 0
        self.pending_md_checks: list[tuple[TGD, Token]] = []

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i = min(self.i + 1, len(self.toks) - 1)
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ParseError(f"expected {want}, found {tok.text or tok.kind!r}", tok.line, tok.col)
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None

    def fail(self, msg: str, tok: Token | None = None, cls=ParseError):
        tok = tok or self.peek()
        raise cls(msg, tok.line, tok.col)

    # arity bookkeeping
    def note_arity(self, pred: str, n: int, tok: Token) -> None:
        seen = self.arity_seen.get(pred)
        if seen is None:
            self.arity_seen[pred] = (n, tok.line, tok.col)
        elif seen[0] != n:
            self.fail(
                f"{pred} used with arity {n}, earlier with {seen[0]} (line {seen[1]})",
                tok, ArityMismatch,
            )

    def note_split(self, pred: str, split: int, tok: Token) -> None:
        cat = self.prog.categoricals.get(pred)
        known = cat.split if cat else self.prog.splits.get(pred)
        if known is None:
            self.prog.splits[pred] = split
        elif known != split:
            self.fail(f"{pred} has {known} categorical attributes, not {split}", tok)

    # terms and atoms
    def term(self):
        tok = self.next()
        if tok.kind == "IDENT":
            if tok.text == "_":
                self.anon += 1
                return Variable(f"_G{self.anon}")
            if tok.text[0].isupper() or tok.text[0] == "_":
                return Variable(tok.text)
            return Constant(tok.text)
        if tok.kind == "NUMBER":
            return Constant(tok.text)
        if tok.kind == "STRING":
            return Constant(normalize_timestamp(_unquote(tok.text)))
        if tok.kind == "NULL":
            if not self.allow_nulls:
                self.fail("labeled nulls may only appear in engine dumps", tok)
            return Null(int(tok.text[2:]))
        self.fail(f"expected a term, found {tok.text or tok.kind!r}", tok)

    def atom_(self) -> Atom:
        name = self.expect("IDENT")
        self.expect("LPAREN")
        args: list = []
        split = None
        if not self.accept("RPAREN"):
            while True:
                args.append(self.term())
                if self.accept("SEMI"):
                    if split is not None:
                        self.fail("only one ';' allowed in an atom")
                    split = len(args)
                    continue
                if self.accept("RPAREN"):
                    break
                self.expect("COMMA")
        self.note_arity(name.text, len(args), name)
        if split is not None:
            self.note_split(name.text, split, name)
        return Atom(name.text, tuple(args))

    def literal(self):
        """Returns ('pos', Atom) | ('neg', Atom) | ('cmp', Comparison)."""
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "not" and self.peek(1).kind == "IDENT":
            self.next()
            return ("neg", self.atom_(), tok)
        if tok.kind == "IDENT" and self.peek(1).kind == "LPAREN":
            return ("pos", self.atom_(), tok)
        left = self.term()
        op = self.expect("OP")
        right = self.term()
        return ("cmp", Comparison(op.text, left, right), tok)

    def conjunction(self, stop: tuple[str, ...]) -> list:
        lits = []
        while True:
            lits.append(self.literal())
            if self.peek().kind in stop:
                return lits
            self.expect("COMMA")

    # statements
    def parse(self) -> Program:
        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.kind == "DIRECTIVE":
                self.directive()
            elif tok.kind == "QMARK":
                self.prog.queries.append(self.query())
            else:
                self.rule_or_fact()
        self.finish()
        return self.prog

    def predref_list(self) -> dict[str, int]:
        out: dict[str, int] = {}
        while True:
            name = self.expect("IDENT")
            self.expect("SLASH")
            n = int(self.expect("NUMBER").text)
            self.note_arity(name.text, n, name)
            out[name.text] = n
            if self.accept("DOT"):
                return out
            self.expect("COMMA")

    def directive(self) -> None:
        tok = self.next()
        kind = tok.text[1:]
        if kind == "md":
            self.expect("DOT")
            self.prog.md = True
        elif kind == "predicate":
            self.prog.predicates.update(self.predref_list())
        elif kind == "source":
            self.prog.sources.update(self.predref_list())
        elif kind == "external":
            self.prog.external.update(self.predref_list())
        elif kind == "quality":
            self.prog.quality.update(self.predref_list())
        elif kind == "closed":
            while True:
                self.prog.closed.append(self.expect("IDENT").text)
                if self.accept("DOT"):
                    break
                self.expect("COMMA")
        elif kind == "layer":
            name = self.expect("IDENT")
            if name.text not in LAYERS:
                self.fail(f"unknown layer {name.text}", name)
            self.layer = name.text
            self.expect("DOT")
        elif kind == "categorical":
            self.categorical_decl()
        elif kind == "dimension":
            self.dimension_decl()
        else:
            self.fail(f"unknown directive {tok.text}", tok)

    def categorical_decl(self) -> None:
        name = self.expect("IDENT")
        self.expect("LPAREN")
        cats: list[str] = []
        attrs: list[str] = []
        target = cats
        if not self.accept("RPAREN"):
            while True:
                target.append(self.expect("IDENT").text)
                if self.accept("SEMI"):
                    if target is attrs:
                        self.fail("only one ';' allowed")
                    target = attrs
                    continue
                if self.accept("RPAREN"):
                    break
                self.expect("COMMA")
        self.expect("DOT")
        if target is cats:
            self.fail("categorical declaration needs a ';' split", name)
        decl = CategoricalPredicate(name.text, tuple(cats), tuple(attrs))
        known = self.prog.splits.pop(name.text, None)
        if known is not None and known != decl.split:
            self.fail(f"{name.text} has {known} categorical attributes, not {decl.split}", name)
        self.note_arity(name.text, decl.arity, name)
        self.prog.categoricals[name.text] = decl

    def dimension_decl(self) -> None:
        name = self.expect("IDENT")
        self.expect("LBRACE")
        cats: list[str] = []
        edges: list[tuple[str, str, str]] = []

        def mention(k: str) -> None:
            if k not in cats:
                cats.append(k)

        while not self.accept("RBRACE"):
            first = self.expect("IDENT")
            if self.accept("DOT"):
                mention(first.text)
                self.note_arity(first.text, 1, first)
                continue
            self.expect("COLON")
            child = self.expect("IDENT").text
            self.expect("ARROW")
            parent = self.expect("IDENT").text
            self.expect("DOT")
            mention(child)
            mention(parent)
            self.note_arity(first.text, 2, first)
            edges.append((child, parent, first.text))
        for k in cats:
            self.arity_seen.setdefault(k, (1, name.line, name.col))
        self.prog.dimensions.append(DimensionSchema(name.text, tuple(cats), tuple(edges)))

    def query(self) -> Query:
        start = self.expect("QMARK")
        self.expect("LPAREN")
        head: list = []
        if not self.accept("RPAREN"):
            while True:
                head.append(self.term())
                if self.accept("RPAREN"):
                    break
                self.expect("COMMA")
        self.expect("IF")
        disjuncts = []
        while True:
            lits = self.conjunction(("PIPE", "DOT"))
            body, builtins = [], []
            for kind, x, tok in lits:
                if kind == "neg":
                    self.fail("negated atoms are only allowed in negative constraints", tok, NegationOutsideNC)
                (body if kind == "pos" else builtins).append(x)
            try:
                disjuncts.append(ConjunctiveQuery(tuple(head), tuple(body), tuple(builtins)))
            except ValueError as exc:
                self.fail(str(exc), start)
            if self.accept("DOT"):
                break
            self.expect("PIPE")
        return disjuncts[0] if len(disjuncts) == 1 else UCQ(tuple(disjuncts))

    def rule_or_fact(self) -> None:
        start = self.peek()
        label = None
        if start.kind == "IDENT" and self.peek(1).kind == "COLON":
            label = self.next().text
            self.next()
        if self.peek().kind == "ARROW":
            lits = []
        else:
            lits = self.conjunction(("ARROW", "DOT"))
        if self.accept("DOT"):
            if label or len(lits) != 1 or lits[0][0] != "pos":
                self.fail("a fact is a single ground atom", start)
            fact = lits[0][1]
            if not fact.is_ground():
                self.fail(f"fact {fact} is not ground", start)
            self.prog.facts.append(fact)
            return
        arrow = self.expect("ARROW")
        body = [x for k, x, _ in lits if k == "pos"]
        negated = [(x, t) for k, x, t in lits if k == "neg"]
        builtins = [x for k, x, _ in lits if k == "cmp"]
        body_vars = set(variables_of(body))
        for c in builtins:
            for v in c.variables():
                if v not in body_vars:
                    self.fail(f"variable {v} in a comparison is not bound by the body", start)
        if self.accept("FALSE"):
            self.expect("DOT")
            for a, tok in negated:
                for v in a.variables():
                    if v not in body_vars:
                        self.fail(f"variable {v} of negated atom is not bound", tok)
            self.prog.ncs.append(NC(tuple(body), tuple(a for a, _ in negated), tuple(builtins),
                                    label, self.layer))
            return
        if negated:
            self.fail("negated atoms are only allowed in negative constraints", negated[0][1], NegationOutsideNC)
        if self.peek(1).kind == "OP" and self.peek(1).text == "=":
            ltok = self.peek()
            left = self.term()
            self.next()
            rtok = self.peek()
            right = self.term()
            self.expect("DOT")
            for t, tok in ((left, ltok), (right, rtok)):
                if not isinstance(t, Variable):
                    self.fail("egd heads equate two variables", tok)
                if t not in body_vars:
                    self.fail(f"egd head variable {t} does not occur in the body", tok, ExistentialInEgd)
            self.prog.egds.append(EGD(tuple(body), left, right, tuple(builtins), label, self.layer))
            return
        head = [self.atom_()]
        while self.accept("COMMA"):
            head.append(self.atom_())
        self.expect("DOT")
        if not body:
            self.fail("a rule needs a non-empty body", arrow)
        tgd = TGD(tuple(body), tuple(head), tuple(builtins), label, self.layer)
        self.prog.tgds.append(tgd)
        self.pending_md_checks.append((tgd, start))

    def finish(self) -> None:
        p = self.prog
        for table in (p.sources, p.external, p.quality):
            for name, n in table.items():
                if name in p.categoricals and p.categoricals[name].arity != n:
                    raise ArityMismatch(f"{name} declared with arity {n}")
        for name, n in p.predicates.items():
            seen = self.arity_seen.get(name)
            if seen and seen[0] != n:
                raise ArityMismatch(f"{name} declared with arity {n}, used with {seen[0]}", seen[1], seen[2])
        if not p.md:
            return
        for tgd, tok in self.pending_md_checks:
            ex = set(tgd.existentials)
            for h in tgd.head:
                split = p.split_of(h.predicate)
                if split is None:
                    continue
                for i, t in enumerate(h.args[:split], start=1):
                    if t in ex:
                        raise ExistentialInCategoricalPosition(
                            f"existential {t} in categorical position {h.predicate}[{i}]",
                            tok.line, tok.col,
                        )


def parse_program(text: str) -> Program:
    return _Parser(text).parse()


def parse_instance(text: str) -> Instance:
    """Facts only; ``?zN`` nulls are accepted here."""
    parser = _Parser(text, allow_nulls=True)
    prog = parser.parse()
    if prog.tgds or prog.egds or prog.ncs or prog.queries or prog.dimensions:
        raise ParseError("an instance file may only contain facts")
    return Instance(prog.facts)


def parse_query(text: str) -> Query:
    prog = _Parser(text).parse()
    if len(prog.queries) != 1 or prog.facts or prog.rules():
        raise ParseError("a query file holds exactly one query")
    return prog.queries[0]


# -- serializer -------------------------------------------------------------

def render_term(t) -> str:
    if isinstance(t, Constant):
        return render_constant(t.name)
    return str(t)


def render_atom(a: Atom, split: int | None = None) -> str:
    args = [render_term(t) for t in a.args]
    if split is None or split > len(args):
        inner = ", ".join(args)
    else:
        left, right = ", ".join(args[:split]), ", ".join(args[split:])
        inner = f"{left}; {right}" if left and right else f"{left};{right}" if left or right else ";"
    return f"{a.predicate}({inner})"


class _Renderer:
    def __init__(self, splits: dict[str, int] | None = None) -> None:
        self.splits = splits or {}

    def atom(self, a: Atom) -> str:
        return render_atom(a, self.splits.get(a.predicate))

    def body(self, atoms, builtins=(), negated=()) -> str:
        parts = [self.atom(a) for a in atoms]
        parts += [f"not {self.atom(a)}" for a in negated]
        parts += [f"{render_term(c.left)} {c.op} {render_term(c.right)}" for c in builtins]
        return ", ".join(parts)

    def rule(self, r) -> str:
        prefix = f"{r.label}: " if r.label else ""
        if isinstance(r, TGD):
            head = ", ".join(self.atom(h) for h in r.head)
            return f"{prefix}{self.body(r.body, r.builtins)} -> {head}."
        if isinstance(r, EGD):
            return f"{prefix}{self.body(r.body, r.builtins)} -> {r.left} = {r.right}."
        return f"{prefix}{self.body(r.body, r.builtins, r.negated)} -> #false."

    def query(self, q: Query) -> str:
        ds = q.disjuncts if isinstance(q, UCQ) else (q,)
        head = ", ".join(render_term(t) for t in ds[0].head)
        bodies = " | ".join(self.body(d.body, d.builtins) for d in ds)
        return f"?({head}) :- {bodies}."


def _splits(p: Program) -> dict[str, int]:
    out = dict(p.splits)
    out.update({n: c.split for n, c in p.categoricals.items()})
    return out


def serialize_program(p: Program) -> str:
    r = _Renderer(_splits(p))
    lines: list[str] = []
    if p.md:
        lines.append("@md.")
    for directive, table in (("predicate", p.predicates), ("source", p.sources),
                             ("external", p.external), ("quality", p.quality)):
        if table:
            refs = ", ".join(f"{n}/{a}" for n, a in table.items())
            lines.append(f"@{directive} {refs}.")
    if p.closed:
        lines.append(f"@closed {', '.join(p.closed)}.")
    for d in p.dimensions:
        lines.append(f"@dimension {d.name} {{")
        for k in d.categories:
            lines.append(f"  {k}.")
        for c, par, name in d.edges:
            lines.append(f"  {name}: {c} -> {par}.")
        lines.append("}")
    for c in p.categoricals.values():
        lines.append(f"@categorical {c.name}({', '.join(c.categories)}; {', '.join(c.attributes)}).")
    lines.extend(f"{r.atom(f)}." for f in p.facts)
    layer = "core"
    for rule in p.rules():
        if rule.layer != layer:
            lines.append(f"@layer {rule.layer}.")
            layer = rule.layer
        lines.append(r.rule(rule))
    lines.extend(r.query(q) for q in p.queries)
    return "".join(line + "\n" for line in lines)


def serialize_instance(inst: Instance, splits: dict[str, int] | None = None) -> str:
    """Sorted dump, one fact per line; nulls print as ``?zN``."""
    r = _Renderer(splits)
    return "".join(f"{r.atom(a)}.\n" for a in inst.sorted_atoms())


def serialize_query(q: Query, splits: dict[str, int] | None = None) -> str:
    return _Renderer(splits).query(q) + "\n"


def program_splits(p: Program) -> dict[str, int]:
    return _splits(p)

