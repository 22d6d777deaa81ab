"""Program representation and loading.

A program file mixes CLP clauses, CHR rules, constraint declarations,
tabling declarations and queries::

    :- constraints leq/2.
    leq(X,X) <=> true.
    :- table_chr path(_,_,chr) with [projection(project)].
    path(X,Y,Z) :- edge(X,Y,Z).
    ?- path(a,a,X).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .builtins import BUILTINS, GUARD_ONLY
from .reader import ParseError, format_term, read_terms
from .terms import NIL, TRUE, Atom, Struct, Term, Var, deref, functor_key, list_items

__all__ = [
    "ChrRule", "Clause", "TableDecl", "Program", "LoadError",
    "parse_program", "parse_query", "conjuncts", "ParseError",
]

Key = tuple[str, int]


class LoadError(Exception):
    """A program that parses but cannot be loaded."""


@dataclass
class ChrRule:
    name: str | None
    kept_heads: list[Term]
    removed_heads: list[Term]
    guard: list[Term]
    body: list[Term]
    text_order: int
    varnames: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> str:
        if not self.kept_heads:
            return "simplification"
        if not self.removed_heads:
            return "propagation"
        return "simpagation"

    @property
    def label(self) -> str:
        return self.name if self.name is not None else f"rule_{self.text_order}"

    def to_term(self) -> Term:
        def conj(goals):
            return _conj_term(goals) if goals else TRUE
        rhs = conj(self.body)
        if self.guard:
            rhs = Struct("|", (conj(self.guard), rhs))
        if self.kind == "propagation":
            t = Struct("==>", (_conj_term(self.kept_heads), rhs))
        elif self.kind == "simplification":
            t = Struct("<=>", (_conj_term(self.removed_heads), rhs))
        else:
            lhs = Struct("\\", (_conj_term(self.kept_heads), _conj_term(self.removed_heads)))
            t = Struct("<=>", (lhs, rhs))
        if self.name is not None:
            t = Struct("@", (Atom(self.name), t))
        return t


@dataclass
class Clause:
    head: Term
    body: list[Term]
    varnames: dict = field(default_factory=dict, repr=False)

    def to_term(self) -> Term:
        if not self.body:
            return self.head
        return Struct(":-", (self.head, _conj_term(self.body)))


@dataclass
class TableDecl:
    name: str
    arity: int
    arg_modes: list[str]
    encoding: str = "suspension"
    projection: str | None = None
    canonical_form: str | None = None
    answer_combination: str | None = None
    relaxed: bool = False

    @property
    def key(self) -> Key:
        return (self.name, self.arity)


@dataclass
class Program:
    clauses: dict[Key, list[Clause]] = field(default_factory=dict)
    chr_rules: list[ChrRule] = field(default_factory=list)
    constraint_decls: set[Key] = field(default_factory=set)
    table_decls: dict[Key, TableDecl] = field(default_factory=dict)
    queries: list[tuple[list[Term], dict]] = field(default_factory=list)

    def classify(self, goal: Term) -> str:
        """'builtin', 'chr' or 'user' for a callable goal."""
        key = functor_key(goal)
        if key in self.constraint_decls:
            return "chr"
        if key in BUILTINS or key in GUARD_ONLY:
            return "builtin"
        return "user"

    def extend(self, other: "Program") -> None:
        for key, cls in other.clauses.items():
            self.clauses.setdefault(key, []).extend(cls)
        offset = len(self.chr_rules)
        for r in other.chr_rules:
            r.text_order += offset
            self.chr_rules.append(r)
        self.constraint_decls |= other.constraint_decls
        for key, decl in other.table_decls.items():
            if key in self.table_decls:
                raise LoadError(f"{key[0]}/{key[1]} is tabled more than once")
            self.table_decls[key] = decl
        self.queries.extend(other.queries)
        self.validate()

    def validate(self) -> None:
        clash = set(self.clauses) & self.constraint_decls
        if clash:
            name, arity = sorted(clash)[0]
            raise LoadError(f"{name}/{arity} is both a CHR constraint and a predicate")
        for key in self.clauses:
            if key in BUILTINS:
                raise LoadError(f"cannot redefine built-in {key[0]}/{key[1]}")
        for rule in self.chr_rules:
            for h in rule.kept_heads + rule.removed_heads:
                if functor_key(h) not in self.constraint_decls:
                    name, arity = functor_key(h) or ("?", 0)
                    raise LoadError(f"rule {rule.label}: head {name}/{arity} is not a declared constraint")
            for g in rule.guard:
                _check_guard_goal(g, rule)
            for g in rule.body:
                _check_body_goal(g)
        for cls in self.clauses.values():
            for c in cls:
                for g in c.body:
                    _check_body_goal(g)

    def rules_for(self, key: Key) -> list[ChrRule]:
        return [r for r in self.chr_rules if any(functor_key(h) == key for h in r.kept_heads + r.removed_heads)]


def _conj_term(goals: list[Term]) -> Term:
    t = goals[-1]
    for g in reversed(goals[:-1]):
        t = Struct(",", (g, t))
    return t


def conjuncts(t: Term) -> list[Term]:
    """Flatten a ``,``-conjunction into a goal list, left to right."""
    out: list[Term] = []
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Struct and x.name == "," and len(x.args) == 2:
            stack.append(x.args[1])
            stack.append(x.args[0])
        else:
            out.append(x)
    return out


def _check_guard_goal(g: Term, rule: ChrRule) -> None:
    g = deref(g)
    key = functor_key(g)
    if key is None:
        raise LoadError(f"rule {rule.label}: guard goal is not callable")
    if key in (("\\+", 1),):
        for sub in conjuncts(g.args[0]):
            _check_guard_goal(sub, rule)
        return
    if key not in BUILTINS and key not in GUARD_ONLY:
        raise LoadError(f"rule {rule.label}: guard calls non-built-in {key[0]}/{key[1]}")


def _check_body_goal(g: Term) -> None:
    key = functor_key(g)
    if key is None:
        raise LoadError(f"body goal {format_term(g)} is not callable")
    if key in GUARD_ONLY:
        raise LoadError(f"{key[0]}/{key[1]} is only allowed in guards")
    if key in ((";", 2), ("->", 2), ("|", 2)):
        raise LoadError("disjunction and if-then-else are not supported in bodies")


def _pred_indicator(t: Term) -> Key:
    t = deref(t)
    if type(t) is Struct and t.name == "/" and len(t.args) == 2:
        name, arity = deref(t.args[0]), deref(t.args[1])
        if type(name) is Atom and type(arity) is int:
            return (name.name, arity)
    raise LoadError(f"expected Name/Arity, got {format_term(t)}")


def _indicators(t: Term) -> list[Key]:
    return [_pred_indicator(x) for x in conjuncts(t)]


def _table_decl(spec: Term) -> TableDecl:
    spec = deref(spec)
    options = NIL
    if type(spec) is Struct and spec.name == "with" and len(spec.args) == 2:
        spec, options = deref(spec.args[0]), deref(spec.args[1])
    if type(spec) is Struct and spec.name == "/" and len(spec.args) == 2:
        name, arity = _pred_indicator(spec)
        decl = TableDecl(name, arity, ["plain"] * arity)
    elif type(spec) is Struct:
        modes = []
        for a in spec.args:
            a = deref(a)
            modes.append("chr" if a is Atom("chr") else "plain")
        decl = TableDecl(spec.name, len(spec.args), modes)
    elif type(spec) is Atom:
        decl = TableDecl(spec.name, 0, [])
    else:
        raise LoadError(f"bad table declaration {format_term(spec)}")
    items = list_items(options)
    if items is None:
        raise LoadError("table options must be a list")
    for opt in items:
        opt = deref(opt)
        if type(opt) is Atom and opt.name == "relaxed":
            decl.relaxed = True
            continue
        if type(opt) is not Struct or len(opt.args) != 1 or type(deref(opt.args[0])) is not Atom:
            raise LoadError(f"bad table option {format_term(opt)}")
        value = deref(opt.args[0]).name
        if opt.name == "encoding":
            if value not in ("suspension", "goal"):
                raise LoadError(f"unknown encoding {value}")
            decl.encoding = value
        elif opt.name in ("projection", "canonical_form", "answer_combination"):
            setattr(decl, opt.name, value)
        else:
            raise LoadError(f"unknown table option {opt.name}")
    return decl


def _rule_from_term(t: Term, order: int, varnames: dict) -> ChrRule:
    name = None
    t = deref(t)
    if t.name == "@":
        n = deref(t.args[0])
        if type(n) is not Atom:
            raise LoadError("rule name must be an atom")
        name = n.name
        t = deref(t.args[1])
    lhs, rhs = deref(t.args[0]), deref(t.args[1])
    guard: list[Term] = []
    if type(rhs) is Struct and rhs.name == "|" and len(rhs.args) == 2:
        guard = conjuncts(rhs.args[0])
        rhs = rhs.args[1]
    body = conjuncts(rhs)
    if t.name == "==>":
        kept, removed = conjuncts(lhs), []
    elif type(lhs) is Struct and lhs.name == "\\" and len(lhs.args) == 2:
        kept, removed = conjuncts(lhs.args[0]), conjuncts(lhs.args[1])
    else:
        kept, removed = [], conjuncts(lhs)
    if not kept and not removed:
        raise LoadError("rule without heads")
    return ChrRule(name, kept, removed, guard, body, order, varnames)


def _is_rule(t: Term) -> bool:
    t = deref(t)
    if type(t) is not Struct:
        return False
    if t.name == "@" and len(t.args) == 2:
        t = deref(t.args[1])
    return type(t) is Struct and t.name in ("<=>", "==>") and len(t.args) == 2


def parse_program(text: str) -> Program:
    """Parse and load program text. Raises ParseError or LoadError."""
    prog = Program()
    order = 0
    for term, varnames in read_terms(text):
        term = deref(term)
        if type(term) is Struct and term.name == ":-" and len(term.args) == 1:
            _directive(prog, deref(term.args[0]))
        elif type(term) is Struct and term.name == "?-" and len(term.args) == 1:
            prog.queries.append((conjuncts(term.args[0]), varnames))
        elif _is_rule(term):
            prog.chr_rules.append(_rule_from_term(term, order, varnames))
            order += 1
        else:
            if type(term) is Struct and term.name == ":-" and len(term.args) == 2:
                head, body = deref(term.args[0]), conjuncts(term.args[1])
            else:
                head, body = term, []
            if type(head) not in (Atom, Struct):
                raise LoadError(f"clause head {format_term(head)} is not callable")
            prog.clauses.setdefault(functor_key(head), []).append(Clause(head, body, varnames))
    prog.validate()
    return prog


def _directive(prog: Program, d: Term) -> None:
    if type(d) is Struct and d.name in ("constraints", "constraint") and len(d.args) == 1:
        prog.constraint_decls.update(_indicators(d.args[0]))
    elif type(d) is Struct and d.name in ("table_chr", "chr_table", "table") and len(d.args) == 1:
        for spec in conjuncts(d.args[0]):
            decl = _table_decl(spec)
            if decl.key in prog.table_decls:
                raise LoadError(f"{decl.name}/{decl.arity} is tabled more than once")
            prog.table_decls[decl.key] = decl
    else:
        raise LoadError(f"unknown directive {format_term(d)}")


def parse_query(text: str) -> tuple[list[Term], dict[str, Var]]:
    """Parse ``?- G1, ..., Gn.`` (the ``?-`` is optional) into goals."""
    stripped = text.strip()
    if stripped.startswith("?-"):
        stripped = stripped[2:]
    if not stripped.strip().rstrip(".").strip():
        raise ParseError("empty query", 1, 1, expected="a goal")
    if not stripped.rstrip().endswith("."):
        stripped = stripped + " ."
    terms = read_terms(stripped)
    if len(terms) != 1:
        raise ParseError("expected a single query", 1, 1)
    term, names = terms[0]
    return conjuncts(term), names
