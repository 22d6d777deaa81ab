"""Answer tables: insertion with subsumption or combination, deletion,
plus the bottom-up fixpoint oracle and the compaction checker used to
validate compacted answer sets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .codec import EncodedStore, canonicalize, empty_store, encode_store
from .reader import format_term
from .terms import (Atom, Struct, Term, Var, copy_term, deref, identical, is_ground,
                    list_items, make_list, resolve, term_vars, unify, variant_key)

__all__ = [
    "Answer", "CombinatorSpec", "GroundEnumeration", "insert_answer",
    "insert_plain", "insert_with_subsumption", "insert_with_combination",
    "del_answer", "conjunction_test", "format_answer", "tp_fixpoint",
    "ground_cover", "check_compaction", "CompactionReport",
]


@dataclass(eq=False)
class Answer:
    id: int
    head: Term
    enc: EncodedStore
    canonical: EncodedStore
    key: Term
    alive: bool = True


@dataclass
class CombinatorSpec:
    name: str
    relaxed: bool = False


@dataclass
class GroundEnumeration:
    """Finite candidate values per variable name (supplied by the caller)."""
    domains: dict[str, list[Term]]

    def valuations(self, names: list[str]):
        pools = [self.domains[n] for n in names]
        for combo in itertools.product(*pools):
            yield dict(zip(names, combo))


def format_answer(a: Answer) -> str:
    names = {}
    for i, v in enumerate(term_vars(Struct("$", (a.head, a.canonical.as_term())))):
        names[v] = f"_A{i}"
    store = ", ".join(format_term(c, names) for c in a.canonical.entries) or "true"
    return f"{format_term(a.head, names)} | {store}"


def _canonical(engine, table, enc: EncodedStore) -> EncodedStore:
    return canonicalize(enc, table.decl.canonical_form, engine)


def _key(head: Term, canon: EncodedStore) -> Term:
    return variant_key(Struct("$ans", (head, canon.as_term())))


def _add(engine, table, head, enc, canon, key=None) -> Answer:
    if key is None:
        key = _key(head, canon)
    ans = Answer(len(table.answers), head, enc, canon, key)
    table.answers.append(ans)
    table.index[ans.key] = ans
    return ans


def del_answer(table, ans: Answer) -> None:
    """Mark an answer dead; it is never delivered again. Idempotent."""
    if not ans.alive:
        return
    ans.alive = False
    if table.index.get(ans.key) is ans:
        del table.index[ans.key]


def insert_answer(engine, table, head: Term, enc: EncodedStore):
    """Insert a new answer (``head`` and ``enc`` owned by the table).

    Returns ``(status, answer)`` with status ``inserted``, ``merged`` or
    ``rejected``; ``answer`` is the answer that was added, if any.
    """
    canon = _canonical(engine, table, enc)
    if table.decl.answer_combination is not None:
        return insert_with_combination(engine, table, head, enc, canon)
    if engine.subsumption:
        return insert_with_subsumption(engine, table, head, enc, canon)
    return insert_plain(engine, table, head, enc, canon)


def insert_plain(engine, table, head, enc, canon=None):
    if canon is None:
        canon = _canonical(engine, table, enc)
    key = _key(head, canon)
    if key in table.index:
        return "rejected", None
    return "inserted", _add(engine, table, head, enc, canon, key)


def conjunction_test(engine, table, prev: Answer, head: Term, enc: EncodedStore,
                     canon: EncodedStore) -> str | None:
    """Compute C0 /\\ C1 with the CHR rules and compare canonical forms.

    Returns ``"new"`` if the conjunction equals the new store (the new
    answer is implied by ``prev``), ``"prev"`` if it equals the previous
    store, and None otherwise (including an unsatisfiable conjunction).
    """
    from .engine import Decode
    b = engine.b
    mark = b.mark()
    try:
        empty_store(engine)
        m0: dict = {}
        head0 = copy_term(prev.head, m0)
        enc0 = prev.enc.copy(m0)
        canon0 = prev.canonical.copy(m0)
        goals = [Decode(enc), Struct("=", (head0, head)), Decode(enc0)]
        if not engine.solve_once(goals):
            return None
        conj = canonicalize(encode_store(engine.store, table.decl.encoding),
                            table.decl.canonical_form, engine)
        conj_t = conj.as_term()
        if identical(conj_t, canon.as_term()):
            return "new"
        if identical(conj_t, canon0.as_term()):
            return "prev"
        return None
    finally:
        b.undo(mark)


def _same_args(a: Term, b: Term) -> bool:
    return variant_key(a) == variant_key(b)


def insert_with_subsumption(engine, table, head, enc, canon=None):
    if canon is None:
        canon = _canonical(engine, table, enc)
    if _key(head, canon) in table.index:
        return "rejected", None
    for prev in list(table.answers):
        if not prev.alive or not _same_args(prev.head, head):
            continue
        res = conjunction_test(engine, table, prev, head, enc, canon)
        if res == "new":
            return "rejected", None
        if res == "prev":
            del_answer(table, prev)
    return "inserted", _add(engine, table, head, enc, canon)


def _combine(engine, table, prev: Answer, head, enc):
    """Run the combinator on (C0, C1); the combined store, normalised through
    the CHR rules and encoded in the table's mode, or None."""
    from .engine import Decode
    b = engine.b
    name = table.decl.answer_combination
    if (name, 3) not in engine.program.clauses:
        from .codec import UnknownPredicate
        raise UnknownPredicate(f"answer combinator {name}/3 is not defined")
    mark = b.mark()
    try:
        m0: dict = {}
        head0 = copy_term(prev.head, m0)
        enc0 = prev.enc.copy(m0)
        if not unify(head0, head, b):
            return None
        out = Var()
        goal = Struct(name, (make_list(enc0.constraints()), make_list(enc.constraints()), out))
        if not engine.solve_once([goal]):
            return None
        items = list_items(out)
        if items is None:
            return None
        combined = EncodedStore("goal", tuple(resolve(t) for t in items))
        empty_store(engine)
        if not engine.solve_once([Decode(combined)]):
            return None
        res = encode_store(engine.store, table.decl.encoding)
        m: dict = {}
        new_head = copy_term(head, m)
        return new_head, res.copy(m)
    finally:
        b.undo(mark)


def insert_with_combination(engine, table, head, enc, canon=None):
    if canon is None:
        canon = _canonical(engine, table, enc)
    if _key(head, canon) in table.index:
        return "rejected", None
    for prev in list(table.answers):
        if not prev.alive or not _same_args(prev.head, head):
            continue
        got = _combine(engine, table, prev, head, enc)
        if got is None:
            continue
        new_head, new_enc = got
        new_canon = _canonical(engine, table, new_enc)
        if _key(new_head, new_canon) == prev.key:
            return "rejected", None
        del_answer(table, prev)
        status, ans = insert_with_combination(engine, table, new_head, new_enc, new_canon)
        return ("merged" if ans is not None else status), ans
    if engine.subsumption:
        return insert_with_subsumption(engine, table, head, enc, canon)
    return insert_plain(engine, table, head, enc, canon)


# -- oracles ---------------------------------------------------------------

def _answer_covers(engine, head: Term, enc: EncodedStore, atom: Term) -> bool:
    from .engine import Decode
    b = engine.b
    mark = b.mark()
    try:
        empty_store(engine)
        m: dict = {}
        h = copy_term(head, m)
        e = enc.copy(m)
        return engine.solve_once([Struct("=", (h, atom)), Decode(e)])
    finally:
        b.undo(mark)


def ground_cover(engine, answers, candidates: list[Term]) -> set:
    """The candidate ground atoms covered by at least one answer, i.e. for
    which unifying the answer head and decoding its store succeeds."""
    covered = set()
    for atom in candidates:
        for a in answers:
            head = a.head if isinstance(a, Answer) else a[0]
            enc = a.enc if isinstance(a, Answer) else a[1]
            if _answer_covers(engine, head, enc, atom):
                covered.add(atom)
                break
    return covered


@dataclass
class CompactionReport:
    results: dict[int, bool] = field(default_factory=dict)
    witnesses: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.results.values())

    def lines(self) -> list[str]:
        out = []
        for n in (2, 3, 4):
            line = f"PROPERTY ({n}): {'PASS' if self.results[n] else 'FAIL'}"
            if not self.results[n]:
                line += f" [witness: {self.witnesses[n]}]"
            out.append(line)
        return out

    def __str__(self):
        return "\n".join(self.lines())


def check_compaction(engine, compacted, raw, candidates: list[Term]) -> CompactionReport:
    """Check properties (2) no new ground answers, (3) every ground answer
    covered, (4) no more answers than the raw set.

    ``compacted`` and ``raw`` are lists of answers (or ``(head, enc)``
    pairs) which ``engine`` can decode; ``candidates`` enumerates the
    ground atoms of interest.
    """
    rep = CompactionReport()
    c_cover = ground_cover(engine, compacted, candidates)
    r_cover = ground_cover(engine, raw, candidates)
    extra = sorted(c_cover - r_cover, key=format_term)
    missing = sorted(r_cover - c_cover, key=format_term)
    rep.results[2] = not extra
    if extra:
        rep.witnesses[2] = format_term(extra[0])
    rep.results[3] = not missing
    if missing:
        rep.witnesses[3] = format_term(missing[0])
    rep.results[4] = len(compacted) <= len(raw)
    if not rep.results[4]:
        rep.witnesses[4] = f"{len(compacted)} > {len(raw)}"
    return rep


def tp_fixpoint(program, enum: GroundEnumeration | dict, constants: list[Term] | None = None,
                max_iterations: int = 1000, preds: set | None = None,
                step_budget: int = 20_000) -> set:
    """Least fixpoint of the immediate consequence operator over ground
    atoms, computed bottom-up (semi-naive).

    Body atoms of user predicates are joined against the atoms derived so
    far. Clause variables still unbound afterwards are enumerated: a
    variable whose source name has an entry in ``enum`` ranges over that
    entry, any other over all enumeration values plus the program's atoms.
    A clause instance contributes its head when its remaining goals
    (built-ins and CHR constraints), run on an empty store, succeed.
    Partial instances are checked the same way as variables get values, so
    hopeless branches are cut early. ``step_budget`` bounds each such run;
    a ground check that exceeds it raises BudgetExceeded.
    """
    from .engine import BudgetExceeded, Engine
    if isinstance(enum, GroundEnumeration):
        enum = enum.domains
    pool: list[Term] = []
    for vals in enum.values():
        for v in vals:
            if v not in pool:
                pool.append(v)
    for c in (constants if constants is not None else _program_atoms(program)):
        if c not in pool:
            pool.append(c)
    engine = Engine(program, tabling=False, step_budget=step_budget)
    user = set(program.clauses) if preds is None else preds
    interp: set = set()
    delta: set | None = None
    for _ in range(max_iterations):
        found: set = set()
        for key, clauses in program.clauses.items():
            if key not in user:
                continue
            for cl in clauses:
                found.update(_clause_consequences(engine, cl, interp, delta, pool, enum, user))
        fresh = found - interp
        if not fresh:
            return interp
        interp = interp | fresh
        delta = fresh
    raise BudgetExceeded("fixpoint iteration", max_iterations)


def _program_atoms(program) -> list[Term]:
    from .terms import iter_subterms
    seen: list = []
    for clauses in program.clauses.values():
        for cl in clauses:
            for g in [cl.head] + cl.body:
                for t in iter_subterms(g):
                    if type(t) is Atom and t not in seen and t.name not in ("[]",):
                        seen.append(t)
    return seen


def _by_key(atoms) -> dict:
    out: dict = {}
    for a in atoms:
        k = (a.name, len(a.args)) if type(a) is Struct else (a.name, 0)
        out.setdefault(k, []).append(a)
    return out


def _clause_consequences(engine, cl, interp, delta, pool, enum, user):
    from .builtins import BuiltinError
    from .engine import BudgetExceeded
    from .terms import functor_key
    m: dict = {}
    head = copy_term(cl.head, m)
    body = [copy_term(g, m) for g in cl.body]
    names = {m[v]: n for n, v in cl.varnames.items() if v in m}
    atoms = [g for g in body if functor_key(g) in user]
    constraints = [g for g in body if functor_key(g) not in user]
    if delta is not None and not atoms:
        return []               # nothing new can come from a constraint-only clause
    b = engine.b
    full = _by_key(interp)
    new = _by_key(delta or ())
    old = _by_key(interp - (delta or set()))
    out = []

    def satisfiable() -> bool:
        """Run the remaining goals on an empty store. A failure on a
        partial instance rules out all its ground completions; errors and
        runaway runs (goals not yet instantiated enough) do not."""
        inner = b.mark()
        engine.steps = 0
        try:
            empty_store(engine)
            return engine.solve_once(constraints)
        except (BuiltinError, BudgetExceeded):
            return True
        finally:
            b.undo(inner)

    def finish():
        vs = term_vars(Struct("$", (head, make_list(constraints))))
        pools = [enum.get(names.get(v), pool) for v in vs]

        def extend(i):
            if i == len(vs):
                inner = b.mark()
                engine.steps = 0
                try:
                    empty_store(engine)
                    if engine.solve_once(constraints):
                        g = resolve(head)
                        if is_ground(g):
                            out.append(g)
                except BuiltinError:
                    pass            # ill-typed instance
                b.undo(inner)
                return
            for c in pools[i]:
                mark = b.mark()
                if unify(vs[i], c, b) and (i + 1 == len(vs) or satisfiable()):
                    extend(i + 1)
                b.undo(mark)

        if not vs or satisfiable():
            extend(0)

    def join(i, pivot):
        if i == len(atoms):
            finish()
            return
        key = functor_key(atoms[i])
        if delta is None:
            source = full
        elif i < pivot:
            source = old
        elif i == pivot:
            source = new
        else:
            source = full
        for fact in source.get(key, ()):
            mark = b.mark()
            if unify(atoms[i], fact, b):
                join(i + 1, pivot)
            b.undo(mark)

    if delta is None:
        join(0, -1)
    else:
        for pivot in range(len(atoms)):
            join(0, pivot)
    return out
