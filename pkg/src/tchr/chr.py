"""CHR constraint store and rule matching (refined operational semantics).

The store keeps identified constraints ``c#i`` (suspensions) indexed by
functor and by the variables they mention. All store edits are trailed on
the shared :class:`~tchr.terms.Bindings`, so backtracking restores the store
exactly.

Matching is committed choice: for an active constraint we walk its
occurrences (rules in text order; in each rule the removed heads before the
kept heads), search partners oldest first, and commit to the first match
whose guard is entailed and, for propagation rules, whose id tuple is not
yet in the history.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from .builtins import guard_holds
from .program import ChrRule, Program
from .terms import Bindings, Struct, Term, Var, copy_term, deref, functor_key, identical, resolve, term_vars

__all__ = [
    "Suspension", "ChrStore", "Match", "FiringStats",
    "compile_occurrences", "find_match", "StoreIncoherent",
]


class Suspension:
    """An identified constraint ``c#i`` in the store."""

    __slots__ = ("id", "constraint", "alive", "key", "history", "ivars", "pvars")

    def __init__(self, sid: int, constraint: Term):
        self.id = sid
        self.constraint = constraint
        self.alive = True
        self.key = functor_key(constraint)
        # (rule label, id tuple) entries this suspension took part in
        self.history: set = set()
        self.ivars: set = set()
        self.pvars: set = set()     # (arg position, value) pairs in pos_index

    @property
    def state(self) -> str:
        return "stored" if self.alive else "removed"

    def __repr__(self):
        from .reader import format_term
        return f"{format_term(self.constraint)}#{self.id}"


class StoreIncoherent(AssertionError):
    pass


class ChrStore:
    """Suspensions by functor (insertion order) plus a variable index."""

    def __init__(self, b: Bindings, ids=None):
        self.b = b
        # id source, shared with stores that replace this one
        self.ids = ids if ids is not None else itertools.count(1)
        self.by_key: dict[tuple, list[Suspension]] = {}
        self.var_index: dict[Var, list[Suspension]] = {}
        # (functor, arg position, var or constant) -> suspensions with it there
        self.pos_index: dict[tuple, list[Suspension]] = {}
        self.history: set = set()

    # -- queries -------------------------------------------------------
    def suspensions(self) -> list[Suspension]:
        """Alive suspensions in id (insertion) order."""
        out = [s for lst in self.by_key.values() for s in lst if s.alive]
        out.sort(key=lambda s: s.id)
        return out

    def candidates(self, key) -> list[Suspension]:
        return self.by_key.get(key, ())

    def constraints(self) -> list[Term]:
        return [s.constraint for s in self.suspensions()]

    def __len__(self):
        return sum(1 for lst in self.by_key.values() for s in lst if s.alive)

    def woken_by(self, v: Var) -> list[Suspension]:
        return [s for s in self.var_index.get(v, ()) if s.alive]

    # -- trailed updates ----------------------------------------------
    def new_suspension(self, constraint: Term) -> Suspension:
        return Suspension(next(self.ids), constraint)

    def insert(self, s: Suspension) -> None:
        lst = self.by_key.get(s.key)
        if lst is None:
            lst = self.by_key[s.key] = []
        lst.append(s)
        s.alive = True

        def undo():
            lst.pop()
            s.alive = False
        self.b.push_undo(undo)
        self.index(s)

    def index(self, s: Suspension) -> None:
        """Make sure every unbound variable of ``s`` maps to ``s``."""
        for v in term_vars(s.constraint):
            if v in s.ivars:
                continue
            lst = self.var_index.get(v)
            if lst is None:
                lst = self.var_index[v] = []
            lst.append(s)
            s.ivars.add(v)

            def undo(lst=lst, v=v):
                lst.pop()
                s.ivars.discard(v)
            self.b.push_undo(undo)
        c = deref(s.constraint)
        if type(c) is not Struct:
            return
        for i, a in enumerate(c.args):
            a = deref(a)
            if type(a) is Struct or (i, a) in s.pvars:
                continue
            k = (s.key, i, a)
            lst = self.pos_index.get(k)
            if lst is None:
                lst = self.pos_index[k] = []
            lst.append(s)
            s.pvars.add((i, a))

            def undo(lst=lst, e=(i, a)):
                lst.pop()
                s.pvars.discard(e)
            self.b.push_undo(undo)

    def remove(self, s: Suspension) -> None:
        if not s.alive:
            return
        s.alive = False

        def undo():
            s.alive = True
        self.b.push_undo(undo)

    def add_history(self, entry: tuple, members: list[Suspension]) -> None:
        self.history.add(entry)
        for m in members:
            m.history.add(entry)

        def undo():
            self.history.discard(entry)
            for m in members:
                m.history.discard(entry)
        self.b.push_undo(undo)

    def check_coherence(self) -> None:
        """Debug check of the store/index invariant."""
        alive = {s.id for s in self.suspensions()}
        for s in self.suspensions():
            for v in term_vars(s.constraint):
                if s not in self.var_index.get(v, ()):
                    raise StoreIncoherent(f"{v!r} of #{s.id} missing from index")
        for v, lst in self.var_index.items():
            if v.ref is not None:
                continue
            for s in lst:
                if s.alive and s.id in alive and not any(x is v for x in term_vars(s.constraint)):
                    raise StoreIncoherent(f"index maps {v!r} to #{s.id} which lacks it")


@dataclass
class FiringStats:
    applications: Counter = field(default_factory=Counter)
    propagation_firings: int = 0
    introduce: int = 0
    solve: int = 0
    reactivate: int = 0

    @property
    def firings(self) -> int:
        return sum(self.applications.values())

    def snapshot(self) -> dict:
        return {"firings": self.firings, "propagation": self.propagation_firings,
                "introduce": self.introduce, "solve": self.solve,
                "reactivate": self.reactivate}


@dataclass
class CompiledRule:
    rule: ChrRule
    index: int
    heads: list[Term]      # kept heads then removed heads
    n_kept: int
    # per head: functor key and its non-compound args as (position, term)
    keys: list = field(default_factory=list)
    simple_args: list = field(default_factory=list)

    def __post_init__(self):
        for h in self.heads:
            self.keys.append(functor_key(h))
            self.simple_args.append([(i, a) for i, a in enumerate(h.args) if type(a) is not Struct]
                                    if type(h) is Struct else [])

    @property
    def propagation(self) -> bool:
        return self.n_kept == len(self.heads)


def compile_occurrences(prog: Program) -> dict[tuple, list[tuple[CompiledRule, int]]]:
    """Per constraint functor, the (rule, head position) pairs to try."""
    occ: dict[tuple, list[tuple[CompiledRule, int]]] = {}
    for idx, rule in enumerate(prog.chr_rules):
        heads = rule.kept_heads + rule.removed_heads
        cr = CompiledRule(rule, idx, heads, len(rule.kept_heads))
        nk = len(rule.kept_heads)
        order = list(range(nk, len(heads))) + list(range(nk))
        for pos in order:
            occ.setdefault(functor_key(heads[pos]), []).append((cr, pos))
    return occ


@dataclass
class Match:
    rule: CompiledRule
    occurrence: int
    partners: list[Suspension]     # in head order, active included
    body: list[Term]

    @property
    def removed(self) -> list[Suspension]:
        return self.partners[self.rule.n_kept:]

    @property
    def ids(self) -> tuple:
        return tuple(s.id for s in self.partners)


def _match(pat: Term, t: Term, m: dict) -> bool:
    """One-way matching of rule term ``pat`` (never bound itself) against
    store term ``t``; ``m`` maps rule variables to store subterms. This is
    unification where no store variable may be bound."""
    tp = type(pat)
    if tp is Var:
        seen = m.get(pat)
        if seen is None:
            m[pat] = t
            return True
        return identical(seen, t)
    while type(t) is Var and t.ref is not None:
        t = t.ref
    if tp is not Struct:
        return type(t) is tp and t == pat
    if type(t) is not Struct or t.name != pat.name or len(t.args) != len(pat.args):
        return False
    for a, c in zip(pat.args, t.args):
        ta = type(a)
        if ta is Var:
            seen = m.get(a)
            if seen is None:
                m[a] = c
            elif seen is not c and not identical(seen, c):
                return False
        elif ta is Struct:
            if not _match(a, c, m):
                return False
        else:
            while type(c) is Var and c.ref is not None:
                c = c.ref
            if type(c) is not ta or c != a:
                return False
    return True


def find_match(store: ChrStore, occurrences: list[tuple[CompiledRule, int]],
               active: Suspension, start: int, b: Bindings) -> Match | None:
    """First applicable rule instance for ``active`` from occurrence ``start``.

    Heads are matched against the rule text directly; only a successful
    head match renames the guard (and, once the guard holds, the body).
    Guard bindings of rule-local variables stay on the trail.
    """
    for oi in range(start, len(occurrences)):
        cr, pos = occurrences[oi]
        m: dict = {}
        if not _match(cr.heads[pos], active.constraint, m):
            continue
        chosen: list = [None] * len(cr.heads)
        chosen[pos] = active
        found = _search(store, cr, chosen, 0, m, b)
        if found is not None:
            return Match(cr, oi, chosen, [copy_term(g, found) for g in cr.rule.body])
    return None


def _search(store, cr: CompiledRule, chosen, i, m, b):
    heads = cr.heads
    n = len(heads)
    while i < n and chosen[i] is not None:
        i += 1
    if i == n:
        if cr.propagation and (cr.rule.label, tuple(s.id for s in chosen)) in store.history:
            return None
        if not cr.rule.guard:
            return m
        floor = Var().serial
        guard = [copy_term(g, m) for g in cr.rule.guard]
        return m if guard_holds(guard, b, floor) else None
    head = heads[i]
    for s in _partners(store, cr.keys[i], cr.simple_args[i], m):
        if any(s is c for c in chosen):
            continue
        m2 = dict(m)
        if not _match(head, s.constraint, m2):
            continue
        chosen[i] = s
        found = _search(store, cr, chosen, i + 1, m2, b)
        if found is not None:
            return found
        chosen[i] = None
    return None


def _by_id(s):
    return s.id


def _partners(store: ChrStore, key, simple, m: dict):
    """Alive candidate suspensions for a head, oldest first.

    Head arguments that are already fixed -- constants, or rule variables
    matched to a store variable or constant -- must occur identically in
    the partner. They pick the smallest positional-index list and
    pre-filter candidates cheaply.
    """
    allk = store.candidates(key)
    if not allk:
        return ()
    fixed = []
    best = None
    pos_index = store.pos_index
    for i, a in simple:
        if type(a) is Var:
            a = m.get(a)
            if a is None:
                continue
            while type(a) is Var and a.ref is not None:
                a = a.ref
            if type(a) is Struct:
                continue
        lst = pos_index.get((key, i, a), ())
        if best is None or len(lst) < len(best):
            best = lst
            if not lst:
                return ()
        fixed.append((i, a))
    if best is None:
        return [s for s in allk if s.alive]
    pool = sorted(best, key=_by_id) if len(best) < len(allk) else allk
    out = []
    for s in pool:
        if not s.alive:
            continue
        args = s.constraint.args
        for i, a in fixed:
            c = deref(args[i])
            if c is not a and (type(a) is Var or type(c) is not type(a) or c != a):
                break
        else:
            out.append(s)
    return out


def describe_store(store: ChrStore) -> str:
    from .reader import format_term
    return ", ".join(f"{format_term(resolve(s.constraint))}#{s.id}" for s in store.suspensions())
