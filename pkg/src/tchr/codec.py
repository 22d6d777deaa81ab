"""Herbrand encodings of the CHR store.

Two encodings are supported:

* goal mode -- the list of stored constraint terms; decoding re-runs them
  as goals, so rules fire again and the propagation history is rebuilt
  from scratch;
* suspension mode -- one ``'$susp'(Id, C, Hist)`` entry per suspension,
  where ``Id`` is a placeholder variable and ``Hist`` is a list of
  ``Rule-[Id1,...]`` history tuples referring to the placeholders. Decoding
  restores the suspensions with fresh ids and their history, then
  reactivates each one.
"""
from __future__ import annotations

from dataclasses import dataclass

from .chr import ChrStore, Suspension
from .terms import (NIL, Atom, Struct, Term, Var, deref, list_items, make_list,
                    resolve, sort_key, copy_term)

__all__ = [
    "EncodedStore", "encode_store", "decode_entries", "empty_store", "is_fresh",
    "canonicalize", "sort_canonical", "UnknownPredicate",
]


class UnknownPredicate(Exception):
    """A call to a predicate that has no clauses."""


@dataclass(frozen=True)
class EncodedStore:
    mode: str                 # "goal" or "suspension"
    entries: tuple = ()

    def constraints(self) -> list[Term]:
        if self.mode == "goal":
            return list(self.entries)
        return [deref(e).args[1] for e in self.entries]

    def as_term(self) -> Term:
        return make_list(self.entries)

    def copy(self, mapping: dict) -> "EncodedStore":
        return EncodedStore(self.mode, tuple(copy_term(e, mapping) for e in self.entries))

    def __len__(self):
        return len(self.entries)


def encode_store(store: ChrStore, mode: str = "suspension", resolved: bool = True) -> EncodedStore:
    """Encode the alive suspensions of ``store`` in insertion order.

    With ``resolved=False`` the constraint terms are taken as they are
    (bindings not applied); only use that when the result is copied at once.
    """
    susps = store.suspensions()
    fix = resolve if resolved else (lambda t: t)
    if mode == "goal":
        return EncodedStore("goal", tuple(fix(s.constraint) for s in susps))
    if mode != "suspension":
        raise ValueError(f"unknown encoding {mode!r}")
    placeholders = {s.id: Var() for s in susps}
    hist: dict[int, list[Term]] = {s.id: [] for s in susps}
    for label, ids in sorted(store.history, key=lambda e: (e[1], e[0])):
        if all(i in placeholders for i in ids):
            # attach each tuple once, to its first member
            hist[ids[0]].append(Struct("-", (Atom(label), make_list(placeholders[i] for i in ids))))
    entries = tuple(
        Struct("$susp", (placeholders[s.id], fix(s.constraint), make_list(hist[s.id])))
        for s in susps
    )
    return EncodedStore("suspension", entries)


def decode_entries(enc: EncodedStore, store: ChrStore) -> tuple[list[Term], list[Suspension]]:
    """Start decoding ``enc`` into ``store``.

    Goal mode returns the constraint goals to run. Suspension mode inserts
    the suspensions (fresh ids, recorded history) right away and returns
    them; the caller must reactivate each of them in order.
    """
    if enc.mode == "goal":
        return list(enc.entries), []
    fresh: dict[Var, Suspension] = {}
    made = []
    for e in enc.entries:
        e = deref(e)
        s = store.new_suspension(e.args[1])
        fresh[deref(e.args[0])] = s
        made.append((s, e.args[2]))
    for s, _ in made:
        store.insert(s)
    for s, hist in made:
        for h in list_items(hist) or ():
            h = deref(h)
            members = [fresh[deref(v)] for v in list_items(h.args[1])]
            entry = (deref(h.args[0]).name, tuple(m.id for m in members))
            store.add_history(entry, members)
    return [], [s for s, _ in made]


def is_fresh(enc: EncodedStore) -> bool:
    """True when the variables of ``enc`` are only renamed: each is unbound
    or bound to a variable, and no two of them share a variable. Such a
    store is a variant of the store it was encoded from."""
    seen: dict = {}
    todo = [deref(e).args[1] if enc.mode == "suspension" else e for e in enc.entries]
    while todo:
        t = todo.pop()
        tt = type(t)
        if tt is Var:
            d = deref(t)
            if type(d) is not Var:
                return False
            if seen.setdefault(d, t) is not t:
                return False
        elif tt is Struct:
            todo.extend(t.args)
    return True


def empty_store(engine) -> ChrStore:
    """Replace the engine's store by an empty one (trailed).

    Suspensions of the old store are marked removed so that pending
    activations of them become no-ops; undo brings everything back.
    """
    old = engine.store
    alive = old.suspensions()
    for s in alive:
        s.alive = False
    engine.store = ChrStore(engine.b, old.ids)

    def undo():
        engine.store = old
        for s in alive:
            s.alive = True
    engine.b.push_undo(undo)
    return old


def sort_canonical(terms: list[Term]) -> list[Term]:
    keyed: dict = {}
    for t in terms:
        t = resolve(t)
        keyed.setdefault(sort_key(t), t)
    return [keyed[k] for k in sorted(keyed)]


def canonicalize(enc: EncodedStore, canon: str | None = "sort", engine=None) -> EncodedStore:
    """Canonical form of an encoding, as a goal-mode encoding.

    ``canon`` is ``None`` (keep store order), ``"sort"`` (standard order,
    duplicates removed) or the name of a user predicate ``canon(In, Out)``
    run on ``engine``. Suspension histories are not part of the form.
    """
    terms = [resolve(t) for t in enc.constraints()]
    if canon is None:
        return EncodedStore("goal", tuple(terms))
    if canon == "sort":
        return EncodedStore("goal", tuple(sort_canonical(terms)))
    if engine is None or (canon, 2) not in engine.program.clauses:
        raise UnknownPredicate(f"canonical form predicate {canon}/2 is not defined")
    out = Var()
    goal = Struct(canon, (make_list(terms), out))
    mark = engine.b.mark()
    try:
        if not engine.solve_once([goal]):
            raise UnknownPredicate(f"canonical form predicate {canon}/2 failed")
        items = list_items(out)
        if items is None:
            raise ValueError(f"{canon}/2 did not return a list")
        return EncodedStore("goal", tuple(resolve(t) for t in items))
    finally:
        engine.b.undo(mark)
