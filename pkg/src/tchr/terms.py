"""First-order terms, trailed bindings, unification and variant keys.

Terms are built from four kinds of values:

* ``Var``     -- a logic variable (a mutable binding cell)
* ``Atom``    -- an interned symbol
* ``int``     -- integers are plain Python ints
* ``Struct``  -- a compound ``name(arg1, ..., argN)`` with N >= 1

Variables are bound by writing their ``ref`` slot; every write goes through a
:class:`Bindings` object, which records it on a trail so that it can be undone
exactly.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Iterator, Union

__all__ = [
    "Atom", "Var", "Struct", "Term", "Bindings", "NIL", "TRUE",
    "deref", "unify", "identical", "resolve", "rename_apart", "copy_term",
    "variant_key", "term_vars", "is_ground", "make_list", "list_items",
    "compare_terms", "sort_key", "node_count", "is_callable", "functor_key",
]

_serials = itertools.count()


class Atom:
    """An interned symbol; two atoms with the same name are the same object."""

    __slots__ = ("name",)
    _table: dict[str, "Atom"] = {}

    def __new__(cls, name: str) -> "Atom":
        atom = cls._table.get(name)
        if atom is None:
            atom = object.__new__(cls)
            atom.name = name
            cls._table[name] = atom
        return atom

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"

    def __reduce__(self):
        return (Atom, (self.name,))


class Var:
    """A logic variable. ``serial`` orders variables by creation time."""

    __slots__ = ("ref", "serial", "name")

    def __init__(self, name: str | None = None):
        self.ref: Term | None = None
        self.serial = next(_serials)
        self.name = name

    def __repr__(self) -> str:
        if self.ref is not None:
            return f"Var({self.name or self.serial}={self.ref!r})"
        return f"Var({self.name or '_' + str(self.serial)})"


class Struct:
    """A compound term. Equality and hashing are structural and do not
    dereference variables, so only compare resolved terms with ``==``."""

    __slots__ = ("name", "args", "_hash")

    def __init__(self, name: str, args: Iterable["Term"]):
        self.name = name
        self.args = tuple(args)
        if not self.args:
            raise ValueError("compound terms need at least one argument; use Atom")
        self._hash = None

    def __eq__(self, other):
        if self is other:
            return True
        return (isinstance(other, Struct) and self.name == other.name
                and self.args == other.args)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.name, self.args))
        return self._hash

    def __repr__(self) -> str:
        return f"Struct({self.name!r}, {list(self.args)!r})"


Term = Union[Var, Atom, int, Struct]

NIL = Atom("[]")
TRUE = Atom("true")


def deref(t: Term) -> Term:
    while type(t) is Var:
        ref = t.ref
        if ref is None:
            return t
        t = ref
    return t


def functor_key(t: Term) -> tuple[str, int] | None:
    t = deref(t)
    if type(t) is Struct:
        return (t.name, len(t.args))
    if type(t) is Atom:
        return (t.name, 0)
    return None


def is_callable(t: Term) -> bool:
    return type(deref(t)) in (Atom, Struct)


class Bindings:
    """Binding store with an undo trail.

    The trail holds either bound variables or zero-argument undo callbacks
    (used by the constraint store). ``ask_floor`` switches on entailment
    mode: variables created before the floor may not be bound.
    """

    def __init__(self, occurs_check: bool = True):
        self.trail: list = []
        self.occurs_check = occurs_check
        self.ask_floor: int | None = None
        self.on_bind: Callable[[Var], None] | None = None

    def mark(self) -> int:
        return len(self.trail)

    def undo(self, mark: int) -> None:
        trail = self.trail
        while len(trail) > mark:
            entry = trail.pop()
            if type(entry) is Var:
                entry.ref = None
            else:
                entry()

    def push_undo(self, fn: Callable[[], None]) -> None:
        self.trail.append(fn)

    def bind(self, v: Var, t: Term) -> bool:
        floor = self.ask_floor
        if floor is not None and v.serial < floor:
            return False
        if self.occurs_check and type(t) is Struct and occurs_in(v, t):
            return False
        v.ref = t
        self.trail.append(v)
        if self.on_bind is not None:
            self.on_bind(v)
        return True

    def value(self, v: Var) -> Term:
        """The current value of ``v`` with all bindings applied."""
        return resolve(v)

    def bound_vars(self) -> list[Var]:
        return [e for e in self.trail if type(e) is Var]


def occurs_in(v: Var, t: Term) -> bool:
    stack = [t]
    while stack:
        t = deref(stack.pop())
        if t is v:
            return True
        if type(t) is Struct:
            stack.extend(t.args)
    return False


def unify(t1: Term, t2: Term, b: Bindings) -> bool:
    """Extend ``b`` with a most general unifier of ``t1`` and ``t2``.

    On failure every binding made by this call is undone.
    """
    mark = len(b.trail)
    stack = [(t1, t2)]
    while stack:
        a, c = stack.pop()
        a = deref(a)
        c = deref(c)
        if a is c:
            continue
        ta, tc = type(a), type(c)
        if ta is Var:
            if tc is Var and c.serial > a.serial:
                ok = b.bind(c, a)
            else:
                ok = b.bind(a, c)
            if not ok:
                b.undo(mark)
                return False
        elif tc is Var:
            if not b.bind(c, a):
                b.undo(mark)
                return False
        elif ta is Struct:
            if tc is not Struct or a.name != c.name or len(a.args) != len(c.args):
                b.undo(mark)
                return False
            stack.extend(zip(a.args, c.args))
        elif ta is int:
            if tc is not int or a != c:
                b.undo(mark)
                return False
        else:
            b.undo(mark)
            return False
    return True


def identical(t1: Term, t2: Term) -> bool:
    """Structural identity (``==``): variables must be the same variable."""
    stack = [(t1, t2)]
    while stack:
        a, c = stack.pop()
        a = deref(a)
        c = deref(c)
        if a is c:
            continue
        ta = type(a)
        if ta is not type(c):
            return False
        if ta is Struct:
            if a.name != c.name or len(a.args) != len(c.args):
                return False
            stack.extend(zip(a.args, c.args))
        elif ta is int:
            if a != c:
                return False
        else:
            return False
    return True


def resolve(t: Term) -> Term:
    """Copy of ``t`` with all bindings applied; unbound variables are shared."""
    t = deref(t)
    if type(t) is Struct:
        args = tuple(resolve(a) for a in t.args)
        if all(x is y for x, y in zip(args, t.args)):
            return t
        return Struct(t.name, args)
    return t


def copy_term(t: Term, mapping: dict | None = None) -> Term:
    """Copy ``t`` replacing every unbound variable by a fresh one.

    Passing the same ``mapping`` to several calls keeps shared variables shared.
    """
    if mapping is None:
        mapping = {}
    while type(t) is Var and t.ref is not None:
        t = t.ref
    tt = type(t)
    if tt is Var:
        nv = mapping.get(t)
        if nv is None:
            nv = mapping[t] = Var()
        return nv
    if tt is Struct:
        args = []
        for a in t.args:
            while type(a) is Var and a.ref is not None:
                a = a.ref
            ta = type(a)
            if ta is Var:
                nv = mapping.get(a)
                if nv is None:
                    nv = mapping[a] = Var()
                args.append(nv)
            elif ta is Struct:
                args.append(copy_term(a, mapping))
            else:
                args.append(a)
        return Struct(t.name, tuple(args))
    return t


rename_apart = copy_term


def term_vars(t: Term, acc: list | None = None) -> list[Var]:
    """Unbound variables of ``t`` in depth-first left-to-right order, no repeats."""
    if acc is None:
        acc = []
    seen = {id(v) for v in acc}
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Var:
            if id(x) not in seen:
                seen.add(id(x))
                acc.append(x)
        elif type(x) is Struct:
            stack.extend(reversed(x.args))
    return acc


def is_ground(t: Term) -> bool:
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Var:
            return False
        if type(x) is Struct:
            stack.extend(x.args)
    return True


def variant_key(t: Term) -> Term:
    """Canonical representative of the variant class of ``t``.

    Variables become ``'$VAR'(i)`` numbered by first occurrence, so two terms
    get equal (and equally hashed) keys exactly when they are variants.
    """
    numbering: dict[Var, Struct] = {}

    def walk(x):
        x = deref(x)
        if type(x) is Var:
            k = numbering.get(x)
            if k is None:
                k = numbering[x] = Struct("$VAR", (len(numbering),))
            return k
        if type(x) is Struct:
            return Struct(x.name, tuple(walk(a) for a in x.args))
        return x

    return walk(t)


def make_list(items: Iterable[Term], tail: Term = NIL) -> Term:
    result = tail
    for item in reversed(list(items)):
        result = Struct(".", (item, result))
    return result


def list_items(t: Term) -> list[Term] | None:
    """Elements of a proper list, or None if ``t`` is not one."""
    out = []
    t = deref(t)
    while type(t) is Struct and t.name == "." and len(t.args) == 2:
        out.append(t.args[0])
        t = deref(t.args[1])
    if t is NIL:
        return out
    return None


# Standard order: Var < Number < Atom < Compound.
def compare_terms(a: Term, b: Term) -> int:
    ka, kb = sort_key(a), sort_key(b)
    return (ka > kb) - (ka < kb)


def sort_key(t: Term):
    t = deref(t)
    tt = type(t)
    if tt is Var:
        return (0, t.serial)
    if tt is int:
        return (1, t)
    if tt is Atom:
        return (3, t.name)
    return (4, len(t.args), t.name, tuple(sort_key(a) for a in t.args))


def node_count(t: Term) -> int:
    n = 0
    stack = [t]
    while stack:
        x = deref(stack.pop())
        n += 1
        if type(x) is Struct:
            stack.extend(x.args)
    return n


def iter_subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        x = deref(stack.pop())
        yield x
        if type(x) is Struct:
            stack.extend(reversed(x.args))
