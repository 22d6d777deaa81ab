"""Built-in goals: unification, arithmetic, comparison, type tests, lists.

Every built-in is exposed through :func:`solve_builtin`, which returns an
iterator; each step of the iterator leaves one solution's bindings in place.
Deterministic built-ins yield at most once.
"""
from __future__ import annotations

from typing import Callable, Iterator

from .terms import (NIL, Atom, Bindings, Struct, Term, Var, deref, identical,
                    is_ground, list_items, make_list, sort_key, unify)

__all__ = [
    "BUILTINS", "GUARD_ONLY", "BuiltinError", "InstantiationError",
    "ArithmeticTypeError", "EvaluationError", "eval_arith", "eval_builtin",
    "eval_guard", "solve_builtin", "guard_holds",
]


class BuiltinError(Exception):
    pass


class InstantiationError(BuiltinError):
    pass


class ArithmeticTypeError(BuiltinError, TypeError):
    pass


class EvaluationError(BuiltinError):
    pass


def _trunc_div(a: int, b: int) -> int:
    if b == 0:
        raise EvaluationError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


_BINARY: dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "//": _trunc_div,
    "mod": lambda a, b: a % b if b else _trunc_div(a, b),
    "min": min,
    "max": max,
}
_UNARY: dict[str, Callable[[int], int]] = {
    "-": lambda a: -a,
    "+": lambda a: a,
    "abs": abs,
}


def eval_arith(t: Term) -> int:
    t = deref(t)
    tt = type(t)
    if tt is int:
        return t
    if tt is Var:
        raise InstantiationError("arithmetic on an unbound variable")
    if tt is Struct:
        n = len(t.args)
        if n == 2:
            op = _BINARY.get(t.name)
            if op is not None:
                return op(eval_arith(t.args[0]), eval_arith(t.args[1]))
        elif n == 1:
            op = _UNARY.get(t.name)
            if op is not None:
                return op(eval_arith(t.args[0]))
        raise ArithmeticTypeError(f"{t.name}/{n} is not an arithmetic function")
    raise ArithmeticTypeError(f"{t.name} is not a number")


def _compare(op: Callable[[int, int], bool]):
    def run(args, b):
        return op(eval_arith(args[0]), eval_arith(args[1]))
    return run


def _is(args, b):
    return unify(args[0], eval_arith(args[1]), b)


def _unify(args, b):
    return unify(args[0], args[1], b)


def _not_unify(args, b):
    mark = b.mark()
    ok = unify(args[0], args[1], b)
    b.undo(mark)
    return not ok


def _member(args, b) -> Iterator[None]:
    elem, lst = args
    lst = deref(lst)
    while type(lst) is Struct and lst.name == "." and len(lst.args) == 2:
        mark = b.mark()
        if unify(elem, lst.args[0], b):
            yield
        b.undo(mark)
        lst = deref(lst.args[1])
    if type(lst) is Var:
        raise InstantiationError("member/2 on a partial list")


def _sort(args, b):
    items = list_items(args[0])
    if items is None:
        raise InstantiationError("sort/2 needs a proper list")
    keyed = {}
    for it in items:
        keyed.setdefault(sort_key(it), it)
    return unify(args[1], make_list(keyed[k] for k in sorted(keyed)), b)


def _std_order(pred: Callable[[tuple, tuple], bool]):
    def run(args, b):
        return pred(sort_key(args[0]), sort_key(args[1]))
    return run


BUILTINS: dict[tuple[str, int], Callable] = {
    ("true", 0): lambda args, b: True,
    ("fail", 0): lambda args, b: False,
    ("false", 0): lambda args, b: False,
    ("=", 2): _unify,
    ("\\=", 2): _not_unify,
    ("==", 2): lambda args, b: identical(args[0], args[1]),
    ("\\==", 2): lambda args, b: not identical(args[0], args[1]),
    ("is", 2): _is,
    ("<", 2): _compare(lambda x, y: x < y),
    (">", 2): _compare(lambda x, y: x > y),
    ("=<", 2): _compare(lambda x, y: x <= y),
    (">=", 2): _compare(lambda x, y: x >= y),
    ("=:=", 2): _compare(lambda x, y: x == y),
    ("=\\=", 2): _compare(lambda x, y: x != y),
    ("@<", 2): _std_order(lambda x, y: x < y),
    ("@>", 2): _std_order(lambda x, y: x > y),
    ("@=<", 2): _std_order(lambda x, y: x <= y),
    ("@>=", 2): _std_order(lambda x, y: x >= y),
    ("number", 1): lambda args, b: type(deref(args[0])) is int,
    ("integer", 1): lambda args, b: type(deref(args[0])) is int,
    ("atom", 1): lambda args, b: type(deref(args[0])) is Atom,
    ("var", 1): lambda args, b: type(deref(args[0])) is Var,
    ("nonvar", 1): lambda args, b: type(deref(args[0])) is not Var,
    ("ground", 1): lambda args, b: is_ground(args[0]),
    ("member", 2): _member,
    ("sort", 2): _sort,
}

# negation as failure: allowed in guards only
GUARD_ONLY: set[tuple[str, int]] = {("\\+", 1)}

_NONDET = {("member", 2)}


def solve_builtin(goal: Term, b: Bindings) -> Iterator[None]:
    """Iterate over the solutions of built-in ``goal``.

    Each yield leaves the solution's bindings on ``b``; the caller undoes
    them (to a mark it took) before asking for the next solution.
    """
    goal = deref(goal)
    if type(goal) is Atom:
        key, args = (goal.name, 0), ()
    else:
        key, args = (goal.name, len(goal.args)), goal.args
    if key == ("\\+", 1):
        return _naf(args[0], b)
    impl = BUILTINS[key]
    if key in _NONDET:
        return impl(args, b)
    return iter((None,)) if impl(args, b) else iter(())


def _naf(goal: Term, b: Bindings) -> Iterator[None]:
    mark = b.mark()
    found = False
    for _ in _solve_conj(_flatten(goal), b):
        found = True
        break
    b.undo(mark)
    if not found:
        yield


def _flatten(t: Term) -> list[Term]:
    out, stack = [], [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Struct and x.name == "," and len(x.args) == 2:
            stack.append(x.args[1])
            stack.append(x.args[0])
        else:
            out.append(x)
    return out


def _solve_conj(goals: list[Term], b: Bindings, i: int = 0) -> Iterator[None]:
    if i == len(goals):
        yield
        return
    mark = b.mark()
    for _ in solve_builtin(goals[i], b):
        yield from _solve_conj(goals, b, i + 1)
        b.undo(mark)


def eval_builtin(g: Term, b: Bindings) -> bool:
    """Run built-in ``g`` to its first solution; bindings stay on success."""
    mark = b.mark()
    for _ in solve_builtin(g, b):
        return True
    b.undo(mark)
    return False


def guard_holds(gs: list[Term], b: Bindings, floor: int) -> bool:
    """Check a guard in ask mode: variables older than ``floor`` may not be
    bound. On success the bindings of younger (rule-local) variables stay;
    on failure everything is undone. Errors count as failure."""
    saved = b.ask_floor
    b.ask_floor = floor
    mark = b.mark()
    try:
        for _ in _solve_conj(gs, b):
            return True
    except BuiltinError:
        pass
    finally:
        b.ask_floor = saved
    b.undo(mark)
    return False


def eval_guard(gs: list[Term], b: Bindings) -> bool:
    """True iff ``gs`` succeed without binding any existing variable.
    Leaves ``b`` exactly as it was."""
    mark = b.mark()
    ok = guard_holds(gs, b, Var().serial)
    b.undo(mark)
    return ok
