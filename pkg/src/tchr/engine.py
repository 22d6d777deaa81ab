"""The execution engine: a backtracking goal machine with CHR activation and
SLG-style tabling under full call abstraction.

Continuations are linked lists ``(goal, next)`` ending in ``None``. Goals are
terms (built-ins, CHR constraints, user predicates) or small internal goal
objects (:class:`Activate`, :class:`Decode`, ...). A run keeps its own stack
of choicepoints ``(trail mark, iterator of continuations)``; nested runs are
used for table evaluation and for one-shot solving.

A call to a tabled predicate goes through these steps: encode the caller's
store, abstract the call, empty the store, find or evaluate the table, and
for every answer decode the caller store, decode the answer store and
perform the restore unifications. Inside a table evaluation a call to an
incomplete table registers a consumer instead; consumers are resumed from a
worklist, and completion is detected with Tarjan-style dfn/low numbers over
a completion stack.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, Iterator

from . import answers as answer_opt
from .builtins import BUILTINS, GUARD_ONLY, InstantiationError, solve_builtin
from .chr import ChrStore, FiringStats, Suspension, compile_occurrences, find_match
from .codec import (EncodedStore, UnknownPredicate, decode_entries, empty_store, encode_store,
                    is_fresh)
from .program import LoadError, Program, TableDecl
from .reader import format_term
from .terms import (Atom, Bindings, Struct, Term, Var, copy_term, deref, functor_key,
                    make_list, node_count, resolve, term_vars, unify, variant_key)

__all__ = [
    "Engine", "BudgetExceeded", "Table", "AbstractedCall", "abstract_call",
    "Activate", "Decode", "show_transform",
]

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

FAIL = object()


class BudgetExceeded(Exception):
    def __init__(self, kind: str, limit: int):
        super().__init__(f"{kind} budget of {limit} exceeded")
        self.kind = kind
        self.limit = limit


# -- internal goals --------------------------------------------------------

class Activate:
    __slots__ = ("susp", "start", "wake", "reindex")

    def __init__(self, susp: Suspension, start: int = 0, wake: bool = False,
                 reindex: bool = True):
        self.susp = susp
        self.start = start
        self.wake = wake
        self.reindex = reindex      # False right after decoding (already indexed)

    def copy(self, mapping):
        return None                 # stores travel as encodings


ORDER_TESTS = frozenset({"@<", "@>", "@=<", "@>=", "compare"})


def _subterms(t):
    todo = [t]
    while todo:
        t = deref(todo.pop())
        yield t
        if type(t) is Struct:
            todo.extend(t.args)


class Decode:
    # settled: enc was taken from a quiescent store (an answer)
    __slots__ = ("enc", "settled")

    def __init__(self, enc: EncodedStore, settled: bool = False):
        self.enc = enc
        self.settled = settled

    def copy(self, mapping):
        return Decode(self.enc.copy(mapping), self.settled)


class Resolve:
    """Clause resolution for a goal, bypassing its table."""
    __slots__ = ("goal",)

    def __init__(self, goal: Term):
        self.goal = goal

    def copy(self, mapping):
        return Resolve(copy_term(self.goal, mapping))


class AnswerGoal:
    """End of a table's clause body: project, then insert the answer."""
    __slots__ = ("table", "head")

    def __init__(self, table, head):
        self.table = table
        self.head = head

    def copy(self, mapping):
        return AnswerGoal(self.table, copy_term(self.head, mapping))


class InsertAnswer(AnswerGoal):
    __slots__ = ()

    def copy(self, mapping):
        return InsertAnswer(self.table, copy_term(self.head, mapping))


# -- tables ---------------------------------------------------------------

@dataclass
class AbstractedCall:
    abstract_goal: Term
    restore_unifications: list[tuple[Var, Term]]


def abstract_call(goal: Term, decl: TableDecl) -> AbstractedCall:
    """Replace every chr-mode argument by a fresh variable."""
    goal = deref(goal)
    if type(goal) is not Struct:
        return AbstractedCall(goal, [])
    args, restore = [], []
    for a, mode in zip(goal.args, decl.arg_modes):
        if mode == "chr":
            v = Var()
            args.append(v)
            restore.append((v, a))
        else:
            args.append(a)
    return AbstractedCall(Struct(goal.name, tuple(args)), restore)


@dataclass
class Consumer:
    owner: "Table | None"
    frozen: list            # [abstract goal, restore goals..., continuation goals]


@dataclass(eq=False)
class Table:
    key: Term
    goal: Term
    decl: TableDecl
    status: str = "new"
    answers: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    consumers: list = field(default_factory=list)
    pending: list = field(default_factory=list)
    depends_on: set = field(default_factory=set)
    dfn: int = -1
    low: int = -1

    def alive_answers(self) -> list:
        return [a for a in self.answers if a.alive]


# -- engine ---------------------------------------------------------------

class Engine:
    def __init__(self, program: Program, *, tabling: bool = True, subsumption: bool = True,
                 step_budget: int | None = None, answer_budget: int | None = None,
                 trace: Callable[[str], None] | None = None, debug: bool = False,
                 occurs_check: bool = True):
        self.program = program
        self.tabling = tabling
        self.subsumption = subsumption
        self.step_budget = step_budget
        self.answer_budget = answer_budget
        self.trace = trace
        self.debug = debug
        self.b = Bindings(occurs_check)
        self.b.on_bind = self._on_bind
        self.store = ChrStore(self.b)
        self.stats = FiringStats()
        self.steps = 0
        self.resolutions = 0
        self.answers_inserted = 0
        self.tables: dict = {}
        self.occurrences = compile_occurrences(program)
        self.woken: list[Var] = []
        self.current: Table | None = None
        self.comp_stack: list[Table] = []
        self._dfn = 0
        self._kinds: dict = {}
        self._serial0 = Var().serial
        # guards comparing variables by age are not invariant under renaming
        self._renaming_safe = not any(
            type(t) is Struct and t.name in ORDER_TESTS
            for r in program.chr_rules for g in r.guard for t in _subterms(g))
        self._check_options()

    def _check_options(self) -> None:
        for decl in self.program.table_decls.values():
            if decl.projection is not None:
                key = (decl.projection, 1)
                if key not in self.program.constraint_decls or not self.program.rules_for(key):
                    raise LoadError(f"projection constraint {decl.projection}/1 has no rules")

    # -- plumbing ---------------------------------------------------------
    def _on_bind(self, v: Var) -> None:
        self.woken.append(v)

    def _emit(self, line: str) -> None:
        if self.trace is not None:
            self.trace(line)

    def _show(self, t: Term) -> str:
        """Trace rendering; variables are numbered from the engine's start
        so that names agree across lines (and across identical reruns)."""
        return format_term(t, {v: f"_V{v.serial - self._serial0}" for v in term_vars(t)})

    def kind(self, goal: Term) -> str:
        key = functor_key(goal)
        k = self._kinds.get(key)
        if k is None:
            k = self.program.classify(goal)
            if k == "user" and self.tabling and key in self.program.table_decls:
                k = "tabled"
            self._kinds[key] = k
        return k

    @staticmethod
    def goals_to_cont(goals, nxt=None):
        cont = nxt
        for g in reversed(list(goals)):
            cont = (g, cont)
        return cont

    # -- running ----------------------------------------------------------
    def solve(self, cont) -> Iterator[None]:
        """Enumerate the solutions of a continuation. At each yield the
        solution's bindings and store are live; on exhaustion everything done
        by this run is undone."""
        b = self.b
        start = b.mark()
        stack: list = []
        woken = self.woken
        step = self._step
        budget = self.step_budget
        while True:
            if cont is None:
                yield
                cont = FAIL
            if cont is FAIL:
                cont = self._backtrack(stack)
                if cont is FAIL:
                    b.undo(start)
                    return
                continue
            self.steps += 1
            if budget is not None and self.steps > budget:
                raise BudgetExceeded("step", budget)
            goal, nxt = cont
            woken.clear()
            r = step(goal, nxt)
            if r is FAIL:
                cont = FAIL
                continue
            if r is None or type(r) is tuple:
                cont = r
                if woken:
                    cont = self._wake(cont)
                if self.debug:
                    self.store.check_coherence()
                continue
            stack.append((b.mark(), r))
            cont = self._backtrack(stack)
            if cont is FAIL:
                b.undo(start)
                return

    def _backtrack(self, stack):
        b = self.b
        woken = self.woken
        while stack:
            mark, it = stack[-1]
            b.undo(mark)
            woken.clear()
            cont = next(it, FAIL)
            if cont is FAIL:
                stack.pop()
                continue
            if woken:
                cont = self._wake(cont)
            return cont
        return FAIL

    def _wake(self, cont):
        seen = {}
        index = self.store.var_index
        for v in self.woken:
            for s in index.get(v, ()):
                if s.alive:
                    seen[s.id] = s
        self.woken.clear()
        for sid in sorted(seen, reverse=True):
            # reindex now so the variable index stays coherent until the
            # reactivation itself runs
            self.store.index(seen[sid])
            cont = (Activate(seen[sid], 0, True, False), cont)
        return cont

    def solve_once(self, goals, extra_cont=None) -> bool:
        """Run ``goals`` to their first solution, keeping its bindings."""
        for _ in self.solve(self.goals_to_cont(goals, extra_cont)):
            return True
        return False

    run_goal = solve_once

    def query(self, goals) -> Iterator[None]:
        return self.solve(self.goals_to_cont(goals))

    # -- single steps -----------------------------------------------------
    def _step(self, goal, nxt):
        tg = type(goal)
        if tg is Activate:
            return self._activate(goal, nxt)
        if tg is Var:
            goal = deref(goal)
            tg = type(goal)
            if tg is Var:
                raise InstantiationError("unbound goal")
        if tg is Struct or tg is Atom:
            k = self.kind(goal)
            if k == "builtin":
                self.stats.solve += 1
                if self.trace is not None:
                    self._emit(f"SOLVE {self._show(goal)}")
                key = functor_key(goal)
                if key in GUARD_ONLY:
                    raise LoadError("negation is only allowed in guards")
                if key == ("member", 2):
                    return self._each(solve_builtin(goal, self.b), nxt)
                impl = BUILTINS[key]
                return nxt if impl(goal.args if tg is Struct else (), self.b) else FAIL
            if k == "chr":
                return self._introduce(goal, nxt)
            if k == "tabled":
                return self._call_tabled(goal, nxt)
            return self._resolve(goal, nxt)
        if tg is Decode:
            if (goal.settled and self._renaming_safe and goal.enc.mode == "suspension"
                    and is_fresh(goal.enc)):
                # the decoded part is a variant of a final store: any firing
                # needs an old partner, so waking the old constraints suffices
                old = self.store.suspensions()
                decode_entries(goal.enc, self.store)
                cont = nxt
                for s in reversed(old):
                    cont = (Activate(s, 0, True, False), cont)
                return cont
            goals, susps = decode_entries(goal.enc, self.store)
            cont = nxt
            for s in reversed(susps):
                cont = (Activate(s, 0, True, False), cont)
            return self.goals_to_cont(goals, cont)
        if tg is Resolve:
            return self._resolve(deref(goal.goal), nxt)
        if tg is InsertAnswer:
            self._insert_answer(goal.table, goal.head)
            return FAIL
        if tg is AnswerGoal:
            return self._answer(goal, nxt)
        raise TypeError(f"not a goal: {goal!r}")

    @staticmethod
    def _each(it, nxt):
        for _ in it:
            yield nxt

    def _introduce(self, goal, nxt):
        s = self.store.new_suspension(goal)
        self.store.insert(s)
        self.stats.introduce += 1
        if self.trace is not None:
            self._emit(f"INTRODUCE {self._show(goal)}#{s.id}")
        return (Activate(s, 0, False), nxt)

    def _activate(self, act: Activate, nxt):
        s = act.susp
        if not s.alive:
            return nxt
        if act.wake:
            self.stats.reactivate += 1
            if self.trace is not None:
                self._emit(f"REACTIVATE {self._show(s.constraint)}#{s.id}")
            if act.reindex:
                self.store.index(s)
        occs = self.occurrences.get(s.key)
        if not occs:
            return nxt
        m = find_match(self.store, occs, s, act.start, self.b)
        if m is None:
            return nxt
        rule = m.rule
        label = rule.rule.label
        self.stats.applications[label] += 1
        if rule.propagation:
            self.stats.propagation_firings += 1
            self.store.add_history((label, m.ids), m.partners)
        if self.trace is not None:
            self._emit(f"APPLY {label} {' '.join(str(i) for i in m.ids)}")
        for r in m.removed:
            self.store.remove(r)
        cont = nxt
        if s.alive:
            cont = (Activate(s, m.occurrence, False), cont)
        return self.goals_to_cont(m.body, cont)

    def _resolve(self, goal, nxt):
        key = functor_key(goal)
        clauses = self.program.clauses.get(key)
        if not clauses:
            raise UnknownPredicate(f"unknown predicate {key[0]}/{key[1]}")
        return self._clauses(goal, clauses, nxt)

    def _clauses(self, goal, clauses, nxt):
        b = self.b
        gargs = goal.args if type(goal) is Struct else ()
        for cl in clauses:
            head = cl.head
            if type(head) is Struct and not _may_match(head.args, gargs):
                continue
            mapping: dict = {}
            h = copy_term(head, mapping)
            if unify(h, goal, b):
                self.resolutions += 1
                body = [copy_term(g, mapping) for g in cl.body]
                yield self.goals_to_cont(body, nxt)

    # -- tabling ----------------------------------------------------------
    def _call_tabled(self, goal, nxt):
        decl = self.program.table_decls[functor_key(goal)]
        caller = encode_store(self.store, decl.encoding)
        ac = abstract_call(goal, decl)
        empty_store(self)
        key = variant_key(ac.abstract_goal)
        table = self.tables.get(key)
        if table is None:
            table = Table(key, copy_term(ac.abstract_goal), decl)
            self.tables[key] = table
            if self.trace is not None:
                self._emit(f"TABLE {self._show(table.goal)}")
            self._evaluate(table)
        restore = [Struct("=", (v, orig)) for v, orig in ac.restore_unifications]
        cur = self.current
        if cur is not None:
            cur.depends_on.add(table.key)
        if table.status != "complete":
            if cur is None:
                raise RuntimeError("incomplete table reached outside evaluation")
            cur.low = min(cur.low, table.low)
            self._add_consumer(table, ac.abstract_goal, caller, restore, nxt)
            return FAIL
        return self._consume(table, ac.abstract_goal, caller, restore, nxt)

    def _consume(self, table, agoal, caller, restore, nxt):
        b = self.b
        for ans in list(table.answers):
            if not ans.alive:
                continue
            mapping: dict = {}
            head = copy_term(ans.head, mapping)
            enc = ans.enc.copy(mapping)
            if not unify(agoal, head, b):
                continue
            yield (Decode(caller), (Decode(enc, True), self.goals_to_cont(restore, nxt)))

    def _add_consumer(self, table, agoal, caller, restore, nxt):
        mapping: dict = {}
        frozen = [copy_term(agoal, mapping), Decode(caller).copy(mapping)]
        frozen.append([copy_term(g, mapping) for g in restore])
        rest = []
        c = nxt
        while c is not None:
            g, c = c
            if isinstance(g, (Activate, Decode, Resolve, AnswerGoal)):
                g = g.copy(mapping)
                if g is not None:
                    rest.append(g)
            else:
                rest.append(copy_term(g, mapping))
        frozen.append(rest)
        consumer = Consumer(self.current, frozen)
        table.consumers.append(consumer)
        for ans in table.answers:
            if ans.alive:
                table.pending.append((consumer, ans))

    def _evaluate(self, table: Table) -> None:
        table.status = "evaluating"
        table.dfn = table.low = self._dfn
        self._dfn += 1
        self.comp_stack.append(table)
        saved = self.current
        self.current = table
        b = self.b
        mark = b.mark()
        try:
            head = copy_term(table.goal)
            cont = (Resolve(head), (AnswerGoal(table, head), None))
            for _ in self.solve(cont):
                pass
        finally:
            b.undo(mark)
            self.current = saved
        self._drain(table)

    def _region(self, table: Table) -> list[Table]:
        i = next(i for i, t in enumerate(self.comp_stack) if t is table)
        return self.comp_stack[i:]

    def _drain(self, leader: Table) -> None:
        while True:
            region = self._region(leader)
            task = None
            for t in reversed(region):
                if t.pending:
                    task = (t, t.pending.pop())
                    break
            if task is None:
                break
            self._run_task(*task)
        region = self._region(leader)
        low = min(t.low for t in region)
        if low >= leader.dfn:
            del self.comp_stack[len(self.comp_stack) - len(region):]
            for t in region:
                t.status = "complete"
                t.consumers = []
                t.pending = []
        else:
            leader.low = low

    def _run_task(self, producer: Table, task) -> None:
        consumer, ans = task
        if not ans.alive:
            return
        b = self.b
        saved = self.current
        self.current = consumer.owner
        mark = b.mark()
        try:
            empty_store(self)
            mapping: dict = {}
            agoal, caller, restore, rest = (consumer.frozen[0], consumer.frozen[1],
                                            consumer.frozen[2], consumer.frozen[3])
            agoal = copy_term(agoal, mapping)
            caller = caller.copy(mapping)
            restore = [copy_term(g, mapping) for g in restore]
            rest = [g.copy(mapping) if not isinstance(g, (Struct, Atom, Var, int)) else copy_term(g, mapping)
                    for g in rest]
            amap: dict = {}
            head = copy_term(ans.head, amap)
            enc = ans.enc.copy(amap)
            cont = self.goals_to_cont(restore + rest)
            cont = (Struct("=", (agoal, head)), (caller, (Decode(enc, True), cont)))
            for _ in self.solve(cont):
                pass
        finally:
            b.undo(mark)
            self.current = saved

    def _answer(self, goal: AnswerGoal, nxt):
        decl = goal.table.decl
        ins = (InsertAnswer(goal.table, goal.head), nxt)
        if decl.projection is None:
            return ins
        call_vars = term_vars(goal.head)
        return (Struct(decl.projection, (make_list(call_vars),)), ins)

    def _insert_answer(self, table: Table, head: Term) -> None:
        enc = encode_store(self.store, table.decl.encoding, resolved=False)
        mapping: dict = {}
        head = copy_term(head, mapping)
        enc = enc.copy(mapping)
        status, ans = answer_opt.insert_answer(self, table, head, enc)
        if self.trace is not None:
            self._emit(f"ANSWER {status} {self._show(head)}")
        if ans is not None:
            self.answers_inserted += 1
            if self.answer_budget is not None and self.answers_inserted > self.answer_budget:
                raise BudgetExceeded("answer", self.answer_budget)
            for c in table.consumers:
                table.pending.append((c, ans))

    # -- reporting --------------------------------------------------------
    def table_list(self) -> list[Table]:
        return sorted(self.tables.values(), key=lambda t: format_term(t.goal))

    def total_answers(self) -> int:
        return sum(len(t.alive_answers()) for t in self.tables.values())

    def total_nodes(self) -> int:
        n = 0
        for t in self.tables.values():
            for a in t.alive_answers():
                n += node_count(a.head) + sum(node_count(e) for e in a.enc.entries)
        return n

    def dump_tables(self) -> list[str]:
        lines = []
        for t in self.table_list():
            alive = t.alive_answers()
            lines.append(f"table {format_term(t.goal)}: status={t.status} answers={len(alive)}")
            for a in alive:
                lines.append("  " + answer_opt.format_answer(a))
        return lines


def _may_match(hargs, gargs) -> bool:
    for h, g in zip(hargs, gargs):
        if type(h) is Var:
            continue
        g = deref(g)
        if type(g) is Var:
            continue
        th = type(h)
        if th is Struct:
            if type(g) is not Struct or g.name != h.name or len(g.args) != len(h.args):
                return False
        elif th is not type(g) or h != g:
            return False
    return True


def show_transform(program: Program) -> str:
    """The source-level equivalent of the tabling behaviour, per table."""
    out = []
    for decl in program.table_decls.values():
        n = decl.arity
        xs = [f"X{i + 1}" for i in range(n)]
        abs_args = [f"{x}1" if m == "chr" else x for x, m in zip(xs, decl.arg_modes)]
        restore = [f"{x}1 = {x}" for x, m in zip(xs, decl.arg_modes) if m == "chr"]
        call = f"{decl.name}({', '.join(xs)})" if n else decl.name
        tabled = f"tabled_{decl.name}({', '.join(abs_args + ['AnswerEnc'])})"
        lines = [f"% {decl.name}/{n}: encoding={decl.encoding}"
                 + (f", projection={decl.projection}" if decl.projection else "")
                 + (f", canonical_form={decl.canonical_form}" if decl.canonical_form else "")
                 + (f", answer_combination={decl.answer_combination}" if decl.answer_combination else ""),
                 f"{call} :-",
                 "    encode_store(CallerEnc),",
                 "    empty_store,",
                 f"    {tabled},",
                 "    decode_store(CallerEnc),",
                 "    decode_store(AnswerEnc)" + ("," if restore else ".")]
        for i, r in enumerate(restore):
            lines.append(f"    {r}" + ("," if i < len(restore) - 1 else "."))
        orig_args = ", ".join(abs_args)
        lines.append(f":- table tabled_{decl.name}/{n + 1}.")
        lines.append(f"{tabled} :-")
        lines.append(f"    original_{decl.name}({orig_args}),")
        if decl.projection:
            vars_ = ", ".join(abs_args)
            lines.append(f"    {decl.projection}([{vars_}]),")
        lines.append("    encode_store(AnswerEnc),")
        lines.append("    empty_store.")
        out.append("\n".join(lines))
    return "\n\n".join(out)
