import pytest

from tchr import BudgetExceeded, Engine, LoadError, load_program, parse_program
from tchr.answers import del_answer
from tchr.codec import UnknownPredicate
from tchr.engine import abstract_call, show_transform
from tchr.terms import Atom, Var, identical

from helpers import all_solutions, engine_for, run, store_text, term


def _decl(text, key):
    return parse_program(text).table_decls[key]


def test_abstract_call_chr_position():
    ac = abstract_call(term("p(X,Y)"), _decl(":- table_chr p(_,chr).", ("p", 2)))
    g = ac.abstract_goal
    assert g.args[0].name == "X" and g.args[1] is not ac.restore_unifications[0][1]
    (fresh, orig), = ac.restore_unifications
    assert g.args[1] is fresh and orig.name == "Y"


def test_abstract_call_constant():
    ac = abstract_call(term("p(q,A)"), _decl(":- table_chr p(chr,_).", ("p", 2)))
    (fresh, orig), = ac.restore_unifications
    assert isinstance(ac.abstract_goal.args[0], Var) and orig is Atom("q")


def test_abstract_call_truckload_and_plain():
    d = _decl(":- table_chr truckload(_,_,_,chr).", ("truckload", 4))
    ac = abstract_call(term("truckload(30,100,chicago,T)"), d)
    assert ac.abstract_goal.args[:3] == (30, 100, Atom("chicago"))
    assert len(ac.restore_unifications) == 1
    ac = abstract_call(term("q(a,B)"), _decl(":- table_chr q(_,_).", ("q", 2)))
    assert ac.restore_unifications == [] and identical(ac.abstract_goal.args[0], Atom("a"))


def test_fig1_answers_and_tables():
    e = engine_for("", "fig1")
    sols = all_solutions(e, "p(U)")
    assert sorted(b["U"] for b, _ in sols) == ["0", "1"]
    dump = e.dump_tables()
    assert "table p(_G0): status=complete answers=2" in dump
    assert "table q(_G0): status=complete answers=2" in dump


def test_fig1_without_tabling_diverges():
    e = Engine(load_program("fig1"), tabling=False, step_budget=10 ** 5)
    with pytest.raises(BudgetExceeded) as ei:
        list(e.query([term("p(U)")]))
    assert ei.value.kind == "step"


def test_plain_position_answer():
    e = engine_for(":- table_chr p(chr,_).\np(a, 1).\np(q, 2).\n")
    assert [b["A"] for b, _ in all_solutions(e, "p(q,A)")] == ["2"]
    # the table is for the abstracted call
    assert e.dump_tables()[0].startswith("table p(_G0,_G1)")


def test_no_base_case_completes_empty():
    e = engine_for(":- table_chr r(_).\nr(X) :- r(X).\n")
    assert all_solutions(e, "r(X)") == []
    assert e.dump_tables() == ["table r(_G0): status=complete answers=0"]


def test_reach_single_answer():
    e = engine_for("", "reach")
    sols = all_solutions(e, "reach(a,c,X)")
    assert sols == [({"X": "_G0"}, ["dom(V0,1,9)"])]


def test_path_projection():
    e = engine_for("", "path")
    assert all_solutions(e, "path(a,a,X)") == [({"X": "_G0"}, ["leq(V0,1)"])]


def test_projection_weakening():
    e = engine_for("", "sets")
    run(e, "in(E,S), project([S])")
    assert store_text(e) == ["nonempty(V0)"]


def test_projection_rules_on_store():
    e = engine_for("", "path")
    run(e, "leq(X,Y), leq(Y,1), leq(X,1), project([X])")
    assert store_text(e) == ["leq(V0,1)"]


def test_projection_without_rules_is_load_error():
    with pytest.raises(LoadError):
        engine_for(":- constraints project/1.\n:- table_chr p(chr) with [projection(project)].\np(_).")


def test_unknown_predicate():
    e = engine_for("p :- q.\n")
    with pytest.raises(UnknownPredicate):
        run(e, "p")


def test_caller_store_survives_tabled_call():
    e = engine_for(":- constraints c/1.\n:- table_chr p(_).\np(1).\np(2).\n")
    sols = all_solutions(e, "c(Z), p(X)")
    assert [s for _, s in sols] == [["c(V0)"], ["c(V0)"]]


def test_answer_store_merges_with_caller():
    e = engine_for("", "reach")
    assert all_solutions(e, "reach(a,c,X), X = 5")[0][0]["X"] == "5"
    e = engine_for("", "reach")
    assert all_solutions(e, "reach(a,c,X), X = 12") == []


def test_completed_table_reused_without_firings():
    e = engine_for("", "path")
    first = all_solutions(e, "path(a,a,X)")
    snap, res = e.stats.snapshot(), e.resolutions
    second = all_solutions(e, "path(a,a,X)")
    assert first == second
    assert e.stats.firings == snap["firings"] and e.resolutions == res


def test_dead_answers_not_delivered():
    e = engine_for(":- table_chr p(_).\np(1).\np(2).\np(3).\n")
    all_solutions(e, "p(X)")
    table, = e.tables.values()
    del_answer(table, table.answers[1])
    del_answer(table, table.answers[1])      # idempotent
    assert [b["X"] for b, _ in all_solutions(e, "p(X)")] == ["1", "3"]
    assert "p(2)" not in "\n".join(e.dump_tables())


def test_mutual_recursion_consumers():
    # each consumer of p and q sees every answer exactly once
    prog = (":- table_chr p(_).\n:- table_chr q(_).\n"
            "p(X) :- q(X).\np(1).\nq(X) :- p(X).\nq(2).\n")
    e = engine_for(prog)
    assert sorted(b["X"] for b, _ in all_solutions(e, "p(X)")) == ["1", "2"]
    assert e.total_answers() == 4


def test_left_recursive_transitive_closure():
    prog = (":- table_chr tc(_,_).\ntc(X,Y) :- tc(X,Z), e(Z,Y).\ntc(X,Y) :- e(X,Y).\n"
            "e(1,2).\ne(2,3).\ne(3,1).\ne(3,4).\n")
    e = engine_for(prog)
    assert sorted(b["Y"] for b, _ in all_solutions(e, "tc(1,Y)")) == ["1", "2", "3", "4"]


def test_answer_budget():
    e = Engine(load_program("path_noproj"), subsumption=False, answer_budget=20)
    with pytest.raises(BudgetExceeded) as ei:
        list(e.query([term("path(a,a,X)")]))
    assert ei.value.kind == "answer"


def test_show_transform():
    text = show_transform(load_program("path"))
    assert "path(X1, X2, X3) :-" in text
    assert "encode_store(CallerEnc)" in text and "project([X1, X2, X31])" in text
    assert "X31 = X3." in text


def test_determinism_of_tables():
    dumps = []
    for _ in range(2):
        e = engine_for("", "dist", "dist_graph")
        all_solutions(e, "dist(a,B,D)")
        dumps.append(e.dump_tables())
    assert dumps[0] == dumps[1]


SETTLED_CASES = [(("path",), "path(a,a,X)", True), (("dist", "dist_graph"), "dist(A,B,D)", True),
                 (("truckload", "truckload_plain"), "truckload(30,60,chicago,T)", False)]


def test_settled_decode_matches_full_reactivation(monkeypatch):
    # decoding an answer without waking its own constraints must not change results
    import tchr.engine as engine_mod

    def answers(files, query, subsumption):
        eng = Engine(load_program(*files), subsumption=subsumption)
        return sorted(f"{b} {s}" for b, s in all_solutions(eng, query))

    fast = [answers(*case) for case in SETTLED_CASES]
    monkeypatch.setattr(engine_mod, "is_fresh", lambda enc: False)
    slow = [answers(*case) for case in SETTLED_CASES]
    assert fast == slow and all(fast)
