"""``tchr`` command line: run queries and benchmark suites.

Exit codes: 0 success (also with zero answers), 2 parse error, 3 load error
(bad program, unknown predicate, missing file), 4 budget exceeded,
5 run-time error in a built-in.
"""
from __future__ import annotations

import argparse
import itertools
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .answers import GroundEnumeration, ground_cover
from .bench import SUITES, format_table, load_program, rows_to_csv, run_suite
from .builtins import BuiltinError
from .codec import UnknownPredicate, canonicalize, encode_store
from .engine import BudgetExceeded, Engine, show_transform
from .program import LoadError, parse_query
from .reader import ParseError, format_term
from .terms import Struct, Var, copy_term, deref, resolve, term_vars

EXIT_OK, EXIT_PARSE, EXIT_LOAD, EXIT_BUDGET, EXIT_RUNTIME = 0, 2, 3, 4, 5

DEFAULT_BUDGET = 1_000_000


@dataclass
class RunConfig:
    files: list[str]
    query: str | None = None
    step_budget: int = DEFAULT_BUDGET
    answer_budget: int | None = None
    dump_tables: bool = False
    stats: bool = False
    trace: bool = False
    show_transform: bool = False
    tabling: bool = True
    subsumption: bool = True
    enum: dict[str, range] = field(default_factory=dict)
    stats_out: str | None = None

    def __post_init__(self):
        if self.step_budget <= 0:
            raise ValueError("step budget must be positive")


def format_solution(qvars: dict[str, Var], store_terms: list) -> str:
    """``X = t, ... | c1, c2`` with query variables named as in the query."""
    names = {}
    for name, v in qvars.items():
        d = deref(v)
        if type(d) is Var and d not in names:
            names[d] = name
    extra = itertools.count()
    for t in [resolve(v) for v in qvars.values()] + store_terms:
        for v in term_vars(t):
            if v not in names:
                names[v] = f"_G{next(extra)}"
    binds = []
    for name, v in qvars.items():
        if name.startswith("_"):
            continue
        d = resolve(v)
        if type(d) is Var and names.get(d) == name:
            continue
        binds.append(f"{name} = {format_term(d, names)}")
    store = ", ".join(format_term(c, names) for c in store_terms)
    return f"{', '.join(binds) or 'true'} | {store or 'true'}"


def parse_enum(spec: str) -> tuple[str, range]:
    try:
        name, rng = spec.split("=", 1)
        lo, hi = rng.split("..", 1)
        return name.strip(), range(int(lo), int(hi) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected VAR=lo..hi, got {spec!r}") from None


def run_query(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout

    def emit(line=""):
        print(line, file=out)

    try:
        prog = load_program(*cfg.files)
    except ParseError as e:
        emit(f"error: {e}")
        return EXIT_PARSE
    except (LoadError, FileNotFoundError) as e:
        emit(f"error: {e}")
        return EXIT_LOAD
    if cfg.show_transform:
        emit(show_transform(prog))
    if cfg.query is None:
        return EXIT_OK
    try:
        goals, qvars = parse_query(cfg.query)
    except ParseError as e:
        emit(f"error: {e}")
        return EXIT_PARSE
    try:
        eng = Engine(prog, tabling=cfg.tabling, subsumption=cfg.subsumption,
                     step_budget=cfg.step_budget, answer_budget=cfg.answer_budget,
                     trace=emit if cfg.trace else None)
    except LoadError as e:
        emit(f"error: {e}")
        return EXIT_LOAD

    enum_names = [n for n in cfg.enum if n in qvars]
    frozen = []          # (head over the enumerated variables, store) per answer
    count = 0
    code = EXIT_OK
    t0 = time.perf_counter()
    try:
        for _ in eng.query(goals):
            count += 1
            canon = canonicalize(encode_store(eng.store, "goal"), "sort")
            emit(format_solution(qvars, list(canon.entries)))
            if enum_names:
                m: dict = {}
                head = copy_term(Struct("$q", tuple(qvars[n] for n in enum_names)), m)
                frozen.append((head, encode_store(eng.store, "suspension").copy(m)))
    except BudgetExceeded as e:
        emit(f"error: {e}")
        code = EXIT_BUDGET
    except UnknownPredicate as e:
        emit(f"error: {e}")
        code = EXIT_LOAD
    except (BuiltinError, LoadError) as e:
        emit(f"error: {e}")
        code = EXIT_RUNTIME
    millis = (time.perf_counter() - t0) * 1000

    if enum_names and code == EXIT_OK:
        domains = {n: list(cfg.enum[n]) for n in enum_names}
        cands = [Struct("$q", tuple(val[n] for n in enum_names))
                 for val in GroundEnumeration(domains).valuations(enum_names)]
        covered = ground_cover(eng, frozen, cands)
        for c in cands:
            if c in covered:
                emit("cover: " + ", ".join(f"{n} = {v}" for n, v in zip(enum_names, c.args)))
    if cfg.dump_tables:
        for line in eng.dump_tables():
            emit(line)
    emit(f"% answers={count} firings={eng.stats.firings} tables={len(eng.tables)} "
         f"nodes={eng.total_nodes()}")
    if cfg.stats or code == EXIT_BUDGET:
        snap = eng.stats.snapshot()
        emit("% stats: " + " ".join(f"{k}={v}" for k, v in snap.items())
             + f" steps={eng.steps} resolutions={eng.resolutions}"
             + f" tabled_answers={eng.total_answers()}")
        for label, n in sorted(eng.stats.applications.items()):
            emit(f"%   {label}: {n}")
        if cfg.stats:
            emit(f"% time={millis:.1f}ms")
    if cfg.stats_out:
        snap = eng.stats.snapshot()
        lines = [f"{k},{v}" for k, v in snap.items()]
        lines += [f"steps,{eng.steps}", f"answers,{count}", f"tables,{len(eng.tables)}",
                  f"nodes,{eng.total_nodes()}"]
        Path(cfg.stats_out).write_text("key,value\n" + "\n".join(lines) + "\n")
    return code


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tchr", description="Tabled CHR logic programs")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="load programs and run a query")
    r.add_argument("files", nargs="+", help="program files or corpus names (e.g. fig1)")
    r.add_argument("-q", "--query", help="query, e.g. \"p(U)\"")
    r.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="step budget")
    r.add_argument("--answer-budget", type=int, default=None,
                   help="stop once this many answers were tabled")
    r.add_argument("--dump-tables", action="store_true")
    r.add_argument("--stats", action="store_true")
    r.add_argument("--stats-out", default=None, help="write statistics as CSV")
    r.add_argument("--trace", action="store_true")
    r.add_argument("--show-transform", action="store_true")
    r.add_argument("--no-tabling", action="store_true")
    r.add_argument("--no-subsumption", action="store_true")
    r.add_argument("--enum", action="append", type=parse_enum, default=[],
                   metavar="VAR=lo..hi", help="print the ground cover over these values")

    bn = sub.add_parser("bench", help="run a benchmark suite")
    bn.add_argument("suite", choices=sorted(SUITES))
    bn.add_argument("--out", default=None, help="write rows as CSV")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        if args.budget <= 0:
            print("error: --budget must be positive", file=sys.stderr)
            return EXIT_LOAD
        cfg = RunConfig(files=args.files, query=args.query, step_budget=args.budget,
                        answer_budget=args.answer_budget, dump_tables=args.dump_tables,
                        stats=args.stats, trace=args.trace, show_transform=args.show_transform,
                        tabling=not args.no_tabling, subsumption=not args.no_subsumption,
                        enum=dict(args.enum), stats_out=args.stats_out)
        return run_query(cfg)
    rows = run_suite(args.suite)
    print(format_table(rows))
    if args.out:
        Path(args.out).write_text(rows_to_csv(rows))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
