"""Corpus access and the benchmark suites.

Suites mirror the experiments on store encodings, truckload compaction and
shortest distances, but report portable metrics: answer counts, rule
firings, term nodes in the tables and wall-clock milliseconds.
"""
from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .engine import Engine
from .program import Program, parse_program, parse_query

__all__ = [
    "corpus_text", "corpus_names", "load_program", "BenchRow", "SUITES",
    "run_suite", "rows_to_csv", "rows_from_csv", "synthetic_packages",
    "random_graph", "graph_facts", "FIXED_GRAPHS", "truckload_program", "format_table",
]


# -- corpus ----------------------------------------------------------------

def corpus_names() -> list[str]:
    root = resources.files("tchr") / "corpus"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".tchr"))


def corpus_text(name: str) -> str:
    if not name.endswith(".tchr"):
        name += ".tchr"
    return (resources.files("tchr") / "corpus" / name).read_text()


def _source(ref: str) -> str:
    """Program text for a file path, or for a corpus name like ``fig1``."""
    p = Path(ref)
    if p.exists():
        return p.read_text()
    stem = ref[len("corpus:"):] if ref.startswith("corpus:") else ref
    try:
        return corpus_text(stem)
    except (FileNotFoundError, OSError):
        raise FileNotFoundError(f"no such program file or corpus entry: {ref}") from None


def load_program(*refs: str, extra: str = "") -> Program:
    """Parse and link several files (paths or corpus names) into one program."""
    prog = Program()
    for ref in refs:
        prog.extend(parse_program(_source(ref)))
    if extra:
        prog.extend(parse_program(extra))
    return prog


# -- generated inputs --------------------------------------------------------

# the six packages printed in the truckload listing: id -> (weight, lo, hi)
LISTED_PACKAGES = {
    30: (29, 19, 29), 29: (82, 20, 29), 28: (24, 8, 12),
    3: (60, 4, 29), 2: (82, 28, 29), 1: (41, 27, 28),
}


def synthetic_packages(n: int = 30, seed: int = 2008, destination: str = "chicago") -> str:
    """``pack/4`` facts: the listed packages plus seeded random ones for the
    missing ids. The result is a synthetic instance, not the original."""
    rng = random.Random(seed)
    out = ["% SYNTHETIC package database (listed packages + seeded filler)"]
    for i in range(n, 0, -1):
        if i in LISTED_PACKAGES:
            w, lo, hi = LISTED_PACKAGES[i]
        else:
            w = rng.randint(10, 90)
            lo = rng.randint(0, 25)
            hi = min(31, lo + rng.randint(2, 12))
        out.append(f"pack({i}, {w}, {destination}, T) :- leq({lo}, T), leq(T, {hi}).")
    return "\n".join(out) + "\n"


TRUCKLOAD_MODES = {
    "plain": "truckload_plain",
    "sorted": "truckload_sorted",
    "combinator": "truckload_comb",
}


def truckload_program(mode: str, synthetic: bool = False, seed: int = 2008) -> Program:
    """The truckload program in one of the tabling modes (or ``none``)."""
    text = corpus_text("truckload")
    if synthetic:
        # drop the listed pack/4 facts, the generator re-adds them
        text = "\n".join(l for l in text.splitlines() if not l.startswith("pack(")) + "\n"
        text += synthetic_packages(seed=seed)
    prog = parse_program(text)
    if mode != "none":
        prog.extend(parse_program(corpus_text(TRUCKLOAD_MODES[mode])))
    return prog


def random_graph(seed: int, max_nodes: int = 8, density: float = 0.3) -> list[tuple[str, str, int]]:
    """A random weighted digraph with weights 0..9 as ``(from, to, w)``."""
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    nodes = [chr(ord("a") + i) for i in range(n)]
    edges = []
    for x in nodes:
        for y in nodes:
            if rng.random() < density:
                edges.append((x, y, rng.randint(0, 9)))
    return edges


def graph_facts(edges) -> str:
    return "".join(f"edge({x}, {y}, {w}).\n" for x, y, w in edges)


FIXED_GRAPHS = [
    [("a", "b", 3), ("b", "c", 4), ("a", "c", 9), ("c", "a", 1), ("b", "d", 2), ("d", "c", 1)],
    [("a", "b", 1), ("b", "a", 1), ("b", "c", 5), ("a", "c", 7)],
    [("a", "a", 0), ("a", "b", 2), ("b", "c", 0), ("c", "b", 3)],
]


# -- suites ----------------------------------------------------------------

@dataclass
class BenchRow:
    suite: str
    case: str
    mode: str
    answers: int
    firings: int
    nodes: int
    millis: float


def _query(engine: Engine, text: str) -> int:
    goals, _ = parse_query(text)
    n = 0
    for _ in engine.query(goals):
        n += 1
    return n


def encodings_suite(sizes=(10, 20, 40, 50)) -> list[BenchRow]:
    """Cost of answer retrieval from a completed table, per store encoding.

    The first query fills the table; the measured second query only
    decodes the stored answer, so its firings are the decoding cost.
    """
    rows = []
    for prog_name in ("prop", "simp"):
        for n in sizes:
            for mode, decl in (("goal", "p_goal"), ("suspension", "p_susp")):
                eng = Engine(load_program(prog_name, decl))
                _query(eng, f"p({n})")
                before = eng.stats.snapshot()
                t0 = time.perf_counter()
                _query(eng, f"p({n})")
                ms = (time.perf_counter() - t0) * 1000
                after = eng.stats.snapshot()
                rows.append(BenchRow("encodings", f"{prog_name} N={n}", mode,
                                     eng.total_answers(),
                                     after["firings"] - before["firings"],
                                     eng.total_nodes(), round(ms, 3)))
    return rows


def truckload_suite(cases=None) -> list[BenchRow]:
    if cases is None:
        cases = [("listed", 60), ("listed", 100), ("listed", 140)]
        cases += [("synthetic", load) for load in (100, 200, 300)]
    rows = []
    for inst, load in cases:
        for mode in TRUCKLOAD_MODES:
            prog = truckload_program(mode, synthetic=inst == "synthetic")
            eng = Engine(prog, subsumption=False)
            t0 = time.perf_counter()
            _query(eng, f"truckload(30, {load}, chicago, T)")
            ms = (time.perf_counter() - t0) * 1000
            rows.append(BenchRow("truckload", f"{inst} load={load}", mode, eng.total_answers(),
                                 eng.stats.firings, eng.total_nodes(), round(ms, 3)))
    return rows


def dist_suite(seeds=range(20)) -> list[BenchRow]:
    rows = []
    for seed in seeds:
        eng = Engine(load_program("dist", extra=graph_facts(random_graph(seed))))
        t0 = time.perf_counter()
        _query(eng, "dist(A, B, D)")
        ms = (time.perf_counter() - t0) * 1000
        rows.append(BenchRow("dist", f"graph seed={seed}", "subsumption", eng.total_answers(),
                             eng.stats.firings, eng.total_nodes(), round(ms, 3)))
    return rows


SUITES = {
    "encodings": encodings_suite,
    "truckload": truckload_suite,
    "dist": dist_suite,
}


def run_suite(name: str) -> list[BenchRow]:
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r} (choose from {', '.join(SUITES)})") from None
    return suite()


CSV_FIELDS = [f.name for f in fields(BenchRow)]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([getattr(r, f) for f in CSV_FIELDS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[BenchRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(BenchRow(rec["suite"], rec["case"], rec["mode"], int(rec["answers"]),
                            int(rec["firings"]), int(rec["nodes"]), float(rec["millis"])))
    return out


def format_table(rows) -> str:
    widths = [max(len(f), *(len(str(getattr(r, f))) for r in rows)) if rows else len(f)
              for f in CSV_FIELDS]
    lines = ["  ".join(f.ljust(w) for f, w in zip(CSV_FIELDS, widths))]
    for r in rows:
        lines.append("  ".join(str(getattr(r, f)).ljust(w) for f, w in zip(CSV_FIELDS, widths)))
    return "\n".join(lines)
