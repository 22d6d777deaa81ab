"""Small helpers shared by the test modules."""
from tchr import Engine, format_term, load_program, parse_program, parse_query
from tchr.codec import canonicalize, encode_store
from tchr.reader import read_term
from tchr.terms import resolve


def engine_for(text: str = "", *corpus, **kw) -> Engine:
    prog = load_program(*corpus, extra=text) if corpus else parse_program(text)
    return Engine(prog, **kw)


def run(eng: Engine, query: str):
    """Run a query to its first solution; returns the query vars or None."""
    goals, qvars = parse_query(query)
    return qvars if eng.solve_once(goals) else None


def all_solutions(eng: Engine, query: str):
    """Every solution as (bindings, sorted store) strings."""
    goals, qvars = parse_query(query)
    out = []
    for _ in eng.query(goals):
        binds = {n: format_term(resolve(v)) for n, v in qvars.items()}
        out.append((binds, store_text(eng)))
    return out


def store_text(eng: Engine) -> list[str]:
    """The live store as sorted surface text (variable names normalised)."""
    canon = canonicalize(encode_store(eng.store, "goal"), "sort")
    names = {}
    for t in canon.entries:
        from tchr.terms import term_vars
        for v in term_vars(t):
            names.setdefault(v, f"V{len(names)}")
    return [format_term(t, names) for t in canon.entries]


def term(text: str):
    return read_term(text)[0]
