"""Edinburgh-style term reader and writer.

The reader turns program text into a list of clause terms, each paired with
the variable names used in it. Supported surface syntax: quoted and plain
atoms, variables, integers, compound terms, lists, operators from
:data:`OPERATORS`, ``%`` line comments and ``/* */`` block comments.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .terms import NIL, Atom, Struct, Term, Var, deref, list_items

__all__ = ["ParseError", "read_terms", "read_term", "format_term", "OPERATORS"]

# name -> {kind: (priority, type)}; kind is "prefix" or "infix"
OPERATORS: dict[str, dict[str, tuple[int, str]]] = {}


def _op(priority: int, kind: str, *names: str) -> None:
    slot = "prefix" if kind in ("fx", "fy") else "infix"
    for name in names:
        OPERATORS.setdefault(name, {})[slot] = (priority, kind)


_op(1200, "xfx", ":-")
_op(1200, "fx", ":-", "?-")
_op(1190, "xfx", "@")
_op(1180, "xfx", "<=>", "==>")
_op(1150, "fx", "table_chr", "chr_table", "constraints", "constraint", "table")
_op(1100, "xfx", "with")
_op(1100, "xfy", ";", "|")
_op(1100, "xfx", "\\")
_op(1050, "xfy", "->")
_op(1000, "xfy", ",")
_op(900, "fy", "\\+")
_op(700, "xfx", "=", "\\=", "==", "\\==", "is", "<", ">", "=<", ">=",
    "=:=", "=\\=", "@<", "@>", "@=<", "@>=", "in")
_op(500, "yfx", "+", "-")
_op(400, "yfx", "*", "//", "/", "mod")
_op(200, "fy", "-", "+")
_op(200, "xfy", "^")


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        text = f"{message} at line {line}, column {column}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


@dataclass
class Token:
    kind: str   # atom, var, int, punct, qatom, end, eof
    value: str
    pos: int
    layout_before: bool = False


_SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|%[^\n]*|/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.|'')*')
  | (?P<punct>[()\[\]{},|!;])
  | (?P<sym>[+\-*/\\^<>=~:.?@#&$]+)
""", re.VERBOSE | re.DOTALL)


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    layout = True
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = _line_col(text, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "ws":
            layout = True
            pos = m.end()
            continue
        if kind == "sym":
            # a lone '.' followed by layout or EOF ends a clause
            if value == "." and (m.end() == n or text[m.end()].isspace() or text[m.end()] == "%"):
                tokens.append(Token("end", ".", pos, layout))
                pos = m.end()
                layout = True
                continue
            if value.endswith(".") and len(value) > 1 and (m.end() == n or text[m.end()].isspace()):
                tokens.append(Token("atom", value[:-1], pos, layout))
                tokens.append(Token("end", ".", m.end() - 1, False))
                pos = m.end()
                layout = True
                continue
            kind = "atom"
        elif kind == "qatom":
            value = value[1:-1].replace("''", "'")
            value = re.sub(r"\\(.)", lambda mm: {"n": "\n", "t": "\t"}.get(mm.group(1), mm.group(1)), value)
        tokens.append(Token(kind, value, pos, layout))
        layout = False
        pos = m.end()
    tokens.append(Token("eof", "", n, True))
    return tokens


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.varmap: dict[str, Var] = {}

    # -- helpers -------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: Token | None = None, expected: str = ""):
        tok = tok or self.peek()
        line, col = _line_col(self.text, tok.pos)
        raise ParseError(message, line, col, expected)

    def expect(self, kind: str, value: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = repr(value) if value is not None else kind
            found = tok.value or tok.kind
            self.error(f"unexpected {found!r}", tok, expected=want)
        return self.advance()

    # -- clauses -------------------------------------------------------
    def clause(self) -> tuple[Term, dict[str, Var]]:
        self.varmap = {}
        term = self.parse(1200)
        self.expect("end")
        return term, self.varmap

    def _is_term_start(self, tok: Token) -> bool:
        if tok.kind in ("int", "var", "qatom"):
            return True
        if tok.kind == "punct":
            return tok.value in "([{!"
        if tok.kind == "atom":
            ops = OPERATORS.get(tok.value, {})
            return "infix" not in ops or "prefix" in ops or not ops
        return False

    def _prefix_operand(self, nxt: Token) -> bool:
        """Does ``nxt`` start the operand of a prefix operator?"""
        if nxt.kind != "atom":
            return self._is_term_start(nxt)
        ops = OPERATORS.get(nxt.value, {})
        if "infix" not in ops or "prefix" in ops:
            return True
        # an infix operator: an operand only as an atom of its own, e.g.
        # the ``in`` of ``:- constraints in/2``, or in functional notation
        after = self.peek(1)
        if after.kind == "punct" and after.value == "(" and not after.layout_before:
            return True
        return not self._is_term_start(after)

    def parse(self, max_prec: int) -> Term:
        left, left_prec = self.parse_primary(max_prec)
        return self.parse_infix(left, left_prec, max_prec)

    def parse_infix(self, left: Term, left_prec: int, max_prec: int) -> Term:
        while True:
            tok = self.peek()
            if tok.kind == "atom" or (tok.kind == "punct" and tok.value in (",", "|", ";")):
                name = tok.value
                info = OPERATORS.get(name, {}).get("infix")
                if info is None:
                    return left
                prec, typ = info
                if prec > max_prec:
                    return left
                la = prec - 1 if typ[0] == "x" else prec
                ra = prec - 1 if typ[2] == "x" else prec
                if left_prec > la:
                    return left
                self.advance()
                right = self.parse(ra)
                left = Struct(name, (left, right))
                left_prec = prec
            else:
                return left

    def parse_primary(self, max_prec: int) -> tuple[Term, int]:
        tok = self.advance()
        if tok.kind == "int":
            return int(tok.value), 0
        if tok.kind == "var":
            if tok.value == "_":
                return Var("_"), 0
            v = self.varmap.get(tok.value)
            if v is None:
                v = self.varmap[tok.value] = Var(tok.value)
            return v, 0
        if tok.kind == "punct":
            if tok.value == "(":
                t = self.parse(1200)
                self.expect("punct", ")")
                return t, 0
            if tok.value == "[":
                return self.parse_list(), 0
            if tok.value == "{":
                if self.peek().kind == "punct" and self.peek().value == "}":
                    self.advance()
                    return Atom("{}"), 0
                t = self.parse(1200)
                self.expect("punct", "}")
                return Struct("{}", (t,)), 0
            if tok.value == "!":
                return Atom("!"), 0
            if tok.value in (",", "|", ";"):
                self.error(f"unexpected {tok.value!r}", tok, expected="a term")
            self.error(f"unexpected {tok.value!r}", tok, expected="a term")
        if tok.kind in ("end", "eof"):
            self.error("unexpected end of clause", tok, expected="a term")
        # atom or quoted atom
        name = tok.value
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.value == "(" and not nxt.layout_before:
            self.advance()
            args = [self.parse(999)]
            while self.peek().kind == "punct" and self.peek().value == ",":
                self.advance()
                args.append(self.parse(999))
            self.expect("punct", ")")
            return Struct(name, args), 0
        if tok.kind == "atom":
            # negative integer literal
            if name == "-" and nxt.kind == "int" and not nxt.layout_before:
                self.advance()
                return -int(nxt.value), 0
            prefix = OPERATORS.get(name, {}).get("prefix")
            if prefix is not None and self._prefix_operand(nxt):
                prec, typ = prefix
                if prec > max_prec:
                    prec = 999
                arg_max = prec - 1 if typ == "fx" else prec
                arg = self.parse(arg_max)
                return Struct(name, (arg,)), prec
        return Atom(name), 0

    def parse_list(self) -> Term:
        if self.peek().kind == "punct" and self.peek().value == "]":
            self.advance()
            return NIL
        items = [self.parse(999)]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.advance()
            items.append(self.parse(999))
        tail: Term = NIL
        if self.peek().kind == "punct" and self.peek().value == "|":
            self.advance()
            tail = self.parse(999)
        self.expect("punct", "]")
        result = tail
        for item in reversed(items):
            result = Struct(".", (item, result))
        return result


def read_terms(text: str) -> list[tuple[Term, dict[str, Var]]]:
    """Parse every ``.``-terminated clause in ``text``."""
    p = _Parser(text)
    out = []
    while p.peek().kind != "eof":
        out.append(p.clause())
    return out


def read_term(text: str) -> tuple[Term, dict[str, Var]]:
    """Parse exactly one term; the final ``.`` is optional."""
    stripped = text.strip()
    if not stripped.endswith("."):
        stripped += " ."
    terms = read_terms(stripped)
    if len(terms) != 1:
        raise ParseError("expected exactly one term", 1, 1)
    return terms[0]


# -- writer -------------------------------------------------------------

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_SYMBOL_ATOM = re.compile(r"^[+\-*/\\^<>=~:.?@#&$]+$")


def _atom_text(name: str) -> str:
    if _PLAIN_ATOM.match(name) or _SYMBOL_ATOM.match(name) or name in ("[]", "!", ";", "{}"):
        return name
    return "'" + name.replace("'", "''") + "'"


def format_term(t: Term, names: dict | None = None, max_prec: int = 1200) -> str:
    """Render ``t`` in surface syntax that :func:`read_term` parses back.

    ``names`` maps variables to display names; other variables print as
    ``_G<n>`` numbered by first occurrence within this call.
    """
    names = dict(names or {})
    counter = [0]

    def var_name(v: Var) -> str:
        name = names.get(v)
        if name is None:
            name = names[v] = f"_G{counter[0]}"
            counter[0] += 1
        return name

    def fmt(x: Term, prec: int) -> str:
        x = deref(x)
        tx = type(x)
        if tx is Var:
            return var_name(x)
        if tx is int:
            s = str(x)
            return f"({s})" if x < 0 and prec < 200 else s
        if tx is Atom:
            s = _atom_text(x.name)
            if x.name in OPERATORS and prec < 1200:
                return f"({s})" if max(p for p, _ in OPERATORS[x.name].values()) > prec else s
            return s
        # Struct
        if x.name == "." and len(x.args) == 2:
            items = []
            cur = x
            while type(cur) is Struct and cur.name == "." and len(cur.args) == 2:
                items.append(fmt(cur.args[0], 999))
                cur = deref(cur.args[1])
            body = ",".join(items)
            if cur is NIL:
                return f"[{body}]"
            return f"[{body}|{fmt(cur, 999)}]"
        if x.name == "{}" and len(x.args) == 1:
            return "{" + fmt(x.args[0], 1200) + "}"
        ops = OPERATORS.get(x.name, {})
        if len(x.args) == 2 and "infix" in ops:
            p, typ = ops["infix"]
            lp = p - 1 if typ[0] == "x" else p
            rp = p - 1 if typ[2] == "x" else p
            left = fmt(x.args[0], lp)
            right = fmt(x.args[1], rp)
            name = x.name if x.name in ("|", ";") else _atom_text(x.name)
            if x.name == ",":
                s = f"{left},{right}"
            elif _PLAIN_ATOM.match(x.name) or x.name in ("->", ":-", "<=>", "==>", "@", "|", "\\", ";", "is"):
                s = f"{left} {name} {right}"
            else:
                s = f"{left}{name}{right}"
                # keep symbolic operators from gluing onto neighbours
                if _SYMBOL_ATOM.match(left[-1:] or "a") or _SYMBOL_ATOM.match(right[:1] or "a") or right[:1].isdigit() and x.name == "-":
                    s = f"{left} {name} {right}"
            return f"({s})" if p > prec else s
        if len(x.args) == 1 and "prefix" in ops and x.name not in ("-", "+") or (
            len(x.args) == 1 and x.name in ("-", "+") and type(deref(x.args[0])) is not int
        ):
            p, typ = ops["prefix"]
            ap = p - 1 if typ == "fx" else p
            arg = fmt(x.args[0], ap)
            spaced = (_PLAIN_ATOM.match(x.name) or x.name in ("\\+", ":-", "?-")
                      or _SYMBOL_ATOM.match(arg[:1]) or arg[:1].isdigit())
            s = f"{_atom_text(x.name)} {arg}" if spaced else f"{_atom_text(x.name)}{arg}"
            return f"({s})" if p > prec else s
        args = ",".join(fmt(a, 999) for a in x.args)
        return f"{_atom_text(x.name)}({args})"

    return fmt(t, max_prec)


def format_list_items(t: Term) -> list[Term]:
    items = list_items(t)
    return items if items is not None else [t]
