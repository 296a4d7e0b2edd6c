"""Temporal checks over finite execution traces.

Checks are written in a small robot-oriented temporal language whose derived
operators (``seq``, ``never``, ``at_start``, ``at_end``, ``implies_then``,
``visit_all``) lower to core finite-trace LTL.  Concrete grammar::

    check    := clause (";" clause)*
    clause   := LABEL ":" formula ("|" formula)*
    formula  := or
    or       := and ("||" and)*
    and      := until ("&" until)*
    until    := unary ("U" until)?
    unary    := ("F" | "G" | "N" | "!") unary | primary
    primary  := "(" formula ")" | derived | atom | "true" | "false" | "first" | "last"
    derived  := "seq(" formula ("," formula)+ ")" | "never(" formula ")"
              | "at_start(" formula ")" | "at_end(" formula ")"
              | "implies_then(" formula "," formula ")" | "visit_all(" REGEX ")"
    atom     := SKILL "(" fieldpat ("," fieldpat)* ")" | "loc(" REGEX ")"
    fieldpat := [FIELD "~"] "/" REGEX "/"

Regexes are anchored (full match).  Inside a regex literal ``\\/`` stands for
a slash.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence, Union

GRAMMAR_VERSION = 1

COMPLETION_CATEGORIES = (
    "SayAtLocation",
    "AskAtLocation",
    "ManipulationAtLocation",
    "CheckEntityAtLocation",
    "InitialTerminal",
    "EventOrdering",
    "Location",
    "ExhaustiveSearch",
)

# surface skill name -> (trace skill, argument field names)
SKILL_FIELDS: dict[str, tuple[str | None, tuple[tuple[str, ...], ...]]] = {
    "go_to": ("GoTo", (("room",),)),
    "get_current_location": ("GetCurrentLocation", ()),
    "get_all_rooms": ("GetAllRooms", ()),
    "is_in_room": ("IsInRoom", (("obj", "object"),)),
    "say": ("Say", (("msg", "message"),)),
    "ask": ("Ask", (("person",), ("q", "question"), ("opts", "options"))),
    "pick": ("Pick", (("obj", "object"),)),
    "place": ("Place", (("obj", "object"),)),
    "any": (None, ()),
}
_SURFACE_NAME = {v[0]: k for k, v in SKILL_FIELDS.items()}


class RtlSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# formula trees


def _regex_lit(p: str) -> str:
    return "/" + p.replace("/", "\\/") + "/"


@dataclass(frozen=True)
class Atom:
    """Holds at a trace position whose element matches every supplied pattern."""

    skill: str | None = None
    args: tuple[str | None, ...] = ()
    result: str | None = None
    location: str | None = None
    position: str | None = None  # "first" | "last"

    def __str__(self) -> str:
        if self.position and self.skill is None and not self.args and self.result is None and self.location is None:
            return self.position
        if self.skill is None and not self.args and self.result is None and self.location is not None and not self.position:
            return f"loc({_regex_lit(self.location)})"
        parts = []
        names = SKILL_FIELDS[_SURFACE_NAME[self.skill]][1]
        for i, a in enumerate(self.args):
            if a is None:
                continue
            if all(x is not None for x in self.args[:i]):
                parts.append(_regex_lit(a))
            else:
                name = names[i][0] if i < len(names) else f"arg{i}"
                parts.append(f"{name}~{_regex_lit(a)}")
        if self.result is not None:
            parts.append(f"result~{_regex_lit(self.result)}")
        if self.location is not None:
            parts.append(f"loc~{_regex_lit(self.location)}")
        if self.position:
            parts.append(f"pos~/{self.position}/")
        return f"{_SURFACE_NAME[self.skill]}({', '.join(parts)})"


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} || {_wrap(self.right)}"


@dataclass(frozen=True)
class Next:
    arg: "Formula"

    def __str__(self) -> str:
        return f"N {_wrap(self.arg)}"


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"

    def __str__(self) -> str:
        return f"F {_wrap(self.arg)}"


@dataclass(frozen=True)
class Always:
    arg: "Formula"

    def __str__(self) -> str:
        return f"G {_wrap(self.arg)}"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} U {_wrap(self.right)}"


@dataclass(frozen=True)
class Seq:
    items: tuple["Formula", ...]

    def __str__(self) -> str:
        return f"seq({', '.join(map(str, self.items))})"


@dataclass(frozen=True)
class Never:
    arg: "Formula"

    def __str__(self) -> str:
        return f"never({self.arg})"


@dataclass(frozen=True)
class AtStart:
    arg: "Formula"

    def __str__(self) -> str:
        return f"at_start({self.arg})"


@dataclass(frozen=True)
class AtEnd:
    arg: "Formula"

    def __str__(self) -> str:
        return f"at_end({self.arg})"


@dataclass(frozen=True)
class ImpliesThen:
    cond: "Formula"
    then: "Formula"

    def __str__(self) -> str:
        return f"implies_then({self.cond}, {self.then})"


@dataclass(frozen=True)
class VisitAll:
    pattern: str

    def __str__(self) -> str:
        return f"visit_all({_regex_lit(self.pattern)})"


Formula = Union[Atom, Const, Not, And, Or, Next, Eventually, Always, Until,
                Seq, Never, AtStart, AtEnd, ImpliesThen, VisitAll]
CORE_TYPES = (Atom, Const, Not, And, Or, Next, Eventually, Always, Until)


def _wrap(f: Formula) -> str:
    if isinstance(f, (And, Or, Until)):
        return f"({f})"
    return str(f)


@dataclass(frozen=True)
class Clause:
    label: str
    disjuncts: tuple[Formula, ...]

    def __str__(self) -> str:
        return f"{self.label}: " + " | ".join(map(str, self.disjuncts))


@dataclass(frozen=True)
class RtlCheck:
    clauses: tuple[Clause, ...]

    def __post_init__(self) -> None:
        if not self.clauses:
            raise ValueError("a check needs at least one clause")

    def __str__(self) -> str:
        return ";\n".join(map(str, self.clauses))


@dataclass(frozen=True)
class CheckResult:
    verdict: str  # "SAT" | "UNSAT"
    failed_labels: tuple[str, ...]

    @property
    def sat(self) -> bool:
        return self.verdict == "SAT"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<regex>/(?:\\.|[^\\/])*/)
  | (?P<op>\|\||[|&!();:,~])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise RtlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        assert kind is not None
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _unescape(lit: str) -> str:
    return lit[1:-1].replace("\\/", "/")


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> RtlSyntaxError:
        tok = tok or self.tok
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        return RtlSyntaxError(f"{msg}, found {what}", tok.line, tok.column)

    def take(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "regex":
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def regex(self) -> str:
        if self.tok.kind != "regex":
            raise self.error("expected /regex/")
        t = self.tok
        pat = _unescape(t.text)
        try:
            re.compile(pat)
        except re.error as e:
            raise RtlSyntaxError(f"invalid regex {pat!r}: {e}", t.line, t.column) from None
        self.i += 1
        return pat

    # check := clause (";" clause)*
    def check(self) -> RtlCheck:
        clauses = [self.clause()]
        while self.at(";"):
            self.i += 1
            if self.tok.kind == "eof":  # tolerate a trailing separator
                break
            clauses.append(self.clause())
        if self.tok.kind != "eof":
            raise self.error("expected ';' or end of input")
        return RtlCheck(tuple(clauses))

    def clause(self) -> Clause:
        t = self.tok
        if t.kind != "ident" or t.text not in COMPLETION_CATEGORIES:
            raise self.error("expected a clause label")
        self.i += 1
        self.take(":")
        disjuncts = [self.formula()]
        while self.at("|"):
            self.i += 1
            disjuncts.append(self.formula())
        return Clause(t.text, tuple(disjuncts))

    def formula(self) -> Formula:
        left = self.conj()
        while self.at("||"):
            self.i += 1
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.until()
        while self.at("&"):
            self.i += 1
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.at("U"):
            self.i += 1
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        t = self.tok
        ctor = {"F": Eventually, "G": Always, "N": Next, "!": Not}.get(t.text) if t.kind != "regex" else None
        if ctor is not None:
            self.i += 1
            return ctor(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        t = self.tok
        if self.at("("):
            self.i += 1
            f = self.formula()
            self.take(")")
            return f
        if t.kind != "ident":
            raise self.error("expected a formula")
        name = t.text
        if name in ("true", "false"):
            self.i += 1
            return Const(name == "true")
        if name in ("first", "last"):
            self.i += 1
            return Atom(position=name)
        if name == "U":
            raise self.error("expected a formula")
        self.i += 1
        self.take("(")
        if name == "seq":
            items = [self.formula()]
            while self.at(","):
                self.i += 1
                items.append(self.formula())
            self.take(")")
            if len(items) < 2:
                raise self.error("seq needs at least two steps", t)
            return Seq(tuple(items))
        if name in ("never", "at_start", "at_end"):
            f = self.formula()
            self.take(")")
            return {"never": Never, "at_start": AtStart, "at_end": AtEnd}[name](f)
        if name == "implies_then":
            cond = self.formula()
            self.take(",")
            then = self.formula()
            self.take(")")
            return ImpliesThen(cond, then)
        if name == "visit_all":
            pat = self.regex()
            self.take(")")
            return VisitAll(pat)
        if name == "loc":
            pat = self.regex()
            self.take(")")
            return Atom(location=pat)
        if name in SKILL_FIELDS:
            return self.atom(name, t)
        raise self.error("unknown operator or skill", t)

    def atom(self, name: str, name_tok: _Tok) -> Atom:
        skill, arg_fields = SKILL_FIELDS[name]
        args: dict[int, str] = {}
        result = location = position = None
        positional = 0
        while True:
            field = None
            if self.tok.kind == "ident":
                field_tok = self.tok
                field = field_tok.text
                self.i += 1
                self.take("~")
            pat = self.regex()
            if field is None:
                if positional in args:
                    raise self.error("positional pattern after a named argument pattern")
                args[positional] = pat
                positional += 1
            elif field in ("result", "res"):
                result = pat
            elif field in ("loc", "location"):
                location = pat
            elif field == "pos":
                if pat not in ("first", "last"):
                    raise RtlSyntaxError("pos must be /first/ or /last/", field_tok.line, field_tok.column)
                position = pat
            else:
                idx = None
                if re.fullmatch(r"arg\d+", field):
                    idx = int(field[3:])
                else:
                    for k, names in enumerate(arg_fields):
                        if field in names:
                            idx = k
                if idx is None:
                    raise RtlSyntaxError(
                        f"unknown field {field!r} for {name}", field_tok.line, field_tok.column
                    )
                args[idx] = pat
            if self.at(","):
                self.i += 1
                continue
            self.take(")")
            break
        arg_tuple = tuple(args.get(k) for k in range(max(args) + 1)) if args else ()
        return Atom(skill, arg_tuple, result, location, position)


def parse_rtl(text: str) -> RtlCheck:
    """Parse a full check (labelled clauses)."""
    return _Parser(text).check()


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.tok.kind != "eof":
        raise p.error("expected end of formula")
    return f


# ---------------------------------------------------------------------------
# lowering


def _conj(parts: Sequence[Formula]) -> Formula:
    if not parts:
        return Const(True)
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def lower_rtl(f: Formula, rooms: Sequence[str] | None = None) -> Formula:
    """Rewrite derived operators into core LTL; ``visit_all`` needs the room list."""
    if isinstance(f, (Atom, Const)):
        return f
    if isinstance(f, Not):
        return Not(lower_rtl(f.arg, rooms))
    if isinstance(f, And):
        return And(lower_rtl(f.left, rooms), lower_rtl(f.right, rooms))
    if isinstance(f, Or):
        return Or(lower_rtl(f.left, rooms), lower_rtl(f.right, rooms))
    if isinstance(f, Until):
        return Until(lower_rtl(f.left, rooms), lower_rtl(f.right, rooms))
    if isinstance(f, Next):
        return Next(lower_rtl(f.arg, rooms))
    if isinstance(f, Eventually):
        return Eventually(lower_rtl(f.arg, rooms))
    if isinstance(f, Always):
        return Always(lower_rtl(f.arg, rooms))
    if isinstance(f, Seq):
        items = [lower_rtl(x, rooms) for x in f.items]
        out: Formula = Eventually(items[-1])
        for item in reversed(items[:-1]):
            out = Eventually(And(item, Next(out)))
        return out
    if isinstance(f, Never):
        return Always(Not(lower_rtl(f.arg, rooms)))
    if isinstance(f, AtStart):
        return And(lower_rtl(f.arg, rooms), Atom(position="first"))
    if isinstance(f, AtEnd):
        return Eventually(And(lower_rtl(f.arg, rooms), Atom(position="last")))
    if isinstance(f, ImpliesThen):
        return Always(Or(Not(lower_rtl(f.cond, rooms)), lower_rtl(f.then, rooms)))
    if isinstance(f, VisitAll):
        if rooms is None:
            raise ValueError("visit_all can only be lowered against a room list")
        targets = [r for r in rooms if re.fullmatch(f.pattern, r, re.DOTALL)]
        return _conj([Eventually(Atom(location=re.escape(r))) for r in targets])
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# evaluation


def render(value: Any) -> str:
    """Text form of a trace field as seen by atom patterns."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(render(v) for v in value)
    return str(value)


@lru_cache(maxsize=4096)
def _compiled(pattern: str) -> re.Pattern[str]:
    return re.compile(pattern, re.DOTALL)


def atom_holds(atom: Atom, elements: Sequence[Any], i: int) -> bool:
    n = len(elements)
    if not 0 <= i < n:
        return False
    if atom.position == "first" and i != 0:
        return False
    if atom.position == "last" and i != n - 1:
        return False
    el = elements[i]
    if atom.skill is not None and el.skill != atom.skill:
        return False
    for k, pat in enumerate(atom.args):
        if pat is None:
            continue
        if k >= len(el.args) or not _compiled(pat).fullmatch(render(el.args[k])):
            return False
    if atom.result is not None and not _compiled(atom.result).fullmatch(render(el.result)):
        return False
    if atom.location is not None and not _compiled(atom.location).fullmatch(render(el.location)):
        return False
    return True


def _vector(f: Formula, elements: Sequence[Any], memo: dict[Formula, list[bool]]) -> list[bool]:
    """Truth values of core formula ``f`` at positions 0..n (n is one past the end)."""
    if f in memo:
        return memo[f]
    n = len(elements)
    if isinstance(f, Atom):
        v = [atom_holds(f, elements, i) for i in range(n)] + [False]
    elif isinstance(f, Const):
        v = [f.value] * (n + 1)
    elif isinstance(f, Not):
        v = [not x for x in _vector(f.arg, elements, memo)]
    elif isinstance(f, And):
        a, b = _vector(f.left, elements, memo), _vector(f.right, elements, memo)
        v = [x and y for x, y in zip(a, b)]
    elif isinstance(f, Or):
        a, b = _vector(f.left, elements, memo), _vector(f.right, elements, memo)
        v = [x or y for x, y in zip(a, b)]
    elif isinstance(f, Next):
        a = _vector(f.arg, elements, memo)
        v = [i + 1 < n and a[i + 1] for i in range(n)] + [False]
    elif isinstance(f, Eventually):
        a = _vector(f.arg, elements, memo)
        v = [False] * (n + 1)
        for i in range(n - 1, -1, -1):
            v[i] = a[i] or v[i + 1]
    elif isinstance(f, Always):
        a = _vector(f.arg, elements, memo)
        v = [True] * (n + 1)
        for i in range(n - 1, -1, -1):
            v[i] = a[i] and v[i + 1]
    elif isinstance(f, Until):
        a, b = _vector(f.left, elements, memo), _vector(f.right, elements, memo)
        v = [False] * (n + 1)
        for i in range(n - 1, -1, -1):
            v[i] = b[i] or (a[i] and v[i + 1])
    else:
        raise TypeError(f"derived operator {type(f).__name__} must be lowered before evaluation")
    memo[f] = v
    return v


def eval_ltl(f: Formula, trace: Any, i: int = 0) -> bool:
    """Evaluate a formula at position ``i`` of a finite trace.

    ``trace`` is a Trace or a plain sequence of elements.  Derived operators
    are lowered first, using the trace's room list if it has one.
    """
    elements = getattr(trace, "elements", trace)
    if not 0 <= i <= len(elements):
        raise IndexError(f"position {i} outside trace of length {len(elements)}")
    if not isinstance(f, CORE_TYPES) or _has_derived(f):
        f = lower_rtl(f, getattr(trace, "rooms", None))
    return _vector(f, elements, {})[i]


def _has_derived(f: Formula) -> bool:
    if isinstance(f, (Atom, Const)):
        return False
    if isinstance(f, (Not, Next, Eventually, Always)):
        return _has_derived(f.arg)
    if isinstance(f, (And, Or, Until)):
        return _has_derived(f.left) or _has_derived(f.right)
    return True


def check(trace: Any, c: RtlCheck) -> CheckResult:
    """Evaluate every clause at position 0; SAT iff each clause has a satisfied disjunct."""
    elements = getattr(trace, "elements", trace)
    rooms = getattr(trace, "rooms", None)
    memo: dict[Formula, list[bool]] = {}
    failed: list[str] = []
    for clause in c.clauses:
        ok = any(_vector(lower_rtl(d, rooms), elements, memo)[0] for d in clause.disjuncts)
        if not ok and clause.label not in failed:
            failed.append(clause.label)
    return CheckResult("UNSAT" if failed else "SAT", tuple(failed))


def subset(c: RtlCheck, labels: Sequence[str]) -> RtlCheck:
    """Keep only the clauses whose label is in ``labels``."""
    kept = tuple(cl for cl in c.clauses if cl.label in labels)
    return RtlCheck(kept)
