"""Independent reference implementations used to cross-check the engine.

These are deliberately naive: they follow the textbook definitions directly
and share no code with the package beyond its data classes.
"""

from __future__ import annotations

import itertools
import operator
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from lmpcheck import rtl
from lmpcheck.simulator import TraceElement

# ---------------------------------------------------------------------------
# finite-trace LTL by quantifier expansion


def _text(v: Any) -> str:
    if v is None:
        return ""
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_text(x) for x in v)
    return str(v)


def _atom(a: rtl.Atom, tr: list, i: int) -> bool:
    if i >= len(tr):
        return False
    if a.position == "first" and i != 0:
        return False
    if a.position == "last" and i != len(tr) - 1:
        return False
    e = tr[i]
    if a.skill is not None and a.skill != e.skill:
        return False
    fields = [(p, e.args[k] if k < len(e.args) else None, k < len(e.args)) for k, p in enumerate(a.args)]
    for pat, val, present in fields:
        if pat is not None and (not present or re.fullmatch(pat, _text(val), re.DOTALL) is None):
            return False
    for pat, val in ((a.result, e.result), (a.location, e.location)):
        if pat is not None and re.fullmatch(pat, _text(val), re.DOTALL) is None:
            return False
    return True


def ltl_oracle(f: Any, tr: list, i: int = 0) -> bool:
    n = len(tr)
    if isinstance(f, rtl.Atom):
        return _atom(f, tr, i)
    if isinstance(f, rtl.Const):
        return f.value
    if isinstance(f, rtl.Not):
        return not ltl_oracle(f.arg, tr, i)
    if isinstance(f, rtl.And):
        return ltl_oracle(f.left, tr, i) and ltl_oracle(f.right, tr, i)
    if isinstance(f, rtl.Or):
        return ltl_oracle(f.left, tr, i) or ltl_oracle(f.right, tr, i)
    if isinstance(f, rtl.Next):
        return i + 1 < n and ltl_oracle(f.arg, tr, i + 1)
    if isinstance(f, rtl.Eventually):
        return any(ltl_oracle(f.arg, tr, j) for j in range(i, n))
    if isinstance(f, rtl.Always):
        return all(ltl_oracle(f.arg, tr, j) for j in range(i, n))
    if isinstance(f, rtl.Until):
        return any(
            ltl_oracle(f.right, tr, j) and all(ltl_oracle(f.left, tr, k) for k in range(i, j))
            for j in range(i, n)
        )
    raise TypeError(f"oracle handles core LTL only, got {type(f).__name__}")


# random traces over a small alphabet: go_to / say / is_in_room in two rooms
ROOMS = ("office", "lab", "lobby")
MESSAGES = ("hi", "done", "bye")
OBJECTS = ("marker", "cup")


def random_trace(rng: random.Random, max_len: int = 8) -> list[TraceElement]:
    out = []
    loc = "office"
    for i in range(rng.randint(0, max_len)):
        kind = rng.choice(("GoTo", "Say", "IsInRoom"))
        if kind == "GoTo":
            loc = rng.choice(ROOMS)
            out.append(TraceElement(i, "GoTo", (loc,), None, loc))
        elif kind == "Say":
            out.append(TraceElement(i, "Say", (rng.choice(MESSAGES),), None, loc))
        else:
            out.append(TraceElement(i, "IsInRoom", (rng.choice(OBJECTS),), rng.random() < 0.5, loc))
    return out


def random_atom(rng: random.Random) -> rtl.Atom:
    r = rng.random()
    if r < 0.3:
        return rtl.Atom("GoTo", (rng.choice(ROOMS + (".*", "l.*")),))
    if r < 0.55:
        return rtl.Atom("Say", (rng.choice(MESSAGES + ("d.*",)),), location=rng.choice((None,) + ROOMS))
    if r < 0.75:
        return rtl.Atom("IsInRoom", (rng.choice(OBJECTS),), result=rng.choice(("true", "false", None)))
    if r < 0.9:
        return rtl.Atom(location=rng.choice(ROOMS))
    return rtl.Atom(position=rng.choice(("first", "last")))


def random_formula(rng: random.Random, depth: int = 4) -> Any:
    if depth == 0 or rng.random() < 0.2:
        return rtl.Const(rng.random() < 0.5) if rng.random() < 0.05 else random_atom(rng)
    op = rng.choice(("not", "and", "or", "N", "F", "G", "U"))
    d = depth - 1
    if op == "not":
        return rtl.Not(random_formula(rng, d))
    if op == "and":
        return rtl.And(random_formula(rng, d), random_formula(rng, d))
    if op == "or":
        return rtl.Or(random_formula(rng, d), random_formula(rng, d))
    if op == "U":
        return rtl.Until(random_formula(rng, d), random_formula(rng, d))
    return {"N": rtl.Next, "F": rtl.Eventually, "G": rtl.Always}[op](random_formula(rng, d))


# ---------------------------------------------------------------------------
# pass@k by subset enumeration


def pass_at_k_oracle(n: int, c: int, k: int) -> Fraction:
    """Fraction of k-subsets of n samples (the first c passing) with a passing member."""
    subsets = list(itertools.combinations(range(n), k))
    hit = sum(1 for s in subsets if any(i < c for i in s))
    return Fraction(hit, len(subsets))


# ---------------------------------------------------------------------------
# reference expression semantics

INT_MIN, INT_MAX = -(2**63), 2**63 - 1
SEQ_CAP = 1_000_000


class RefError(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind


@dataclass
class Expr:
    op: str
    kids: tuple = ()
    value: Any = None

    def src(self) -> str:
        if self.op == "lit":
            return repr(self.value)
        if self.op == "list":
            return "[" + ", ".join(k.src() for k in self.kids) + "]"
        if self.op in ("neg", "not"):
            return ("-" if self.op == "neg" else "not ") + f"({self.kids[0].src()})"
        if self.op == "if":
            a, c, b = self.kids
            return f"(({a.src()}) if ({c.src()}) else ({b.src()}))"
        if self.op == "index":
            return f"({self.kids[0].src()})[{self.kids[1].src()}]"
        if self.op == "len":
            return f"len({self.kids[0].src()})"
        return f"(({self.kids[0].src()}) {self.op} ({self.kids[1].src()}))"


_BIN = {
    "+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv,
    "//": operator.floordiv, "%": operator.mod, "**": operator.pow,
    "<": operator.lt, "<=": operator.le, "==": operator.eq, "!=": operator.ne,
}


def _ok(v: Any) -> Any:
    if type(v) is int and not INT_MIN <= v <= INT_MAX:
        raise RefError("Value")
    if isinstance(v, complex):
        raise RefError("Value")
    return v


def ref_eval(e: Expr) -> Any:
    """Evaluate with ordinary Python operators, bounded to 64-bit ints."""
    if e.op == "lit":
        return _ok(e.value)
    if e.op == "list":
        return [ref_eval(k) for k in e.kids]
    if e.op == "and":
        a = ref_eval(e.kids[0])
        return ref_eval(e.kids[1]) if a else a
    if e.op == "or":
        a = ref_eval(e.kids[0])
        return a if a else ref_eval(e.kids[1])
    if e.op == "if":
        return ref_eval(e.kids[0]) if ref_eval(e.kids[1]) else ref_eval(e.kids[2])
    if e.op == "not":
        return not ref_eval(e.kids[0])
    args = [ref_eval(k) for k in e.kids]
    try:
        if e.op == "neg":
            return _ok(-args[0])
        if e.op == "len":
            return len(args[0])
        if e.op == "index":
            return args[0][args[1]]
        a, b = args
        if e.op == "*":
            for s, m in ((a, b), (b, a)):
                if isinstance(s, (str, list)) and isinstance(m, int) and m * len(s) > SEQ_CAP:
                    raise RefError("Value")
        if e.op == "**" and type(a) is int and type(b) is int and abs(a) > 1 and b > 63:
            raise RefError("Value")
        return _ok(_BIN[e.op](a, b))
    except RefError:
        raise
    except ZeroDivisionError:
        raise RefError("ZeroDivision") from None
    except TypeError:
        raise RefError("Type") from None
    except IndexError:
        raise RefError("Index") from None
    except (OverflowError, ValueError):
        raise RefError("Value") from None


_LEAVES = [0, 1, 2, -3, 7, 2**62, -(2**62), 2.5, -0.5, True, False, "", "ab", "x"]


def random_expr(rng: random.Random, depth: int = 4) -> Expr:
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.1:
            return Expr("list", tuple(random_expr(rng, 0) for _ in range(rng.randint(0, 3))))
        return Expr("lit", value=rng.choice(_LEAVES))
    d = depth - 1
    op = rng.choice(list(_BIN) + ["and", "or", "not", "neg", "if", "index", "len"])
    if op in ("not", "neg", "len"):
        return Expr(op, (random_expr(rng, d),))
    if op == "if":
        return Expr(op, (random_expr(rng, d), random_expr(rng, d), random_expr(rng, d)))
    if op == "**":
        return Expr(op, (random_expr(rng, d), Expr("lit", value=rng.choice([0, 1, 2, 3, 64, -1]))))
    return Expr(op, (random_expr(rng, d), random_expr(rng, d)))
