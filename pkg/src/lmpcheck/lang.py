"""Surface language for robot programs: extraction, parsing and a step-budgeted interpreter.

Programs are written in a subset of Python.  Parsing reuses the standard
library parser and then rejects every construct outside the subset, so the
interpreter only ever sees node types it knows how to evaluate.
"""

from __future__ import annotations

import ast
import operator
import re
import string
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Sequence

DEFAULT_BUDGET = 100_000
DEFAULT_STOP_SEQUENCES: tuple[str, ...] = ("\n```", "\nif __name__", "\n# Task:")
MAX_CALL_DEPTH = 50
MAX_SEQUENCE_LEN = 1_000_000
INT_MIN, INT_MAX = -(2**63), 2**63 - 1

SKILL_NAMES = (
    "go_to",
    "get_current_location",
    "get_all_rooms",
    "is_in_room",
    "say",
    "ask",
    "pick",
    "place",
)

ERROR_KINDS = (
    "Syntax", "Name", "Type", "Value", "Index", "Key",
    "Attribute", "ZeroDivision", "Timeout", "Unsupported",
)


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class InterpreterError(Exception):
    """A program failed inside the interpreter (parse, runtime or budget)."""

    def __init__(self, kind: str, message: str, span: Span | None = None):
        assert kind in ERROR_KINDS, kind
        super().__init__(f"{kind}Error: {message}" + (f" at {span}" if span else ""))
        self.kind = kind
        self.message = message
        self.span = span


class ExtractionEmpty(ValueError):
    """Nothing resembling a program was found in a completion."""


@dataclass(frozen=True)
class SourceProgram:
    text: str
    origin: str = ""


@dataclass(frozen=True)
class Completed:
    steps: int


# ---------------------------------------------------------------------------
# extraction

_FENCE = re.compile(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\n(.*?)(?:\n```|\Z)", re.DOTALL)
_CODE_LINE = re.compile(
    r"^(def |for |while |if |return\b|pass\b|"
    r"[A-Za-z_][A-Za-z0-9_]*\s*(\(|=(?!=)|[-+*/%]=|\[|\.[A-Za-z_][A-Za-z0-9_]*\s*\(|"
    r"(,\s*[A-Za-z_][A-Za-z0-9_]*)+\s*=(?!=)))"
)


def extract_program(
    completion: str,
    stop_sequences: Sequence[str] = DEFAULT_STOP_SEQUENCES,
    origin: str = "",
) -> SourceProgram:
    """Pull program text out of a raw model completion.

    Takes the first fenced code block if there is one, otherwise drops leading
    prose lines, then cuts at the earliest stop sequence.
    """
    text = completion
    m = _FENCE.search(text)
    if m:
        text = m.group(1)
    else:
        lines = text.split("\n")
        first = next((i for i, ln in enumerate(lines) if _CODE_LINE.match(ln)), None)
        if first is None:
            raise ExtractionEmpty("no program text found in completion")
        text = "\n".join(lines[first:])
    cut = len(text)
    for stop in stop_sequences:
        pos = text.find(stop)
        if pos != -1:
            cut = min(cut, pos)
    text = text[:cut].rstrip()
    if not text.strip():
        raise ExtractionEmpty("program text is empty after extraction")
    return SourceProgram(text=text, origin=origin)


# ---------------------------------------------------------------------------
# parsing

_ALLOWED = (
    ast.Module, ast.FunctionDef, ast.Assign, ast.AugAssign, ast.Expr, ast.If,
    ast.For, ast.While, ast.Break, ast.Continue, ast.Return, ast.Pass,
    ast.Constant, ast.JoinedStr, ast.FormattedValue, ast.List, ast.Tuple, ast.Dict,
    ast.Name, ast.Attribute, ast.Subscript, ast.Slice, ast.Call, ast.keyword,
    ast.UnaryOp, ast.BinOp, ast.Compare, ast.BoolOp, ast.IfExp, ast.ListComp,
    ast.comprehension, ast.arguments, ast.arg,
    ast.expr_context, ast.operator, ast.unaryop, ast.cmpop, ast.boolop,
)

_CONSTRUCT_NAMES = {
    ast.Import: "import", ast.ImportFrom: "import", ast.ClassDef: "class",
    ast.Try: "try", ast.With: "with", ast.Lambda: "lambda",
    ast.GeneratorExp: "generator", ast.Yield: "yield", ast.YieldFrom: "yield",
    ast.DictComp: "dict comprehension", ast.SetComp: "set comprehension",
    ast.Set: "set display", ast.AsyncFunctionDef: "async", ast.Await: "await",
    ast.AsyncFor: "async", ast.AsyncWith: "async", ast.Global: "global",
    ast.Nonlocal: "nonlocal", ast.Raise: "raise", ast.Assert: "assert",
    ast.Delete: "del", ast.Match: "match", ast.Starred: "starred expression",
    ast.NamedExpr: "assignment expression", ast.AnnAssign: "annotated assignment",
}


def _span(node: ast.AST) -> Span:
    return Span(getattr(node, "lineno", 0), getattr(node, "col_offset", -1) + 1)


def _unsupported(node: ast.AST, what: str) -> InterpreterError:
    return InterpreterError("Unsupported", what, _span(node))


class _SubsetChecker(ast.NodeVisitor):
    def __init__(self) -> None:
        self.loop_depth = 0
        self.func_depth = 0

    def generic_visit(self, node: ast.AST) -> None:
        if not isinstance(node, _ALLOWED):
            raise _unsupported(node, _CONSTRUCT_NAMES.get(type(node), type(node).__name__))
        super().generic_visit(node)

    def visit_FunctionDef(self, node: ast.FunctionDef) -> None:
        a = node.args
        if node.decorator_list:
            raise _unsupported(node, "decorator")
        if a.vararg or a.kwarg or a.kwonlyargs or a.posonlyargs:
            raise _unsupported(node, "variadic or keyword-only parameters")
        if node.returns or any(p.annotation for p in a.args):
            raise _unsupported(node, "annotation")
        saved = self.loop_depth
        self.loop_depth = 0
        self.func_depth += 1
        self.generic_visit(node)
        self.func_depth -= 1
        self.loop_depth = saved

    def _loop(self, node: ast.For | ast.While) -> None:
        self.loop_depth += 1
        for stmt in node.body:
            self.visit(stmt)
        self.loop_depth -= 1
        for stmt in node.orelse:
            self.visit(stmt)
        if isinstance(node, ast.For):
            self._target(node.target)
            self.visit(node.iter)
        else:
            self.visit(node.test)

    visit_For = _loop
    visit_While = _loop

    def visit_Break(self, node: ast.Break) -> None:
        if not self.loop_depth:
            raise InterpreterError("Syntax", "'break' outside loop", _span(node))

    def visit_Continue(self, node: ast.Continue) -> None:
        if not self.loop_depth:
            raise InterpreterError("Syntax", "'continue' not properly in loop", _span(node))

    def visit_Return(self, node: ast.Return) -> None:
        if not self.func_depth:
            raise InterpreterError("Syntax", "'return' outside function", _span(node))
        self.generic_visit(node)

    def _target(self, t: ast.expr) -> None:
        if isinstance(t, (ast.Tuple, ast.List)):
            for elt in t.elts:
                self._target(elt)
        elif isinstance(t, ast.Attribute):
            raise _unsupported(t, "attribute assignment")
        else:
            self.visit(t)

    def visit_Assign(self, node: ast.Assign) -> None:
        for t in node.targets:
            self._target(t)
        self.visit(node.value)

    def visit_AugAssign(self, node: ast.AugAssign) -> None:
        if not isinstance(node.target, (ast.Name, ast.Subscript)):
            raise _unsupported(node, "augmented assignment target")
        self.generic_visit(node)

    def visit_comprehension(self, node: ast.comprehension) -> None:
        if node.is_async:
            raise _unsupported(node, "async")
        self._target(node.target)
        self.visit(node.iter)
        for cond in node.ifs:
            self.visit(cond)


def parse(source: SourceProgram | str) -> ast.Module:
    """Parse program text into a syntax tree restricted to the supported subset."""
    text = source.text if isinstance(source, SourceProgram) else source
    if not text.strip():
        raise InterpreterError("Syntax", "empty program", Span(1, 1))
    try:
        tree = ast.parse(text, mode="exec")
    except SyntaxError as e:
        raise InterpreterError("Syntax", e.msg, Span(e.lineno or 0, e.offset or 0)) from None
    except ValueError as e:  # e.g. null bytes
        raise InterpreterError("Syntax", str(e), Span(0, 0)) from None
    _SubsetChecker().visit(tree)
    return tree


# ---------------------------------------------------------------------------
# runtime values


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class _Return(Exception):
    def __init__(self, value: Any):
        self.value = value


def _assigned_names(body: Iterable[ast.stmt]) -> frozenset[str]:
    names: set[str] = set()

    def walk(node: ast.AST) -> None:
        if isinstance(node, ast.FunctionDef):
            names.add(node.name)
            return
        if isinstance(node, ast.ListComp):
            return
        if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            names.add(node.id)
        for child in ast.iter_child_nodes(node):
            walk(child)

    for stmt in body:
        walk(stmt)
    return frozenset(names)


class Frame:
    __slots__ = ("vars", "parent", "local_names")

    def __init__(self, parent: Frame | None, local_names: frozenset[str] = frozenset()):
        self.vars: dict[str, Any] = {}
        self.parent = parent
        self.local_names = local_names


@dataclass(eq=False)
class UserFunction:
    name: str
    node: ast.FunctionDef
    defaults: tuple[Any, ...]
    closure: Frame
    local_names: frozenset[str]

    def __repr__(self) -> str:
        return f"<function {self.name}>"


@dataclass(eq=False)
class BoundMethod:
    obj: Any
    name: str

    def __repr__(self) -> str:
        return f"<method {type(self.obj).__name__}.{self.name}>"


@dataclass(eq=False)
class Builtin:
    name: str
    fn: Callable[..., Any]

    def __repr__(self) -> str:
        return f"<built-in function {self.name}>"


_METHODS: dict[type, frozenset[str]] = {
    list: frozenset({"append", "extend", "count", "index"}),
    str: frozenset({"lower", "upper", "strip", "split", "join", "startswith",
                    "endswith", "replace", "format"}),
    dict: frozenset({"get", "keys", "values", "items"}),
}

_BINOPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv, ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}
_UNOPS: dict[type, Callable[[Any], Any]] = {
    ast.UAdd: operator.pos, ast.USub: operator.neg, ast.Not: operator.not_,
}
_CMPOPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Eq: operator.eq, ast.NotEq: operator.ne, ast.Lt: operator.lt, ast.LtE: operator.le,
    ast.Gt: operator.gt, ast.GtE: operator.ge, ast.Is: operator.is_, ast.IsNot: operator.is_not,
    ast.In: lambda a, b: a in b, ast.NotIn: lambda a, b: a not in b,
}
_UNSUPPORTED_BINOPS = {ast.MatMult: "@", ast.BitAnd: "&", ast.BitOr: "|", ast.BitXor: "^",
                       ast.LShift: "<<", ast.RShift: ">>"}

_PY_ERRORS: tuple[tuple[type[BaseException], str], ...] = (
    (ZeroDivisionError, "ZeroDivision"),
    (OverflowError, "Value"),
    (TypeError, "Type"),
    (IndexError, "Index"),
    (KeyError, "Key"),
    (AttributeError, "Attribute"),
    (ValueError, "Value"),
)


def _translate(exc: BaseException, node: ast.AST) -> InterpreterError:
    for cls, kind in _PY_ERRORS:
        if isinstance(exc, cls):
            msg = str(exc) if not isinstance(exc, KeyError) else repr(exc.args[0]) if exc.args else ""
            return InterpreterError(kind, msg, _span(node))
    raise exc


def check_value(value: Any, node: ast.AST | None = None) -> Any:
    """Enforce the 64-bit integer range and reject values outside the subset."""
    if type(value) is int and not INT_MIN <= value <= INT_MAX:
        raise InterpreterError("Value", "integer overflow", _span(node) if node else None)
    if isinstance(value, complex):
        raise InterpreterError("Value", "math domain error", _span(node) if node else None)
    if isinstance(value, (str, list, tuple)) and len(value) > MAX_SEQUENCE_LEN:
        raise InterpreterError("Value", "sequence too large", _span(node) if node else None)
    return value


def _binop(op: ast.operator, left: Any, right: Any, node: ast.AST) -> Any:
    if type(op) in _UNSUPPORTED_BINOPS:
        raise _unsupported(node, f"operator {_UNSUPPORTED_BINOPS[type(op)]}")
    if isinstance(op, ast.Mult):
        # guard repetition before materialising it
        for seq, n in ((left, right), (right, left)):
            if isinstance(seq, (str, list, tuple)) and isinstance(n, int) and n * len(seq) > MAX_SEQUENCE_LEN:
                raise InterpreterError("Value", "sequence too large", _span(node))
    if isinstance(op, ast.Pow) and type(left) is int and type(right) is int:
        if abs(left) > 1 and right > 63:
            raise InterpreterError("Value", "integer overflow", _span(node))
    try:
        result = _BINOPS[type(op)](left, right)
    except InterpreterError:
        raise
    except Exception as e:
        raise _translate(e, node) from None
    return check_value(result, node)


# ---------------------------------------------------------------------------
# interpreter


class Interpreter:
    """Evaluate a parsed program against a skill host under a step budget.

    ``skills`` is any object exposing the eight skill methods; each executed
    statement or expression node costs one step.
    """

    def __init__(self, skills: Any, budget: int = DEFAULT_BUDGET):
        if budget <= 0:
            raise ValueError("budget must be positive")
        self.skills = skills
        self.budget = budget
        self.steps = 0
        self.depth = 0
        self.module = Frame(None)
        self.call_site: ast.AST = ast.Pass()
        self.builtins = self._make_builtins()

    # -- bookkeeping
    def tick(self, node: ast.AST) -> None:
        self.steps += 1
        if self.steps > self.budget:
            self.steps = self.budget
            raise InterpreterError("Timeout", f"step budget of {self.budget} exhausted", _span(node))

    def consume(self, iterable: Any, node: ast.AST) -> Iterator[Any]:
        try:
            it = iter(iterable)
        except TypeError as e:
            raise _translate(e, node) from None
        for item in it:
            self.tick(node)
            yield item

    # -- entry points
    def run(self, tree: ast.Module) -> Completed:
        try:
            self.exec_block(tree.body, self.module)
            entry = _entry_point(tree)
            if entry is not None:
                fn = self.module.vars.get(entry.name)
                if isinstance(fn, UserFunction):
                    self.call(fn, [], {}, entry)
        except (_Break, _Continue, _Return):  # pragma: no cover - rejected by parse
            raise InterpreterError("Syntax", "control flow outside its block")
        except RecursionError:
            raise InterpreterError("Value", "maximum recursion depth exceeded") from None
        return Completed(self.steps)

    # -- statements
    def exec_block(self, body: Sequence[ast.stmt], frame: Frame) -> None:
        for stmt in body:
            self.exec_stmt(stmt, frame)

    def exec_stmt(self, node: ast.stmt, frame: Frame) -> None:
        self.tick(node)
        if isinstance(node, ast.Expr):
            self.eval(node.value, frame)
        elif isinstance(node, ast.Assign):
            value = self.eval(node.value, frame)
            for target in node.targets:
                self.assign(target, value, frame)
        elif isinstance(node, ast.AugAssign):
            self.aug_assign(node, frame)
        elif isinstance(node, ast.If):
            if self.truth(self.eval(node.test, frame), node.test):
                self.exec_block(node.body, frame)
            else:
                self.exec_block(node.orelse, frame)
        elif isinstance(node, ast.For):
            iterable = self.eval(node.iter, frame)
            try:
                it = iter(iterable)
            except TypeError as e:
                raise _translate(e, node.iter) from None
            for item in it:
                self.assign(node.target, item, frame)
                try:
                    self.exec_block(node.body, frame)
                except _Break:
                    break
                except _Continue:
                    continue
            else:
                self.exec_block(node.orelse, frame)
        elif isinstance(node, ast.While):
            while self.truth(self.eval(node.test, frame), node.test):
                try:
                    self.exec_block(node.body, frame)
                except _Break:
                    break
                except _Continue:
                    continue
            else:
                self.exec_block(node.orelse, frame)
        elif isinstance(node, ast.FunctionDef):
            defaults = tuple(self.eval(d, frame) for d in node.args.defaults)
            params = {a.arg for a in node.args.args}
            frame.vars[node.name] = UserFunction(
                node.name, node, defaults, frame, _assigned_names(node.body) | params
            )
        elif isinstance(node, ast.Return):
            raise _Return(None if node.value is None else self.eval(node.value, frame))
        elif isinstance(node, ast.Break):
            raise _Break()
        elif isinstance(node, ast.Continue):
            raise _Continue()
        elif isinstance(node, ast.Pass):
            pass
        else:  # pragma: no cover - parse() guarantees the subset
            raise _unsupported(node, type(node).__name__)

    def truth(self, value: Any, node: ast.AST) -> bool:
        try:
            return bool(value)
        except Exception as e:  # pragma: no cover - no subset value raises here
            raise _translate(e, node) from None

    def assign(self, target: ast.expr, value: Any, frame: Frame) -> None:
        if isinstance(target, ast.Name):
            frame.vars[target.id] = value
        elif isinstance(target, (ast.Tuple, ast.List)):
            try:
                items = list(value)
            except TypeError as e:
                raise _translate(e, target) from None
            if len(items) != len(target.elts):
                raise InterpreterError(
                    "Value",
                    f"expected {len(target.elts)} values to unpack, got {len(items)}",
                    _span(target),
                )
            for elt, item in zip(target.elts, items):
                self.assign(elt, item, frame)
        elif isinstance(target, ast.Subscript):
            container = self.eval(target.value, frame)
            key = self.eval_index(target.slice, frame)
            if not isinstance(container, (list, dict)):
                raise InterpreterError(
                    "Type", f"'{type(container).__name__}' object does not support item assignment",
                    _span(target),
                )
            try:
                container[key] = value
            except Exception as e:
                raise _translate(e, target) from None
        else:  # pragma: no cover
            raise _unsupported(target, "assignment target")

    def aug_assign(self, node: ast.AugAssign, frame: Frame) -> None:
        target = node.target
        if isinstance(target, ast.Name):
            current = self.lookup(target.id, frame, target)
            frame.vars[target.id] = _binop(node.op, current, self.eval(node.value, frame), node)
        else:
            assert isinstance(target, ast.Subscript)
            container = self.eval(target.value, frame)
            key = self.eval_index(target.slice, frame)
            try:
                current = container[key]
            except Exception as e:
                raise _translate(e, target) from None
            result = _binop(node.op, current, self.eval(node.value, frame), node)
            try:
                container[key] = result
            except Exception as e:
                raise _translate(e, target) from None

    # -- names
    def lookup(self, name: str, frame: Frame, node: ast.AST) -> Any:
        f: Frame | None = frame
        while f is not None:
            if name in f.vars:
                return f.vars[name]
            if name in f.local_names:
                raise InterpreterError(
                    "Name", f"local variable '{name}' referenced before assignment", _span(node)
                )
            f = f.parent
        if name in self.builtins:
            return self.builtins[name]
        if name in SKILL_NAMES:
            return Builtin(name, getattr(self.skills, name))
        raise InterpreterError("Name", f"name '{name}' is not defined", _span(node))

    # -- expressions
    def eval(self, node: ast.expr, frame: Frame) -> Any:
        self.tick(node)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (bytes, complex)) or node.value is Ellipsis:
                raise _unsupported(node, f"{type(node.value).__name__} literal")
            return check_value(node.value, node)
        if isinstance(node, ast.Name):
            return self.lookup(node.id, frame, node)
        if isinstance(node, ast.BinOp):
            left = self.eval(node.left, frame)
            right = self.eval(node.right, frame)
            return _binop(node.op, left, right, node)
        if isinstance(node, ast.UnaryOp):
            operand = self.eval(node.operand, frame)
            if isinstance(node.op, ast.Invert):
                raise _unsupported(node, "operator ~")
            try:
                return check_value(_UNOPS[type(node.op)](operand), node)
            except InterpreterError:
                raise
            except Exception as e:
                raise _translate(e, node) from None
        if isinstance(node, ast.BoolOp):
            is_and = isinstance(node.op, ast.And)
            value: Any = None
            for operand in node.values:
                value = self.eval(operand, frame)
                if self.truth(value, operand) != is_and:
                    return value
            return value
        if isinstance(node, ast.Compare):
            left = self.eval(node.left, frame)
            for op, comp in zip(node.ops, node.comparators):
                right = self.eval(comp, frame)
                try:
                    ok = _CMPOPS[type(op)](left, right)
                except Exception as e:
                    raise _translate(e, node) from None
                if not ok:
                    return False
                left = right
            return True
        if isinstance(node, ast.IfExp):
            if self.truth(self.eval(node.test, frame), node.test):
                return self.eval(node.body, frame)
            return self.eval(node.orelse, frame)
        if isinstance(node, ast.Call):
            func = self.eval(node.func, frame)
            args = [self.eval(a, frame) for a in node.args]
            kwargs = {kw.arg: self.eval(kw.value, frame) for kw in node.keywords if kw.arg}
            if any(kw.arg is None for kw in node.keywords):
                raise _unsupported(node, "keyword unpacking")
            return self.call(func, args, kwargs, node)
        if isinstance(node, ast.Attribute):
            obj = self.eval(node.value, frame)
            allowed = _METHODS.get(type(obj), frozenset())
            if node.attr not in allowed:
                raise InterpreterError(
                    "Attribute",
                    f"'{type(obj).__name__}' object has no attribute '{node.attr}'",
                    _span(node),
                )
            return BoundMethod(obj, node.attr)
        if isinstance(node, ast.Subscript):
            container = self.eval(node.value, frame)
            key = self.eval_index(node.slice, frame)
            try:
                return container[key]
            except Exception as e:
                raise _translate(e, node) from None
        if isinstance(node, ast.List):
            return [self.eval(e, frame) for e in node.elts]
        if isinstance(node, ast.Tuple):
            return tuple(self.eval(e, frame) for e in node.elts)
        if isinstance(node, ast.Dict):
            if any(k is None for k in node.keys):
                raise _unsupported(node, "dict unpacking")
            out = {}
            for k, v in zip(node.keys, node.values):
                key = self.eval(k, frame)  # type: ignore[arg-type]
                try:
                    out[key] = self.eval(v, frame)
                except TypeError as e:
                    raise _translate(e, node) from None
            return out
        if isinstance(node, ast.JoinedStr):
            parts = []
            for part in node.values:
                if isinstance(part, ast.Constant):
                    parts.append(part.value)
                else:
                    parts.append(self.eval(part, frame))
            return check_value("".join(parts), node)
        if isinstance(node, ast.FormattedValue):
            value = self.eval(node.value, frame)
            spec = self.eval(node.format_spec, frame) if node.format_spec else ""
            try:
                if node.conversion == ord("r"):
                    value = repr(value)
                elif node.conversion == ord("s"):
                    value = str(value)
                elif node.conversion == ord("a"):
                    value = ascii(value)
                return format(value, spec)
            except Exception as e:
                raise _translate(e, node) from None
        if isinstance(node, ast.ListComp):
            return self.list_comp(node, frame)
        raise _unsupported(node, type(node).__name__)  # pragma: no cover

    def eval_index(self, node: ast.expr, frame: Frame) -> Any:
        if isinstance(node, ast.Slice):
            self.tick(node)
            parts = [None if p is None else self.eval(p, frame) for p in (node.lower, node.upper, node.step)]
            return slice(*parts)
        return self.eval(node, frame)

    def list_comp(self, node: ast.ListComp, frame: Frame) -> list[Any]:
        names: set[str] = set()
        for gen in node.generators:
            for n in ast.walk(gen.target):
                if isinstance(n, ast.Name):
                    names.add(n.id)
        scope = Frame(frame, frozenset(names))
        out: list[Any] = []

        def loop(i: int) -> None:
            if i == len(node.generators):
                out.append(self.eval(node.elt, scope))
                if len(out) > MAX_SEQUENCE_LEN:
                    raise InterpreterError("Value", "sequence too large", _span(node))
                return
            gen = node.generators[i]
            # the first iterable is evaluated in the enclosing scope
            iterable = self.eval(gen.iter, frame if i == 0 else scope)
            for item in self.consume(iterable, gen.iter):
                self.assign(gen.target, item, scope)
                if all(self.truth(self.eval(c, scope), c) for c in gen.ifs):
                    loop(i + 1)

        loop(0)
        return out

    # -- calls
    def call(self, func: Any, args: list[Any], kwargs: dict[str, Any], node: ast.AST) -> Any:
        if isinstance(func, UserFunction):
            return self.call_user(func, args, kwargs, node)
        if isinstance(func, Builtin):
            self.call_site = node
            try:
                return check_value(func.fn(*args, **kwargs), node)
            except InterpreterError as e:
                if e.span is None:
                    e.span = _span(node)
                raise
            except Exception as e:
                raise _translate(e, node) from None
        if isinstance(func, BoundMethod):
            return check_value(self.call_method(func, args, kwargs, node), node)
        raise InterpreterError("Type", f"'{type(func).__name__}' object is not callable", _span(node))

    def call_user(self, fn: UserFunction, args: list[Any], kwargs: dict[str, Any], node: ast.AST) -> Any:
        params = [a.arg for a in fn.node.args.args]
        if len(args) > len(params):
            raise InterpreterError(
                "Type",
                f"{fn.name}() takes {len(params)} positional arguments but {len(args)} were given",
                _span(node),
            )
        bound: dict[str, Any] = dict(zip(params, args))
        for k, v in kwargs.items():
            if k not in params:
                raise InterpreterError("Type", f"{fn.name}() got an unexpected keyword argument '{k}'", _span(node))
            if k in bound:
                raise InterpreterError("Type", f"{fn.name}() got multiple values for argument '{k}'", _span(node))
            bound[k] = v
        first_default = len(params) - len(fn.defaults)
        for i, p in enumerate(params):
            if p not in bound:
                if i >= first_default:
                    bound[p] = fn.defaults[i - first_default]
                else:
                    raise InterpreterError("Type", f"{fn.name}() missing required argument '{p}'", _span(node))
        if self.depth >= MAX_CALL_DEPTH:
            raise InterpreterError("Value", "maximum recursion depth exceeded", _span(node))
        frame = Frame(fn.closure, fn.local_names)
        frame.vars.update(bound)
        self.depth += 1
        try:
            self.exec_block(fn.node.body, frame)
        except _Return as r:
            return r.value
        finally:
            self.depth -= 1
        return None

    def call_method(self, m: BoundMethod, args: list[Any], kwargs: dict[str, Any], node: ast.AST) -> Any:
        obj, name = m.obj, m.name
        try:
            if name == "extend":
                items = list(self.consume(args[0], node)) if len(args) == 1 and not kwargs else None
                if items is None:
                    raise TypeError(f"extend() takes exactly one argument ({len(args)} given)")
                if len(obj) + len(items) > MAX_SEQUENCE_LEN:
                    raise InterpreterError("Value", "sequence too large", _span(node))
                obj.extend(items)
                return None
            if name == "join":
                if len(args) != 1 or kwargs:
                    raise TypeError(f"join() takes exactly one argument ({len(args)} given)")
                return obj.join(list(self.consume(args[0], node)))
            if name == "format":
                for _, field, _, _ in string.Formatter().parse(obj):
                    if field and any(c in field for c in ".["):
                        raise _unsupported(node, "attribute or index lookup in format string")
            if name == "append" and len(obj) >= MAX_SEQUENCE_LEN:
                raise InterpreterError("Value", "sequence too large", _span(node))
            result = getattr(obj, name)(*args, **kwargs)
        except InterpreterError:
            raise
        except Exception as e:
            raise _translate(e, node) from None
        if name in ("keys", "values", "items"):
            return list(result)
        return result

    def _make_builtins(self) -> dict[str, Builtin]:
        def consumed(it: Any) -> list[Any]:
            return list(self.consume(it, self.call_site))

        def _sum(iterable: Any, start: Any = 0) -> Any:
            total = start
            for item in consumed(iterable):
                total = check_value(total + item)
            return total

        def _sorted(iterable: Any, key: Any = None, reverse: bool = False) -> list[Any]:
            return sorted(consumed(iterable), key=self._host_callable(key), reverse=reverse)

        def _minmax(pick: Callable[..., Any]) -> Callable[..., Any]:
            def f(*args: Any, key: Any = None, **kw: Any) -> Any:
                if kw.keys() - {"default"}:
                    raise TypeError(f"{pick.__name__}() got an unexpected keyword argument")
                items = consumed(args[0]) if len(args) == 1 else list(args)
                if not items:
                    if "default" in kw:
                        return kw["default"]
                    raise ValueError(f"{pick.__name__}() arg is an empty sequence")
                return pick(items, key=self._host_callable(key))
            return f

        def _enumerate(iterable: Any, start: int = 0) -> list[tuple[int, Any]]:
            return list(enumerate(consumed(iterable), start))

        def _range(*args: Any) -> range:
            if not all(type(a) is int for a in args):
                raise TypeError("range() arguments must be integers")
            return range(*args)

        def _str(value: Any = "") -> str:
            return str(value)

        table = {
            "len": len, "range": _range, "str": _str, "int": int, "float": float,
            "min": _minmax(min), "max": _minmax(max), "sum": _sum, "sorted": _sorted,
            "enumerate": _enumerate,
        }
        return {k: Builtin(k, v) for k, v in table.items()}

    def _host_callable(self, fn: Any) -> Callable[[Any], Any] | None:
        if fn is None:
            return None
        node = ast.Pass()
        return lambda x: self.call(fn, [x], {}, node)


def _entry_point(tree: ast.Module) -> ast.FunctionDef | None:
    """The single zero-argument function to auto-invoke, if the convention applies."""
    defs = [s for s in tree.body if isinstance(s, ast.FunctionDef)]
    if len(defs) != 1 or defs[0].args.args:
        return None
    fn = defs[0]
    for stmt in tree.body:
        if stmt is fn:
            continue
        for n in ast.walk(stmt):
            if isinstance(n, ast.Call) and isinstance(n.func, ast.Name):
                if n.func.id in SKILL_NAMES or n.func.id == fn.name:
                    return None
    return fn


def execute(tree: ast.Module, skills: Any, budget: int = DEFAULT_BUDGET) -> Completed:
    """Run a parsed program; raises InterpreterError or whatever the skill host raises."""
    return Interpreter(skills, budget).run(tree)
