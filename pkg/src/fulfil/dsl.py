"""The restricted snippet language: parser, sandbox checks, interpreter.

Snippets look like a tiny slice of Python — assignments, ``if``/``else``,
``for`` over lists, f-string interpolation, keyword-argument calls — but
the language is closed: the only reachable effects are the whitelisted
host calls (``retrieve``, ``logger.log``, ``model.*``, ``plan.update``,
the three ``add_constraint`` hosts, and ``len``).  There are no imports,
no attribute access outside the whitelist, no user functions, and no way
to name anything that was never assigned.  Execution is metered by a step
budget so every run terminates.

The full grammar is published in ``docs/dsl-grammar.md``.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from typing import Optional, Sequence, Union

from .model import (
    DOCK_DATE,
    SHIPPING_METHOD,
    SUPPLY_PAIRING,
    Constraint,
    InvalidInstanceError,
    PatternError,
    PlanningInstance,
)
from .query import (
    QueryEvalError,
    QuerySyntaxError,
    TableStore,
    retrieve as run_query,
)
from .solver import CommitError, ModelState, PlanStore, StateError

DEFAULT_STEP_BUDGET = 10_000

OK = "ok"
PARSE_ERROR = "parse_error"
RUNTIME_ERROR = "runtime_error"
BUDGET_EXCEEDED = "budget_exceeded"

_KEYWORDS = {"if", "else", "for", "in"}

# host roots reachable via attribute access, with their legal attributes
HOST_ATTRS = {
    "logger": {"log"},
    "model": {"optimize", "reset", "feasible", "objVal"},
    "plan": {"update"},
    "demand": {"add_constraint"},
    "supply": {"add_constraint"},
    "shipping": {"add_constraint"},
}
# attributes that are callable (the rest are plain reads)
HOST_METHODS = {
    ("logger", "log"),
    ("model", "optimize"),
    ("model", "reset"),
    ("plan", "update"),
    ("demand", "add_constraint"),
    ("supply", "add_constraint"),
    ("shipping", "add_constraint"),
}
# bare callable hosts
HOST_FUNCS = {"retrieve", "len"}

_RESERVED = set(HOST_ATTRS) | HOST_FUNCS | _KEYWORDS


class DslError(Exception):
    pass


class DslParseError(DslError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class DslRuntimeError(DslError):
    pass


class BudgetExceeded(DslError):
    pass


# ---------------------------------------------------------------------------
# lexer

@dataclass(frozen=True)
class _Tok:
    kind: str  # NAME NUMBER STRING OP NEWLINE INDENT DEDENT END
    text: str
    line: int
    col: int
    value: str = ""  # decoded body for STRING tokens
    fstring: bool = False


_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t"}
_OPS = ("==", "(", ")", "[", "]", ",", "=", ".", ":", "+", "-", "*", "/")


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    indents = [0]
    depth = 0
    line = 1
    col = 1
    i = 0
    n = len(source)
    at_line_start = True
    line_had_tokens = False

    def error(message: str):
        raise DslParseError(message, line, col)

    def emit(kind, text, value="", fstring=False, at=None):
        tline, tcol = at if at else (line, col)
        toks.append(_Tok(kind, text, tline, tcol, value, fstring))

    def end_line():
        nonlocal line_had_tokens
        if line_had_tokens and depth == 0:
            emit("NEWLINE", "\n")
        line_had_tokens = False

    def read_string(fstring: bool):
        nonlocal i, line, col
        start = (line, col)
        quote = source[i]
        if source[i : i + 3] in ("'''", '"""'):
            closer = source[i] * 3
            i += 3
            col += 3
        else:
            closer = quote
            i += 1
            col += 1
        body = []
        while i < n:
            if source.startswith(closer, i):
                i += len(closer)
                col += len(closer)
                emit("STRING", closer, "".join(body), fstring, at=start)
                return
            ch = source[i]
            if ch == "\n":
                if len(closer) == 1:
                    error("unterminated string literal")
                body.append(ch)
                i += 1
                line += 1
                col = 1
                continue
            if ch == "\\" and i + 1 < n:
                nxt = source[i + 1]
                if nxt in _ESCAPES:
                    body.append(_ESCAPES[nxt])
                    i += 2
                    col += 2
                    continue
            body.append(ch)
            i += 1
            col += 1
        error("unterminated string literal")

    while i < n:
        if at_line_start and depth == 0:
            # measure indentation; skip blank and comment-only lines
            j = i
            width = 0
            while j < n and source[j] == " ":
                j += 1
                width += 1
            if j < n and source[j] == "\t":
                line = line
                col = width + 1
                error("tabs are not allowed in indentation")
            if j >= n or source[j] == "\n" or source[j] == "#":
                # nothing on this line
                while j < n and source[j] != "\n":
                    j += 1
                if j < n:
                    j += 1
                    line += 1
                i = j
                col = 1
                continue
            col = width + 1
            if width > indents[-1]:
                indents.append(width)
                emit("INDENT", "")
            else:
                while width < indents[-1]:
                    indents.pop()
                    emit("DEDENT", "")
                if width != indents[-1]:
                    error("unindent does not match any outer level")
            i = j
            at_line_start = False
            continue

        # inside brackets a physical line start is not an indentation point
        at_line_start = False
        ch = source[i]
        if ch == "\n":
            end_line()
            i += 1
            line += 1
            col = 1
            at_line_start = True
            continue
        if ch in " \t":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch in "'\"":
            read_string(fstring=False)
            line_had_tokens = True
            continue
        if ch in "fF" and i + 1 < n and source[i + 1] in "'\"":
            i += 1
            col += 1
            read_string(fstring=True)
            line_had_tokens = True
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            emit("NAME", source[i:j])
            col += j - i
            i = j
            line_had_tokens = True
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            emit("NUMBER", source[i:j])
            col += j - i
            i = j
            line_had_tokens = True
            continue
        for op in _OPS:
            if source.startswith(op, i):
                if op == "==":
                    error("comparison operators are not part of this language")
                emit("OP", op)
                if op in "([":
                    depth += 1
                elif op in ")]":
                    depth = max(0, depth - 1)
                i += len(op)
                col += len(op)
                line_had_tokens = True
                break
        else:
            error(f"unexpected character {ch!r}")

    end_line()
    while len(indents) > 1:
        indents.pop()
        emit("DEDENT", "")
    emit("END", "")
    return toks


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Name:
    id: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, str]


@dataclass(frozen=True)
class FString:
    # literal text chunks interleaved with expression holes
    parts: tuple


@dataclass(frozen=True)
class Attribute:
    obj: str
    attr: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Index:
    obj: object
    index: object


@dataclass(frozen=True)
class Call:
    func: Union[Name, Attribute]
    args: tuple = ()
    kwargs: tuple = ()  # of (name, expr)


@dataclass(frozen=True)
class BinOp:
    left: object
    op: str
    right: object


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: object


@dataclass(frozen=True)
class Assign:
    target: str
    value: object
    line: int = 0


@dataclass(frozen=True)
class ExprStmt:
    value: object


@dataclass(frozen=True)
class If:
    test: object
    body: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class For:
    var: str
    iterable: object
    body: tuple = ()


@dataclass(frozen=True)
class Script:
    statements: tuple


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens: list[_Tok]):
        self.toks = tokens
        self.pos = 0

    def _peek(self) -> _Tok:
        return self.toks[self.pos]

    def _next(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def _fail(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self._peek()
        raise DslParseError(message, tok.line, tok.col)

    def _expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self._peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or tok.kind
            self._fail(f"expected {want!r}, got {got!r}")
        return self._next()

    def parse(self) -> Script:
        statements = []
        while self._peek().kind != "END":
            statements.append(self._statement())
        return Script(tuple(statements))

    def _block(self) -> tuple:
        self._expect("OP", ":")
        self._expect("NEWLINE")
        self._expect("INDENT")
        body = []
        while self._peek().kind not in ("DEDENT", "END"):
            body.append(self._statement())
        self._expect("DEDENT")
        if not body:
            self._fail("expected an indented block")
        return tuple(body)

    def _statement(self):
        tok = self._peek()
        if tok.kind == "NAME" and tok.text == "if":
            self._next()
            test = self._expression()
            body = self._block()
            orelse: tuple = ()
            nxt = self._peek()
            if nxt.kind == "NAME" and nxt.text == "else":
                self._next()
                orelse = self._block()
            return If(test, body, orelse)
        if tok.kind == "NAME" and tok.text == "for":
            self._next()
            var = self._expect("NAME")
            if var.text in _RESERVED:
                self._fail(f"cannot use reserved name {var.text!r} here", var)
            self._expect("NAME", "in")
            iterable = self._expression()
            body = self._block()
            return For(var.text, iterable, body)
        # assignment or bare expression
        if (
            tok.kind == "NAME"
            and self.toks[self.pos + 1].kind == "OP"
            and self.toks[self.pos + 1].text == "="
        ):
            name = self._next()
            if name.text in _RESERVED:
                self._fail(f"cannot assign to reserved name {name.text!r}", name)
            self._next()  # '='
            value = self._expression()
            stmt = Assign(name.text, value, name.line)
        else:
            stmt = ExprStmt(self._expression())
        if self._peek().kind == "NEWLINE":
            self._next()
        elif self._peek().kind != "END":
            self._fail("expected end of statement")
        return stmt

    # expression grammar: arithmetic over postfix over primaries
    def _expression(self):
        node = self._term()
        while self._peek().kind == "OP" and self._peek().text in ("+", "-"):
            op = self._next().text
            node = BinOp(node, op, self._term())
        return node

    def _term(self):
        node = self._unary()
        while self._peek().kind == "OP" and self._peek().text in ("*", "/"):
            op = self._next().text
            node = BinOp(node, op, self._unary())
        return node

    def _unary(self):
        tok = self._peek()
        if tok.kind == "OP" and tok.text == "-":
            self._next()
            return UnaryOp("-", self._unary())
        return self._postfix()

    def _postfix(self):
        node = self._primary()
        while True:
            tok = self._peek()
            if tok.kind == "OP" and tok.text == ".":
                self._next()
                attr = self._expect("NAME")
                if not isinstance(node, Name):
                    self._fail("attribute access is only allowed on host names", attr)
                if node.id not in HOST_ATTRS:
                    self._fail(f"unknown host {node.id!r}", attr)
                if attr.text not in HOST_ATTRS[node.id]:
                    self._fail(
                        f"host {node.id!r} has no attribute {attr.text!r}", attr
                    )
                node = Attribute(node.id, attr.text, attr.line, attr.col)
            elif tok.kind == "OP" and tok.text == "(":
                self._next()
                args, kwargs = self._arguments()
                node = self._make_call(node, args, kwargs, tok)
            elif tok.kind == "OP" and tok.text == "[":
                self._next()
                index = self._expression()
                self._expect("OP", "]")
                node = Index(node, index)
            else:
                return node

    def _make_call(self, func, args, kwargs, tok):
        if isinstance(func, Name):
            if func.id not in HOST_FUNCS:
                self._fail(f"{func.id!r} is not callable", tok)
        elif isinstance(func, Attribute):
            if (func.obj, func.attr) not in HOST_METHODS:
                self._fail(f"{func.obj}.{func.attr} is not callable", tok)
        else:
            self._fail("only host functions can be called", tok)
        return Call(func, tuple(args), tuple(kwargs))

    def _arguments(self):
        args = []
        kwargs = []
        while True:
            tok = self._peek()
            if tok.kind == "OP" and tok.text == ")":
                self._next()
                return args, kwargs
            if (
                tok.kind == "NAME"
                and self.toks[self.pos + 1].kind == "OP"
                and self.toks[self.pos + 1].text == "="
            ):
                key = self._next().text
                self._next()
                kwargs.append((key, self._expression()))
            else:
                if kwargs:
                    self._fail("positional argument after keyword argument")
                args.append(self._expression())
            tok = self._peek()
            if tok.kind == "OP" and tok.text == ",":
                self._next()
            elif not (tok.kind == "OP" and tok.text == ")"):
                self._fail("expected ',' or ')' in argument list")

    def _primary(self):
        tok = self._peek()
        if tok.kind == "NAME":
            if tok.text in _KEYWORDS:
                self._fail(f"unexpected keyword {tok.text!r}")
            self._next()
            return Name(tok.text, tok.line, tok.col)
        if tok.kind == "NUMBER":
            self._next()
            text = tok.text
            return Literal(float(text) if "." in text else int(text))
        if tok.kind == "STRING":
            return self._string_sequence()
        if tok.kind == "OP" and tok.text == "(":
            self._next()
            node = self._expression()
            self._expect("OP", ")")
            return node
        self._fail(f"unexpected {tok.text or tok.kind!r}")

    def _string_sequence(self):
        # adjacent string literals concatenate; an f-string anywhere in the
        # run makes the whole result interpolated
        pieces = []
        any_f = False
        while self._peek().kind == "STRING":
            tok = self._next()
            any_f = any_f or tok.fstring
            pieces.append(tok)
        if not any_f:
            return Literal("".join(tok.value for tok in pieces))
        parts: list = []
        for tok in pieces:
            if tok.fstring:
                parts.extend(_split_fstring(tok.value, tok.line, tok.col))
            else:
                parts.append(tok.value)
        return FString(tuple(_merge_literal_parts(parts)))


def _merge_literal_parts(parts: list) -> list:
    merged: list = []
    for part in parts:
        if isinstance(part, str) and merged and isinstance(merged[-1], str):
            merged[-1] += part
        else:
            merged.append(part)
    return [p for p in merged if not (isinstance(p, str) and p == "")]


def _split_fstring(body: str, line: int, col: int) -> list:
    """Split an f-string body into text chunks and parsed hole expressions."""
    parts: list = []
    buf = []
    i = 0
    n = len(body)
    while i < n:
        ch = body[i]
        if ch == "{":
            if i + 1 < n and body[i + 1] == "{":
                buf.append("{")
                i += 2
                continue
            j = body.find("}", i + 1)
            if j < 0:
                raise DslParseError("unclosed '{' in f-string", line, col)
            hole = body[i + 1 : j]
            if not hole.strip():
                raise DslParseError("empty hole in f-string", line, col)
            if ":" in hole or "!" in hole:
                raise DslParseError(
                    "format specs are not supported in f-string holes", line, col
                )
            parts.append("".join(buf))
            buf = []
            parts.append(_parse_hole(hole, line, col))
            i = j + 1
            continue
        if ch == "}":
            if i + 1 < n and body[i + 1] == "}":
                buf.append("}")
                i += 2
                continue
            raise DslParseError("single '}' in f-string", line, col)
        buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts


def _parse_hole(text: str, line: int, col: int):
    try:
        toks = _tokenize(text)
    except DslParseError as exc:
        raise DslParseError(f"bad f-string hole {text!r}", line, col) from exc
    parser = _Parser(toks)
    expr = parser._expression()
    tok = parser._peek()
    if tok.kind not in ("NEWLINE", "END"):
        raise DslParseError(f"bad f-string hole {text!r}", line, col)
    return expr


def _walk_expressions(node):
    yield node
    if isinstance(node, FString):
        for part in node.parts:
            if not isinstance(part, str):
                yield from _walk_expressions(part)
    elif isinstance(node, Index):
        yield from _walk_expressions(node.obj)
        yield from _walk_expressions(node.index)
    elif isinstance(node, Call):
        for arg in node.args:
            yield from _walk_expressions(arg)
        for _, value in node.kwargs:
            yield from _walk_expressions(value)
    elif isinstance(node, BinOp):
        yield from _walk_expressions(node.left)
        yield from _walk_expressions(node.right)
    elif isinstance(node, UnaryOp):
        yield from _walk_expressions(node.operand)


def _statement_expressions(stmt):
    if isinstance(stmt, Assign):
        yield from _walk_expressions(stmt.value)
    elif isinstance(stmt, ExprStmt):
        yield from _walk_expressions(stmt.value)
    elif isinstance(stmt, If):
        yield from _walk_expressions(stmt.test)
        for sub in stmt.body + stmt.orelse:
            yield from _statement_expressions(sub)
    elif isinstance(stmt, For):
        yield from _walk_expressions(stmt.iterable)
        for sub in stmt.body:
            yield from _statement_expressions(sub)


def _all_statements(statements):
    for stmt in statements:
        yield stmt
        if isinstance(stmt, If):
            yield from _all_statements(stmt.body)
            yield from _all_statements(stmt.orelse)
        elif isinstance(stmt, For):
            yield from _all_statements(stmt.body)


def _check_script(script: Script) -> None:
    """Reject scripts that could ever touch a name outside the sandbox."""
    assigned = set()
    for stmt in _all_statements(script.statements):
        if isinstance(stmt, Assign):
            assigned.add(stmt.target)
        elif isinstance(stmt, For):
            assigned.add(stmt.var)
    for stmt in _all_statements(script.statements):
        for node in _statement_expressions(stmt):
            if isinstance(node, Name):
                if node.id in HOST_ATTRS or node.id in HOST_FUNCS:
                    continue  # legality of the use site is checked by the parser
                if node.id not in assigned:
                    raise DslParseError(
                        f"unknown name {node.id!r}", node.line, node.col
                    )
    # bare host names are only legal as call targets / attribute roots;
    # the parser folds those into Call/Attribute nodes, so any surviving
    # Name node holding a host root is a host used as a value
    for stmt in _all_statements(script.statements):
        for node in _statement_expressions(stmt):
            if isinstance(node, Name) and (
                node.id in HOST_ATTRS or node.id in HOST_FUNCS
            ):
                raise DslParseError(
                    f"{node.id!r} cannot be used as a value", node.line, node.col
                )
            if isinstance(node, Attribute) and (node.obj, node.attr) in HOST_METHODS:
                raise DslParseError(
                    f"{node.obj}.{node.attr} must be called",
                    node.line,
                    node.col,
                )


def parse_script(text: str) -> Script:
    script = _Parser(_tokenize(text)).parse()
    _check_script(script)
    return script


def is_mutating(script: Union[Script, str]) -> bool:
    """True if the script can change model or plan state (vs. read-only)."""
    if isinstance(script, str):
        script = parse_script(script)
    mutating_roots = {"model", "plan", "demand", "supply", "shipping"}
    for stmt in _all_statements(script.statements):
        for node in _statement_expressions(stmt):
            if isinstance(node, Call) and isinstance(node.func, Attribute):
                if node.func.obj in mutating_roots:
                    return True
    return False


# ---------------------------------------------------------------------------
# rendering

def render_value(value) -> str:
    """Canonical text for a runtime value.

    Integers print bare; binary floats keep at least one and at most four
    decimal places; fixed-point decimals drop trailing zeros entirely (a
    whole-number cost prints with no decimal point); null prints "None".
    """
    if value is None:
        return "None"
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Decimal):
        if value == value.to_integral_value():
            return str(value.to_integral_value())
        quantized = value.quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP)
        return format(quantized.normalize(), "f")
    if isinstance(value, float):
        text = f"{value:.4f}".rstrip("0")
        if text.endswith("."):
            text += "0"
        return text
    if isinstance(value, str):
        return value
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, list):
        return "[" + ", ".join(_render_in_list(v) for v in value) + "]"
    raise DslRuntimeError(f"cannot render value of type {type(value).__name__}")


def _render_in_list(value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "\\'") + "'"
    if isinstance(value, list):
        return render_value(value)
    return render_value(value)


# ---------------------------------------------------------------------------
# execution environment

@dataclass
class ExecEnv:
    store: TableStore
    model: ModelState
    plan_store: PlanStore
    step_budget: int = DEFAULT_STEP_BUDGET
    bindings: dict = field(default_factory=dict)
    log: list = field(default_factory=list)
    steps_used: int = 0

    @classmethod
    def for_instance(
        cls,
        instance: PlanningInstance,
        baseline_constraints: Sequence[Constraint] = (),
        step_budget: int = DEFAULT_STEP_BUDGET,
    ) -> "ExecEnv":
        return cls(
            store=TableStore.from_instance(instance),
            model=ModelState(instance, baseline_constraints),
            plan_store=PlanStore(),
            step_budget=step_budget,
        )


@dataclass(frozen=True)
class ExecutionResult:
    status: str
    logs: tuple
    error_detail: Optional[str] = None


# ---------------------------------------------------------------------------
# interpreter

def _truthy(value) -> bool:
    if value is None:
        return False
    if isinstance(value, (list, str)):
        return len(value) > 0
    if isinstance(value, (int, float, Decimal)):
        return value != 0
    return True


def _scalarize(value):
    """Singleton query results collapse to their element in scalar spots."""
    if isinstance(value, list) and len(value) == 1:
        return value[0]
    return value


class _Executor:
    def __init__(self, env: ExecEnv):
        self.env = env

    def _tick(self):
        self.env.steps_used += 1
        if self.env.steps_used > self.env.step_budget:
            raise BudgetExceeded(
                f"step budget of {self.env.step_budget} exhausted"
            )

    def run(self, script: Script) -> None:
        for stmt in script.statements:
            self._exec(stmt)

    def _exec(self, stmt) -> None:
        self._tick()
        if isinstance(stmt, Assign):
            self.env.bindings[stmt.target] = self._eval(stmt.value)
        elif isinstance(stmt, ExprStmt):
            self._eval(stmt.value)
        elif isinstance(stmt, If):
            branch = stmt.body if _truthy(self._eval(stmt.test)) else stmt.orelse
            for sub in branch:
                self._exec(sub)
        elif isinstance(stmt, For):
            iterable = self._eval(stmt.iterable)
            if not isinstance(iterable, list):
                raise DslRuntimeError(
                    f"for-loop requires a list, got {type(iterable).__name__}"
                )
            for item in iterable:
                self.env.bindings[stmt.var] = item
                for sub in stmt.body:
                    self._exec(sub)
        else:  # pragma: no cover - parser emits no other statement kinds
            raise DslRuntimeError(f"unknown statement {stmt!r}")

    def _eval(self, node):
        self._tick()
        if isinstance(node, Literal):
            return node.value
        if isinstance(node, Name):
            if node.id not in self.env.bindings:
                raise DslRuntimeError(f"name {node.id!r} is not bound")
            return self.env.bindings[node.id]
        if isinstance(node, FString):
            chunks = []
            for part in node.parts:
                if isinstance(part, str):
                    chunks.append(part)
                else:
                    chunks.append(render_value(_scalarize(self._eval(part))))
            return "".join(chunks)
        if isinstance(node, Attribute):
            return self._read_attribute(node)
        if isinstance(node, Index):
            return self._index(node)
        if isinstance(node, Call):
            return self._call(node)
        if isinstance(node, BinOp):
            return self._binop(node)
        if isinstance(node, UnaryOp):
            operand = _scalarize(self._eval(node.operand))
            if isinstance(operand, bool) or not isinstance(
                operand, (int, float, Decimal)
            ):
                raise DslRuntimeError("unary '-' requires a number")
            return -operand
        raise DslRuntimeError(f"unknown expression {node!r}")

    def _read_attribute(self, node: Attribute):
        outcome = self.env.model.last_outcome
        if node.attr == "feasible":
            if outcome is None:
                raise DslRuntimeError(
                    "model.feasible read before model.optimize()"
                )
            return outcome.feasible
        if node.attr == "objVal":
            if outcome is None:
                raise DslRuntimeError("model.objVal read before model.optimize()")
            if not outcome.feasible:
                raise DslRuntimeError(
                    "model.objVal is unavailable: the model is infeasible"
                )
            return outcome.objective
        raise DslRuntimeError(
            f"{node.obj}.{node.attr} cannot be read"
        )  # pragma: no cover - parser rejects other reads

    def _index(self, node: Index):
        base = self._eval(node.obj)
        index = _scalarize(self._eval(node.index))
        if not isinstance(base, (list, str)):
            raise DslRuntimeError(
                f"cannot index a {type(base).__name__}"
            )
        if isinstance(index, bool) or not isinstance(index, int):
            raise DslRuntimeError("index must be an integer")
        try:
            return base[index]
        except IndexError:
            raise DslRuntimeError(
                f"index {index} out of range (length {len(base)})"
            ) from None

    def _binop(self, node: BinOp):
        left = _scalarize(self._eval(node.left))
        right = _scalarize(self._eval(node.right))
        op = node.op
        if isinstance(left, str) and isinstance(right, str):
            if op == "+":
                return left + right
            raise DslRuntimeError(f"operator {op!r} is not defined for strings")
        for side in (left, right):
            if side is None:
                raise DslRuntimeError(f"arithmetic on null (operator {op!r})")
            if isinstance(side, bool) or not isinstance(
                side, (int, float, Decimal)
            ):
                raise DslRuntimeError(
                    f"operator {op!r} requires numbers, got {type(side).__name__}"
                )
        # fixed-point and binary floats cannot mix natively
        if isinstance(left, Decimal) and isinstance(right, float):
            left = float(left)
        elif isinstance(right, Decimal) and isinstance(left, float):
            right = float(right)
        try:
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            return left / right
        except ZeroDivisionError:
            raise DslRuntimeError("division by zero") from None

    def _call(self, node: Call):
        func = node.func
        args = [self._eval(a) for a in node.args]
        kwargs = {k: self._eval(v) for k, v in node.kwargs}
        if isinstance(func, Name):
            if func.id == "retrieve":
                return self._host_retrieve(args, kwargs)
            return self._host_len(args, kwargs)
        key = (func.obj, func.attr)
        if key == ("logger", "log"):
            return self._host_log(args, kwargs)
        if key == ("model", "optimize"):
            self._no_args("model.optimize", args, kwargs)
            try:
                self.env.model.optimize()
            except InvalidInstanceError as exc:
                raise DslRuntimeError(f"optimize failed: {exc}") from None
            return None
        if key == ("model", "reset"):
            self._no_args("model.reset", args, kwargs)
            self.env.model.reset()
            return None
        if key == ("plan", "update"):
            self._no_args("plan.update", args, kwargs)
            try:
                self.env.plan_store.commit(self.env.model.last_outcome)
            except CommitError as exc:
                raise DslRuntimeError(str(exc)) from None
            return None
        return self._host_add_constraint(func.obj, args, kwargs)

    @staticmethod
    def _no_args(name: str, args, kwargs):
        if args or kwargs:
            raise DslRuntimeError(f"{name}() takes no arguments")

    def _host_retrieve(self, args, kwargs):
        if kwargs or len(args) != 1:
            raise DslRuntimeError("retrieve() takes exactly one argument")
        text = _scalarize(args[0])
        if not isinstance(text, str):
            raise DslRuntimeError("retrieve() requires a query string")
        try:
            return self._as_dsl_value(run_query(text, self.env.store))
        except (QuerySyntaxError, QueryEvalError) as exc:
            raise DslRuntimeError(f"query failed: {exc}") from None

    @staticmethod
    def _as_dsl_value(value):
        if isinstance(value, tuple):
            return list(value)
        return value

    def _host_len(self, args, kwargs):
        if kwargs or len(args) != 1:
            raise DslRuntimeError("len() takes exactly one argument")
        value = args[0]
        if isinstance(value, (list, str)):
            return len(value)
        raise DslRuntimeError(
            f"len() requires a list or string, got {type(value).__name__}"
        )

    def _host_log(self, args, kwargs):
        if kwargs:
            raise DslRuntimeError("logger.log() takes no keyword arguments")
        if not args:
            raise DslRuntimeError("logger.log() needs at least one argument")
        self.env.log.append(" ".join(render_value(a) for a in args))
        return None

    def _host_add_constraint(self, host: str, args, kwargs):
        if args:
            raise DslRuntimeError(
                f"{host}.add_constraint() takes keyword arguments only"
            )
        expected = {
            "demand": ("demand_id", "date", "enforce"),
            "supply": ("supply_id", "demand", "date", "enforce"),
            "shipping": ("demand_id", "method", "enforce"),
        }[host]
        missing = [k for k in expected if k not in kwargs]
        extra = [k for k in kwargs if k not in expected]
        if missing:
            raise DslRuntimeError(
                f"{host}.add_constraint() missing argument(s): {', '.join(missing)}"
            )
        if extra:
            raise DslRuntimeError(
                f"{host}.add_constraint() got unexpected argument(s): {', '.join(extra)}"
            )
        values = {k: _scalarize(v) for k, v in kwargs.items()}
        enforce = values["enforce"]
        if not isinstance(enforce, str):
            raise DslRuntimeError("enforce must be a string")
        try:
            if host == "demand":
                constraint = Constraint(
                    kind=DOCK_DATE,
                    enforce=enforce,
                    demand_id=self._id_arg(values["demand_id"]),
                    week_or_pattern=self._week_arg(values["date"]),
                )
            elif host == "supply":
                constraint = Constraint(
                    kind=SUPPLY_PAIRING,
                    enforce=enforce,
                    demand_id=self._id_arg(values["demand"]),
                    supplier_id=self._id_arg(values["supply_id"]),
                    week_or_pattern=self._week_arg(values["date"]),
                )
            else:
                method = values["method"]
                if not isinstance(method, str):
                    raise DslRuntimeError("method must be a string")
                constraint = Constraint(
                    kind=SHIPPING_METHOD,
                    enforce=enforce,
                    demand_id=self._id_arg(values["demand_id"]),
                    method=method,
                )
        except PatternError as exc:
            raise DslRuntimeError(f"bad constraint: {exc}") from None
        self.env.model.add_constraint(constraint)
        return None

    @staticmethod
    def _id_arg(value):
        if not isinstance(value, str):
            raise DslRuntimeError("identifier arguments must be strings")
        return value

    @staticmethod
    def _week_arg(value):
        if isinstance(value, bool):
            raise DslRuntimeError("date argument must be a week or pattern")
        if isinstance(value, (int, str)):
            return value
        raise DslRuntimeError("date argument must be a week or pattern")


def execute(script: Script, env: ExecEnv) -> ExecutionResult:
    executor = _Executor(env)
    try:
        executor.run(script)
    except BudgetExceeded as exc:
        return ExecutionResult(BUDGET_EXCEEDED, tuple(env.log), str(exc))
    except DslRuntimeError as exc:
        return ExecutionResult(RUNTIME_ERROR, tuple(env.log), str(exc))
    return ExecutionResult(OK, tuple(env.log))


def run_source(text: str, env: ExecEnv) -> ExecutionResult:
    """Parse and execute in one step; parse failures become a result."""
    try:
        script = parse_script(text)
    except DslParseError as exc:
        return ExecutionResult(PARSE_ERROR, (), str(exc))
    return execute(script, env)


def interpolate(template: str, env: ExecEnv) -> str:
    """Fill ``{expr}`` holes in a template with canonically rendered values."""
    try:
        parts = _split_fstring(template, 1, 1)
    except DslParseError as exc:
        raise DslRuntimeError(str(exc)) from None
    executor = _Executor(env)
    chunks = []
    for part in parts:
        if isinstance(part, str):
            chunks.append(part)
        else:
            chunks.append(render_value(_scalarize(executor._eval(part))))
    return "".join(chunks)
