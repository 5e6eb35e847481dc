"""In-memory tables and the small SQL dialect used by retrieval snippets.

Grammar (keywords case-insensitive, whitespace/newlines free):

    query  := SELECT items FROM table [WHERE cond (AND cond)*] [;]
    items  := item (, item)*
    item   := column | * | AGG ( column ) | COUNT ( * )
    AGG    := SUM | AVG | COUNT | MIN | MAX | STDDEV
    cond   := column op value
    op     := = | != | >= | <= | > | <
    value  := number | 'string' | column | NOW()
            | NOW() - INTERVAL 'T weeks' | NOW() - INTERVAL T WEEK

No joins, GROUP BY, ORDER BY, or subqueries.  NOW() always comes from the
store's explicit clock, never the wall clock.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .model import PlanningInstance


class QuerySyntaxError(Exception):
    """Parse failure; carries the 1-based index of the offending token."""

    def __init__(self, message: str, token_index: int):
        self.token_index = token_index
        super().__init__(f"{message} (at token {token_index})")


class QueryEvalError(Exception):
    """Unknown table/column or a type mismatch during evaluation."""


# table name -> ordered column -> python type
TABLE_SCHEMAS: dict[str, dict[str, type]] = {
    "demand": {"id": str, "racks": int, "ideal_dock_week": int, "dest_geo": str},
    "supplier": {"id": str, "region": str, "src_geo": str},
    "inventory": {
        "supplier_id": str,
        "week": int,
        "quantity": int,
        "record_date": dt.date,
    },
    "shipment": {
        "date": dt.date,
        "quantity": int,
        "src_geo": str,
        "dest_geo": str,
        "method": str,
    },
}

# Shorthand column names accepted in query text.
COLUMN_ALIASES: dict[str, dict[str, str]] = {
    "demand": {"idd": "ideal_dock_week"},
}

AGGREGATES = ("SUM", "AVG", "COUNT", "MIN", "MAX", "STDDEV")
_OPS = ("=", "!=", ">=", "<=", ">", "<")


@dataclass(frozen=True)
class DateOffset:
    """NOW() minus a whole number of weeks (0 = NOW() itself)."""

    weeks: int


@dataclass(frozen=True)
class ColumnRef:
    """Right-hand side of a condition that names another column."""

    name: str


@dataclass(frozen=True)
class SelectItem:
    column: str  # "*" allowed
    aggregate: Optional[str] = None


@dataclass(frozen=True)
class Condition:
    column: str
    op: str
    value: Union[int, float, str, DateOffset, ColumnRef]


@dataclass(frozen=True)
class QueryAst:
    select_items: tuple[SelectItem, ...]
    table: str
    where: tuple[Condition, ...] = ()


_TOKEN_RE = re.compile(
    r"""
    (?P<string> '(?:[^']|'')*' )
  | (?P<number> \d+(?:\.\d+)? )
  | (?P<ident>  [A-Za-z_][A-Za-z_0-9]* )
  | (?P<op>     != | >= | <= | = | > | < | \( | \) | , | ; | \* | - )
    """,
    re.VERBOSE,
)

_QUOTED_WEEKS_RE = re.compile(r"^(\d+)\s+weeks?$", re.IGNORECASE)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise QuerySyntaxError(
                f"unexpected character {text[pos]!r}", len(tokens) + 1
            )
        tokens.append((match.lastgroup, match.group()))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0

    def _fail(self, message: str):
        raise QuerySyntaxError(message, self.pos + 1)

    def _peek(self) -> Optional[tuple[str, str]]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self) -> tuple[str, str]:
        tok = self._peek()
        if tok is None:
            self._fail("unexpected end of query")
        self.pos += 1
        return tok

    def _at_keyword(self, word: str) -> bool:
        tok = self._peek()
        return tok is not None and tok[0] == "ident" and tok[1].upper() == word

    def _expect_keyword(self, word: str) -> None:
        if not self._at_keyword(word):
            self._fail(f"expected {word}")
        self.pos += 1

    def _expect_op(self, symbol: str) -> None:
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] != symbol:
            self._fail(f"expected {symbol!r}")
        self.pos += 1

    def _ident(self, what: str) -> str:
        tok = self._peek()
        if tok is None or tok[0] != "ident":
            self._fail(f"expected {what}")
        self.pos += 1
        return tok[1]

    def parse(self) -> QueryAst:
        self._expect_keyword("SELECT")
        items = [self._select_item()]
        while self._peek() == ("op", ","):
            self.pos += 1
            items.append(self._select_item())
        self._expect_keyword("FROM")
        table = self._ident("table name")
        where: list[Condition] = []
        if self._at_keyword("WHERE"):
            self.pos += 1
            where.append(self._condition())
            while self._at_keyword("AND"):
                self.pos += 1
                where.append(self._condition())
        if self._peek() == ("op", ";"):
            self.pos += 1
        if self._peek() is not None:
            self._fail("unexpected trailing input")
        return QueryAst(tuple(items), table, tuple(where))

    def _select_item(self) -> SelectItem:
        tok = self._peek()
        if tok == ("op", "*"):
            self.pos += 1
            return SelectItem("*")
        if tok is not None and tok[0] == "ident" and tok[1].upper() in AGGREGATES:
            agg = tok[1].upper()
            self.pos += 1
            self._expect_op("(")
            inner = self._peek()
            if inner == ("op", "*"):
                if agg != "COUNT":
                    self._fail("only COUNT accepts *")
                self.pos += 1
                column = "*"
            else:
                column = self._ident("column name")
            self._expect_op(")")
            return SelectItem(column, agg)
        return SelectItem(self._ident("column name"))

    def _condition(self) -> Condition:
        column = self._ident("column name")
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] not in _OPS:
            self._fail("expected comparison operator")
        self.pos += 1
        return Condition(column, tok[1], self._value())

    def _value(self):
        tok = self._peek()
        if tok is None:
            self._fail("expected value")
        kind, text = tok
        if kind == "number":
            self.pos += 1
            return float(text) if "." in text else int(text)
        if kind == "string":
            self.pos += 1
            return text[1:-1].replace("''", "'")
        if kind == "ident" and text.upper() == "NOW":
            self.pos += 1
            self._expect_op("(")
            self._expect_op(")")
            if self._peek() == ("op", "-"):
                self.pos += 1
                return self._interval()
            return DateOffset(0)
        if kind == "ident":
            self.pos += 1
            return ColumnRef(text)
        self._fail("expected value")

    def _interval(self) -> DateOffset:
        self._expect_keyword("INTERVAL")
        tok = self._peek()
        if tok is None:
            self._fail("expected interval")
        kind, text = tok
        if kind == "string":
            quoted = _QUOTED_WEEKS_RE.match(text[1:-1])
            if not quoted:
                self._fail("expected 'N weeks'")
            self.pos += 1
            return DateOffset(int(quoted.group(1)))
        if kind == "number":
            if "." in text:
                self._fail("interval must be a whole number of weeks")
            self.pos += 1
            tok = self._peek()
            if tok is None or tok[0] != "ident" or tok[1].upper() not in (
                "WEEK",
                "WEEKS",
            ):
                self._fail("expected WEEK")
            self.pos += 1
            return DateOffset(int(text))
        self._fail("expected interval")


def parse_query(text: str) -> QueryAst:
    return _Parser(_tokenize(text)).parse()


def to_sql(ast: QueryAst) -> str:
    """Canonical text for an AST; reparsing it yields an equal AST."""

    def item(it: SelectItem) -> str:
        if it.aggregate:
            return f"{it.aggregate}({it.column})"
        return it.column

    def value(v) -> str:
        if isinstance(v, DateOffset):
            if v.weeks == 0:
                return "NOW()"
            return f"NOW() - INTERVAL {v.weeks} WEEK"
        if isinstance(v, ColumnRef):
            return v.name
        if isinstance(v, str):
            return "'" + v.replace("'", "''") + "'"
        return repr(v)

    text = f"SELECT {', '.join(item(i) for i in ast.select_items)} FROM {ast.table}"
    if ast.where:
        conds = " AND ".join(
            f"{c.column} {c.op} {value(c.value)}" for c in ast.where
        )
        text += f" WHERE {conds}"
    return text + ";"


@dataclass(frozen=True)
class TableStore:
    """Immutable row storage plus the explicit clock behind NOW()."""

    tables: Mapping[str, tuple[dict, ...]]
    now: dt.date

    @classmethod
    def from_instance(
        cls, instance: PlanningInstance, now: Optional[dt.date] = None
    ) -> "TableStore":
        tables = {
            "demand": tuple(
                {
                    "id": d.id,
                    "racks": d.racks,
                    "ideal_dock_week": d.ideal_dock_week,
                    "dest_geo": d.dest_geo,
                }
                for d in instance.demands
            ),
            "supplier": tuple(
                {"id": s.id, "region": s.region, "src_geo": s.src_geo}
                for s in instance.suppliers
            ),
            "inventory": tuple(
                {
                    "supplier_id": r.supplier_id,
                    "week": r.week,
                    "quantity": r.quantity,
                    "record_date": r.record_date,
                }
                for r in instance.inventory
            ),
            "shipment": tuple(
                {
                    "date": r.date,
                    "quantity": r.quantity,
                    "src_geo": r.src_geo,
                    "dest_geo": r.dest_geo,
                    "method": r.method,
                }
                for r in instance.shipments
            ),
        }
        return cls(tables=tables, now=now or instance.now)


def load_store(dir_path, now: Optional[dt.date] = None) -> TableStore:
    from .io import load_instance

    return TableStore.from_instance(load_instance(dir_path), now=now)


def _resolve_column(table: str, column: str) -> str:
    resolved = COLUMN_ALIASES.get(table, {}).get(column, column)
    if resolved not in TABLE_SCHEMAS[table]:
        raise QueryEvalError(f"unknown column {column!r} in table {table!r}")
    return resolved


def _comparison_value(value, column_type: type, column: str):
    """Coerce a literal to the column's type, or raise a mismatch error."""
    if isinstance(value, DateOffset):
        if column_type is not dt.date:
            raise QueryEvalError(
                f"column {column!r} is not a date; cannot compare with NOW()"
            )
        return value  # resolved against the clock by the caller
    if column_type is dt.date:
        if isinstance(value, str):
            try:
                return dt.date.fromisoformat(value)
            except ValueError:
                raise QueryEvalError(
                    f"bad date literal {value!r} for column {column!r}"
                ) from None
        raise QueryEvalError(f"column {column!r} requires a date literal")
    if column_type is int:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return value
        raise QueryEvalError(f"column {column!r} requires a numeric literal")
    if isinstance(value, str):
        return value
    raise QueryEvalError(f"column {column!r} requires a string literal")


def _apply_op(cell, op: str, value) -> bool:
    if op == "=":
        return cell == value
    if op == "!=":
        return cell != value
    if op == ">=":
        return cell >= value
    if op == "<=":
        return cell <= value
    if op == ">":
        return cell > value
    return cell < value


def _aggregate(agg: str, values: list):
    if agg == "COUNT":
        return len(values)
    if not values:
        return None
    if agg == "MIN":
        return min(values)
    if agg == "MAX":
        return max(values)
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise QueryEvalError(f"{agg} requires numeric values")
    if agg == "SUM":
        return sum(values)
    mean = sum(values) / len(values)
    if agg == "AVG":
        return mean
    # population standard deviation; zero variance reports plain 0
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    if variance == 0:
        return 0
    return math.sqrt(variance)


def eval_query(ast: QueryAst, store: TableStore):
    """Evaluate an AST against the store.

    A single aggregate yields a scalar; several aggregates yield one row
    (a list).  A single plain column yields the list of its values; plain
    multi-column (or *) selects yield a list of row lists.  Aggregates and
    plain columns cannot be mixed (there is no GROUP BY).
    """
    if ast.table not in TABLE_SCHEMAS:
        raise QueryEvalError(f"unknown table {ast.table!r}")
    schema = TABLE_SCHEMAS[ast.table]
    rows = store.tables.get(ast.table, ())

    checks = []
    for cond in ast.where:
        column = _resolve_column(ast.table, cond.column)
        if isinstance(cond.value, ColumnRef):
            other = _resolve_column(ast.table, cond.value.name)
            if schema[other] is not schema[column]:
                raise QueryEvalError(
                    f"cannot compare column {cond.column!r} "
                    f"with column {cond.value.name!r}"
                )
            value = ColumnRef(other)
        else:
            value = _comparison_value(cond.value, schema[column], cond.column)
            if isinstance(value, DateOffset):
                value = store.now - dt.timedelta(days=7 * value.weeks)
        checks.append((column, cond.op, value))

    def passes(row: dict) -> bool:
        for column, op, value in checks:
            cell = row.get(column)
            if isinstance(value, ColumnRef):
                value = row.get(value.name)
                if value is None:
                    return False
            if cell is None or not _apply_op(cell, op, value):
                return False
        return True

    selected = [row for row in rows if passes(row)]

    has_agg = any(item.aggregate for item in ast.select_items)
    has_plain = any(not item.aggregate for item in ast.select_items)
    if has_agg and has_plain:
        raise QueryEvalError("cannot mix aggregates with plain columns")

    if has_agg:
        out = []
        for item in ast.select_items:
            if item.column == "*":
                values = list(selected)
            else:
                column = _resolve_column(ast.table, item.column)
                values = [
                    row[column] for row in selected if row[column] is not None
                ]
            out.append(_aggregate(item.aggregate, values))
        return out[0] if len(out) == 1 else out

    columns: list[str] = []
    for item in ast.select_items:
        if item.column == "*":
            columns.extend(schema)
        else:
            columns.append(_resolve_column(ast.table, item.column))
    if len(columns) == 1:
        return [row[columns[0]] for row in selected]
    return [[row[c] for c in columns] for row in selected]


def retrieve(text: str, store: TableStore):
    """Parse and evaluate in one step (the snippet-facing entry point)."""
    return eval_query(parse_query(text), store)
