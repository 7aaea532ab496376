"""Abstract syntax trees for the supported SQL subset, plus the parser.

The grammar covers: SELECT [DISTINCT] with attribute/literal/aggregate
projections, FROM with comma joins, INNER/LEFT/RIGHT/FULL OUTER joins,
NATURAL/ON/USING, FROM-clause subqueries; WHERE/HAVING predicates with
AND/OR/NOT, comparisons, LIKE, IS [NOT] NULL, BETWEEN, IN/NOT IN,
EXISTS/NOT EXISTS, SOME/ANY/ALL; GROUP BY; ORDER BY with ASC/DESC; LIMIT;
UNION/INTERSECT/EXCEPT [ALL]; non-recursive WITH; scalar subqueries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import SqlSyntaxError

# --------------------------------------------------------------------------
# AST nodes


@dataclass
class Attr:
    qualifier: str | None
    name: str


@dataclass
class Lit:
    type: str  # int | numeric | text | bool | null
    value: object


@dataclass
class Agg:
    func: str  # count/sum/avg/min/max; arg None means COUNT(*)
    distinct: bool
    arg: object | None


@dataclass
class ScalarSubq:
    query: object


@dataclass
class Star:
    qualifier: str | None = None


@dataclass
class ProjItem:
    expr: object
    alias: str | None = None


@dataclass
class TableRef:
    name: str
    alias: str | None = None


@dataclass
class SubqueryRef:
    query: object
    alias: str | None = None


@dataclass
class Join:
    kind: str  # inner | left | full | cross  (right is normalized by swap)
    left: object
    right: object
    natural: bool = False
    on: object | None = None
    using: tuple[str, ...] = ()


@dataclass
class Cmp:
    op: str  # = <> < <= > >= like not_like
    left: object
    right: object


@dataclass
class QuantCmp:
    op: str
    quant: str  # some | all
    expr: object
    subquery: object


@dataclass
class Between:
    expr: object
    lo: object
    hi: object
    negated: bool = False


@dataclass
class InPred:
    expr: object
    subquery: object | None
    values: tuple = ()
    negated: bool = False


@dataclass
class IsNull:
    expr: object
    negated: bool = False


@dataclass
class Exists:
    subquery: object
    negated: bool = False


@dataclass
class And:
    items: list


@dataclass
class Or:
    items: list


@dataclass
class Not:
    pred: object


@dataclass
class Select:
    distinct: bool = False
    projections: list = field(default_factory=list)
    from_items: list = field(default_factory=list)
    where: object | None = None
    group_by: list = field(default_factory=list)
    having: object | None = None
    order_by: list = field(default_factory=list)  # (expr, "asc"|"desc")
    limit: int | None = None


@dataclass
class SetOp:
    kind: str  # union | intersect | except
    all: bool
    left: object
    right: object
    order_by: list = field(default_factory=list)
    limit: int | None = None


@dataclass
class WithQuery:
    bindings: list  # (name, columns or None, query)
    body: object


# --------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<num>\d+(\.\d+)?)
  | (?P<str>'(?:[^']|'')*')
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><>|<=|>=|!=|[=<>(),.*;+-])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "select", "distinct", "from", "where", "group", "by", "having", "order",
    "limit", "union", "intersect", "except", "all", "and", "or", "not", "in",
    "exists", "between", "like", "is", "null", "some", "any", "join", "inner",
    "left", "right", "full", "outer", "natural", "cross", "on", "using", "as",
    "asc", "desc", "with", "true", "false",
}


@dataclass
class Token:
    kind: str  # kw | name | num | str | op | eof
    value: str
    line: int
    col: int


def tokenize(sql: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            raise SqlSyntaxError(
                f"unexpected character {sql[pos]!r}", line, pos - line_start + 1
            )
        col = pos - line_start + 1
        text = m.group(0)
        if m.lastgroup in ("ws", "comment"):
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rindex("\n") + 1
        elif m.lastgroup == "name":
            low = text.lower()
            kind = "kw" if low in KEYWORDS else "name"
            tokens.append(Token(kind, low if kind == "kw" else text, line, col))
        elif m.lastgroup == "num":
            tokens.append(Token("num", text, line, col))
        elif m.lastgroup == "str":
            tokens.append(Token("str", text[1:-1].replace("''", "'"), line, col))
        else:
            tokens.append(Token("op", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, len(sql) - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# Parser

_CMP_OPS = {"=", "<>", "!=", "<", "<=", ">", ">="}
_AGG_FUNCS = {"count", "sum", "avg", "min", "max"}


class _Parser:
    def __init__(self, sql: str):
        self.tokens = tokenize(sql)
        self.i = 0

    # -- token helpers ------------------------------------------------------
    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def error(self, message):
        t = self.cur
        raise SqlSyntaxError(message, t.line, t.col)

    def advance(self) -> Token:
        t = self.cur
        self.i += 1
        return t

    def at_kw(self, *words) -> bool:
        return self.cur.kind == "kw" and self.cur.value in words

    def at_op(self, *ops) -> bool:
        return self.cur.kind == "op" and self.cur.value in ops

    def accept_kw(self, *words) -> bool:
        if self.at_kw(*words):
            self.advance()
            return True
        return False

    def accept_op(self, *ops) -> bool:
        if self.at_op(*ops):
            self.advance()
            return True
        return False

    def expect_kw(self, word):
        if not self.accept_kw(word):
            self.error(f"expected {word.upper()}")

    def expect_op(self, op):
        if not self.accept_op(op):
            self.error(f"expected {op!r}")

    def expect_name(self) -> str:
        if self.cur.kind != "name":
            self.error("expected identifier")
        return self.advance().value

    # -- entry points --------------------------------------------------------
    def parse_query(self):
        q = self.query()
        if self.accept_op(";"):
            pass
        if self.cur.kind != "eof":
            self.error("unexpected trailing input")
        return q

    def query(self):
        if self.at_kw("with"):
            return self.with_query()
        return self.set_expr()

    def with_query(self):
        self.expect_kw("with")
        bindings = []
        while True:
            name = self.expect_name()
            cols = None
            if self.at_op("("):
                self.advance()
                cols = [self.expect_name()]
                while self.accept_op(","):
                    cols.append(self.expect_name())
                self.expect_op(")")
            self.expect_kw("as")
            self.expect_op("(")
            sub = self.query()
            self.expect_op(")")
            bindings.append((name, tuple(cols) if cols else None, sub))
            if not self.accept_op(","):
                break
        body = self.set_expr()
        return WithQuery(bindings=bindings, body=body)

    def set_expr(self):
        # UNION and EXCEPT bind equally (left-assoc); INTERSECT binds tighter.
        left = self.intersect_expr()
        while self.at_kw("union", "except"):
            kind = self.advance().value
            all_flag = self.accept_kw("all")
            right = self.intersect_expr()
            left = SetOp(kind=kind, all=all_flag, left=left, right=right)
        self.trailing_clauses(left)
        return left

    def intersect_expr(self):
        left = self.set_primary()
        while self.at_kw("intersect"):
            self.advance()
            all_flag = self.accept_kw("all")
            right = self.set_primary()
            left = SetOp(kind="intersect", all=all_flag, left=left, right=right)
        return left

    def set_primary(self):
        if self.accept_op("("):
            q = self.query()
            self.expect_op(")")
            return q
        return self.select_block()

    def trailing_clauses(self, node):
        # ORDER BY / LIMIT after a set expression apply to the whole result.
        if isinstance(node, Select) and (node.order_by or node.limit is not None):
            return
        if self.at_kw("order"):
            self.advance()
            self.expect_kw("by")
            items = [self.order_item()]
            while self.accept_op(","):
                items.append(self.order_item())
            node.order_by = items
        if self.at_kw("limit"):
            self.advance()
            if self.cur.kind != "num":
                self.error("expected row count after LIMIT")
            node.limit = int(self.advance().value)

    def order_item(self):
        expr = self.expr()
        direction = "asc"
        if self.at_kw("asc", "desc"):
            direction = self.advance().value
        return (expr, direction)

    def select_block(self):
        self.expect_kw("select")
        sel = Select()
        sel.distinct = self.accept_kw("distinct")
        if self.accept_kw("all"):
            pass
        sel.projections = [self.proj_item()]
        while self.accept_op(","):
            sel.projections.append(self.proj_item())
        self.expect_kw("from")
        sel.from_items = [self.from_item()]
        while self.accept_op(","):
            sel.from_items.append(self.from_item())
        if self.accept_kw("where"):
            sel.where = self.predicate()
        if self.at_kw("group"):
            self.advance()
            self.expect_kw("by")
            sel.group_by = [self.expr()]
            while self.accept_op(","):
                sel.group_by.append(self.expr())
            if self.accept_kw("having"):
                sel.having = self.predicate()
        self.trailing_clauses(sel)
        return sel

    def proj_item(self):
        if self.accept_op("*"):
            return ProjItem(Star())
        # qualified star: name.*
        if (
            self.cur.kind == "name"
            and self.tokens[self.i + 1].kind == "op"
            and self.tokens[self.i + 1].value == "."
            and self.tokens[self.i + 2].kind == "op"
            and self.tokens[self.i + 2].value == "*"
        ):
            qual = self.advance().value
            self.advance()
            self.advance()
            return ProjItem(Star(qualifier=qual))
        expr = self.expr()
        alias = None
        if self.accept_kw("as"):
            alias = self.expect_name()
        elif self.cur.kind == "name":
            alias = self.advance().value
        return ProjItem(expr, alias)

    def from_item(self):
        left = self.table_primary()
        while True:
            natural = False
            kind = None
            if self.at_kw("natural"):
                natural = True
                self.advance()
            if self.at_kw("inner"):
                self.advance()
                kind = "inner"
            elif self.at_kw("left"):
                self.advance()
                self.accept_kw("outer")
                kind = "left"
            elif self.at_kw("right"):
                self.advance()
                self.accept_kw("outer")
                kind = "right"
            elif self.at_kw("full"):
                self.advance()
                self.accept_kw("outer")
                kind = "full"
            elif self.at_kw("cross"):
                self.advance()
                kind = "cross"
            if self.at_kw("join"):
                self.advance()
                kind = kind or "inner"
            elif kind is None and not natural:
                break
            else:
                self.error("expected JOIN")
            right = self.table_primary()
            on = None
            using: tuple[str, ...] = ()
            if not natural and kind not in ("cross",):
                if self.accept_kw("on"):
                    on = self.predicate()
                elif self.accept_kw("using"):
                    self.expect_op("(")
                    cols = [self.expect_name()]
                    while self.accept_op(","):
                        cols.append(self.expect_name())
                    self.expect_op(")")
                    using = tuple(cols)
            if kind == "right":
                kind = "left"
                left, right = right, left
            if kind == "cross":
                kind = "inner"
            left = Join(kind=kind, left=left, right=right, natural=natural,
                        on=on, using=using)
        return left

    def table_primary(self):
        if self.accept_op("("):
            if self.at_kw("select", "with") or self.at_op("("):
                q = self.query()
                self.expect_op(")")
                alias = None
                if self.accept_kw("as"):
                    alias = self.expect_name()
                elif self.cur.kind == "name":
                    alias = self.advance().value
                return SubqueryRef(q, alias)
            item = self.from_item()
            self.expect_op(")")
            alias = None
            if self.accept_kw("as"):
                alias = self.expect_name()
            elif self.cur.kind == "name":
                alias = self.advance().value
            if alias is not None:
                # (a JOIN b) AS x aliases the whole join result; model it as
                # a derived table so references resolve through it.
                inner = Select(projections=[ProjItem(Star())], from_items=[item])
                return SubqueryRef(inner, alias)
            return item
        name = self.expect_name()
        alias = None
        if self.accept_kw("as"):
            alias = self.expect_name()
        elif self.cur.kind == "name":
            alias = self.advance().value
        return TableRef(name, alias)

    # -- predicates -----------------------------------------------------------
    def predicate(self):
        return self.or_pred()

    def or_pred(self):
        items = [self.and_pred()]
        while self.accept_kw("or"):
            items.append(self.and_pred())
        return items[0] if len(items) == 1 else Or(items)

    def and_pred(self):
        items = [self.not_pred()]
        while self.accept_kw("and"):
            items.append(self.not_pred())
        return items[0] if len(items) == 1 else And(items)

    def not_pred(self):
        if self.accept_kw("not"):
            return Not(self.not_pred())
        return self.primary_pred()

    def primary_pred(self):
        if self.at_kw("exists"):
            self.advance()
            self.expect_op("(")
            q = self.query()
            self.expect_op(")")
            return Exists(q)
        if self.at_op("("):
            # Could be a parenthesized predicate or a parenthesized expression
            # beginning a comparison; backtrack on failure.
            saved = self.i
            self.advance()
            try:
                p = self.predicate()
                self.expect_op(")")
                return p
            except SqlSyntaxError:
                self.i = saved
        expr = self.expr()
        if self.at_kw("is"):
            self.advance()
            negated = self.accept_kw("not")
            self.expect_kw("null")
            return IsNull(expr, negated)
        negated = self.accept_kw("not")
        if self.at_kw("between"):
            self.advance()
            lo = self.expr()
            self.expect_kw("and")
            hi = self.expr()
            return Between(expr, lo, hi, negated)
        if self.at_kw("in"):
            self.advance()
            self.expect_op("(")
            if self.at_kw("select", "with") or self.at_op("("):
                q = self.query()
                self.expect_op(")")
                return InPred(expr, q, (), negated)
            values = [self.expr()]
            while self.accept_op(","):
                values.append(self.expr())
            self.expect_op(")")
            return InPred(expr, None, tuple(values), negated)
        if self.at_kw("like"):
            self.advance()
            pattern = self.expr()
            return Cmp("not_like" if negated else "like", expr, pattern)
        if negated:
            self.error("expected BETWEEN, IN or LIKE after NOT")
        if self.cur.kind == "op" and self.cur.value in _CMP_OPS:
            op = self.advance().value
            if op == "!=":
                op = "<>"
            if self.at_kw("some", "any", "all"):
                quant = self.advance().value
                if quant == "any":
                    quant = "some"
                self.expect_op("(")
                q = self.query()
                self.expect_op(")")
                return QuantCmp(op, quant, expr, q)
            right = self.expr()
            return Cmp(op, expr, right)
        self.error("expected predicate")

    # -- scalar expressions -----------------------------------------------------
    def expr(self):
        if self.cur.kind == "num":
            text = self.advance().value
            if "." in text:
                return Lit("numeric", float(text))
            return Lit("int", int(text))
        if self.cur.kind == "str":
            return Lit("text", self.advance().value)
        if self.at_kw("null"):
            self.advance()
            return Lit("null", None)
        if self.at_kw("true", "false"):
            return Lit("bool", self.advance().value == "true")
        if self.at_op("-") and self.tokens[self.i + 1].kind == "num":
            self.advance()
            text = self.advance().value
            if "." in text:
                return Lit("numeric", -float(text))
            return Lit("int", -int(text))
        if self.at_op("("):
            self.advance()
            if self.at_kw("select", "with"):
                q = self.query()
                self.expect_op(")")
                return ScalarSubq(q)
            inner = self.expr()
            self.expect_op(")")
            return inner
        if self.cur.kind == "name" and self.cur.value.lower() in _AGG_FUNCS \
                and self.tokens[self.i + 1].kind == "op" \
                and self.tokens[self.i + 1].value == "(":
            func = self.advance().value.lower()
            self.advance()
            if self.accept_op("*"):
                self.expect_op(")")
                return Agg("count", False, None)
            distinct = self.accept_kw("distinct")
            arg = self.expr()
            self.expect_op(")")
            return Agg(func, distinct, arg)
        if self.cur.kind == "name":
            first = self.advance().value
            if self.accept_op("."):
                second = self.expect_name()
                return Attr(first, second)
            return Attr(None, first)
        self.error("expected expression")


def parse(sql: str):
    """Parse SQL text into a query AST; raises SqlSyntaxError on bad input."""
    return _Parser(sql).parse_query()
