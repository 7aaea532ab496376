"""Name resolution.

Turns a parsed query into a fully explicit form:

* every column reference becomes an RAttr naming a relation instance
  ("student#1", counted per relation name in depth-first FROM order);
* WITH bindings are inlined at each use, recording which binding and
  occurrence each created instance came from;
* NATURAL / USING joins become explicit equality conditions (RIGHT joins
  were already swapped into LEFT joins by the parser);
* SELECT * is expanded into the full column list unless the block reads a
  single base relation;
* IN (value, ...) lists become disjunctions of equalities.

The result still mirrors SQL clause structure; flatten.build_flat_tree
converts it into the canonical tree form.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import sqlast as A
from .errors import (
    AmbiguousAttribute,
    ResolutionError,
    ScopeError,
    UnknownAttribute,
    UnknownRelation,
)
from .schema import Schema


# -- resolved AST nodes -------------------------------------------------------

@dataclass
class RAttr:
    instance: str
    name: str


@dataclass
class RTable:
    instance: str
    relation: str


@dataclass
class RDerived:
    instance: str
    query: object


@dataclass
class RJoin:
    kind: str  # inner | left | full
    left: object
    right: object
    on: list  # resolved predicate conjuncts


@dataclass
class RStar:
    instance: str


@dataclass
class ROut:
    """Output-column reference in an ORDER BY attached to a set operation."""
    name: str


@dataclass
class ResolvedQuery:
    ast: object
    instance_table: dict[str, str]
    with_origin: dict[str, tuple[str, int, int]]


# -- scopes -------------------------------------------------------------------

@dataclass
class Source:
    alias: str
    instance: str
    columns: dict[str, tuple[str, str]]  # visible name -> (instance, attr)


@dataclass
class Scope:
    sources: list[Source] = field(default_factory=list)
    merged: dict[str, tuple[str, str]] = field(default_factory=dict)


@dataclass
class WithBinding:
    name: str
    columns: tuple[str, ...] | None
    query: object
    env: tuple  # environment visible to the binding body
    occurrences: int = 0


class Resolver:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.counters: dict[str, int] = {}
        self.instance_table: dict[str, str] = {}
        self.with_origin: dict[str, tuple[str, int, int]] = {}
        self.with_stack: list[list] = []  # [binding name, occurrence, counter]

    def resolve(self, ast) -> ResolvedQuery:
        resolved = self.query(copy.deepcopy(ast), scopes=(), env=())
        return ResolvedQuery(resolved, self.instance_table, self.with_origin)

    # -- instances ----------------------------------------------------------
    def new_instance(self, name: str) -> str:
        k = self.counters.get(name, 0) + 1
        self.counters[name] = k
        inst = f"{name}#{k}"
        self.instance_table[inst] = name
        if self.with_stack:
            top = self.with_stack[-1]
            self.with_origin[inst] = (top[0], top[1], top[2])
            top[2] += 1
        return inst

    # -- queries ------------------------------------------------------------
    def query(self, q, scopes, env):
        if isinstance(q, A.WithQuery):
            for name, columns, body in q.bindings:
                env = env + (WithBinding(name, columns, body, env),)
            return self.query(q.body, scopes, env)
        if isinstance(q, A.SetOp):
            left = self.query(q.left, scopes, env)
            right = self.query(q.right, scopes, env)
            order = []
            if q.order_by:
                names = {n for n, _ in output_columns(left, self.schema)}
                for expr, direction in q.order_by:
                    if isinstance(expr, A.Attr) and expr.qualifier is None \
                            and expr.name in names:
                        order.append((ROut(expr.name), direction))
                    else:
                        raise ResolutionError(
                            f"ORDER BY on a set operation must name an output "
                            f"column, got {expr!r}")
            return A.SetOp(q.kind, q.all, left, right, order, q.limit)
        if isinstance(q, A.Select):
            return self.select(q, scopes, env)
        raise ResolutionError(f"unexpected query node {type(q).__name__}")

    def select(self, q: A.Select, scopes, env):
        if not q.from_items:
            raise ResolutionError("queries without a FROM clause are not supported")
        scope = Scope()
        items = []
        for item in q.from_items:
            node, _ = self.from_item(item, scope, env)
            items.append(node)
        src = items[0]
        for other in items[1:]:
            src = RJoin("inner", src, other, [])

        inner = (scope,) + scopes
        where = self.pred(q.where, inner, env) if q.where is not None else None

        projections = self.projections(q.projections, scope, inner, env)
        aliases = {}
        for p in projections:
            if p.alias:
                aliases[p.alias] = p.expr
            elif isinstance(p.expr, RAttr):
                aliases.setdefault(p.expr.name, p.expr)

        def clause_expr(e):
            if isinstance(e, A.Attr) and e.qualifier is None and e.name in aliases:
                return copy.deepcopy(aliases[e.name])
            return self.expr(e, inner, env)

        group_by = [clause_expr(e) for e in q.group_by]
        having = self.pred(q.having, inner, env) if q.having is not None else None
        order_by = []
        for e, direction in q.order_by:
            if isinstance(e, A.Lit) and e.type == "int":
                idx = int(e.value)
                if not 1 <= idx <= len(projections):
                    raise ResolutionError(f"ORDER BY position {idx} out of range")
                order_by.append((copy.deepcopy(projections[idx - 1].expr), direction))
            else:
                order_by.append((clause_expr(e), direction))

        return A.Select(q.distinct, projections, [src], where,
                        group_by, having, order_by, q.limit)

    # -- FROM items ----------------------------------------------------------
    def from_item(self, item, scope: Scope, env):
        """Resolve one FROM item; returns (node, sources added by it)."""
        if isinstance(item, A.TableRef):
            binding = next((b for b in reversed(env) if b.name == item.name), None)
            if binding is not None:
                return self.inline_with(binding, item.alias, scope)
            rel = self.schema.relations.get(item.name)
            if rel is None:
                raise UnknownRelation(f"unknown relation '{item.name}'")
            inst = self.new_instance(item.name)
            alias = item.alias or item.name
            src = Source(alias, inst,
                         {a.name: (inst, a.name) for a in rel.attributes})
            self.add_source(scope, src)
            return RTable(inst, item.name), [src]
        if isinstance(item, A.SubqueryRef):
            if item.alias is None:
                raise ScopeError("FROM subquery requires an alias")
            return self.derived(item.query, item.alias, None, scope, env)
        if isinstance(item, A.Join):
            return self.join(item, scope, env)
        raise ResolutionError(f"unexpected FROM item {type(item).__name__}")

    def add_source(self, scope: Scope, src: Source):
        if any(s.alias == src.alias for s in scope.sources):
            raise ScopeError(f"duplicate table alias '{src.alias}'")
        scope.sources.append(src)

    def derived(self, query, alias, rename, scope: Scope, env):
        # A FROM subquery sees WITH bindings but not the enclosing columns.
        inner = self.query(query, scopes=(), env=env)
        inst = self.new_instance(alias)
        cols = output_columns(inner, self.schema)
        if rename is not None:
            if len(rename) != len(cols):
                raise ResolutionError(
                    f"'{alias}' declares {len(rename)} columns but its query "
                    f"produces {len(cols)}")
            cols = [(new, ref) for new, (_, ref) in zip(rename, cols)]
        columns = {name: (ref if ref is not None else (inst, name))
                   for name, ref in cols}
        src = Source(alias, inst, columns)
        self.add_source(scope, src)
        return RDerived(inst, inner), [src]

    def inline_with(self, binding: WithBinding, alias, scope: Scope):
        binding.occurrences += 1
        self.with_stack.append([binding.name, binding.occurrences, 0])
        try:
            return self.derived(copy.deepcopy(binding.query),
                                alias or binding.name, binding.columns,
                                scope, binding.env)
        finally:
            self.with_stack.pop()

    def join(self, j: A.Join, scope: Scope, env):
        left, left_srcs = self.from_item(j.left, scope, env)
        right, right_srcs = self.from_item(j.right, scope, env)
        conds = []
        if j.natural or j.using:
            if j.natural:
                lcols = {c for s in left_srcs for c in s.columns}
                rcols = {c for s in right_srcs for c in s.columns}
                shared = sorted(lcols & rcols)
            else:
                shared = list(j.using)
            for col in shared:
                lref = self.side_column(left_srcs, col, "left")
                rref = self.side_column(right_srcs, col, "right")
                conds.append(A.Cmp("=", RAttr(*lref), RAttr(*rref)))
                scope.merged.setdefault(col, lref)
        if j.on is not None:
            local = Scope(sources=left_srcs + right_srcs, merged=scope.merged)
            conds.append(self.pred(j.on, (local,), env))
        kind = "inner" if j.kind in ("inner", "cross") else j.kind
        return RJoin(kind, left, right, conds), left_srcs + right_srcs

    def side_column(self, sources, col, side):
        hits = [s for s in sources if col in s.columns]
        if not hits:
            raise UnknownAttribute(f"column '{col}' not found on {side} side of join")
        if len(hits) > 1:
            raise AmbiguousAttribute(f"column '{col}' is ambiguous on {side} side of join")
        return hits[0].columns[col]

    # -- projections ----------------------------------------------------------
    def projections(self, items, scope: Scope, scopes, env):
        out = []
        single_rel = (len(scope.sources) == 1 and
                      scope.sources[0].instance.rsplit("#", 1)[0]
                      in self.schema.relations)
        for item in items:
            if isinstance(item.expr, A.Star):
                if item.expr.qualifier is None:
                    if single_rel:
                        out.append(A.ProjItem(RStar(scope.sources[0].instance)))
                        continue
                    for src in sorted(scope.sources, key=lambda s: s.instance):
                        for name, ref in src.columns.items():
                            out.append(A.ProjItem(RAttr(*ref)))
                else:
                    src = next((s for s in scope.sources
                                if s.alias == item.expr.qualifier), None)
                    if src is None:
                        raise ScopeError(
                            f"unknown table alias '{item.expr.qualifier}' in "
                            f"qualified *")
                    if single_rel:
                        out.append(A.ProjItem(RStar(src.instance)))
                        continue
                    for name, ref in src.columns.items():
                        out.append(A.ProjItem(RAttr(*ref)))
            else:
                out.append(A.ProjItem(self.expr(item.expr, scopes, env),
                                      item.alias))
        return out

    # -- predicates -----------------------------------------------------------
    def pred(self, p, scopes, env):
        if isinstance(p, A.And):
            return A.And([self.pred(x, scopes, env) for x in p.items])
        if isinstance(p, A.Or):
            return A.Or([self.pred(x, scopes, env) for x in p.items])
        if isinstance(p, A.Not):
            return A.Not(self.pred(p.pred, scopes, env))
        if isinstance(p, A.Cmp):
            return A.Cmp(p.op, self.expr(p.left, scopes, env),
                         self.expr(p.right, scopes, env))
        if isinstance(p, A.Between):
            return A.Between(self.expr(p.expr, scopes, env),
                             self.expr(p.lo, scopes, env),
                             self.expr(p.hi, scopes, env), p.negated)
        if isinstance(p, A.IsNull):
            return A.IsNull(self.expr(p.expr, scopes, env), p.negated)
        if isinstance(p, A.Exists):
            return A.Exists(self.query(p.subquery, scopes, env), p.negated)
        if isinstance(p, A.InPred):
            expr = self.expr(p.expr, scopes, env)
            if p.subquery is not None:
                return A.InPred(expr, self.query(p.subquery, scopes, env),
                                (), p.negated)
            eqs = [A.Cmp("=", copy.deepcopy(expr), self.expr(v, scopes, env))
                   for v in p.values]
            disj = eqs[0] if len(eqs) == 1 else A.Or(eqs)
            return A.Not(disj) if p.negated else disj
        if isinstance(p, A.QuantCmp):
            return A.QuantCmp(p.op, p.quant, self.expr(p.expr, scopes, env),
                              self.query(p.subquery, scopes, env))
        raise ResolutionError(f"unexpected predicate {type(p).__name__}")

    # -- scalar expressions -----------------------------------------------------
    def expr(self, e, scopes, env):
        if isinstance(e, A.Attr):
            return RAttr(*self.lookup(e, scopes))
        if isinstance(e, A.Lit):
            return e
        if isinstance(e, A.Agg):
            arg = self.expr(e.arg, scopes, env) if e.arg is not None else None
            return A.Agg(e.func, e.distinct, arg)
        if isinstance(e, A.ScalarSubq):
            return A.ScalarSubq(self.query(e.query, scopes, env))
        if isinstance(e, (RAttr, ROut)):
            return e
        raise ResolutionError(f"unexpected expression {type(e).__name__}")

    def lookup(self, e: A.Attr, scopes):
        if e.qualifier is not None:
            for scope in scopes:
                for src in scope.sources:
                    if src.alias == e.qualifier:
                        ref = src.columns.get(e.name)
                        if ref is None:
                            raise UnknownAttribute(
                                f"'{e.qualifier}' has no column '{e.name}'")
                        return ref
            raise ScopeError(f"unknown table alias '{e.qualifier}'")
        for scope in scopes:
            if e.name in scope.merged:
                return scope.merged[e.name]
            hits = [s for s in scope.sources if e.name in s.columns]
            if len(hits) > 1:
                raise AmbiguousAttribute(f"column '{e.name}' is ambiguous")
            if hits:
                return hits[0].columns[e.name]
        raise UnknownAttribute(f"unknown column '{e.name}'")


def output_columns(q, schema) -> list[tuple[str, tuple[str, str] | None]]:
    """Output column names of a resolved query.

    Each entry is (name, ref) where ref is the underlying (instance, attr)
    when the column is a plain pass-through reference, else None.
    """
    if isinstance(q, A.SetOp):
        return [(name, None) for name, _ in output_columns(q.left, schema)]
    cols = []
    for i, p in enumerate(q.projections):
        if isinstance(p.expr, RStar):
            rel = schema.relations[p.expr.instance.rsplit("#", 1)[0]]
            for a in rel.attributes:
                cols.append((a.name, (p.expr.instance, a.name)))
        elif isinstance(p.expr, RAttr):
            cols.append((p.alias or p.expr.name, (p.expr.instance, p.expr.name)))
        else:
            cols.append((p.alias or f"col{i + 1}", None))
    return cols


def resolve(ast, schema: Schema) -> ResolvedQuery:
    return Resolver(schema).resolve(ast)
