"""Construction of flattened query trees and structural normalization.

build_flat_tree turns a resolved query into a FlatTree and immediately
normalizes it: nested inner joins and AND/OR chains are spliced into single
n-ary nodes, plain select-project-join FROM-subqueries are inlined, chains
of conjunct equalities are merged into equivalence-class nodes, and
SELECT listing every column of its only relation collapses back to *.

normalize() is re-run after every edit so tree invariants always hold.
"""

from __future__ import annotations

from . import sqlast as A
from .errors import ResolutionError
from .resolve import RAttr, RDerived, RJoin, ROut, RStar, ResolvedQuery
from .tree import (
    COLS, DFLAG, GROUP, HAVING, LWRAP, ORDER, SRC, WHERE,
    FlatNode, FlatTree, JOIN_KINDS, SETOP_KINDS, SOURCE_KINDS,
    attr, lit, node, provided_instances,
)

UNIVERSAL = None  # coverage marker for a block's WHERE wrapper


# -- construction -------------------------------------------------------------

def build_flat_tree(rq: ResolvedQuery, schema=None) -> FlatTree:
    root = normalize(build_query(rq.ast), schema)
    return FlatTree(root, rq.instance_table, rq.with_origin)


def build_query(q) -> FlatNode:
    if isinstance(q, A.SetOp):
        kind = q.kind + ("_all" if q.all else "")
        setop = node(kind, "", (build_query(q.left), build_query(q.right)))
        if not q.order_by and q.limit is None:
            return setop
        order = node("order", "", tuple(
            node("sortitem", d, (build_expr(e),)) for e, d in q.order_by))
        lwrap = node("lwrap", "", (node("limitval", str(q.limit)),)
                     if q.limit is not None else ())
        return node("block", "", (
            setop, node("where"), node("cols", "", (node("star"),)),
            node("dflag"), node("group"), node("having"), order, lwrap))
    if isinstance(q, A.Select):
        return build_block(q)
    raise ResolutionError(f"unexpected query node {type(q).__name__}")


def build_block(q: A.Select) -> FlatNode:
    src = build_source(q.from_items[0])
    where = node("where", "", conjuncts_of(q.where))
    cols = node("cols", "", tuple(build_expr(p.expr) for p in q.projections))
    dflag = node("dflag", "", (node("distinct"),) if q.distinct else ())
    group = node("group", "", tuple(build_expr(e) for e in q.group_by))
    having = node("having", "", conjuncts_of(q.having))
    order = node("order", "", tuple(
        node("sortitem", d, (build_expr(e),)) for e, d in q.order_by))
    lwrap = node("lwrap", "", (node("limitval", str(q.limit)),)
                 if q.limit is not None else ())
    return node("block", "", (src, where, cols, dflag, group, having,
                              order, lwrap))


def build_source(item) -> FlatNode:
    from .resolve import RTable
    if isinstance(item, RTable):
        return node("rel", item.instance, (node("pred"),))
    if isinstance(item, RDerived):
        return node("derived", item.instance,
                     (node("pred"), build_query(item.query)))
    if isinstance(item, RJoin):
        conds = []
        for c in item.on:
            conds.extend(conjuncts_of(c))
        pred = node("pred", "", conds)
        kind = {"inner": "ijoin", "left": "loj", "full": "foj"}[item.kind]
        return node(kind, "", (pred, build_source(item.left),
                               build_source(item.right)))
    raise ResolutionError(f"unexpected FROM item {type(item).__name__}")


def conjuncts_of(p) -> tuple[FlatNode, ...]:
    if p is None:
        return ()
    built = build_pred(p)
    if built.kind == "and":
        return built.children
    return (built,)


def build_pred(p) -> FlatNode:
    if isinstance(p, A.And):
        return node("and", "", tuple(build_pred(x) for x in p.items))
    if isinstance(p, A.Or):
        return node("or", "", tuple(build_pred(x) for x in p.items))
    if isinstance(p, A.Not):
        return node("not", "", (build_pred(p.pred),))
    if isinstance(p, A.Cmp):
        return node("cmp", p.op, (build_expr(p.left), build_expr(p.right)))
    if isinstance(p, A.Between):
        return node("between", "not" if p.negated else "",
                    (build_expr(p.expr), build_expr(p.lo), build_expr(p.hi)))
    if isinstance(p, A.IsNull):
        return node("isnotnull" if p.negated else "isnull", "",
                    (build_expr(p.expr),))
    if isinstance(p, A.Exists):
        return node("not_exists" if p.negated else "exists", "",
                    (build_query(p.subquery),))
    if isinstance(p, A.InPred):
        return node("inpred", "not" if p.negated else "",
                    (build_expr(p.expr), build_query(p.subquery)))
    if isinstance(p, A.QuantCmp):
        return node("quant", f"{p.op}:{p.quant}",
                    (build_expr(p.expr), build_query(p.subquery)))
    raise ResolutionError(f"unexpected predicate {type(p).__name__}")


def build_expr(e) -> FlatNode:
    if isinstance(e, RAttr):
        return attr(e.instance, e.name)
    if isinstance(e, ROut):
        return attr("out", e.name)
    if isinstance(e, RStar):
        return node("star")
    if isinstance(e, A.Lit):
        if e.type == "bool":
            return FlatNode("lit", f"bool:{'true' if e.value else 'false'}")
        if e.type == "null":
            return FlatNode("lit", "null:")
        return lit(e.type, e.value)
    if isinstance(e, A.Agg):
        if e.arg is None:
            return node("agg", "count_star")
        label = e.func + ("_distinct" if e.distinct else "")
        return node("agg", label, (build_expr(e.arg),))
    if isinstance(e, A.ScalarSubq):
        return node("scalarsub", "", (build_query(e.query),))
    raise ResolutionError(f"unexpected expression {type(e).__name__}")


# -- normalization ------------------------------------------------------------

def free_instances(n: FlatNode) -> set[str]:
    """Instances referenced by n but not provided by sources inside n."""
    used, bound = set(), set()
    for m in n.walk():
        if m.kind == "attr":
            used.add(m.label.rpartition(".")[0])
        elif m.kind in ("rel", "derived"):
            bound.add(m.label)
    return used - bound


# Pure in (schema, serial) and called for every intermediate rewrite step,
# so worth memoizing.
_NORM_CACHE: dict[tuple[int, str], FlatNode] = {}


def normalize(root: FlatNode, schema=None) -> FlatNode:
    key = (id(schema), root.serial)
    hit = _NORM_CACHE.get(key)
    if hit is not None:
        return hit
    orig_key = key
    for _ in range(10):
        new = _eqclass_pass(_structural(root, schema))
        if new.serial == root.serial:
            break
        root = new
    if len(_NORM_CACHE) > 500_000:
        _NORM_CACHE.clear()
    _NORM_CACHE[orig_key] = root
    _NORM_CACHE[(id(schema), root.serial)] = root
    return root


def _dedup(nodes):
    """Drop repeated conjuncts/disjuncts: AND and OR are idempotent."""
    seen: set[str] = set()
    out = []
    for c in nodes:
        if c.serial not in seen:
            seen.add(c.serial)
            out.append(c)
    return out


def _structural(n: FlatNode, schema) -> FlatNode:
    ch = [_structural(c, schema) for c in n.children]
    k = n.kind
    if k in ("and", "or"):
        merged = []
        for c in ch:
            merged.extend(c.children if c.kind == k else (c,))
        merged = _dedup(merged)
        if len(merged) == 1:
            return merged[0]
        return node(k, "", merged)
    if k in ("where", "pred", "having"):
        out = []
        for c in ch:
            out.extend(c.children if c.kind == "and" else (c,))
        return node(k, "", _dedup(out))
    if k == "cmp" and n.label in ("=", "<>"):
        return node("cmp", n.label, sorted(ch, key=lambda c: c.serial))
    if k == "ijoin":
        conjs = list(ch[0].children)
        srcs = []
        for c in ch[1:]:
            c = _inline_derived(c)
            if c.kind == "ijoin":
                conjs.extend(c.children[0].children)
                srcs.extend(c.children[1:])
            else:
                srcs.append(c)
        if len(srcs) == 1:
            # A join whose other operand was eliminated is just its source.
            only = srcs[0]
            if not conjs:
                return only
            if only.kind in ("rel", "ijoin", "derived"):
                return _attach_conjuncts(only, conjs)
        return node("ijoin", "", (node("pred", "", conjs), *srcs))
    if k in ("loj", "foj"):
        return node(k, "", (ch[0], _inline_derived(ch[1]),
                            _inline_derived(ch[2])))
    if k in ("union", "union_all", "intersect", "intersect_all"):
        # The deduplicating operator absorbs its ALL variant: duplicates are
        # removed overall either way.
        absorb = {k, k + "_all"} if not k.endswith("_all") else {k}
        merged = []
        for c in ch:
            merged.extend(c.children if c.kind in absorb else (c,))
        return node(k, "", merged)
    if k == "block":
        src = ch[SRC]
        if src.kind in ("derived",):
            src = _inline_derived(src)
        where = ch[WHERE]
        if src.kind in ("rel", "ijoin") and where.children:
            visible = provided_instances(src)
            move, keep = [], []
            for c in where.children:
                free = free_instances(c)
                (move if free and free <= visible else keep).append(c)
            if move:
                src = _attach_conjuncts(src, move)
                where = node("where", "", keep)
        cols = ch[COLS]
        cols = _collapse_star(src, cols, schema)
        return node("block", "", (src, where, cols, ch[DFLAG], ch[GROUP],
                                  ch[HAVING], ch[ORDER], ch[LWRAP]))
    return node(k, n.label, ch)


def _attach_conjuncts(src: FlatNode, conjs) -> FlatNode:
    pred = node("pred", "", tuple(src.children[0].children) + tuple(conjs))
    return node(src.kind, src.label, (pred, *src.children[1:]))


def _inline_derived(c: FlatNode) -> FlatNode:
    """Inline a derived table that is a plain select-project-join block."""
    if c.kind != "derived":
        return c
    q = c.children[1]
    if q.kind != "block":
        return c
    if (q.children[DFLAG].children or q.children[GROUP].children
            or q.children[HAVING].children or q.children[ORDER].children
            or q.children[LWRAP].children):
        return c
    if any(p.kind not in ("attr", "star") for p in q.children[COLS].children):
        return c
    src = q.children[SRC]
    if src.kind not in SOURCE_KINDS:
        return c
    conjs = tuple(q.children[WHERE].children) + tuple(c.children[0].children)
    if not conjs:
        return src
    if src.kind in ("rel", "ijoin", "derived"):
        return _attach_conjuncts(src, conjs)
    return c


def _collapse_star(src, cols, schema):
    """SELECT listing every column of every FROM relation once -> *."""
    if schema is None or src.kind not in SOURCE_KINDS:
        return cols
    full = set()
    for inst in provided_instances(src):
        rel = schema.relations.get(inst.rsplit("#", 1)[0])
        if rel is None:
            return cols  # derived table: output columns unknown here
        full |= {f"{inst}.{a.name}" for a in rel.attributes}
    listed = [c.label for c in cols.children if c.kind == "attr"]
    if (len(cols.children) == len(listed) == len(full)
            and set(listed) == full):
        return node("cols", "", (node("star"),))
    return cols


# -- equivalence classes -------------------------------------------------------

def _eqclass_pass(root: FlatNode) -> FlatNode:
    def walk(n):
        ch = [walk(c) for c in n.children]
        n2 = node(n.kind, n.label, ch)
        if n2.kind in ("loj", "foj"):
            parts = [
                _region_rewrite_pred(n2.children[0]),
                n2.children[1] if n2.kind == "loj"
                else _region_rewrite(n2.children[1]),
                _region_rewrite(n2.children[2]),
            ]
            n2 = node(n2.kind, "", parts)
        if n2.kind == "block":
            n2 = _region_rewrite_block(n2)
        return n2
    return walk(root)


def _gather(src: FlatNode, path, wrappers):
    """Collect the conjunctive region's predicate wrappers under src.

    Returns the instance coverage contributed to the parent region.  The left
    input of a LEFT OUTER JOIN stays in the enclosing region (its filters
    commute with the join); the right input and both FULL OUTER inputs are
    separate regions handled at their own join node.
    """
    k = src.kind
    if k in ("rel", "derived"):
        wrappers.append((path + (0,), {src.label}))
        return {src.label}
    if k == "ijoin":
        cov = set()
        for i in range(1, len(src.children)):
            cov |= _gather(src.children[i], path + (i,), wrappers)
        wrappers.append((path + (0,), set(cov)))
        return cov
    if k == "loj":
        cov = _gather(src.children[1], path + (1,), wrappers)
        return cov | provided_instances(src.children[2])
    if k == "foj":
        return provided_instances(src)
    return set()


def _region_rewrite_block(block: FlatNode) -> FlatNode:
    wrappers = []
    src = block.children[SRC]
    if src.kind in SOURCE_KINDS:
        _gather(src, (SRC,), wrappers)
    wrappers.append(((WHERE,), UNIVERSAL))
    return _merge_region(block, wrappers)


def _region_rewrite(src: FlatNode) -> FlatNode:
    """Region rooted at an outer-join input."""
    if src.kind not in SOURCE_KINDS:
        return src
    wrappers = []
    _gather(src, (), wrappers)
    if not wrappers:
        return src
    return _merge_region(src, wrappers)


def _region_rewrite_pred(pred: FlatNode) -> FlatNode:
    """An outer join's ON wrapper is a one-wrapper region of its own."""
    out = _merge_region(node("pred", "", pred.children), [((), UNIVERSAL)])
    return out


def _is_equality(c: FlatNode) -> bool:
    return (c.kind == "cmp" and c.label == "="
            and all(x.kind in ("attr", "lit") for x in c.children)
            and any(x.kind == "attr" for x in c.children))


def _merge_region(root: FlatNode, wrappers) -> FlatNode:
    contents = {path: list(_node_at(root, path).children)
                for path, _ in wrappers}
    parent: dict[str, str] = {}
    member: dict[str, FlatNode] = {}

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    def add(m):
        member.setdefault(m.serial, m)
        parent.setdefault(m.serial, m.serial)

    kept = {path: [] for path, _ in wrappers}
    found = False
    for path, _ in wrappers:
        for c in contents[path]:
            if _is_equality(c):
                found = True
                a, b = c.children
                add(a), add(b)
                union(a.serial, b.serial)
            elif c.kind == "eqclass":
                found = True
                for x in c.children:
                    add(x)
                    union(c.children[0].serial, x.serial)
            else:
                kept[path].append(c)
    if not found:
        return root

    classes: dict[str, list[FlatNode]] = {}
    for s in parent:
        classes.setdefault(find(s), []).append(member[s])

    def placement(members):
        insts = {m.label.rpartition(".")[0] for m in members
                 if m.kind == "attr"}
        best = None
        for path, cov in wrappers:
            if cov is UNIVERSAL or insts <= cov:
                key = (len(cov) if cov is not UNIVERSAL else 10 ** 9,
                       -len(path), path)
                if best is None or key < best[0]:
                    best = (key, path)
        return best[1]

    for members in classes.values():
        if len(members) < 2:
            continue  # a=a carries no information
        kept[placement(members)].append(node("eqclass", "", members))

    updates = {path: tuple(items) for path, items in kept.items()}
    return _rebuild(root, (), updates)


def _node_at(root, path):
    for i in path:
        root = root.children[i]
    return root


def _rebuild(n, path, updates):
    if path in updates:
        return node(n.kind, n.label, updates[path])
    if not any(p[:len(path)] == path for p in updates):
        return n
    return node(n.kind, n.label,
                [_rebuild(c, path + (i,), updates)
                 for i, c in enumerate(n.children)])
