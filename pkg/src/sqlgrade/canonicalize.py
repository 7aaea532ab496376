"""Rewrite rules that bring flattened query trees into canonical form.

Two layers:

* syntactic rules (SYN-*): meaning-preserving rewrites that need no schema
  knowledge beyond attribute types/nullability — predicate normalization,
  subquery connective normalization, operator flattening;
* semantic rules (SEM-*): rewrites justified by keys, foreign keys and
  functional dependencies — DISTINCT removal, redundant-join elimination,
  outer-join simplification, predicate pushdown, equivalence-class
  substitution, ORDER BY / GROUP BY normalization.

Rules are whole-tree passes applied in a fixed priority order until a
fixpoint, with a cap guarding against non-termination bugs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FixpointOverrun
from .flatten import UNIVERSAL, _gather, free_instances, normalize
from .schema import InstanceFD, Schema, fd_closure
from .tree import (
    COLS, DFLAG, GROUP, HAVING, LWRAP, ORDER, SRC, WHERE,
    FlatNode, FlatTree, SOURCE_KINDS, attr_parts, lit_parts, node,
    provided_instances, replace_at,
)

SYN_RULES = ["SYN-1", "SYN-2", "SYN-3", "SYN-4", "SYN-5", "SYN-6", "SYN-7",
             "SYN-8", "SYN-9", "SYN-10", "SYN-11"]
SEM_RULES = ["SEM-1", "SEM-2", "SEM-3", "SEM-4", "SEM-5", "SEM-6", "SEM-7",
             "SEM-8", "SEM-9", "SEM-10"]
ALL_RULES = SYN_RULES + SEM_RULES


@dataclass
class Ctx:
    schema: Schema | None
    instance_table: dict[str, str]

    def relation_of(self, instance: str):
        if self.schema is None:
            return None
        name = self.instance_table.get(instance,
                                       instance.rsplit("#", 1)[0])
        return self.schema.relations.get(name)

    def attr_type(self, label: str):
        inst, name = label.rpartition(".")[0], label.rpartition(".")[2]
        rel = self.relation_of(inst)
        if rel is None or not rel.has_attribute(name):
            return None
        return rel.attribute(name).type

    def attr_nullable(self, label: str) -> bool:
        inst, name = label.rpartition(".")[0], label.rpartition(".")[2]
        rel = self.relation_of(inst)
        if rel is None or not rel.has_attribute(name):
            return True  # unknown -> conservatively nullable
        return rel.attribute(name).nullable


def _map(root: FlatNode, fn) -> FlatNode:
    """Post-order rebuild; fn maps each node (children already mapped).
    Untouched subtrees are returned as-is rather than reallocated, since
    building a node recomputes its serialization."""
    ch = [_map(c, fn) for c in root.children]
    if all(a is b for a, b in zip(ch, root.children)):
        return fn(root)
    return fn(node(root.kind, root.label, ch))


# ---------------------------------------------------------------------------
# syntactic rules
# ---------------------------------------------------------------------------

def _noop(root, ctx):
    # Performed during resolution (attribute qualification, WITH inlining,
    # NATURAL/USING/RIGHT-JOIN elimination); nothing left to match here.
    return root


def syn3_between(root, ctx):
    def fn(n):
        if n.kind != "between":
            return n
        e, lo, hi = n.children
        if n.label == "not":
            return node("or", "", (node("cmp", "<", (e, lo)),
                                   node("cmp", "<", (hi, e))))
        return node("and", "", (node("cmp", "<=", (lo, e)),
                                node("cmp", "<=", (e, hi))))
    return _map(root, fn)


_NEG_CMP = {"=": "<>", "<>": "=", "like": "not_like", "not_like": "like"}


def _negate(p: FlatNode) -> FlatNode:
    k = p.kind
    if k == "not":
        return p.children[0]
    if k == "and":
        return node("or", "", [_negate(c) for c in p.children])
    if k == "or":
        return node("and", "", [_negate(c) for c in p.children])
    if k == "cmp":
        a, b = p.children
        op = p.label
        if op in _NEG_CMP:
            return node("cmp", _NEG_CMP[op], (a, b))
        if op == "<":
            return node("cmp", "<=", (b, a))
        if op == "<=":
            return node("cmp", "<", (b, a))
        if op == ">":
            return node("cmp", "<=", (a, b))
        if op == ">=":
            return node("cmp", "<", (a, b))
    if k == "isnull":
        return node("isnotnull", "", p.children)
    if k == "isnotnull":
        return node("isnull", "", p.children)
    if k == "exists":
        return node("not_exists", "", p.children)
    if k == "not_exists":
        return node("exists", "", p.children)
    if k == "between":
        return node("between", "" if p.label == "not" else "not", p.children)
    if k == "inpred":
        return node("inpred", "" if p.label == "not" else "not", p.children)
    if k == "quant":
        op, _, quant = p.label.partition(":")
        flip = {"=": "<>", "<>": "=", "<": ">=", "<=": ">", ">": "<=",
                ">=": "<"}[op]
        other = "all" if quant == "some" else "some"
        return node("quant", f"{flip}:{other}", p.children)
    if k == "eqclass" and len(p.children) == 2:
        return node("cmp", "<>", p.children)
    return node("not", "", (p,))


def syn4_not(root, ctx):
    def fn(n):
        if n.kind == "not":
            return _negate(n.children[0])
        return n
    return _map(root, fn)


def syn5_direction(root, ctx):
    def fn(n):
        if n.kind == "cmp" and n.label in (">", ">="):
            a, b = n.children
            return node("cmp", "<" if n.label == ">" else "<=", (b, a))
        return n
    return _map(root, fn)


def _subquery_output(q: FlatNode, ctx):
    """The single projected expression of a connective subquery, or None."""
    if q.kind != "block":
        return None
    cols = q.children[COLS].children
    if len(cols) == 1 and cols[0].kind != "star":
        return cols[0]
    if len(cols) == 1 and cols[0].kind == "star":
        src = q.children[SRC]
        if src.kind == "rel":
            rel = ctx.relation_of(src.label)
            if rel is not None and len(rel.attributes) == 1:
                return FlatNode("attr",
                                f"{src.label}.{rel.attributes[0].name}")
    return None


def _has_agg(n: FlatNode) -> bool:
    return any(m.kind == "agg" for m in n.walk())


def _add_conjunct(q: FlatNode, conj: FlatNode, proj: FlatNode) -> FlatNode:
    """Attach a correlation condition to a connective subquery block."""
    slot = HAVING if (q.children[GROUP].children or _has_agg(proj)) else WHERE
    wrapper = q.children[slot]
    new = node(wrapper.kind, "", tuple(wrapper.children) + (conj,))
    return replace_at(q, (slot,), new)


def _nullable_expr(e: FlatNode, ctx) -> bool:
    if e.kind == "attr":
        return ctx.attr_nullable(e.label)
    if e.kind == "lit":
        return lit_parts(e)[0] == "null"
    return False


def syn6_in_some(root, ctx):
    def fn(n):
        if n.kind == "inpred" and n.label == "":
            expr, q = n.children
            proj = _subquery_output(q, ctx)
            if proj is None:
                return n
            conj = node("cmp", "=", (expr, proj))
            return node("exists", "", (_add_conjunct(q, conj, proj),))
        if n.kind == "quant" and n.label.endswith(":some"):
            op = n.label.partition(":")[0]
            expr, q = n.children
            proj = _subquery_output(q, ctx)
            if proj is None:
                return n
            conj = node("cmp", op, (expr, proj))
            return node("exists", "", (_add_conjunct(q, conj, proj),))
        return n
    return _map(root, fn)


def syn7_all_not_in(root, ctx):
    def guarded(core, expr, proj, ctx):
        guards = []
        if _nullable_expr(expr, ctx):
            guards.append(node("isnull", "", (expr,)))
        if _nullable_expr(proj, ctx):
            guards.append(node("isnull", "", (proj,)))
        if guards:
            return node("or", "", [core] + guards)
        return core

    def fn(n):
        if n.kind == "inpred" and n.label == "not":
            expr, q = n.children
            proj = _subquery_output(q, ctx)
            if proj is None:
                return n
            core = node("cmp", "=", (expr, proj))
            conj = guarded(core, expr, proj, ctx)
            return node("not_exists", "", (_add_conjunct(q, conj, proj),))
        if n.kind == "quant" and n.label.endswith(":all"):
            op = n.label.partition(":")[0]
            expr, q = n.children
            proj = _subquery_output(q, ctx)
            if proj is None:
                return n
            core = _negate(node("cmp", op, (expr, proj)))
            conj = guarded(core, expr, proj, ctx)
            return node("not_exists", "", (_add_conjunct(q, conj, proj),))
        return n
    return _map(root, fn)


def syn8_subquery_distinct(root, ctx):
    def fn(n):
        if n.kind in ("exists", "not_exists") and n.children[0].kind == "block":
            q = n.children[0]
            q = replace_at(q, (DFLAG,), node("dflag"))
            # Projections under an existence test never affect the result.
            q = replace_at(q, (COLS,), node("cols", "", (node("star"),)))
            return node(n.kind, "", (q,))
        return n
    return _map(root, fn)


def syn10_subquery_order(root, ctx):
    def go(n, is_root):
        ch = [go(c, False) for c in n.children]
        n = node(n.kind, n.label, ch)
        if (n.kind == "block" and not is_root
                and not n.children[LWRAP].children
                and n.children[ORDER].children):
            return replace_at(n, (ORDER,), node("order"))
        return n
    return go(root, True)


def syn11_flatten(root, ctx):
    return normalize(root, ctx.schema)


# ---------------------------------------------------------------------------
# region helpers shared by semantic rules
# ---------------------------------------------------------------------------

def region_wrappers(block: FlatNode):
    """(path, coverage) for every predicate wrapper in the block's region."""
    wrappers = []
    src = block.children[SRC]
    if src.kind in SOURCE_KINDS:
        _gather(src, (SRC,), wrappers)
    wrappers.append((((WHERE,)), UNIVERSAL))
    return wrappers


def _at(root, path):
    for i in path:
        root = root.children[i]
    return root


def region_conjuncts(block: FlatNode):
    out = []
    for path, _ in region_wrappers(block):
        for i, c in enumerate(_at(block, path).children):
            out.append((path + (i,), c))
    return out


def region_eqclasses(block: FlatNode):
    return [(p, c) for p, c in region_conjuncts(block) if c.kind == "eqclass"]


def block_instances(block: FlatNode) -> set[str]:
    src = block.children[SRC]
    if src.kind in SOURCE_KINDS:
        return provided_instances(src)
    return set()


def _fd_env(block: FlatNode, ctx):
    """Relation instances and derived FDs (equality classes, constants)."""
    rel_insts = []
    for inst in sorted(block_instances(block)):
        rel = ctx.relation_of(inst)
        if rel is not None:
            rel_insts.append((inst, rel.name))
    derived = []
    for _, eq in region_eqclasses(block):
        attrs = frozenset(c.label for c in eq.children if c.kind == "attr")
        has_lit = any(c.kind == "lit" for c in eq.children)
        if has_lit:
            derived.append(InstanceFD(frozenset(), attrs))
        for a in attrs:
            rest = attrs - {a}
            if rest:
                derived.append(InstanceFD(frozenset({a}), frozenset(rest)))
    return tuple(rel_insts), derived


def _closure(block, ctx, seed):
    rel_insts, derived = _fd_env(block, ctx)
    return fd_closure(ctx.schema, rel_insts, seed, derived)


# ---------------------------------------------------------------------------
# semantic rules
# ---------------------------------------------------------------------------

def _dup_free(block: FlatNode, ctx) -> bool:
    """True if the block's output has no duplicates even without DISTINCT."""
    if ctx.schema is None or block.kind != "block":
        return False
    src = block.children[SRC]
    if src.kind not in SOURCE_KINDS:
        return False
    if any(m.kind == "foj" for m in src.walk()):
        return False
    insts = block_instances(block)
    for inst in insts:
        if ctx.relation_of(inst) is None:
            return False  # derived table: multiplicities unknown
    cols = block.children[COLS].children
    group = block.children[GROUP].children
    if not group and any(_has_agg(c) for c in cols):
        return True  # aggregate without grouping: single row
    seed = set()
    for c in cols:
        if c.kind == "attr":
            seed.add(c.label)
        elif c.kind == "star":
            for inst in insts:
                rel = ctx.relation_of(inst)
                seed |= {f"{inst}.{a.name}" for a in rel.attributes}
    closure = _closure(block, ctx, seed)
    if group:
        needed = {c.label for c in group if c.kind == "attr"}
    else:
        needed = set()
        for inst in insts:
            rel = ctx.relation_of(inst)
            needed |= {f"{inst}.{a.name}" for a in rel.attributes}
    return needed <= closure


def _child_dup_free(q: FlatNode, ctx) -> bool:
    if q.kind in ("union", "intersect", "except"):
        return True
    if q.kind == "block":
        return bool(q.children[DFLAG].children) or _dup_free(q, ctx)
    return False


def sem1_distinct(root, ctx):
    def fn(n):
        if n.kind == "block" and n.children[DFLAG].children:
            if _dup_free(n, ctx):
                return replace_at(n, (DFLAG,), node("dflag"))
        if n.kind == "intersect_all":
            if any(_child_dup_free(c, ctx) for c in n.children):
                return node("intersect", "", n.children)
        if n.kind == "except_all":
            if _child_dup_free(n.children[0], ctx):
                return node("except", "", n.children)
        return n
    return _map(root, fn)


def _region_sources(block: FlatNode):
    """(path, node) for rel/derived leaves in the block's region."""
    out = []

    def go(n, path):
        if n.kind in ("rel", "derived"):
            out.append((path, n))
        elif n.kind == "ijoin":
            for i in range(1, len(n.children)):
                go(n.children[i], path + (i,))
        elif n.kind == "loj":
            go(n.children[1], path + (1,))
    src = block.children[SRC]
    if src.kind in SOURCE_KINDS:
        go(src, (SRC,))
    return out


def sem2_distinct_pullup(root, ctx):
    def fn(n):
        if n.kind != "block" or ctx.schema is None:
            return n
        cols = n.children[COLS].children
        if (n.children[GROUP].children or any(_has_agg(c) for c in cols)
                or _has_agg(n.children[HAVING]) or _has_agg(n.children[ORDER])):
            return n
        outer_distinct = bool(n.children[DFLAG].children)
        for path, d in _region_sources(n):
            if d.kind != "derived" or d.children[1].kind != "block":
                continue
            inner = d.children[1]
            if not inner.children[DFLAG].children:
                continue
            if outer_distinct:
                new_inner = replace_at(inner, (DFLAG,), node("dflag"))
                return replace_at(n, path + (1,), new_inner)
            # Pull the DISTINCT up when the outer query provably adds no
            # duplicates: it projects the whole subquery output and a key
            # of every other relation in the FROM clause.
            inner_cols = inner.children[COLS].children
            outer_serials = {c.serial for c in cols}
            if not all(c.serial in outer_serials for c in inner_cols):
                continue
            seed = {c.label for c in cols if c.kind == "attr"}
            closure = _closure(n, ctx, seed)
            others = block_instances(n) - {d.label}
            ok = True
            for inst in others:
                rel = ctx.relation_of(inst)
                if rel is None or not rel.keys():
                    ok = False
                    break
                if not any(all(f"{inst}.{a}" in closure for a in key)
                           for key in rel.keys()):
                    ok = False
                    break
            if not ok:
                continue
            new_inner = replace_at(inner, (DFLAG,), node("dflag"))
            n2 = replace_at(n, path + (1,), new_inner)
            return replace_at(n2, (DFLAG,),
                              node("dflag", "", (node("distinct"),)))
        return n
    return _map(root, fn)


def _eliminate_relation(block, ctx, dup_ok, star_ok):
    """Try one redundant-join elimination inside the block; None if none."""
    if ctx.schema is None:
        return None
    if not star_ok and any(c.kind == "star"
                           for c in block.children[COLS].children):
        return None  # * silently projects the candidate's columns
    eqs = [c for _, c in region_eqclasses(block)]

    def together(a, b):
        return any(
            {a, b} <= {m.label for m in eq.children if m.kind == "attr"}
            for eq in eqs)

    srcs = _region_sources(block)
    rel_paths = {n.label: p for p, n in srcs if n.kind == "rel"}
    insts = sorted(rel_paths)
    for d in insts:
        drel = ctx.relation_of(d)
        if drel is None:
            continue
        # The eliminated relation must be a join operand, not the only source.
        if len(rel_paths[d]) < 2:
            continue
        parent = _at(block, rel_paths[d][:-1])
        if parent.kind != "ijoin":
            continue
        for r in insts:
            if r == d:
                continue
            rrel = ctx.relation_of(r)
            if rrel is None:
                continue
            candidates = []
            for fk in rrel.foreign_keys:  # r -> d: drop the referenced side
                if fk.ref_relation == drel.name and fk.all_non_nullable:
                    candidates.append(
                        [(f"{d}.{k}", f"{r}.{f}")
                         for f, k in zip(fk.attrs, fk.ref_attrs)])
            if dup_ok:
                for fk in drel.foreign_keys:  # d -> r: drop the referencing side
                    if fk.ref_relation == rrel.name and fk.all_non_nullable:
                        candidates.append(
                            [(f"{d}.{f}", f"{r}.{k}")
                             for f, k in zip(fk.attrs, fk.ref_attrs)])
            for pairs in candidates:
                if not all(together(da, ra) for da, ra in pairs):
                    continue
                out = _apply_elimination(block, ctx, d, dict(pairs))
                if out is not None:
                    return out
    return None


class _Blocked(Exception):
    """A reference to the relation under elimination cannot be rewritten."""


def _apply_elimination(block, ctx, d, subst):
    # Every remaining reference to d must be rewritable via the FK equality,
    # and no region predicate other than the pairing classes may constrain d.
    for _, c in region_conjuncts(block):
        if d not in free_instances(c):
            continue
        if c.kind != "eqclass":
            return None
        for m in c.children:
            if m.kind == "attr" and attr_parts(m)[0] == d \
                    and m.label not in subst:
                return None

    def rewrite(n):
        if n.kind == "attr" and attr_parts(n)[0] == d:
            repl = subst.get(n.label)
            if repl is None:
                raise _Blocked
            return FlatNode("attr", repl)
        if n.kind == "rel" and n.label == d:
            return None  # dropped from the enclosing join
        if n.kind == "eqclass":
            members = []
            for m in n.children:
                if m.kind == "attr" and attr_parts(m)[0] == d:
                    continue
                r = rewrite(m)
                if r is not None:
                    members.append(r)
            # Deduplicate: d's member may collapse onto its partner.
            uniq = {}
            for m in members:
                uniq.setdefault(m.serial, m)
            members = list(uniq.values())
            if len(members) < 2:
                return None
            return node("eqclass", "", members)
        ch = []
        for c in n.children:
            r = rewrite(c)
            if r is not None:
                ch.append(r)
        return node(n.kind, n.label, ch)

    try:
        return rewrite(block)
    except _Blocked:
        return None


def sem3_redundant_join(root, ctx):
    def go(n, dup_ctx):
        if n.kind in ("exists", "not_exists"):
            return node(n.kind, "", [go(c, True) for c in n.children])
        ch = [go(c, False) for c in n.children]
        n = node(n.kind, n.label, ch)
        if n.kind == "block":
            dup_ok = dup_ctx or bool(n.children[DFLAG].children)
            out = _eliminate_relation(n, ctx, dup_ok, star_ok=dup_ctx)
            if out is not None:
                return out
        return n
    return go(root, False)


def _null_rejecting(c: FlatNode, rinsts: set[str]) -> bool:
    if c.kind == "cmp":
        return any(x.kind == "attr" and attr_parts(x)[0] in rinsts
                   for x in c.children)
    if c.kind == "isnotnull":
        x = c.children[0]
        return x.kind == "attr" and attr_parts(x)[0] in rinsts
    if c.kind == "eqclass":
        return any(x.kind == "attr" and attr_parts(x)[0] in rinsts
                   for x in c.children)
    return False


def sem4_loj_null_reject(root, ctx):
    def go(n, filters):
        if n.kind == "block":
            where = list(n.children[WHERE].children)
            kids = []
            for i, c in enumerate(n.children):
                kids.append(go(c, where) if i == SRC else go(c, []))
            return node("block", "", kids)
        if n.kind == "ijoin":
            inner = filters + list(n.children[0].children)
            return node("ijoin", "", [go(n.children[0], [])]
                        + [go(c, inner) for c in n.children[1:]])
        if n.kind == "loj":
            pred, left, right = n.children
            if any(_null_rejecting(c, provided_instances(right))
                   for c in filters):
                return go(node("ijoin", "", (pred, left, right)), filters)
            return node("loj", "", (go(pred, []), go(left, filters),
                                    go(right, [])))
        return node(n.kind, n.label, [go(c, []) for c in n.children])
    return go(root, [])


def sem5_loj_fk(root, ctx):
    def fn(n):
        if n.kind != "loj" or ctx.schema is None:
            return n
        pred, left, right = n.children
        if right.kind != "rel":
            return n
        drel = ctx.relation_of(right.label)
        if drel is None:
            return n
        eqs = [c for c in pred.children if c.kind == "eqclass"]

        def together(a, b):
            return any({a, b} <= {m.label for m in eq.children
                                  if m.kind == "attr"} for eq in eqs)
        for l in provided_instances(left):
            lrel = ctx.relation_of(l)
            if lrel is None:
                continue
            for fk in lrel.foreign_keys:
                if fk.ref_relation != drel.name or not fk.all_non_nullable:
                    continue
                pairs = [(f"{l}.{f}", f"{right.label}.{k}")
                         for f, k in zip(fk.attrs, fk.ref_attrs)]
                if all(together(a, b) for a, b in pairs):
                    return node("ijoin", "", (pred, left, right))
        return n
    return _map(root, fn)


def sem6_pushdown(root, ctx):
    def fn(n):
        if n.kind != "block":
            return n
        wrappers = region_wrappers(n)
        if len(wrappers) <= 1:
            return n
        placed = {path: [] for path, _ in wrappers}
        changed = False
        for path, _ in wrappers:
            for c in _at(n, path).children:
                free = free_instances(c)
                target = path
                if free:
                    best = None
                    for wpath, cov in wrappers:
                        if cov is UNIVERSAL or free <= cov:
                            key = (len(cov) if cov is not UNIVERSAL
                                   else 10 ** 9, -len(wpath), wpath)
                            if best is None or key < best[0]:
                                best = (key, wpath)
                    if best is not None:
                        target = best[1]
                if target != path:
                    changed = True
                placed[target].append(c)
        if not changed:
            return n
        out = n
        for path, items in placed.items():
            wrapper = _at(n, path)
            out = replace_at(out, path, node(wrapper.kind, "", items))
        return out
    return _map(root, fn)


def sem7_integer_strict(root, ctx):
    def int_typed(e):
        if e.kind == "lit":
            return lit_parts(e)[0] == "int"
        if e.kind == "attr":
            return ctx.attr_type(e.label) == "int"
        if e.kind == "arith":
            return int_typed(e.children[0])
        return False

    def fn(n):
        if n.kind != "cmp" or n.label != "<":
            return n
        a, b = n.children
        if not (int_typed(a) and int_typed(b)):
            return n
        # a < b over integers is a <= b-1 (fold when a bound is a literal).
        if b.kind == "lit":
            return node("cmp", "<=",
                        (a, FlatNode("lit", f"int:{int(lit_parts(b)[1]) - 1}")))
        if a.kind == "lit":
            return node("cmp", "<=",
                        (FlatNode("lit", f"int:{int(lit_parts(a)[1]) + 1}"), b))
        return node("cmp", "<=", (a, node("arith", "-1", (b,))))
    return _map(root, fn)


def _rep_key(m: FlatNode):
    if m.kind == "lit":
        return (0, "", 0, m.label)
    inst, name = attr_parts(m)
    rel, _, ordinal = inst.partition("#")
    try:
        k = int(ordinal)
    except ValueError:
        k = 0
    return (1, rel, k, name)


def sem8_eqclass_substitution(root, ctx):
    # Classes defined in outer-join ON conditions hold only for matched rows;
    # they are excluded from the global substitution.
    excluded = set()

    def mark(n, in_outer_on):
        if n.kind in ("loj", "foj"):
            mark(n.children[0], True)
            for c in n.children[1:]:
                mark(c, False)
            return
        if n.kind == "eqclass" and in_outer_on:
            excluded.add(n.serial)
        for c in n.children:
            mark(c, in_outer_on)
    mark(root, False)

    subst = {}
    for m in root.walk():
        if m.kind == "eqclass" and m.serial not in excluded:
            rep = min(m.children, key=_rep_key)
            for c in m.children:
                if c.serial != rep.serial:
                    subst[c.serial] = rep
    if not subst:
        return root

    def rewrite(n):
        if n.kind == "eqclass":
            return n
        if n.serial in subst and n.kind in ("attr",):
            return subst[n.serial]
        return node(n.kind, n.label, [rewrite(c) for c in n.children])
    return rewrite(root)


def sem9_orderby_prune(root, ctx):
    def fn(n):
        if n.kind != "block" or not n.children[ORDER].children:
            return n
        if ctx.schema is None:
            return n
        kept = []
        prior: set[str] = set()
        changed = False
        for item in n.children[ORDER].children:
            expr = item.children[0]
            if expr.kind == "attr":
                closure = _closure(n, ctx, prior)
                if expr.label in closure:
                    changed = True
                    continue
                prior.add(expr.label)
            elif expr.kind == "lit":
                changed = True
                continue
            kept.append(item)
        if not changed:
            return n
        return replace_at(n, (ORDER,), node("order", "", kept))
    return _map(root, fn)


def sem10_groupby_complete(root, ctx):
    def fn(n):
        if n.kind != "block" or not n.children[GROUP].children \
                or ctx.schema is None:
            return n
        group = n.children[GROUP].children
        seed = {c.label for c in group if c.kind == "attr"}
        if not seed:
            return n
        closure = _closure(n, ctx, seed)
        visible = set()
        for inst in block_instances(n):
            rel = ctx.relation_of(inst)
            if rel is not None:
                visible |= {f"{inst}.{a.name}" for a in rel.attributes}
        full = sorted(closure & visible)
        others = [c for c in group if c.kind != "attr"]
        new = [FlatNode("attr", a) for a in full] + others
        new_group = node("group", "", new)
        if new_group.serial == n.children[GROUP].serial:
            return n
        return replace_at(n, (GROUP,), new_group)
    return _map(root, fn)


RULE_FUNCS = {
    "SYN-1": _noop,
    "SYN-2": _noop,
    "SYN-3": syn3_between,
    "SYN-4": syn4_not,
    "SYN-5": syn5_direction,
    "SYN-6": syn6_in_some,
    "SYN-7": syn7_all_not_in,
    "SYN-8": syn8_subquery_distinct,
    "SYN-9": _noop,
    "SYN-10": syn10_subquery_order,
    "SYN-11": syn11_flatten,
    "SEM-1": sem1_distinct,
    "SEM-2": sem2_distinct_pullup,
    "SEM-3": sem3_redundant_join,
    "SEM-4": sem4_loj_null_reject,
    "SEM-5": sem5_loj_fk,
    "SEM-6": sem6_pushdown,
    "SEM-7": sem7_integer_strict,
    "SEM-8": sem8_eqclass_substitution,
    "SEM-9": sem9_orderby_prune,
    "SEM-10": sem10_groupby_complete,
}


# ---------------------------------------------------------------------------
# fixpoint driver
# ---------------------------------------------------------------------------

# Rule applications are pure in (schema, instance table, tree); the search
# canonicalizes thousands of closely related trees, so cache per rule.
_RULE_CACHE: dict[tuple, FlatNode] = {}


def _fixpoint(tree: FlatTree, schema, rules):
    ctx = Ctx(schema, tree.instance_table)
    root = normalize(tree.root, schema)
    base_key = (id(schema), tuple(sorted(tree.instance_table.items())))
    trace = []
    cap = 10 * root.size() + 20
    steps = 0
    changed = True
    while changed:
        changed = False
        for rid in rules:
            key = (base_key, rid, root.serial)
            new = _RULE_CACHE.get(key)
            if new is None:
                new = normalize(RULE_FUNCS[rid](root, ctx), schema)
                if len(_RULE_CACHE) > 500_000:
                    _RULE_CACHE.clear()
                _RULE_CACHE[key] = new
            if new.serial != root.serial:
                trace.append((rid, (), root.serial, new.serial))
                root = new
                changed = True
                steps += 1
                if steps > cap:
                    raise FixpointOverrun(
                        f"no fixpoint after {steps} rule applications")
    return tree.replace_root(root), trace


# Memoized syntactic fixpoint: search revisits the same intermediate trees
# many times, and the rewrite itself is pure in (schema, root serial).
_SYN_CACHE: dict[tuple[int, str], tuple[FlatNode, list]] = {}


def canonicalize_syntactic(tree: FlatTree, schema=None):
    key = (id(schema), tree.root.serial)
    hit = _SYN_CACHE.get(key)
    if hit is None:
        out, trace = _fixpoint(tree, schema, SYN_RULES)
        if len(_SYN_CACHE) > 200_000:
            _SYN_CACHE.clear()
        _SYN_CACHE[key] = (out.root, trace)
        return out, trace
    root, trace = hit
    return tree.replace_root(root), trace


def canonicalize_full(tree: FlatTree, schema: Schema, rule_order=None):
    rules = list(rule_order) if rule_order is not None else ALL_RULES
    return _fixpoint(tree, schema, rules)


def apply_rule(rule: str, tree: FlatTree, schema=None):
    ctx = Ctx(schema, tree.instance_table)
    new = normalize(RULE_FUNCS[rule](tree.root, ctx), schema)
    if new.serial == tree.root.serial:
        return None
    return tree.replace_root(new)


def equivalence_classes(tree: FlatTree):
    """All equivalence classes in the tree as sets of member labels."""
    out = []
    for n in tree.root.walk():
        if n.kind == "eqclass":
            out.append({c.label for c in n.children})
    return out


# Memoized full canonicalization for distance probes during search.
_FULL_CACHE: dict[tuple[int, str], FlatNode] = {}


def canonical_root(tree: FlatTree, schema) -> FlatNode:
    key = (id(schema), tree.root.serial)
    hit = _FULL_CACHE.get(key)
    if hit is None:
        hit = canonicalize_full(tree, schema)[0].root
        if len(_FULL_CACHE) > 200_000:
            _FULL_CACHE.clear()
        _FULL_CACHE[key] = hit
    return hit
