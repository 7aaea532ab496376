"""Guided edits of a student query toward a correct query.

Candidates come from clause-aligned differences between the two trees:
conditions present only in the correct query become inserts, conditions
present only in the student query become deletes, cross pairs become
replaces, and join/connective shape differences become flips.  Payloads are
always subtrees of the correct query (relabelled onto the student query's
relation instances), so the edit space is finite and every reachable tree
stays meaningful.  Every candidate is consistency-checked: an edit may not
leave an attribute reference without a providing relation.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .distance import (
    ComponentWeights, DEFAULT_WEIGHTS, _SRC_KINDS, component_counts,
    condition_class, _weighted,
)
from .errors import InconsistentEdit
from .flatten import normalize
from .tree import (
    COLS, DFLAG, GROUP, HAVING, LWRAP, ORDER, SRC, WHERE,
    EMPTY_PRED, FlatNode, FlatTree, SETOP_KINDS, attr_parts, node, node_at,
    provided_instances, replace_at,
)

MIN_COST = Fraction(1, 1_000_000)  # keeps search costs strictly positive

EDIT_KINDS = ("Insert", "Delete", "Replace", "Move", "Reorder",
              "JoinTypeFlip", "ConnectiveFlip")


@dataclass(frozen=True)
class Edit:
    kind: str
    target_path: tuple
    payload: FlatNode | None
    cost: Fraction
    description: str
    dest_path: tuple | None = None  # Move only: receiving wrapper

    def key(self):
        return (self.kind, self.target_path,
                self.payload.serial if self.payload else "",
                self.dest_path)


@dataclass(frozen=True)
class EditSequence:
    edits: tuple = ()
    total_cost: Fraction = Fraction(0)

    def add(self, e: Edit) -> "EditSequence":
        return EditSequence(self.edits + (e,), self.total_cost + e.cost)


# ---------------------------------------------------------------------------
# rendering for feedback text
# ---------------------------------------------------------------------------

_OPS = {"=": "=", "<>": "<>", "<": "<", "<=": "<=", "like": "LIKE",
        "not_like": "NOT LIKE"}


def _inst_name(inst: str) -> str:
    name, _, k = inst.rpartition("#")
    if not name:
        return inst
    return name if k == "1" else f"{name}({k})"


def render_sql(n: FlatNode) -> str:
    """Compact SQL-ish text of a subtree for student-facing descriptions."""
    k = n.kind
    if k == "attr":
        inst, name = attr_parts(n)
        return f"{_inst_name(inst)}.{name}"
    if k == "lit":
        typ, _, val = n.label.partition(":")
        if typ in ("text", "date"):
            return f"'{val}'"
        if typ == "null":
            return "NULL"
        return val
    if k == "cmp":
        a, b = n.children
        return f"{render_sql(a)} {_OPS.get(n.label, n.label)} {render_sql(b)}"
    if k == "eqclass":
        return " = ".join(render_sql(c) for c in n.children)
    if k == "and":
        return "(" + " AND ".join(render_sql(c) for c in n.children) + ")"
    if k == "or":
        return "(" + " OR ".join(render_sql(c) for c in n.children) + ")"
    if k == "not":
        return f"NOT ({render_sql(n.children[0])})"
    if k == "isnull":
        return f"{render_sql(n.children[0])} IS NULL"
    if k == "isnotnull":
        return f"{render_sql(n.children[0])} IS NOT NULL"
    if k == "exists":
        return "EXISTS (subquery)"
    if k == "not_exists":
        return "NOT EXISTS (subquery)"
    if k == "agg":
        if n.label == "count_star":
            return "COUNT(*)"
        func, _, d = n.label.partition("_")
        inner = render_sql(n.children[0])
        if n.label.endswith("_distinct"):
            return f"{n.label[:-9].upper()}(DISTINCT {inner})"
        return f"{n.label.upper()}({inner})"
    if k == "arith":
        return f"({render_sql(n.children[0])}{n.label})"
    if k == "sortitem":
        return f"{render_sql(n.children[0])} {n.label.upper()}"
    if k == "rel":
        return _inst_name(n.label)
    if k == "derived":
        return f"(subquery) AS {_inst_name(n.label)}"
    if k == "star":
        return "*"
    if k == "distinct":
        return "DISTINCT"
    if k == "limitval":
        return f"LIMIT {n.label}"
    if k in ("block", "scalarsub") or k in SETOP_KINDS:
        return "(subquery)"
    if k in ("ijoin", "loj", "foj"):
        names = sorted(_inst_name(i) for i in provided_instances(n))
        word = {"ijoin": "INNER JOIN", "loj": "LEFT OUTER JOIN",
                "foj": "FULL OUTER JOIN"}[k]
        return f"{word} of {', '.join(names)}"
    return n.serial


_CLASS_WORDS = {
    "selection_condition": "condition",
    "join_condition": "join condition",
    "having": "HAVING condition",
    "projection": "projected column",
    "group_by": "GROUP BY attribute",
    "order_by": "ORDER BY item",
    "relation": "relation",
    "limit": "LIMIT",
}


# ---------------------------------------------------------------------------
# consistency and application
# ---------------------------------------------------------------------------

# Free (unbound) instance references per subtree, memoized by serial: a
# block binds the instances its FROM clause provides, everything else just
# propagates its children's references upward.
_FREE_CACHE: dict[str, frozenset] = {}


def _free_insts(root: FlatNode) -> frozenset:
    hit = _FREE_CACHE.get(root.serial)
    if hit is not None:
        return hit
    if root.kind == "attr":
        inst = attr_parts(root)[0]
        out = frozenset() if inst == "out" else frozenset((inst,))
    else:
        out = frozenset()
        for c in root.children:
            out |= _free_insts(c)
        if root.kind == "block":
            out -= provided_instances(root.children[SRC])
    if len(_FREE_CACHE) > 1_000_000:
        _FREE_CACHE.clear()
    _FREE_CACHE[root.serial] = out
    return out


def validate_scope(root: FlatNode, visible=frozenset()) -> bool:
    """Every attribute reference must name a visible relation instance."""
    return _free_insts(root) <= visible


_WRAPPERS = {"where", "pred", "cols", "group", "having", "order", "dflag",
             "lwrap", "ijoin", "and", "or", "eqclass"}


def _apply_root(root: FlatNode, e: Edit) -> FlatNode:
    if e.kind in ("Replace", "Reorder", "JoinTypeFlip", "ConnectiveFlip"):
        return replace_at(root, e.target_path, e.payload)
    if e.kind == "Insert":
        return _insert_at(root, e.target_path, e.payload)
    if e.kind == "Delete":
        return _delete_at(root, e.target_path)
    if e.kind == "Move":
        pruned = _delete_at(root, e.target_path)
        # Unordered wrappers re-sort on rebuild, so the destination path may
        # have gone stale; it must still name a wrapper to receive the node.
        dest = node_at(pruned, e.dest_path)
        if dest.kind not in _WRAPPERS:
            raise InconsistentEdit("move destination is gone")
        return _insert_at(pruned, e.dest_path, e.payload)
    raise InconsistentEdit(f"unknown edit kind {e.kind}")


def _insert_at(root: FlatNode, wrapper_path, payload) -> FlatNode:
    target = node_at(root, wrapper_path)
    if target.kind in _WRAPPERS:
        return replace_at(
            root, wrapper_path,
            node(target.kind, target.label, tuple(target.children)
                 + (payload,)))
    if target.kind in _SRC_KINDS and payload.kind in ("rel", "derived"):
        joined = node("ijoin", "", (EMPTY_PRED, target, payload))
        return replace_at(root, wrapper_path, joined)
    raise InconsistentEdit(
        f"cannot insert into a {target.kind} node")


def _delete_at(root: FlatNode, path) -> FlatNode:
    if not path:
        raise InconsistentEdit("cannot delete the query root")
    parent = node_at(root, path[:-1])
    idx = path[-1]
    if idx >= len(parent.children):
        raise InconsistentEdit("stale edit path")
    kept = parent.children[:idx] + parent.children[idx + 1:]
    if parent.kind in ("ijoin",) and len(kept) < 2:
        raise InconsistentEdit("join must keep at least one input")
    if parent.kind == "block":
        raise InconsistentEdit("block slots cannot be deleted")
    return replace_at(root, path[:-1], node(parent.kind, parent.label, kept))


def apply_edit(t: FlatTree, e: Edit, schema=None) -> FlatTree:
    new_root = normalize(_apply_root(t.root, e), schema)
    if not validate_scope(new_root):
        raise InconsistentEdit(
            f"edit leaves a dangling attribute reference: {e.description}")
    return t.replace_root(new_root)


def check_consistency(t: FlatTree, e: Edit, schema=None) -> bool:
    try:
        apply_edit(t, e, schema)
        return True
    except (InconsistentEdit, IndexError, KeyError):
        return False


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------

def _instance_map(sq: FlatTree, cq: FlatTree) -> dict:
    """Correct-query instances -> student instances, paired per relation
    name in occurrence order."""
    def by_name(tree):
        out = {}
        for n in tree.root.walk():
            if n.kind == "rel":
                name, _, k = n.label.rpartition("#")
                out.setdefault(name, []).append((int(k), n.label))
        return {k: [l for _, l in sorted(v)] for k, v in out.items()}
    s_by, c_by = by_name(sq), by_name(cq)
    mapping = {}
    for name, c_insts in c_by.items():
        s_insts = s_by.get(name, [])
        for i, ci in enumerate(c_insts):
            mapping[ci] = s_insts[i] if i < len(s_insts) else ci
    return mapping


def _remap(n: FlatNode, mapping) -> FlatNode:
    if n.kind == "attr":
        inst, name = attr_parts(n)
        return FlatNode("attr", f"{mapping.get(inst, inst)}.{name}")
    if n.kind == "rel":
        return node("rel", mapping.get(n.label, n.label),
                    [_remap(c, mapping) for c in n.children])
    return node(n.kind, n.label, [_remap(c, mapping) for c in n.children])


class _Generator:
    def __init__(self, sq: FlatTree, cq: FlatTree, w: ComponentWeights,
                 schema=None):
        self.sq = sq
        self.cq = cq
        self.w = w
        self.schema = schema
        self.map = _instance_map(sq, cq)
        self.out = {}
        # for Move edits: leftover items per component class
        self.spare_deletes = {}   # cls -> [(path, node)]
        self.spare_inserts = {}   # cls -> [(wrapper path, node)]

    def cost_of(self, n: FlatNode, cls) -> Fraction:
        c = _weighted(component_counts(n, cls), self.w)
        return max(c, MIN_COST)

    def emit(self, e: Edit):
        if e.key() in self.out:
            return
        if e.kind == "Replace" and e.payload is not None:
            try:
                cur = node_at(self.sq.root, e.target_path)
            except (IndexError, KeyError):
                return
            if cur.serial == e.payload.serial:
                return  # replacing a node with itself
        try:
            edited = apply_edit(self.sq, e, self.schema)
        except InconsistentEdit:
            return
        if edited.root.serial == self.sq.root.serial:
            return
        self.out[e.key()] = (e, edited)

    def run(self):
        self.pair_query(self.sq.root, self.cq.root, ())
        self.moves()
        return sorted(self.out.values(),
                      key=lambda p: (p[0].cost, p[0].description))

    # -- query-level pairing ------------------------------------------------

    def pair_query(self, s: FlatNode, c: FlatNode, path):
        if s.kind == "block" and c.kind == "block":
            self.pair_block(s, c, path)
            return
        if s.kind in SETOP_KINDS and c.kind in SETOP_KINDS:
            if s.kind != c.kind:
                self.emit(Edit(
                    "Replace", path, node(c.kind, "", s.children),
                    max(self.w.of("set_operator"), MIN_COST),
                    f"change the set operator to {c.kind.upper().replace('_ALL', ' ALL')}"))
            self.pair_branches(s, c, path)
            return
        # Shape mismatch: offer the wholesale rewrite so every pair stays
        # reachable (worst case per the guided-edit contract).
        payload = _remap(c, self.map)
        self.emit(Edit("Replace", path, payload,
                       self.cost_of(payload, None),
                       "rewrite this part of the query"))

    def pair_branches(self, s: FlatNode, c: FlatNode, path):
        used = set()
        pairs = []
        for i, sb in enumerate(s.children):
            best = None
            for j, cb in enumerate(c.children):
                if j in used:
                    continue
                score = 0 if sb.serial == cb.serial else 1
                if best is None or score < best[0]:
                    best = (score, j)
                if score == 0:
                    break
            if best is not None:
                used.add(best[1])
                pairs.append((i, best[1]))
        for i, j in pairs:
            self.pair_query(s.children[i], c.children[j], path + (i,))
        for j, cb in enumerate(c.children):
            if j not in used:
                payload = _remap(cb, self.map)
                self.emit(Edit("Insert", path, payload,
                               self.cost_of(payload, None),
                               "add a missing branch to the set operation"))
        matched_s = {i for i, _ in pairs}
        for i, sb in enumerate(s.children):
            if i not in matched_s:
                self.emit(Edit("Delete", path + (i,), None,
                               self.cost_of(sb, None),
                               "remove an extra branch of the set operation"))

    # -- block-level pairing ------------------------------------------------

    def pair_block(self, s: FlatNode, c: FlatNode, path, under_exists=False):
        self.conditions(s, c, path)
        self.relations(s, c, path)
        self.joins(s, c, path)
        if not under_exists:
            self.slot_pool(s, c, path, COLS, "projection")
        self.slot_pool(s, c, path, GROUP, "group_by")
        self.distinct(s, c, path)
        self.order(s, c, path)
        self.limit(s, c, path)
        src_s, src_c = s.children[SRC], c.children[SRC]
        if not (src_s.kind in _SRC_KINDS and src_c.kind in _SRC_KINDS):
            self.pair_query(src_s, src_c, path + (SRC,))
        self.derived_tables(s, c, path)

    def _wrappers(self, b: FlatNode):
        """(wrapper path rel. to block, clause class) of the region plus
        HAVING; ON wrappers of outer joins are included as join conditions."""
        out = [((WHERE,), "selection_condition"),
               ((HAVING,), "having")]

        def go(n, p):
            if n.kind in ("rel", "derived"):
                out.append((p + (0,), "selection_condition"))
            elif n.kind == "ijoin":
                out.append((p + (0,), "ijoin_on"))
                for i in range(1, len(n.children)):
                    go(n.children[i], p + (i,))
            elif n.kind in ("loj", "foj"):
                out.append((p + (0,), "join_condition"))
                go(n.children[1], p + (1,))
                go(n.children[2], p + (2,))
        if b.children[SRC].kind in _SRC_KINDS:
            go(b.children[SRC], (SRC,))
        return out

    def conditions(self, s: FlatNode, c: FlatNode, path):
        def resolve(cond, cls):
            if cls == "ijoin_on":
                return condition_class(cond, "join_condition")
            return cls

        s_items = []   # (abs path, node, cls)
        for wp, cls in self._wrappers(s):
            w = node_at(s, wp)
            for i, cond in enumerate(w.children):
                s_items.append((path + wp + (i,), cond, resolve(cond, cls)))
        c_items = []   # (remapped node, cls)
        for wp, cls in self._wrappers(c):
            w = node_at(c, wp)
            for cond in w.children:
                cn = _remap(cond, self.map)
                c_items.append((cn, resolve(cn, cls)))
        # cancel exact matches
        s_left, c_left = self._cancel(
            s_items, c_items, skey=lambda it: it[1].serial,
            ckey=lambda it: it[0].serial)
        where_path = path + (WHERE,)
        having_path = path + (HAVING,)
        for cn, cls in c_left:
            target = having_path if cls == "having" else where_path
            self.emit(Edit("Insert", target, cn, self.cost_of(cn, cls),
                           f"add the {_CLASS_WORDS[cls]} {render_sql(cn)}"))
            self.spare_inserts.setdefault("condition", []).append(
                (target, cn))
        for sp, sn, cls in s_left:
            self.emit(Edit("Delete", sp, None, self.cost_of(sn, cls),
                           f"remove the {_CLASS_WORDS[cls]} {render_sql(sn)}"))
            self.spare_deletes.setdefault("condition", []).append((sp, sn))
        for sp, sn, scls in s_left:
            for cn, ccls in c_left:
                self.emit(Edit(
                    "Replace", sp, cn, self.cost_of(cn, ccls),
                    f"replace the {_CLASS_WORDS[scls]} {render_sql(sn)} "
                    f"with {render_sql(cn)}"))
                if {sn.kind, cn.kind} == {"exists", "not_exists"} \
                        and sn.kind != cn.kind:
                    self.emit(Edit(
                        "ConnectiveFlip", sp,
                        node(cn.kind, "", sn.children),
                        max(self.w.of("subquery_connective"), MIN_COST),
                        f"change {'EXISTS' if sn.kind == 'exists' else 'NOT EXISTS'}"
                        f" to {'EXISTS' if cn.kind == 'exists' else 'NOT EXISTS'}"))
        # recurse into paired subquery connectives
        self._recurse_subqueries(s_items, c_items, path)

    def _recurse_subqueries(self, s_items, c_items, path):
        conn = ("exists", "not_exists")
        s_subs = [(p, n) for p, n, _ in s_items
                  if n.kind in conn and n.children[0].kind == "block"]
        c_subs = [n for n, _ in c_items
                  if n.kind in conn and n.children[0].kind == "block"]
        used = set()
        for sp, sn in s_subs:
            for j, cn in enumerate(c_subs):
                if j in used:
                    continue
                used.add(j)
                self.pair_block(sn.children[0], cn.children[0], sp + (0,),
                                under_exists=True)
                break

    def _cancel(self, s_items, c_items, skey, ckey):
        pool = {}
        for it in c_items:
            pool.setdefault(ckey(it), []).append(it)
        s_left = []
        for it in s_items:
            lst = pool.get(skey(it))
            if lst:
                lst.pop()
            else:
                s_left.append(it)
        c_left = [it for lst in pool.values() for it in lst]
        return s_left, c_left

    def relations(self, s: FlatNode, c: FlatNode, path):
        if s.children[SRC].kind not in _SRC_KINDS \
                or c.children[SRC].kind not in _SRC_KINDS:
            return
        s_rels = []   # (abs path, node)

        def go(n, p):
            if n.kind == "rel":
                s_rels.append((p, n))
            elif n.kind in ("ijoin", "loj", "foj"):
                for i in range(1, len(n.children)):
                    go(n.children[i], p + (i,))
        go(s.children[SRC], path + (SRC,))
        c_rels = [_remap(n, self.map) for n in c.children[SRC].walk()
                  if n.kind == "rel"]
        s_left, c_left = self._cancel(
            [(p, node("rel", n.label)) for p, n in s_rels], c_rels,
            skey=lambda it: it[1].label, ckey=lambda n: n.label)
        for cn in c_left:
            self.emit(Edit("Insert", path + (SRC,),
                           node("rel", cn.label, (EMPTY_PRED,)),
                           max(self.w.of("relation"), MIN_COST),
                           f"add the relation {_inst_name(cn.label)} "
                           "to the FROM clause"))
        for sp, sn in s_left:
            self.emit(Edit("Delete", sp, None,
                           max(self.w.of("relation"), MIN_COST),
                           f"remove the relation {_inst_name(sn.label)} "
                           "from the FROM clause"))

    def joins(self, s: FlatNode, c: FlatNode, path):
        src_s, src_c = s.children[SRC], c.children[SRC]
        if src_s.kind not in _SRC_KINDS or src_c.kind not in _SRC_KINDS:
            return
        s_lojs = []

        def find(n, p, acc):
            if n.kind == "loj":
                acc.append((p, n))
                find(n.children[1], p + (1,), acc)
            elif n.kind == "ijoin":
                for i in range(1, len(n.children)):
                    find(n.children[i], p + (i,), acc)
        find(src_s, path + (SRC,), s_lojs)
        c_lojs = []
        find(src_c, (), c_lojs)
        c_lojs = [n for _, n in c_lojs]
        # LEFT OUTER -> INNER: flip any student outer join whose shape the
        # correct query does not use
        c_right_names = [
            frozenset(i.rsplit("#", 1)[0] for i in provided_instances(n.children[2]))
            for n in c_lojs]
        for sp, sn in s_lojs:
            right_names = frozenset(i.rsplit("#", 1)[0]
                                    for i in provided_instances(sn.children[2]))
            if right_names not in c_right_names:
                self.emit(Edit(
                    "JoinTypeFlip", sp, node("ijoin", "", sn.children),
                    max(self.w.of("join_operator"), MIN_COST),
                    "change the LEFT OUTER JOIN on "
                    f"{', '.join(sorted(_inst_name(i) for i in provided_instances(sn.children[2])))}"
                    " to an INNER JOIN"))
        # INNER -> LEFT OUTER: build the partitioning the correct query uses
        s_right_names = [
            frozenset(i.rsplit("#", 1)[0] for i in provided_instances(n.children[2]))
            for _, n in s_lojs]
        if src_s.kind == "ijoin":
            for cn, names in zip(c_lojs, c_right_names):
                if names in s_right_names:
                    continue
                flipped = self._partition_loj(src_s, names)
                if flipped is not None:
                    self.emit(Edit(
                        "JoinTypeFlip", path + (SRC,), flipped,
                        max(self.w.of("join_operator"), MIN_COST),
                        "change the INNER JOIN on "
                        f"{', '.join(sorted(names))} to a LEFT OUTER JOIN"))

    def _partition_loj(self, ijoin: FlatNode, right_names) -> FlatNode | None:
        """Split a flattened inner join into LEFT OUTER JOIN(left, right),
        the partitioning taken from the correct query's outer join."""
        rights, lefts = [], []
        need = Counter(right_names)
        for child in ijoin.children[1:]:
            name = child.label.rsplit("#", 1)[0] \
                if child.kind in ("rel", "derived") else None
            if name is not None and need.get(name, 0) > 0:
                need[name] -= 1
                rights.append(child)
            else:
                lefts.append(child)
        if not rights or not lefts or +need:
            return None
        right_insts = {c.label for c in rights}
        on, keep = [], []
        for cond in ijoin.children[0].children:
            insts = {attr_parts(m)[0] for m in cond.walk()
                     if m.kind == "attr"}
            (on if insts & right_insts else keep).append(cond)
        def bundle(parts, conds):
            if len(parts) == 1 and not conds:
                return parts[0]
            return node("ijoin", "", (node("pred", "", conds), *parts))
        return node("loj", "", (node("pred", "", on),
                                bundle(lefts, keep), bundle(rights, [])))

    def slot_pool(self, s, c, path, slot, cls):
        sw, cw = s.children[slot], c.children[slot]
        if sw.serial == cw.serial:
            return
        s_items = [(path + (slot, i), n) for i, n in enumerate(sw.children)]
        c_items = [_remap(n, self.map) for n in cw.children]
        s_left, c_left = self._cancel(
            s_items, c_items, skey=lambda it: it[1].serial,
            ckey=lambda n: n.serial)
        word = _CLASS_WORDS[cls]
        for cn in c_left:
            self.emit(Edit("Insert", path + (slot,), cn,
                           self.cost_of(cn, cls),
                           f"add the {word} {render_sql(cn)}"))
            self.spare_inserts.setdefault(cls, []).append((path + (slot,), cn))
        for sp, sn in s_left:
            self.emit(Edit("Delete", sp, None, self.cost_of(sn, cls),
                           f"remove the {word} {render_sql(sn)}"))
            self.spare_deletes.setdefault(cls, []).append((sp, sn))
        for sp, sn in s_left:
            for cn in c_left:
                self.emit(Edit("Replace", sp, cn, self.cost_of(cn, cls),
                               f"replace the {word} {render_sql(sn)} "
                               f"with {render_sql(cn)}"))

    def distinct(self, s, c, path):
        sd = bool(s.children[DFLAG].children)
        cd = bool(c.children[DFLAG].children)
        if sd == cd:
            return
        cost = max(self.w.of("distinct"), MIN_COST)
        if cd:
            self.emit(Edit("Insert", path + (DFLAG,), node("distinct"),
                           cost, "add DISTINCT to the SELECT clause"))
        else:
            self.emit(Edit("Delete", path + (DFLAG, 0), None, cost,
                           "remove DISTINCT from the SELECT clause"))

    def order(self, s, c, path):
        sw, cw = s.children[ORDER], c.children[ORDER]
        if sw.serial == cw.serial:
            return
        c_mapped = node("order", "",
                        [_remap(n, self.map) for n in cw.children])
        s_multi = sorted(n.serial for n in sw.children)
        c_multi = sorted(n.serial for n in c_mapped.children)
        if s_multi == c_multi:
            cost = max(
                Fraction(1, 2) * _weighted(
                    component_counts(c_mapped, None), self.w), MIN_COST)
            self.emit(Edit("Reorder", path + (ORDER,), c_mapped, cost,
                           "reorder the ORDER BY items to "
                           + ", ".join(render_sql(n)
                                       for n in c_mapped.children)))
            return
        self.slot_pool(s, c, path, ORDER, "order_by")
        if sw.children and c_mapped.children:
            self.emit(Edit("Replace", path + (ORDER,), c_mapped,
                           self.cost_of(c_mapped, None),
                           "set the ORDER BY clause to "
                           + ", ".join(render_sql(n)
                                       for n in c_mapped.children)))

    def limit(self, s, c, path):
        sw, cw = s.children[LWRAP], c.children[LWRAP]
        if sw.serial == cw.serial:
            return
        cost = max(self.w.of("limit"), MIN_COST)
        if cw.children and sw.children:
            self.emit(Edit("Replace", path + (LWRAP, 0), cw.children[0],
                           cost, f"change the LIMIT to {cw.children[0].label}"))
        elif cw.children:
            self.emit(Edit("Insert", path + (LWRAP,), cw.children[0], cost,
                           f"add LIMIT {cw.children[0].label}"))
        else:
            self.emit(Edit("Delete", path + (LWRAP, 0), None, cost,
                           "remove the LIMIT clause"))

    def derived_tables(self, s, c, path):
        def find(b):
            out = []

            def go(n, p):
                if n.kind == "derived":
                    out.append((p, n))
                elif n.kind in ("ijoin", "loj", "foj"):
                    for i in range(1, len(n.children)):
                        go(n.children[i], p + (i,))
            if b.children[SRC].kind in _SRC_KINDS:
                go(b.children[SRC], (SRC,))
            return out
        s_ds = find(s)
        c_ds = find(c)
        used = set()
        for sp, sn in s_ds:
            for j, (_, cn) in enumerate(c_ds):
                if j in used:
                    continue
                used.add(j)
                if sn.children[1].kind == "block" \
                        and cn.children[1].kind == "block":
                    self.pair_block(sn.children[1], cn.children[1],
                                    path + sp + (1,))
                break
            else:
                self.emit(Edit("Delete", path + sp, None,
                               self.cost_of(sn, None),
                               "remove the FROM-clause subquery "
                               f"{_inst_name(sn.label)}"))
        for j, (_, cn) in enumerate(c_ds):
            if j not in used:
                payload = _remap(cn, self.map)
                self.emit(Edit("Insert", path + (SRC,), payload,
                               self.cost_of(payload, None),
                               "add a FROM-clause subquery "
                               f"{_inst_name(cn.label)}"))

    def moves(self):
        for cls, dels in self.spare_deletes.items():
            for ins_path, cn in self.spare_inserts.get(cls, []):
                for dp, sn in dels:
                    if sn.serial != cn.serial:
                        continue
                    cost = max(
                        Fraction(1, 2) * _weighted(
                            component_counts(sn, None), self.w), MIN_COST)
                    self.emit(Edit("Move", dp, cn, cost,
                                   f"move {render_sql(sn)} to its proper "
                                   "place in the query",
                                   dest_path=ins_path))


def enumerate_edits(sq: FlatTree, cq: FlatTree,
                    w: ComponentWeights = DEFAULT_WEIGHTS, schema=None):
    """All guided single edits of sq toward cq, with their edited trees."""
    return _Generator(sq, cq, w, schema).run()


# ---------------------------------------------------------------------------
# WITH-expansion cost adjustment
# ---------------------------------------------------------------------------

def adjust_with_cost(seq: EditSequence, origin: dict) -> EditSequence:
    """Bill identical fixes inside multiple expansions of one WITH binding
    once.  `origin` maps instance ids to (binding, occurrence, local id)."""
    if not origin or not seq.edits:
        return seq
    return EditSequence(seq.edits,
                        adjusted_cost(seq.edits, origin,
                                      _origin_token(origin)))


def adjusted_cost(edits, origin, otoken) -> Fraction:
    seen = set()
    total = Fraction(0)
    for e in edits:
        fp, occs = _fingerprint(e, origin, otoken)
        if fp is None:
            total += e.cost
        elif fp not in seen:
            seen.add(fp)
            total += e.cost  # duplicates of one fix bill once
    return total


_INST_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*#[0-9]+")

# A search calls adjust_with_cost on every growing sequence, re-deriving
# the same edit fingerprints thousands of times; memoize them by content.
_FP_CACHE: dict[tuple, tuple] = {}


def _origin_token(origin: dict) -> tuple:
    return tuple(sorted(origin.items()))


def _fingerprint(e: Edit, origin, otoken=None):
    if otoken is None:
        otoken = _origin_token(origin)
    key = (otoken, e.kind, e.description,
           e.payload.serial if e.payload else "")
    hit = _FP_CACHE.get(key)
    if hit is None:
        if len(_FP_CACHE) > 500_000:
            _FP_CACHE.clear()
        hit = _FP_CACHE[key] = _fingerprint_uncached(e, origin)
    return hit


def _fingerprint_uncached(e: Edit, origin):
    """Edit identity with WITH-expansion instances replaced by their
    binding-local names; None when the edit touches no expansion."""
    desc = re.sub(r"\((\d+)\)", "", e.description)
    text = "|".join([e.kind, e.payload.serial if e.payload else "", desc])
    occs = set()

    def sub(m):
        inst = m.group(0)
        if inst in origin:
            binding, occ, local = origin[inst]
            occs.add((binding, occ))
            return f"{binding}::{local}"
        return inst
    out = _INST_RE.sub(sub, text)
    if not occs:
        return None, ()
    return out, tuple(sorted(occs))
