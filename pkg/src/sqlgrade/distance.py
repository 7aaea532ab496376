"""Weighted edit distance between two flattened query trees.

Every billable node belongs to a component class (relation, join_condition,
selection_condition, projection, ...) with an instructor-assigned weight.
The distance matches the two trees clause-to-clause: fixed block slots align
positionally, unordered children (inner-join inputs, conjuncts, projections)
are paired by a minimum-cost assignment, ordered children (ORDER BY items,
EXCEPT branches) by sequence edit distance.  Each mismatched node bills one
edit to its class; a subtree present on only one side bills all of its
billable nodes.  The result carries per-class edit counts E_c and node
counts N_c so marks can be computed as
max(0, sum(W_c*N_c) - sum(W_c*E_c)) / sum(W_c*N_c) * max_marks.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DegenerateTotal
from .tree import (
    COLS, DFLAG, GROUP, HAVING, LWRAP, ORDER, SRC, WHERE,
    FlatNode, FlatTree,
)

COMPONENT_CLASSES = (
    "relation", "join_operator", "join_condition", "selection_condition",
    "projection", "distinct", "group_by", "having", "aggregate", "order_by",
    "set_operator", "subquery_connective", "limit",
)

_SETOPS = {"union", "union_all", "intersect", "intersect_all",
           "except", "except_all"}
_CONNECTIVES = {"exists", "not_exists", "inpred", "quant", "scalarsub"}

# Kinds whose remaining children are matched as an unordered multiset.
_UNORDERED = {"ijoin", "union", "union_all", "intersect", "intersect_all",
              "where", "cols", "group", "having", "pred", "and", "or",
              "eqclass", "dflag", "lwrap"}
# Kinds with a leading run of positionally aligned children.
_FIXED = {"rel": 1, "derived": 2, "loj": 3, "foj": 3, "block": 8}

_SRC_KINDS = {"rel", "derived", "ijoin", "loj", "foj"}


class _Region:
    """Clause pools of one conjunctive FROM/WHERE region."""
    __slots__ = ("n_ijoin", "rels", "jconds", "sels", "deriveds", "lojs",
                 "fojs")

    def __init__(self):
        self.n_ijoin = 0
        self.rels = []      # relation instance labels
        self.jconds = []    # inner-join condition conjuncts
        self.sels = []      # selection conjuncts pushed onto sources
        self.deriveds = []  # inner query blocks of derived tables
        self.lojs = []      # (on conjuncts, right subtree, whole node)
        self.fojs = []      # whole nodes


def _decompose(src: FlatNode) -> _Region:
    r = _Region()

    def go(n):
        if n.kind == "rel":
            r.rels.append(n.label)
            r.sels.extend(n.children[0].children)
        elif n.kind == "derived":
            r.deriveds.append(n.children[1])
            r.sels.extend(n.children[0].children)
        elif n.kind == "ijoin":
            r.n_ijoin += 1
            r.jconds.extend(n.children[0].children)
            for c in n.children[1:]:
                go(c)
        elif n.kind == "loj":
            go(n.children[1])
            r.lojs.append((n.children[0].children, n.children[2], n))
        elif n.kind == "foj":
            r.fojs.append(n)
    go(src)
    return r


@dataclass(frozen=True)
class ComponentWeights:
    """Per-component-class weights; unlisted classes default to 1."""
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        norm = {}
        for k, v in self.weights.items():
            if k not in COMPONENT_CLASSES:
                raise ValueError(f"unknown component class {k!r}")
            f = Fraction(v)
            if f < 0:
                raise ValueError(f"negative weight for {k}")
            norm[k] = f
        if norm and all(v == 0 for v in norm.values()) \
                and len(norm) == len(COMPONENT_CLASSES):
            raise ValueError("all component weights are zero")
        object.__setattr__(self, "weights", norm)

    def of(self, cls) -> Fraction:
        if cls is None:
            return Fraction(0)
        return self.weights.get(cls, Fraction(1))


DEFAULT_WEIGHTS = ComponentWeights()


@dataclass(frozen=True)
class DistanceBreakdown:
    edits: dict          # component class -> E_c
    nodes: dict          # component class -> N_c of the correct query
    total: Fraction      # sum W_c * E_c

    def as_rows(self, w: ComponentWeights):
        rows = []
        for cls in COMPONENT_CLASSES:
            e = self.edits.get(cls, 0)
            n = self.nodes.get(cls, 0)
            if e or n:
                rows.append((cls, n, e, w.of(cls), w.of(cls) * e))
        return rows


def node_class(n: FlatNode, inherited):
    """The component class a node bills to, given its clause context."""
    k = n.kind
    if k in ("rel", "derived"):
        return "relation"
    if k in ("ijoin", "loj", "foj"):
        return "join_operator"
    if k in _SETOPS:
        return "set_operator"
    if k in _CONNECTIVES:
        return "subquery_connective"
    if k == "distinct":
        return "distinct"
    if k == "limitval":
        return "limit"
    if k == "agg":
        return "aggregate"
    if k == "sortitem":
        return "order_by"
    if k in ("block", "where", "cols", "dflag", "group", "having", "order",
             "lwrap", "pred"):
        return None
    return inherited


def _instances_in(n: FlatNode, acc: set):
    if n.kind == "attr":
        acc.add(n.label.split(".", 1)[0])
    for c in n.children:
        _instances_in(c, acc)


def condition_class(n: FlatNode, positional):
    """A conjunct parked in an inner-join ON slot only counts as a join
    condition if it actually relates two relation instances; a one-instance
    conjunct there is a selection that has not been pushed down yet."""
    if positional != "join_condition" or n.kind in _CONNECTIVES:
        return positional
    acc: set = set()
    _instances_in(n, acc)
    return "join_condition" if len(acc) >= 2 else "selection_condition"


def child_contexts(n: FlatNode, cls):
    """Clause context for each child of n."""
    k = n.kind
    if k == "block":
        return [None, "selection_condition", "projection", None, "group_by",
                "having", "order_by", None]
    if k == "pred":
        if cls == "ijoin_on":
            return [condition_class(c, "join_condition")
                    for c in n.children]
        return [cls] * len(n.children)
    if k in ("rel", "derived"):
        return ["selection_condition"] + [None] * (len(n.children) - 1)
    if k == "ijoin":
        return ["ijoin_on"] + [None] * (len(n.children) - 1)
    if k in ("loj", "foj"):
        return ["join_condition"] + [None] * (len(n.children) - 1)
    if k == "where":
        return ["selection_condition"] * len(n.children)
    if k == "cols":
        return ["projection"] * len(n.children)
    if k == "group":
        return ["group_by"] * len(n.children)
    if k == "having":
        return ["having"] * len(n.children)
    if k == "order":
        return ["order_by"] * len(n.children)
    if k == "agg":
        return ["aggregate"] * len(n.children)
    if k in _CONNECTIVES or k in _SETOPS:
        return [None] * len(n.children)
    return [node_class(n, cls) or cls] * len(n.children)


def component_counts(n: FlatNode, cls=None) -> Counter:
    """N_c: billable nodes per component class in the subtree."""
    out = Counter()
    c = node_class(n, cls)
    if c is not None:
        out[c] += 1
    for child, ctx in zip(n.children, child_contexts(n, cls)):
        out += component_counts(child, ctx)
    return out


def _weighted(counts: Counter, w: ComponentWeights) -> Fraction:
    return sum((w.of(c) * k for c, k in counts.items()), Fraction(0))


class _Engine:
    def __init__(self, w: ComponentWeights):
        self.w = w
        self._memo = {}
        self._counts = {}

    def counts(self, n, cls) -> Counter:
        key = (n.serial, cls)
        hit = self._counts.get(key)
        if hit is None:
            hit = component_counts(n, cls)
            self._counts[key] = hit
        return hit

    def cost(self, counts: Counter) -> Fraction:
        return _weighted(counts, self.w)

    def dist(self, x: FlatNode, y: FlatNode, cls) -> Counter:
        if x.serial == y.serial:
            return Counter()
        key = (x.serial, y.serial, cls)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._dist(x, y, cls)
            self._memo[key] = hit
        return hit

    def _replace(self, x, y, cls) -> Counter:
        # A whole-subtree replacement bills the larger side's nodes, so a
        # replace is never cheaper than deleting the smaller subtree.
        cx, cy = self.counts(x, cls), self.counts(y, cls)
        return cy if self.cost(cy) >= self.cost(cx) else cx

    def _dist(self, x: FlatNode, y: FlatNode, cls) -> Counter:
        if x.kind != y.kind:
            return self._replace(x, y, cls)
        if x.kind == "block":
            return self._block_dist(x, y)
        total = Counter()
        if x.label != y.label:
            c = node_class(x, cls)
            if c is not None:
                total[c] += 1
        ctxs_x = child_contexts(x, cls)
        ctxs_y = child_contexts(y, cls)
        fixed = _FIXED.get(x.kind, 0)
        if x.kind in ("cmp", "between", "sortitem", "not", "isnull",
                      "isnotnull", "arith", "scalarsub", "exists",
                      "not_exists", "inpred", "quant", "except",
                      "except_all", "attr", "lit", "agg", "star",
                      "distinct", "limitval"):
            fixed = min(len(x.children), len(y.children))
        for i in range(fixed):
            xs = x.children[i] if i < len(x.children) else None
            ys = y.children[i] if i < len(y.children) else None
            if xs is None:
                total += self.counts(ys, ctxs_y[i])
            elif ys is None:
                total += self.counts(xs, ctxs_x[i])
            else:
                total += self.dist(xs, ys, ctxs_x[i])
        rest_x = list(zip(x.children[fixed:], ctxs_x[fixed:]))
        rest_y = list(zip(y.children[fixed:], ctxs_y[fixed:]))
        if not rest_x and not rest_y:
            return total
        if x.kind in _UNORDERED:
            total += self.unordered(rest_x, rest_y)
        else:
            total += self.ordered(rest_x, rest_y)
        return total

    def _block_dist(self, x: FlatNode, y: FlatNode) -> Counter:
        """Blocks compare clause-to-clause: the FROM/WHERE region is pooled
        (selections with selections, join conditions with join conditions,
        relations with relations), the remaining slots align positionally."""
        total = Counter()
        sx, sy = x.children[SRC], y.children[SRC]
        wx = [(c, "selection_condition") for c in x.children[WHERE].children]
        wy = [(c, "selection_condition") for c in y.children[WHERE].children]
        if sx.kind in _SRC_KINDS and sy.kind in _SRC_KINDS:
            total += self.region(sx, sy, wx, wy)
        else:
            total += self.dist(sx, sy, None)
            total += self.unordered(wx, wy)
        for slot in (COLS, DFLAG, GROUP, HAVING, ORDER, LWRAP):
            total += self.dist(x.children[slot], y.children[slot], None)
        return total

    def region(self, sx, sy, extra_x=(), extra_y=()) -> Counter:
        rx, ry = _decompose(sx), _decompose(sy)
        total = Counter()
        # join operators: flattened inner joins compare by count
        d = abs(rx.n_ijoin - ry.n_ijoin)
        if d:
            total["join_operator"] += d
        # relations: paired by instance label, then name; replace bills one
        cx, cy = Counter(rx.rels), Counter(ry.rels)
        common = sum((cx & cy).values())
        d = max(len(rx.rels), len(ry.rels)) - common
        if d:
            total["relation"] += d
        # conjunct pools
        total += self.unordered(
            [(c, condition_class(c, "join_condition")) for c in rx.jconds],
            [(c, condition_class(c, "join_condition")) for c in ry.jconds])
        total += self.unordered(
            [(c, "selection_condition") for c in rx.sels] + list(extra_x),
            [(c, "selection_condition") for c in ry.sels] + list(extra_y))
        # derived tables: the alias never matters, only the inner query
        total += self._unit_match(
            rx.deriveds, ry.deriveds,
            pair=lambda a, b: self.dist(a, b, None),
            solo=lambda a: self.counts(a, None) + Counter(relation=1))
        # outer joins carry their own ON pool and right-side region
        total += self._unit_match(
            rx.lojs, ry.lojs,
            pair=lambda a, b: self.unordered(
                [(c, "join_condition") for c in a[0]],
                [(c, "join_condition") for c in b[0]])
            + self.region(a[1], b[1]),
            solo=lambda a: self.counts(a[2], None))
        total += self._unit_match(
            rx.fojs, ry.fojs,
            pair=lambda a, b: self.dist(a, b, None),
            solo=lambda a: self.counts(a, None))
        return total

    def _unit_match(self, xs, ys, pair, solo) -> Counter:
        if not xs and not ys:
            return Counter()
        if len(xs) > len(ys):
            xs, ys = ys, xs
        n, m = len(xs), len(ys)
        best = None
        # unit lists are tiny (rarely more than two derived tables or
        # outer joins per block), so exhaustive pairing is fine
        from itertools import permutations
        for perm in permutations(range(m), n):
            acc = Counter()
            for i, j in enumerate(perm):
                acc += pair(xs[i], ys[j])
            for j in set(range(m)) - set(perm):
                acc += solo(ys[j])
            if best is None or self.cost(acc) < self.cost(best):
                best = acc
        return best

    def ordered(self, xs, ys) -> Counter:
        """Sequence edit distance with subtree insert/delete/substitute."""
        n, m = len(xs), len(ys)
        dp = [[None] * (m + 1) for _ in range(n + 1)]
        dp[0][0] = Counter()
        for i in range(1, n + 1):
            dp[i][0] = dp[i - 1][0] + self.counts(*xs[i - 1])
        for j in range(1, m + 1):
            dp[0][j] = dp[0][j - 1] + self.counts(*ys[j - 1])
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                cands = [
                    dp[i - 1][j] + self.counts(*xs[i - 1]),
                    dp[i][j - 1] + self.counts(*ys[j - 1]),
                    dp[i - 1][j - 1] + self.dist(xs[i - 1][0], ys[j - 1][0],
                                                 xs[i - 1][1]),
                ]
                dp[i][j] = min(cands, key=self.cost)
        return dp[n][m]

    def unordered(self, xs, ys) -> Counter:
        """Minimum-cost matching; unmatched items bill their full subtree."""
        # Identical subtrees pair up for free first.
        pool = {}
        for j, (yn, yc) in enumerate(ys):
            pool.setdefault(yn.serial, []).append(j)
        used = set()
        rx = []
        for xn, xc in sorted(xs, key=lambda p: p[0].serial):
            js = pool.get(xn.serial)
            if js:
                used.add(js.pop())
            else:
                rx.append((xn, xc))
        ry = [p for j, p in enumerate(ys) if j not in used]
        ry.sort(key=lambda p: p[0].serial)
        if not rx and not ry:
            return Counter()
        if len(rx) > len(ry):
            rx, ry = ry, rx
        pair = [[self.dist(a, b, ac) for b, _ in ry] for a, ac in rx]
        del_y = [self.counts(b, bc) for b, bc in ry]
        if not rx:
            return sum(del_y, Counter())
        n, m = len(rx), len(ry)
        if m <= 12:
            # Exact assignment over column subsets; row i >= n stands for
            # an unmatched (fully billed) right-side item.
            def cell(i, j):
                return pair[i][j] if i < n else del_y[j]
            dp = {0: Counter()}
            for i in range(m):
                nxt = {}
                for mask, acc in dp.items():
                    for j in range(m):
                        bit = 1 << j
                        if mask & bit:
                            continue
                        cand = acc + cell(i, j)
                        prev = nxt.get(mask | bit)
                        if prev is None or self.cost(cand) < self.cost(prev):
                            nxt[mask | bit] = cand
                dp = nxt
            return dp[(1 << m) - 1]
        return self._assign_large(rx, ry, pair, del_y)

    def _assign_large(self, rx, ry, pair, del_y):
        import numpy as np
        from scipy.optimize import linear_sum_assignment
        n, m = len(rx), len(ry)
        mat = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                if i < n:
                    mat[i][j] = float(self.cost(pair[i][j]))
                else:
                    mat[i][j] = float(self.cost(del_y[j]))
        rows, cols = linear_sum_assignment(mat)
        acc = Counter()
        for i, j in zip(rows, cols):
            acc += pair[i][j] if i < n else del_y[j]
        return acc


def unordered_match(xs, ys, w: ComponentWeights = DEFAULT_WEIGHTS,
                    cls="selection_condition"):
    eng = _Engine(w)
    counts = eng.unordered([(x, cls) for x in xs], [(y, cls) for y in ys])
    return counts, eng.cost(counts)


def ordered_distance(xs, ys, w: ComponentWeights = DEFAULT_WEIGHTS,
                     cls="order_by"):
    eng = _Engine(w)
    counts = eng.ordered([(x, cls) for x in xs], [(y, cls) for y in ys])
    return eng.cost(counts)


def canonicalized_edit_distance(sq: FlatTree, cq: FlatTree,
                                w: ComponentWeights = DEFAULT_WEIGHTS
                                ) -> DistanceBreakdown:
    eng = _Engine(w)
    edits = eng.dist(sq.root, cq.root, None)
    nodes = component_counts(cq.root)
    return DistanceBreakdown(edits=dict(edits), nodes=dict(nodes),
                             total=eng.cost(edits))


def total_component_marks(cq: FlatTree,
                          w: ComponentWeights = DEFAULT_WEIGHTS) -> Fraction:
    total = _weighted(component_counts(cq.root), w)
    if total <= 0:
        raise DegenerateTotal("correct query has zero total component weight")
    return total


def marks_from_distance(sq: FlatTree, cq: FlatTree,
                        w: ComponentWeights = DEFAULT_WEIGHTS,
                        max_marks=Fraction(1)) -> Fraction:
    denom = total_component_marks(cq, w)
    breakdown = canonicalized_edit_distance(sq, cq, w)
    num = max(Fraction(0), denom - breakdown.total)
    return num / denom * Fraction(max_marks)
