"""Flattened query trees.

Every query is represented as an immutable tree of FlatNode values.
Associative-commutative operators (inner join, AND/OR, UNION, INTERSECT,
flattened equality) are n-ary nodes whose children are kept in sorted
serialization order, so two trees are canonically identical exactly when
their serializations are equal.  Non-commutative operators (left/full outer
join, EXCEPT, ORDER BY lists) keep their children in positional order.

Node kinds and their child layout:

    block     8 fixed slots: src, where, cols, dflag, group, having, order,
              lwrap
    rel       label "name#k"; child 0 is its pred wrapper
    ijoin     child 0 pred wrapper, remaining children unordered sources
    loj/foj   children (pred wrapper, left, right)
    derived   label "alias#k"; children (pred wrapper, inner query tree)
    union(_all), intersect(_all)   unordered children
    except(_all)                   ordered children
    where/cols/group/having/pred   unordered wrappers
    order     ordered wrapper of sortitem nodes
    dflag     empty or one "distinct" child; lwrap empty or one "limitval"
    cmp       label in {=, <>, <, <=, like, not_like}; two ordered children
    eqclass   unordered members (attrs plus at most one literal)
    and/or    unordered; not unary
    isnull/isnotnull  one child
    exists/not_exists one child (block or set operation)
    between/inpred/quant  pre-canonical forms eliminated by SYN rules
    attr      label "instance.attribute"
    lit       label "type:value"
    agg       label func or func_distinct; "count_star" for COUNT(*)
    arith     label like "-1"; one child
    sortitem  label asc/desc; one child
    scalarsub one child
    star/distinct/limitval  leaves
"""

from __future__ import annotations

from dataclasses import dataclass, field

# kind -> (number of fixed leading children, sort the remaining children?)
KIND_INFO = {
    "block": (8, False),
    "rel": (1, False),
    "ijoin": (1, True),
    "loj": (3, False),
    "foj": (3, False),
    "derived": (2, False),
    "union": (0, True),
    "union_all": (0, True),
    "intersect": (0, True),
    "intersect_all": (0, True),
    "except": (0, False),
    "except_all": (0, False),
    "where": (0, True),
    "cols": (0, True),
    "group": (0, True),
    "having": (0, True),
    "pred": (0, True),
    "order": (0, False),
    "dflag": (0, False),
    "lwrap": (0, False),
    "cmp": (2, False),
    "eqclass": (0, True),
    "and": (0, True),
    "or": (0, True),
    "not": (1, False),
    "isnull": (1, False),
    "isnotnull": (1, False),
    "exists": (1, False),
    "not_exists": (1, False),
    "between": (3, False),
    "inpred": (2, False),
    "quant": (2, False),
    "attr": (0, False),
    "lit": (0, False),
    "star": (0, False),
    "agg": (1, False),
    "arith": (1, False),
    "sortitem": (1, False),
    "scalarsub": (1, False),
    "distinct": (0, False),
    "limitval": (0, False),
}

SETOP_KINDS = {"union", "union_all", "intersect", "intersect_all",
               "except", "except_all"}
JOIN_KINDS = {"ijoin", "loj", "foj"}
SOURCE_KINDS = {"rel", "derived"} | JOIN_KINDS

# Block slot indices.
SRC, WHERE, COLS, DFLAG, GROUP, HAVING, ORDER, LWRAP = range(8)


class FlatNode:
    """Immutable tree node with an eagerly computed canonical serialization."""

    __slots__ = ("kind", "label", "children", "serial")

    def __init__(self, kind, label="", children=()):
        n_fixed, sort_rest = KIND_INFO[kind]
        children = tuple(children)
        if sort_rest and len(children) > n_fixed:
            head = children[:n_fixed]
            tail = sorted(children[n_fixed:], key=lambda c: c.serial)
            children = head + tuple(tail)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "children", children)
        if children:
            body = ",".join(c.serial for c in children)
            serial = f"{kind}⟦{label}⟧({body})"
        else:
            serial = f"{kind}⟦{label}⟧"
        object.__setattr__(self, "serial", serial)

    def __setattr__(self, name, value):
        raise AttributeError("FlatNode is immutable")

    def __eq__(self, other):
        return isinstance(other, FlatNode) and self.serial == other.serial

    def __hash__(self):
        return hash(self.serial)

    def __repr__(self):
        return self.serial

    def with_children(self, children):
        return FlatNode(self.kind, self.label, children)

    def size(self):
        return 1 + sum(c.size() for c in self.children)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def node(kind, label="", children=()):
    return FlatNode(kind, label, children)


def attr(instance, name):
    return FlatNode("attr", f"{instance}.{name}")


def lit(type_, value):
    if type_ == "numeric" and isinstance(value, float) and value.is_integer():
        type_, value = "int", int(value)
    return FlatNode("lit", f"{type_}:{value}")


def attr_parts(n: FlatNode) -> tuple[str, str]:
    inst, _, name = n.label.rpartition(".")
    return inst, name


def lit_parts(n: FlatNode) -> tuple[str, str]:
    typ, _, val = n.label.partition(":")
    return typ, val


EMPTY_PRED = FlatNode("pred")


@dataclass
class FlatTree:
    """A flattened query plus resolution metadata.

    instance_table maps instance ids ("student#1") to relation names; derived
    instances map to their alias.  with_origin maps instance ids created by
    WITH-clause inlining to (binding, occurrence, local ordinal) so repeated
    fixes inside expansions of one binding can be billed once.
    """

    root: FlatNode
    instance_table: dict[str, str] = field(default_factory=dict)
    with_origin: dict[str, tuple[str, int, int]] = field(default_factory=dict)

    def replace_root(self, root: FlatNode) -> "FlatTree":
        return FlatTree(root, self.instance_table, self.with_origin)

    @property
    def serial(self) -> str:
        return self.root.serial


def replace_at(root: FlatNode, path: tuple[int, ...], replacement) -> FlatNode:
    """Rebuild the tree with the node at `path` replaced.

    `replacement` is either a FlatNode or a callable old_node -> FlatNode.
    """
    if not path:
        return replacement(root) if callable(replacement) else replacement
    head, rest = path[0], path[1:]
    children = list(root.children)
    children[head] = replace_at(children[head], rest, replacement)
    return root.with_children(children)


def node_at(root: FlatNode, path: tuple[int, ...]) -> FlatNode:
    for i in path:
        root = root.children[i]
    return root


def instances_in(n: FlatNode) -> set[str]:
    """All relation instances referenced by attribute leaves under n."""
    out = set()
    for m in n.walk():
        if m.kind == "attr":
            out.add(attr_parts(m)[0])
    return out


def sources_of(n: FlatNode) -> list[FlatNode]:
    """Relation/derived leaves of a source subtree (joins recursed)."""
    if n.kind in ("rel", "derived"):
        return [n]
    if n.kind in JOIN_KINDS:
        out = []
        for c in n.children[1:]:
            out.extend(sources_of(c))
        return out
    return []


def provided_instances(n: FlatNode) -> set[str]:
    """Instance ids made visible by a source subtree."""
    return {s.label for s in sources_of(n)}


def canonical_serialize(tree: FlatTree) -> str:
    """Deterministic text form; equal iff trees are canonically identical."""
    return tree.root.serial


def is_canonically_equivalent(a: FlatTree, b: FlatTree) -> bool:
    return a.root.serial == b.root.serial


def pretty(n: FlatNode, indent: int = 0) -> str:
    """Human-readable multi-line rendering for CLI output."""
    pad = "  " * indent
    head = n.kind + (f" {n.label}" if n.label else "")
    if not n.children:
        return pad + head
    lines = [pad + head]
    for c in n.children:
        lines.append(pretty(c, indent + 1))
    return "\n".join(lines)
