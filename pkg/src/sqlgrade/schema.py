"""Database schema catalog: relations, keys, foreign keys and functional
dependencies.

The schema document is a YAML file with one block per relation::

    relations:
      student:
        attributes:
          - {name: id, type: text}
          - {name: name, type: text}
          - {name: dept_name, type: text}
          - {name: tot_cred, type: int}
        primary_key: [id]
        unique: []
        foreign_keys:
          - {attributes: [dept_name], references: department,
             ref_attributes: [dept_name]}
    functional_dependencies:
      - {relation: student, lhs: [id], rhs: [name]}

Attributes are non-nullable unless ``nullable: true`` is given.  The loaded
``Schema`` is immutable and safe to share across concurrent grading tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .errors import ParseError, SchemaValidationError, UnknownAttribute

TYPES = {"int", "numeric", "text", "date", "bool"}


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str
    nullable: bool = False


@dataclass(frozen=True)
class ForeignKey:
    attrs: tuple[str, ...]
    ref_relation: str
    ref_attrs: tuple[str, ...]
    all_non_nullable: bool = False


@dataclass(frozen=True)
class RelationDef:
    name: str
    attributes: tuple[Attribute, ...]
    primary_key: tuple[str, ...] = ()
    unique_keys: tuple[tuple[str, ...], ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UnknownAttribute(f"{self.name}.{name}")

    def has_attribute(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def keys(self) -> tuple[tuple[str, ...], ...]:
        ks = []
        if self.primary_key:
            ks.append(self.primary_key)
        ks.extend(self.unique_keys)
        return tuple(ks)


@dataclass(frozen=True)
class FD:
    relation: str
    lhs: frozenset[str]
    rhs: frozenset[str]


@dataclass(frozen=True)
class Schema:
    relations: dict[str, RelationDef] = field(default_factory=dict)
    functional_dependencies: tuple[FD, ...] = ()

    def relation(self, name: str) -> RelationDef:
        return self.relations[name]


def _as_tuple(value, what):
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(f"{what} must be a list of attribute names")
    return tuple(value)


def load_schema(text: str) -> Schema:
    """Parse and validate a schema document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed schema document: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("schema document must be a mapping")

    relations: dict[str, RelationDef] = {}
    for rel_name, body in (doc.get("relations") or {}).items():
        body = body or {}
        attrs = []
        seen = set()
        for entry in body.get("attributes") or []:
            if isinstance(entry, str):
                entry = {"name": entry, "type": "text"}
            name = entry.get("name")
            typ = entry.get("type", "text")
            if typ not in TYPES:
                raise ParseError(
                    f"relation {rel_name}: attribute {name} has unknown type {typ!r}"
                )
            if name in seen:
                raise SchemaValidationError(
                    f"relation {rel_name}: duplicate attribute {name}"
                )
            seen.add(name)
            attrs.append(Attribute(name, typ, bool(entry.get("nullable", False))))
        pk = _as_tuple(body.get("primary_key"), f"{rel_name}.primary_key")
        uniques = tuple(
            _as_tuple(u, f"{rel_name}.unique") for u in (body.get("unique") or [])
        )
        nullable = {a.name: a.nullable for a in attrs}
        fks = []
        for fk in body.get("foreign_keys") or []:
            fk_attrs = _as_tuple(fk.get("attributes"), f"{rel_name} fk attrs")
            fks.append(
                ForeignKey(
                    attrs=fk_attrs,
                    ref_relation=fk.get("references", ""),
                    ref_attrs=_as_tuple(fk.get("ref_attributes"), f"{rel_name} fk refs"),
                    all_non_nullable=all(
                        not nullable.get(a, True) for a in fk_attrs
                    ),
                )
            )
        relations[rel_name] = RelationDef(
            name=rel_name,
            attributes=tuple(attrs),
            primary_key=pk,
            unique_keys=uniques,
            foreign_keys=fks,
        )

    fds = []
    for entry in doc.get("functional_dependencies") or []:
        fds.append(
            FD(
                relation=entry.get("relation", ""),
                lhs=frozenset(_as_tuple(entry.get("lhs"), "fd lhs")),
                rhs=frozenset(_as_tuple(entry.get("rhs"), "fd rhs")),
            )
        )

    schema = Schema(relations=relations, functional_dependencies=tuple(fds))
    _validate(schema)
    return schema


def _validate(schema: Schema) -> None:
    for rel in schema.relations.values():
        names = set(rel.attribute_names)
        for a in rel.primary_key:
            if a not in names:
                raise SchemaValidationError(
                    f"relation {rel.name}: primary key attribute {a} not declared"
                )
            if rel.attribute(a).nullable:
                raise SchemaValidationError(
                    f"relation {rel.name}: primary key attribute {a} is nullable"
                )
        for uk in rel.unique_keys:
            for a in uk:
                if a not in names:
                    raise SchemaValidationError(
                        f"relation {rel.name}: unique key attribute {a} not declared"
                    )
        for fk in rel.foreign_keys:
            for a in fk.attrs:
                if a not in names:
                    raise SchemaValidationError(
                        f"relation {rel.name}: foreign key attribute {a} not declared"
                    )
            target = schema.relations.get(fk.ref_relation)
            if target is None:
                raise SchemaValidationError(
                    f"relation {rel.name}: foreign key references unknown relation "
                    f"{fk.ref_relation}"
                )
            if len(fk.attrs) != len(fk.ref_attrs):
                raise SchemaValidationError(
                    f"relation {rel.name}: foreign key attribute count mismatch"
                )
            if tuple(fk.ref_attrs) not in target.keys():
                raise SchemaValidationError(
                    f"relation {rel.name}: foreign key target {fk.ref_relation}"
                    f"({', '.join(fk.ref_attrs)}) is not a key of {fk.ref_relation}"
                )
    for fd in schema.functional_dependencies:
        if not fd.lhs or not fd.rhs:
            raise SchemaValidationError("functional dependency with empty side")
        rel = schema.relations.get(fd.relation)
        if rel is None:
            raise SchemaValidationError(
                f"functional dependency on unknown relation {fd.relation}"
            )
        for a in fd.lhs | fd.rhs:
            if not rel.has_attribute(a):
                raise SchemaValidationError(
                    f"functional dependency attribute {fd.relation}.{a} not declared"
                )


def serialize_schema(schema: Schema) -> str:
    """Emit a schema document that round-trips through load_schema."""
    doc: dict = {"relations": {}}
    for rel in schema.relations.values():
        body: dict = {
            "attributes": [
                {"name": a.name, "type": a.type, "nullable": a.nullable}
                for a in rel.attributes
            ]
        }
        if rel.primary_key:
            body["primary_key"] = list(rel.primary_key)
        if rel.unique_keys:
            body["unique"] = [list(u) for u in rel.unique_keys]
        if rel.foreign_keys:
            body["foreign_keys"] = [
                {
                    "attributes": list(fk.attrs),
                    "references": fk.ref_relation,
                    "ref_attributes": list(fk.ref_attrs),
                }
                for fk in rel.foreign_keys
            ]
        doc["relations"][rel.name] = body
    if schema.functional_dependencies:
        doc["functional_dependencies"] = [
            {"relation": fd.relation, "lhs": sorted(fd.lhs), "rhs": sorted(fd.rhs)}
            for fd in schema.functional_dependencies
        ]
    return yaml.safe_dump(doc, sort_keys=True)


# -- functional-dependency reasoning over relation instances ----------------
#
# Attribute instances are strings "relname#k.attr".  Instance-level FDs come
# from three sources: declared per-relation FDs, key FDs (key determines every
# attribute of the instance), and caller-supplied derived FDs (typically from
# predicate equivalence classes).


@dataclass(frozen=True)
class InstanceFD:
    lhs: frozenset[str]
    rhs: frozenset[str]


def _instance_fds(schema, relation_instances):
    fds: list[InstanceFD] = []
    by_rel: dict[str, list[str]] = {}
    for inst_id, rel_name in relation_instances:
        by_rel.setdefault(rel_name, []).append(inst_id)
        rel = schema.relations.get(rel_name)
        if rel is None:
            continue
        all_attrs = frozenset(f"{inst_id}.{a}" for a in rel.attribute_names)
        for key in rel.keys():
            fds.append(
                InstanceFD(frozenset(f"{inst_id}.{a}" for a in key), all_attrs)
            )
    for fd in schema.functional_dependencies:
        for inst_id in by_rel.get(fd.relation, []):
            fds.append(
                InstanceFD(
                    frozenset(f"{inst_id}.{a}" for a in fd.lhs),
                    frozenset(f"{inst_id}.{a}" for a in fd.rhs),
                )
            )
    return fds


def _check_instances(schema, relation_instances, attrs):
    # Attributes of unknown instances (derived tables, outer references) are
    # treated as opaque: they participate in closures but carry no FDs.
    table = dict(relation_instances)
    for a in attrs:
        inst, _, attr = a.rpartition(".")
        rel_name = table.get(inst)
        if rel_name is None:
            continue
        rel = schema.relations.get(rel_name)
        if rel is not None and not rel.has_attribute(attr):
            raise UnknownAttribute(a)


def fd_closure(schema, relation_instances, seed, derived_fds=()):
    """Classical FD closure of `seed` over the given relation instances.

    `derived_fds` is an iterable of InstanceFD (lhs/rhs over attribute
    instances); an empty-lhs derived FD marks attributes fixed to a constant.
    """
    _check_instances(schema, relation_instances, seed)
    fds = _instance_fds(schema, relation_instances) + list(derived_fds)
    closure = set(seed)
    changed = True
    while changed:
        changed = False
        for fd in fds:
            if fd.lhs <= closure and not fd.rhs <= closure:
                closure |= fd.rhs
                changed = True
    return closure


def determines(schema, relation_instances, lhs, rhs, derived_fds=()):
    """True iff rhs is functionally determined by lhs."""
    _check_instances(schema, relation_instances, rhs)
    return set(rhs) <= fd_closure(schema, relation_instances, lhs, derived_fds)
