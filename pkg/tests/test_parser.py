import pytest

from sqlgrade import SqlSyntaxError, build_tree
from sqlgrade.errors import (
    AmbiguousAttribute, UnknownAttribute, UnknownRelation,
)

from helpers import CORPUS, UNIVERSITY


def test_corpus_parses_and_resolves():
    for sql in CORPUS:
        build_tree(sql, UNIVERSITY)


def test_syntax_error_carries_position():
    with pytest.raises(SqlSyntaxError) as exc:
        build_tree("SELECT name\nFROM WHERE x", UNIVERSITY)
    assert exc.value.line == 2
    assert exc.value.column >= 1


def test_unknown_relation():
    with pytest.raises(UnknownRelation):
        build_tree("SELECT x FROM nothere", UNIVERSITY)


def test_unknown_attribute():
    with pytest.raises(UnknownAttribute):
        build_tree("SELECT shoe_size FROM student", UNIVERSITY)


def test_ambiguous_attribute_rejected():
    # dept_name exists in both student and department
    with pytest.raises(AmbiguousAttribute):
        build_tree(
            "SELECT dept_name FROM student, department", UNIVERSITY)


def test_unqualified_attributes_are_qualified():
    a = build_tree("SELECT id, name FROM student", UNIVERSITY)
    b = build_tree("SELECT student.id, student.name FROM student",
                   UNIVERSITY)
    assert a.root.serial == b.root.serial


def test_instance_ids_distinguish_self_join():
    t = build_tree(
        "SELECT a.id FROM student a, student b WHERE a.id = b.id",
        UNIVERSITY)
    labels = {n.label for n in t.root.walk() if n.kind == "rel"}
    assert labels == {"student#1", "student#2"}


def test_alias_is_erased_in_favor_of_instance_ids():
    a = build_tree("SELECT s.name FROM student s", UNIVERSITY)
    b = build_tree("SELECT zz.name FROM student zz", UNIVERSITY)
    assert a.root.serial == b.root.serial


def test_with_views_are_expanded_inline():
    w = build_tree(
        """WITH f AS (SELECT id FROM takes WHERE grade = 'F')
           SELECT id FROM f""",
        UNIVERSITY)
    inline = build_tree(
        "SELECT id FROM (SELECT id FROM takes WHERE grade = 'F') f",
        UNIVERSITY)
    assert w.root.serial == inline.root.serial
    assert w.with_origin  # provenance retained for shared-view billing


def test_trailing_garbage_rejected():
    with pytest.raises(SqlSyntaxError):
        build_tree("SELECT id FROM student extra tokens", UNIVERSITY)
