"""Shared test fixtures: query corpus, a reference evaluator used as a
semantics oracle, a random database generator, a brute-force edit search,
and a mutation generator for corpus-scale properties."""

from __future__ import annotations

import itertools
import random
import re
from fractions import Fraction
from pathlib import Path

from sqlgrade import (
    DEFAULT_WEIGHTS, apply_edit, build_tree, canonical_root,
    enumerate_edits, load_schema,
)
from sqlgrade.edits import Edit, EditSequence, adjust_with_cost
from sqlgrade.tree import (
    COLS, DFLAG, GROUP, HAVING, LWRAP, ORDER, SRC, WHERE,
    FlatNode, FlatTree, SOURCE_KINDS, node,
)

ROOT = Path(__file__).resolve().parent.parent
UNIVERSITY_TEXT = (ROOT / "sample" / "university.yaml").read_text()
UNIVERSITY = load_schema(UNIVERSITY_TEXT)

TOY_TEXT = """
relations:
  r:
    attributes: [{name: A, type: int}, {name: B, type: int}]
    primary_key: [A]
  s:
    attributes: [{name: A, type: int}, {name: B, type: int}]
    primary_key: [A]
"""
TOY = load_schema(TOY_TEXT)


def canon(sql, schema=UNIVERSITY):
    t = build_tree(sql, schema)
    return t.replace_root(canonical_root(t, schema))


def canon_serial(sql, schema=UNIVERSITY):
    return canon(sql, schema).root.serial


# --- reference query corpus (university schema) ------------------------------

CORPUS = [
    "SELECT id, name FROM student",
    "SELECT * FROM student WHERE name < 'Mahesh'",
    "SELECT building FROM classroom WHERE capacity > 50",
    """SELECT name FROM student, department
       WHERE student.dept_name = department.dept_name
         AND building = 'KReSIT'""",
    """SELECT name FROM student
       WHERE dept_name IN (SELECT dept_name FROM department
                           WHERE building = 'KReSIT')""",
    """SELECT DISTINCT s.id, s.name FROM student s, takes t
       WHERE s.id = t.id AND t.grade = 'F'""",
    """SELECT id, name FROM student
       WHERE id IN (SELECT id FROM takes WHERE grade = 'F')""",
    """SELECT id, name FROM student s
       WHERE NOT EXISTS (SELECT id FROM takes
                         WHERE grade = 'F' AND s.id = takes.id)""",
    """WITH result AS
         (SELECT s.id, s.name, semester, grade
          FROM student s LEFT OUTER JOIN takes t
            ON (s.id = t.id AND t.grade = 'F'))
       SELECT id, name FROM result WHERE semester IS NULL""",
    """SELECT s.id, s.name FROM student s
       EXCEPT
       SELECT s.id, s.name FROM student s, takes t
       WHERE s.id = t.id AND t.grade = 'F'""",
    """SELECT id, name FROM student
       WHERE id NOT IN (SELECT id FROM takes WHERE grade = 'F')""",
    """SELECT id, name FROM student s
       WHERE tot_cred > 50 AND
             NOT EXISTS (SELECT * FROM takes
                         WHERE takes.id = s.id AND takes.grade = 'A')""",
    """(SELECT id, name FROM student WHERE tot_cred > 50)
       EXCEPT
       (SELECT id, name FROM student NATURAL JOIN takes WHERE grade = 'A')""",
    """SELECT id, name FROM student
       WHERE id IN ((SELECT id FROM student WHERE tot_cred > 50)
                    EXCEPT
                    (SELECT id FROM takes WHERE grade = 'A'))""",
    """SELECT course_id, title FROM course
       EXCEPT
       SELECT course.course_id, course.title
       FROM course, section, time_slot
       WHERE course.course_id = section.course_id
         AND section.time_slot_id = time_slot.time_slot_id
         AND start_hr < 12""",
    """SELECT course.course_id, course.title FROM course
       WHERE course.course_id NOT IN
             (SELECT course.course_id FROM course, section, time_slot
              WHERE section.time_slot_id = time_slot.time_slot_id
                AND course.course_id = section.course_id
                AND time_slot.start_hr < 12)""",
    """SELECT s.course_id, c.title, s.year, s.semester, s.sec_id
       FROM section s, course c, department d
       WHERE s.course_id = c.course_id AND s.building <> d.building
         AND c.dept_name = d.dept_name""",
    """SELECT course_id, title, year, semester, sec_id
       FROM (SELECT * FROM course NATURAL JOIN section) AS cs
       WHERE building <> (SELECT building FROM department
                          WHERE department.dept_name = cs.dept_name)""",
    """(SELECT course_id, title, year, semester, sec_id
        FROM section NATURAL JOIN course)
       EXCEPT
       (SELECT course_id, title, year, semester, sec_id
        FROM (SELECT * FROM course NATURAL JOIN section) P
             NATURAL JOIN department)""",
    """SELECT c.course_id, c.title, s.year, s.semester, s.sec_id
       FROM course c, section s
       WHERE c.course_id = s.course_id
         AND s.building NOT IN (SELECT d.building
                                FROM department d, course ci
                                WHERE ci.course_id = c.course_id
                                  AND ci.dept_name = d.dept_name)""",
    """SELECT id, name FROM instructor
       EXCEPT
       SELECT i.id, i.name FROM instructor i, teaches te, takes ta
       WHERE i.id = te.id AND te.course_id = ta.course_id
         AND te.year = ta.year AND te.semester = ta.semester
         AND te.sec_id = ta.sec_id AND ta.grade = 'A'""",
    """SELECT id, name FROM instructor i
       WHERE NOT EXISTS (SELECT te.id FROM takes ta, teaches te
                         WHERE ta.course_id = te.course_id
                           AND ta.sec_id = te.sec_id
                           AND ta.semester = te.semester
                           AND ta.year = te.year AND ta.grade = 'A'
                           AND i.id = te.id)""",
    """SELECT DISTINCT ts.day FROM teaches t, section s, time_slot ts
       WHERE t.course_id = s.course_id AND t.semester = s.semester
         AND t.year = s.year AND t.sec_id = s.sec_id
         AND s.time_slot_id = ts.time_slot_id
         AND s.semester = 'Fall' AND s.year = 2009 AND t.id = '22222'""",
    """SELECT day FROM time_slot ts
       WHERE EXISTS (SELECT * FROM teaches t JOIN section s
                       USING (course_id, sec_id, semester, year)
                     WHERE t.id = '22222'
                       AND s.time_slot_id = ts.time_slot_id
                       AND t.semester = 'Fall' AND t.year = 2009)""",
    """SELECT day FROM time_slot
       WHERE time_slot_id IN
             (SELECT time_slot_id FROM section
              WHERE course_id IN (SELECT course_id FROM teaches
                                  WHERE id = '22222'
                                    AND semester = 'Fall' AND year = 2009))""",
    """(SELECT s.id, name FROM student s, takes t, course c
        WHERE s.id = t.id AND t.course_id = c.course_id
          AND c.dept_name = 'Comp. Sci.' AND year < 2010)
       INTERSECT
       (SELECT s.id, name FROM student s, takes t, course c
        WHERE s.id = t.id AND t.course_id = c.course_id
          AND c.dept_name = 'Comp. Sci.' AND year > 2010)""",
    """SELECT DISTINCT c.course_id, c.title
       FROM course c, section s, time_slot t
       WHERE c.course_id = s.course_id
         AND s.time_slot_id = t.time_slot_id
         AND t.end_hr >= 12 AND c.dept_name = 'Comp. Sci.'""",
    """(SELECT c.course_id, c.title
        FROM course c, section s, time_slot t
        WHERE c.dept_name = 'Comp. Sci.' AND c.course_id = s.course_id
          AND s.time_slot_id = t.time_slot_id)
       EXCEPT
       (SELECT c.course_id, c.title
        FROM course c, section s, time_slot t
        WHERE c.dept_name = 'Comp. Sci.' AND c.course_id = s.course_id
          AND s.time_slot_id = t.time_slot_id AND t.end_hr < 12)""",
]

# The two-occurrence WITH query used for the shared-view billing check.
CQ6B_WITH = """
WITH result AS
  (SELECT s.id, s.name, semester, grade
   FROM student s LEFT OUTER JOIN takes t
     ON (s.id = t.id AND t.grade = 'F'))
SELECT id, name FROM result WHERE semester IS NULL
"""

# Introduction example: outer join above vs. below a null-rejecting filter.
INTRO_CORRECT = """
SELECT id, course_id
FROM student LEFT OUTER JOIN (SELECT * FROM takes WHERE takes.year = 2018) t
  USING (id)
"""
INTRO_STUDENT = """
SELECT id, course_id
FROM student LEFT OUTER JOIN takes USING (id)
WHERE takes.year = 2018
"""

# Single-edit example pair over the toy r/s schema.
PAIR_A_CORRECT = "SELECT * FROM r INNER JOIN s ON (r.A = s.A) WHERE r.A > 10"
PAIR_A_STUDENT = "SELECT * FROM r INNER JOIN s ON (r.A = s.B) WHERE s.A > 10"

# Single-insert example pair over the university schema.
PAIR_B_CORRECT = """
SELECT DISTINCT student.id, name
FROM student INNER JOIN takes ON student.id = takes.id
WHERE takes.semester = 'Spring'
"""
PAIR_B_STUDENT = """
SELECT DISTINCT id, name FROM student INNER JOIN takes USING (id)
"""


# --- rewrite-rule golden pairs -------------------------------------------------
# Each entry: rule id -> (query as a student might write it, equivalent form
# after that rewrite).  Both sides must canonicalize to the same tree, and
# the rule must appear in the first query's rewrite trace.

GOLDEN_PAIRS = {
    "SYN-1": (
        "SELECT id, name FROM student",
        "SELECT student.id, student.name FROM student",
    ),
    "SYN-2": (
        """WITH f AS (SELECT id FROM takes WHERE grade = 'F')
           SELECT id FROM f""",
        "SELECT id FROM (SELECT id FROM takes WHERE grade = 'F') f",
    ),
    "SYN-3": (
        "SELECT id FROM takes WHERE year BETWEEN 2015 AND 2018",
        "SELECT id FROM takes WHERE year >= 2015 AND year <= 2018",
    ),
    "SYN-4": (
        "SELECT name FROM instructor WHERE NOT (salary > 70000)",
        "SELECT name FROM instructor WHERE salary <= 70000",
    ),
    "SYN-5": (
        "SELECT name FROM instructor WHERE salary >= 70000",
        "SELECT name FROM instructor WHERE 70000 <= salary",
    ),
    "SYN-6": (
        """SELECT name FROM student
           WHERE dept_name IN (SELECT dept_name FROM department
                               WHERE building = 'KReSIT')""",
        """SELECT name FROM student s
           WHERE EXISTS (SELECT * FROM department
                         WHERE building = 'KReSIT'
                           AND s.dept_name = department.dept_name)""",
    ),
    "SYN-7": (
        """SELECT id, name FROM student
           WHERE id NOT IN (SELECT id FROM takes WHERE grade = 'F')""",
        """SELECT id, name FROM student s
           WHERE NOT EXISTS (SELECT * FROM takes
                             WHERE grade = 'F' AND s.id = takes.id)""",
    ),
    "SYN-8": (
        """SELECT name FROM student s
           WHERE EXISTS (SELECT DISTINCT year FROM takes
                         WHERE takes.id = s.id)""",
        """SELECT name FROM student s
           WHERE EXISTS (SELECT year FROM takes WHERE takes.id = s.id)""",
    ),
    "SYN-9": (
        "SELECT name FROM student NATURAL JOIN takes WHERE grade = 'A'",
        """SELECT name FROM student JOIN takes
             ON student.id = takes.id
           WHERE grade = 'A'""",
    ),
    "SYN-10": (
        """SELECT id FROM (SELECT id FROM student ORDER BY id) s""",
        "SELECT id FROM (SELECT id FROM student) s",
    ),
    "SYN-11": (
        """SELECT name FROM (student JOIN takes ON student.id = takes.id)
             JOIN course ON takes.course_id = course.course_id""",
        """SELECT name FROM student, takes, course
           WHERE student.id = takes.id
             AND takes.course_id = course.course_id""",
    ),
    "SEM-1": (
        "SELECT DISTINCT id, name FROM student",
        "SELECT id, name FROM student",
    ),
    "SEM-2": (
        """SELECT s.id, d.building
           FROM student s, (SELECT DISTINCT building FROM department) d""",
        """SELECT DISTINCT s.id, d.building
           FROM student s, (SELECT building FROM department) d""",
    ),
    "SEM-3": (
        """SELECT student.id, department.dept_name
           FROM student JOIN department USING (dept_name)""",
        "SELECT id, dept_name FROM student",
    ),
    "SEM-4": (
        """SELECT * FROM department LEFT OUTER JOIN student
             USING (dept_name)
           WHERE student.dept_name = 'Biology'""",
        """SELECT * FROM department JOIN student USING (dept_name)
           WHERE student.dept_name = 'Biology'""",
    ),
    "SEM-5": (
        "SELECT * FROM student LEFT OUTER JOIN department "
        "USING (dept_name)",
        "SELECT * FROM student JOIN department USING (dept_name)",
    ),
    "SEM-6": (
        """SELECT building FROM instructor JOIN department
             ON instructor.dept_name = department.dept_name
             AND salary > 70000""",
        """SELECT building FROM instructor JOIN department
             ON instructor.dept_name = department.dept_name
           WHERE salary > 70000""",
    ),
    "SEM-7": (
        "SELECT id FROM student WHERE tot_cred < 50",
        "SELECT id FROM student WHERE tot_cred <= 49",
    ),
    "SEM-8": (
        """SELECT student.dept_name
           FROM student JOIN department USING (dept_name)
           WHERE building = 'KReSIT'""",
        """SELECT department.dept_name
           FROM student JOIN department USING (dept_name)
           WHERE building = 'KReSIT'""",
    ),
    "SEM-9": (
        "SELECT id, name FROM student ORDER BY id, name",
        "SELECT id, name FROM student ORDER BY id",
    ),
    "SEM-10": (
        "SELECT id, COUNT(*) FROM student GROUP BY id, name",
        "SELECT id, COUNT(*) FROM student GROUP BY id",
    ),
}


# --- reference evaluator ------------------------------------------------------
#
# Evaluates flat trees over small in-memory databases with SQL three-valued
# logic.  Rows are frozensets of per-instance attribute dicts; projections
# compare as multisets of value-multisets (column order is already abstracted
# away by the unordered cols wrapper).  Used as an independent soundness
# oracle: a rewrite is correct iff evaluation results are unchanged on
# random databases.

class EvalUnsupported(Exception):
    pass


def _lit_value(label):
    ty, _, raw = label.partition(":")
    if ty == "null":
        return None
    if ty == "int":
        return int(raw)
    if ty == "numeric":
        return float(raw)
    if ty == "bool":
        return raw == "true"
    return raw


def _not3(v):
    return None if v is None else not v


def _and3(vals):
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def _or3(vals):
    if any(v is True for v in vals):
        return True
    if any(v is None for v in vals):
        return None
    return False


def _like(value, pattern):
    rx = re.escape(pattern).replace("%", ".*").replace("_", ".")
    return re.fullmatch(rx, value) is not None


def _cmp3(op, a, b):
    if a is None or b is None:
        return None
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if isinstance(a, bool) or isinstance(b, bool):
        raise EvalUnsupported("ordered comparison on bool")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "like":
        return _like(str(a), str(b))
    if op == "not_like":
        return not _like(str(a), str(b))
    raise EvalUnsupported(f"cmp op {op}")


class Evaluator:
    def __init__(self, db, schema):
        self.db = db          # relation name -> list of attr dicts
        self.schema = schema

    # An environment maps instance label -> attr dict (None values = null).

    def rel_columns(self, inst):
        name = inst.split("#")[0]
        return self.schema.relation(name).attribute_names

    def eval_query(self, n, env):
        if n.kind == "block":
            return self.eval_block(n, env)
        kids = [self.eval_query(c, env) for c in n.children]
        if n.kind in ("union", "union_all"):
            rows = [r for k in kids for r in k]
            return rows if n.kind == "union_all" else _dedup(rows)
        if n.kind in ("intersect", "intersect_all", "except", "except_all"):
            left, right = kids
            out = []
            rcount = {}
            for r in right:
                rcount[r] = rcount.get(r, 0) + 1
            if n.kind == "intersect":
                return _dedup([r for r in left if rcount.get(r)])
            if n.kind == "except":
                return _dedup([r for r in _dedup(left)
                               if not rcount.get(r)])
            for r in left:
                if n.kind == "intersect_all":
                    if rcount.get(r, 0) > 0:
                        rcount[r] -= 1
                        out.append(r)
                else:  # except_all
                    if rcount.get(r, 0) > 0:
                        rcount[r] -= 1
                    else:
                        out.append(r)
            return out
        raise EvalUnsupported(f"query kind {n.kind}")

    # -- sources --

    def instances_of(self, src):
        out = {}
        if src.kind == "rel":
            out[src.label] = self.rel_columns(src.label)
        elif src.kind == "derived":
            out[src.label] = self.derived_columns(src.children[1])
        elif src.kind == "ijoin":
            for c in src.children[1:]:
                out.update(self.instances_of(c))
        elif src.kind in ("loj", "foj"):
            out.update(self.instances_of(src.children[1]))
            out.update(self.instances_of(src.children[2]))
        return out

    def derived_columns(self, q):
        b = q
        while b.kind != "block":
            b = b.children[0]
        cols = b.children[COLS].children
        if any(c.kind == "star" for c in cols):
            names = []
            for inst, attrs in self.instances_of(b.children[SRC]).items():
                names.extend(attrs)
            return tuple(names)
        names = []
        for c in cols:
            if c.kind != "attr":
                raise EvalUnsupported("derived non-attr output")
            names.append(c.label.split(".", 1)[1])
        return tuple(names)

    def eval_source(self, src, env):
        if src.kind == "rel":
            name = src.label.split("#")[0]
            rows = [{src.label: dict(r)} for r in self.db.get(name, [])]
            return self.filter(rows, src.children[0].children, env)
        if src.kind == "derived":
            names = self.derived_columns(src.children[1])
            inner = self.eval_query(src.children[1], env)
            rows = []
            for vals in inner:
                if len(vals) != len(names):
                    raise EvalUnsupported("derived arity mismatch")
                rows.append({src.label: dict(zip(names, vals))})
            return self.filter(rows, src.children[0].children, env)
        if src.kind == "ijoin":
            rows = [{}]
            for c in src.children[1:]:
                nxt = []
                for left in rows:
                    for right in self.eval_source(c, {**env, **left}):
                        nxt.append({**left, **right})
                rows = nxt
            return self.filter(rows, src.children[0].children, env)
        if src.kind in ("loj", "foj"):
            left = self.eval_source(src.children[1], env)
            right = self.eval_source(src.children[2], env)
            on = src.children[0].children
            l_inst = self.instances_of(src.children[1])
            r_inst = self.instances_of(src.children[2])
            l_pad = {i: {a: None for a in attrs}
                     for i, attrs in l_inst.items()}
            r_pad = {i: {a: None for a in attrs}
                     for i, attrs in r_inst.items()}
            out = []
            matched_r = [False] * len(right)
            for lr in left:
                hit = False
                for j, rr in enumerate(right):
                    combined = {**lr, **rr}
                    if _and3([self.eval_pred(p, {**env, **combined})
                              for p in on]) is True:
                        out.append(combined)
                        hit = True
                        matched_r[j] = True
                if not hit:
                    out.append({**lr, **r_pad})
            if src.kind == "foj":
                for j, rr in enumerate(right):
                    if not matched_r[j]:
                        out.append({**l_pad, **rr})
            return out
        raise EvalUnsupported(f"source kind {src.kind}")

    def filter(self, rows, preds, env):
        if not preds:
            return rows
        return [r for r in rows
                if _and3([self.eval_pred(p, {**env, **r})
                          for p in preds]) is True]

    # -- blocks --

    def eval_block(self, b, env):
        src = b.children[SRC]
        if src.kind in SOURCE_KINDS:
            rows = self.eval_source(src, env)
        else:
            rows = [{}]
        rows = self.filter(rows, b.children[WHERE].children, env)
        cols = b.children[COLS].children
        group = b.children[GROUP].children
        having = b.children[HAVING].children
        has_agg = any(any(x.kind in ("agg",) for x in c.walk())
                      for c in cols) or group or having
        if b.children[ORDER].children or b.children[LWRAP].children:
            raise EvalUnsupported("order/limit")
        insts = (self.instances_of(src) if src.kind in SOURCE_KINDS
                 else {})
        if has_agg:
            out = self.eval_grouped(rows, env, group, having, cols, insts)
        else:
            out = [self.project(cols, {**env, **r}, insts) for r in rows]
        if b.children[DFLAG].children:
            out = _dedup(out)
        return out

    def eval_grouped(self, rows, env, group, having, cols, insts):
        def key(r):
            return tuple(self.eval_expr(g, {**env, **r}) for g in group)
        groups = {}
        for r in rows:
            groups.setdefault(key(r), []).append(r)
        if not rows and not group:
            groups[()] = []
        out = []
        for _, members in sorted(groups.items(),
                                 key=lambda kv: repr(kv[0])):
            genv = {**env, "__group__": members}
            if having and _and3([self.eval_pred(h, genv)
                                 for h in having]) is not True:
                continue
            rep = members[0] if members else {}
            out.append(self.project(cols, {**genv, **rep}, insts))
        return out

    def project(self, cols, env, insts):
        vals = []
        for c in cols:
            if c.kind == "star":
                for inst in sorted(insts):
                    vals.extend(env[inst].values())
            else:
                vals.append(self.eval_expr(c, env))
        return tuple(sorted(vals, key=lambda v: (v is None, repr(v))))

    # -- expressions / predicates --

    def eval_expr(self, e, env):
        if e.kind == "attr":
            inst, _, name = e.label.partition(".")
            if inst not in env:
                raise EvalUnsupported(f"unbound instance {inst}")
            return env[inst][name]
        if e.kind == "lit":
            return _lit_value(e.label)
        if e.kind == "arith":
            v = self.eval_expr(e.children[0], env)
            return None if v is None else v + int(e.label)
        if e.kind == "agg":
            return self.eval_agg(e, env)
        if e.kind == "scalarsub":
            rows = self.eval_query(e.children[0], env)
            if len(rows) > 1:
                raise EvalUnsupported("scalar subquery cardinality")
            if not rows:
                return None
            (row,) = rows
            if len(row) != 1:
                raise EvalUnsupported("scalar subquery arity")
            return row[0]
        raise EvalUnsupported(f"expr kind {e.kind}")

    def eval_agg(self, e, env):
        members = env.get("__group__")
        if members is None:
            raise EvalUnsupported("aggregate outside grouping")
        if e.label == "count_star":
            return len(members)
        func, _, is_distinct = e.label.partition("_")
        vals = [self.eval_expr(e.children[0], {**env, **m})
                for m in members]
        vals = [v for v in vals if v is not None]
        if is_distinct == "distinct":
            vals = list(dict.fromkeys(vals))
        if func == "count":
            return len(vals)
        if not vals:
            return None
        if func == "sum":
            return sum(vals)
        if func == "min":
            return min(vals)
        if func == "max":
            return max(vals)
        if func == "avg":
            return sum(vals) / len(vals)
        raise EvalUnsupported(f"aggregate {e.label}")

    def eval_pred(self, p, env):
        k = p.kind
        if k == "and":
            return _and3([self.eval_pred(c, env) for c in p.children])
        if k == "or":
            return _or3([self.eval_pred(c, env) for c in p.children])
        if k == "not":
            return _not3(self.eval_pred(p.children[0], env))
        if k == "cmp":
            return _cmp3(p.label,
                         self.eval_expr(p.children[0], env),
                         self.eval_expr(p.children[1], env))
        if k == "eqclass":
            vals = [self.eval_expr(c, env) for c in p.children]
            if any(v is None for v in vals):
                return None
            return all(v == vals[0] for v in vals)
        if k == "isnull":
            return self.eval_expr(p.children[0], env) is None
        if k == "isnotnull":
            return self.eval_expr(p.children[0], env) is not None
        if k == "exists":
            return bool(self.eval_query(p.children[0], env))
        if k == "not_exists":
            return not self.eval_query(p.children[0], env)
        if k == "between":
            v = self.eval_expr(p.children[0], env)
            lo = self.eval_expr(p.children[1], env)
            hi = self.eval_expr(p.children[2], env)
            inside = _and3([_cmp3("<=", lo, v), _cmp3("<=", v, hi)])
            return _not3(inside) if p.label == "not" else inside
        if k == "inpred":
            v = self.eval_expr(p.children[0], env)
            rows = self.eval_query(p.children[1], env)
            vals = [r[0] if len(r) == 1 else _fail_arity(r) for r in rows]
            hit = _or3([_cmp3("=", v, x) for x in vals]) if vals else False
            return _not3(hit) if p.label == "not" else hit
        if k == "quant":
            op, _, q = p.label.partition(":")
            v = self.eval_expr(p.children[0], env)
            rows = self.eval_query(p.children[1], env)
            vals = [r[0] if len(r) == 1 else _fail_arity(r) for r in rows]
            tests = [_cmp3(op, v, x) for x in vals]
            if q in ("some", "any"):
                return _or3(tests) if tests else False
            return _and3(tests) if tests else True
        raise EvalUnsupported(f"pred kind {k}")


def _fail_arity(r):
    raise EvalUnsupported("multi-column IN/quant subquery")


def _dedup(rows):
    seen = {}
    for r in rows:
        seen.setdefault(r, r)
    return list(seen.values())


def evaluate(tree: FlatTree, db, schema):
    """Query result as a sorted multiset of row value-multisets."""
    rows = Evaluator(db, schema).eval_query(tree.root, {})
    return sorted(rows, key=repr)


# --- random database generation -----------------------------------------------

def random_database(schema, rng: random.Random, rows_per_relation=3):
    """Small random instance respecting primary and foreign keys."""
    # topo-order relations so FK targets exist first
    names = list(schema.relations)
    order = []
    seen = set()

    def visit(n):
        if n in seen:
            return
        seen.add(n)
        for fk in schema.relation(n).foreign_keys:
            if fk.ref_relation != n:
                visit(fk.ref_relation)
        order.append(n)
    for n in names:
        visit(n)

    def fresh(ty, i):
        if ty == "int":
            return rng.randint(0, 5)
        if ty == "numeric":
            return float(rng.randint(0, 50))
        return f"v{rng.randint(0, 3)}"

    db = {}
    for name in order:
        rel = schema.relation(name)
        rows = []
        used_keys = set()
        for i in range(rows_per_relation):
            for _attempt in range(20):
                row = {}
                for a in rel.attributes:
                    if a.nullable and rng.random() < 0.3:
                        row[a.name] = None
                    else:
                        row[a.name] = fresh(a.type, i)
                for fk in rel.foreign_keys:
                    target = db.get(fk.ref_relation, [])
                    if target and rng.random() < 0.9:
                        pick = rng.choice(target)
                        for a, ra in zip(fk.attrs, fk.ref_attrs):
                            row[a] = pick[ra]
                k = tuple(row[a] for a in rel.primary_key)
                if not rel.primary_key or (k not in used_keys
                                           and None not in k):
                    used_keys.add(k)
                    rows.append(row)
                    break
        db[name] = rows
    return db


# --- brute-force search oracle --------------------------------------------

def brute_force_min_cost(sq, cq, schema, w=DEFAULT_WEIGHTS, max_depth=2):
    """Minimum adjusted cost over all guided-edit sequences of bounded
    length, by exhaustive breadth-first enumeration.  Returns None if no
    sequence within max_depth reaches canonical equivalence."""
    from sqlgrade.canonicalize import canonicalize_syntactic

    target = canonical_root(cq, schema).serial
    start, _ = canonicalize_syntactic(sq, schema)
    if canonical_root(start, schema).serial == target:
        return Fraction(0)
    best = None
    frontier = [(start, [])]
    for _depth in range(max_depth):
        nxt = []
        for tree, edits in frontier:
            for e, t2 in enumerate_edits(tree, cq, w, schema=schema):
                t2, _ = canonicalize_syntactic(t2, schema)
                seq = edits + [e]
                if canonical_root(t2, schema).serial == target:
                    cost = adjust_with_cost(
                        EditSequence(tuple(seq),
                                     sum((x.cost for x in seq),
                                         Fraction(0))),
                        sq.with_origin).total_cost
                    if best is None or cost < best:
                        best = cost
                else:
                    nxt.append((t2, seq))
        frontier = nxt
    return best


# --- mutation corpus ---------------------------------------------------------

def _node_paths(root, base=()):
    out = []

    def go(n, p):
        out.append((p, n))
        for i, c in enumerate(n.children):
            go(c, p + (i,))
    go(root, base)
    return out


def _mutation_candidates(tree: FlatTree, schema):
    """Hand-rolled single edits applicable to a correct query, paired with
    the cost a grader would have to pay to undo them."""
    from sqlgrade.distance import component_counts, _weighted

    w = DEFAULT_WEIGHTS
    out = []
    # Only mutate top-level structure: a change buried inside a subquery can
    # cost far more to undo (the grader replaces the whole outer condition)
    # than the same change made at the top level.
    sub_prefixes = []
    for path, n in _node_paths(tree.root):
        if n.kind in ("scalarsub", "exists", "not_exists", "inpred",
                      "quant"):
            sub_prefixes.append(path)
    for path, n in _node_paths(tree.root):
        if any(path[:len(p)] == p and path != p for p in sub_prefixes):
            continue
        if n.kind in ("where", "pred") and n.children:
            for i, c in enumerate(n.children):
                if any(x.kind in ("exists", "not_exists", "scalarsub",
                                  "inpred", "quant")
                       for x in c.walk()):
                    continue
                cost = max(_weighted(component_counts(
                    c, "selection_condition"), w), Fraction(1, 10**6))
                out.append((Edit("Delete", path + (i,), None, cost,
                                 "drop a condition"), cost))
                # literal perturbations / operator flips inside a conjunct:
                # the grader undoes these by replacing the whole conjunct,
                # so that replacement cost is what counts as injected.
                for sub_path, sub in _node_paths(c, base=path + (i,)):
                    if sub.kind == "lit" and ":" in sub.label:
                        ty, _, raw = sub.label.partition(":")
                        if ty == "int":
                            repl = node("lit", f"int:{int(raw) + 7}")
                        elif ty == "text":
                            repl = node("lit", f"text:{raw}zz")
                        else:
                            continue
                        out.append((Edit("Replace", sub_path, repl,
                                         Fraction(1), "perturb a literal"),
                                    cost))
                    if sub.kind == "cmp" and sub.label in ("<", "<="):
                        flip = "<=" if sub.label == "<" else "<"
                        repl = node("cmp", flip, sub.children)
                        out.append((Edit("Replace", sub_path, repl,
                                         Fraction(1), "flip an operator"),
                                    cost))
        if n.kind == "dflag":
            if n.children:
                out.append((Edit("Replace", path, node("dflag"),
                                 Fraction(1), "drop distinct"),
                            w.of("distinct")))
            else:
                out.append((Edit(
                    "Replace", path, node("dflag", "", (node("distinct"),)),
                    Fraction(1), "add distinct"), w.of("distinct")))
        if n.kind == "cols" and len(n.children) > 1 \
                and all(c.kind == "attr" for c in n.children):
            out.append((Edit("Delete", path + (0,), None, Fraction(1),
                             "drop a projection"), w.of("projection")))
    return out


def make_mutant(sql, schema, rng: random.Random, n_edits):
    """Apply up to n_edits random consistent mutations to a correct query.
    Returns (mutated FlatTree, injected undo cost) or None."""
    from sqlgrade.errors import InconsistentEdit

    tree = build_tree(sql, schema)
    injected = Fraction(0)
    applied = 0
    for _ in range(n_edits * 4):
        if applied == n_edits:
            break
        cands = _mutation_candidates(tree, schema)
        if not cands:
            break
        e, undo = rng.choice(cands)
        try:
            tree = apply_edit(tree, e, schema)
        except InconsistentEdit:
            continue
        injected += undo
        applied += 1
    if applied == 0:
        return None
    return tree, injected


def corpus_mutants(schema, rng: random.Random, per_query=8, max_size=20):
    """(correct sql, mutated tree, injected cost) triples for corpus-scale
    properties; only queries with at most max_size billable components."""
    from sqlgrade.distance import total_component_marks

    out = []
    for sql in CORPUS:
        try:
            cq = canon(sql, schema)
        except Exception:
            continue
        if total_component_marks(cq) > max_size:
            continue
        for i in range(per_query):
            m = make_mutant(sql, schema, rng, 1 + (i % 3))
            if m is not None:
                out.append((sql, m[0], m[1]))
    return out
