"""Grading orchestration: assignments, submissions, reports.

An assignment holds one or more correct queries per question.  A submission
is parsed, resolved and syntactically canonicalized, then searched against
every correct query of its question; the best (highest-marks) outcome is
reported.  Unparseable submissions are rejected with a diagnostic and zero
marks.  Batch grading isolates per-entry failures and keeps input order.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import yaml

from .canonicalize import canonical_root
from .distance import (
    ComponentWeights, DEFAULT_WEIGHTS, canonicalized_edit_distance,
)
from .edits import EditSequence
from .errors import SqlGradeError, SqlSyntaxError
from .flatten import build_flat_tree
from .resolve import Resolver
from .schema import Schema
from .search import (
    Budget, EXHAUSTIVE_BUDGET, GREEDY_BUDGET, SearchResult,
    exhaustive_search, greedy_search,
)
from .sqlast import parse
from .tree import FlatTree

REPORT_FORMAT_VERSION = 1
ASSIGNMENT_FORMAT_VERSION = 1


@dataclass
class Question:
    question_id: str
    correct_queries: list
    text: str = ""
    weights: ComponentWeights = DEFAULT_WEIGHTS
    max_marks: Fraction = Fraction(10)
    mode: str = "greedy"                    # greedy | exhaustive
    budget: Budget | None = None
    feedback: str = "all"                   # all | first | correct-only
    # prepared per correct query: (raw tree, fully canonical tree)
    _prepared: list = field(default_factory=list, repr=False)

    def prepare(self, schema: Schema):
        if self._prepared:
            return
        if not self.correct_queries:
            raise SqlGradeError(
                f"question {self.question_id}: no correct queries")
        for sql in self.correct_queries:
            tree = build_tree(sql, schema)
            full = tree.replace_root(canonical_root(tree, schema))
            self._prepared.append((tree, full))

    def effective_budget(self) -> Budget:
        if self.budget is not None:
            return self.budget
        return GREEDY_BUDGET if self.mode == "greedy" else EXHAUSTIVE_BUDGET


@dataclass
class Assignment:
    questions: dict  # question_id -> Question

    def prepare(self, schema: Schema):
        for q in self.questions.values():
            q.prepare(schema)


def build_tree(sql: str, schema: Schema) -> FlatTree:
    return build_flat_tree(Resolver(schema).resolve(parse(sql)), schema)


def load_assignment(text: str) -> Assignment:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "questions" not in doc:
        raise SqlGradeError("assignment document must map 'questions'")
    questions = {}
    for entry in doc["questions"]:
        budget = None
        if "budget_ms" in entry:
            budget = Budget(entry["budget_ms"] / 1000.0,
                            entry.get("max_states", 200_000))
        q = Question(
            question_id=str(entry["id"]),
            correct_queries=list(entry["correct_queries"]),
            text=entry.get("text", ""),
            weights=ComponentWeights(entry.get("weights") or {}),
            max_marks=Fraction(str(entry.get("max_marks", 10))),
            mode=entry.get("mode", "greedy"),
            budget=budget,
            feedback=entry.get("feedback", "all"),
        )
        if q.mode not in ("greedy", "exhaustive"):
            raise SqlGradeError(f"question {q.question_id}: unknown mode "
                                f"{q.mode!r}")
        questions[q.question_id] = q
    return Assignment(questions)


@dataclass
class ReportEntry:
    student_id: str
    question_id: str
    outcome: str        # Matched | ZeroMarks | BudgetExceeded |
                        # CycleDetected | Rejected
    marks_fraction: Fraction
    awarded: Fraction
    best_correct_query_index: int | None
    edits: list                      # rendered strings
    edit_details: list               # structured dicts
    distance_breakdown: dict | None
    per_query_fractions: list
    diagnostic: str | None
    elapsed: float

    def to_dict(self):
        return {
            "student_id": self.student_id,
            "question_id": self.question_id,
            "outcome": self.outcome,
            "marks_fraction": str(self.marks_fraction),
            "marks_fraction_float": float(self.marks_fraction),
            "awarded": str(self.awarded),
            "awarded_float": float(self.awarded),
            "best_correct_query_index": self.best_correct_query_index,
            "edits": self.edits,
            "edit_details": self.edit_details,
            "distance_breakdown": self.distance_breakdown,
            "per_query_fractions": [str(f) for f in self.per_query_fractions],
            "diagnostic": self.diagnostic,
            "elapsed_seconds": round(self.elapsed, 6),
        }


def _search_one(sq: FlatTree, cq_full: FlatTree, q: Question,
                schema: Schema) -> SearchResult:
    fn = greedy_search if q.mode == "greedy" else exhaustive_search
    return fn(sq, cq_full, q.weights, q.effective_budget(), schema=schema)


def grade_submission(sql: str, q: Question, schema: Schema,
                     student_id: str = "") -> ReportEntry:
    start = time.monotonic()
    q.prepare(schema)
    try:
        sq = build_tree(sql, schema)
    except SqlSyntaxError as exc:
        return _rejected(student_id, q, f"syntax error: {exc}", start)
    except SqlGradeError as exc:
        return _rejected(student_id, q, f"invalid query: {exc}", start)

    sq_full = sq.replace_root(canonical_root(sq, schema))
    results = []
    for idx, (_, cq_full) in enumerate(q._prepared):
        if sq_full.root.serial == cq_full.root.serial:
            results.append((idx, SearchResult(
                Fraction(1), EditSequence(), 1, 0.0, "Matched")))
            break
        results.append((idx, _search_one(sq, cq_full, q, schema)))

    def rank(item):
        idx, r = item
        return (-r.marks_fraction, r.edit_seq.total_cost,
                [e.description for e in r.edit_seq.edits], idx)
    best_idx, best = min(results, key=rank)
    breakdown = canonicalized_edit_distance(
        sq_full, q._prepared[best_idx][1], q.weights)
    return ReportEntry(
        student_id=student_id,
        question_id=q.question_id,
        outcome=best.outcome,
        marks_fraction=best.marks_fraction,
        awarded=best.marks_fraction * q.max_marks,
        best_correct_query_index=best_idx,
        edits=[e.description for e in best.edit_seq.edits],
        edit_details=[{
            "kind": e.kind,
            "cost": str(e.cost),
            "description": e.description,
        } for e in best.edit_seq.edits],
        distance_breakdown={
            "edits": breakdown.edits,
            "nodes": breakdown.nodes,
            "total": str(breakdown.total),
        },
        per_query_fractions=[r.marks_fraction for _, r in results],
        diagnostic=None,
        elapsed=time.monotonic() - start,
    )


def _rejected(student_id, q, message, start) -> ReportEntry:
    return ReportEntry(
        student_id=student_id, question_id=q.question_id,
        outcome="Rejected", marks_fraction=Fraction(0), awarded=Fraction(0),
        best_correct_query_index=None, edits=[], edit_details=[],
        distance_breakdown=None, per_query_fractions=[],
        diagnostic=message, elapsed=time.monotonic() - start)


def grade_batch(submissions, assignment: Assignment, schema: Schema,
                parallelism: int = 1) -> dict:
    """Grade a list of {student_id, question_id, sql} mappings."""
    assignment.prepare(schema)

    def one(sub):
        qid = str(sub.get("question_id", ""))
        sid = str(sub.get("student_id", ""))
        q = assignment.questions.get(qid)
        if q is None:
            return ReportEntry(
                student_id=sid, question_id=qid, outcome="Rejected",
                marks_fraction=Fraction(0), awarded=Fraction(0),
                best_correct_query_index=None, edits=[], edit_details=[],
                distance_breakdown=None, per_query_fractions=[],
                diagnostic=f"unknown question {qid!r}", elapsed=0.0)
        try:
            return grade_submission(sub.get("sql", ""), q, schema, sid)
        except SqlGradeError as exc:
            return _rejected(sid, q, str(exc), time.monotonic())

    if parallelism <= 1:
        entries = [one(s) for s in submissions]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            entries = list(pool.map(one, submissions))
    elapsed = [e.elapsed for e in entries]
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "results": [e.to_dict() for e in entries],
        "stats": {
            "graded": len(entries),
            "rejected": sum(1 for e in entries if e.outcome == "Rejected"),
            "budget_exceeded": sum(1 for e in entries
                                   if e.outcome == "BudgetExceeded"),
            "total_seconds": round(sum(elapsed), 6),
            "max_seconds": round(max(elapsed), 6) if elapsed else 0.0,
        },
    }


def load_submissions(text: str):
    doc = yaml.safe_load(text)
    if isinstance(doc, dict) and "submissions" in doc:
        doc = doc["submissions"]
    if not isinstance(doc, list):
        raise SqlGradeError(
            "submissions document must be a list or map 'submissions'")
    return doc


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"
