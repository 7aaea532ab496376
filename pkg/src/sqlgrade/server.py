"""HTTP service for learning mode.

Students fetch the question list and schema, post SQL, and receive
immediate feedback: an equivalence flag and, depending on the question's
feedback policy, a marks fraction and a rendered edit list.  Responses
never contain the text or serialized form of any correct query.  Requests
are stateless; engine structures are shared read-only across requests.
"""

from __future__ import annotations

from fractions import Fraction

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .canonicalize import canonical_root
from .errors import SqlGradeError, SqlSyntaxError
from .grader import Assignment, Question, build_tree
from .schema import Schema
from .search import LEARNING_BUDGET, exhaustive_search, greedy_search

API_PREFIX = "/api/v1"


class FeedbackRequest(BaseModel):
    question_id: str
    sql: str


def _schema_payload(schema: Schema) -> dict:
    relations = []
    for rel in schema.relations.values():
        relations.append({
            "name": rel.name,
            "attributes": [
                {"name": a.name, "type": a.type, "nullable": a.nullable}
                for a in rel.attributes
            ],
            "primary_key": list(rel.primary_key),
            "unique_keys": [list(k) for k in rel.unique_keys],
            "foreign_keys": [
                {
                    "attributes": list(fk.attrs),
                    "references": fk.ref_relation,
                    "ref_attributes": list(fk.ref_attrs),
                }
                for fk in rel.foreign_keys
            ],
        })
    return {"relations": relations}


def _feedback(q: Question, sql: str, schema: Schema) -> dict:
    try:
        sq = build_tree(sql, schema)
    except SqlSyntaxError as exc:
        raise HTTPException(status_code=422, detail={
            "diagnostics": str(exc),
            "line": exc.line,
            "column": exc.column,
        })
    except SqlGradeError as exc:
        raise HTTPException(status_code=422,
                            detail={"diagnostics": str(exc)})

    sq_serial = canonical_root(sq, schema).serial
    if any(sq_serial == full.root.serial for _, full in q._prepared):
        return {"outcome": "Matched", "equivalent": True,
                "marks_fraction": 1.0, "edits": []}

    budget = q.budget if q.budget is not None else LEARNING_BUDGET
    fn = greedy_search if q.mode == "greedy" else exhaustive_search
    results = [fn(sq, full, q.weights, budget, schema=schema)
               for _, full in q._prepared]
    best = min(results,
               key=lambda r: (-r.marks_fraction, r.edit_seq.total_cost))
    if best.outcome == "BudgetExceeded":
        raise HTTPException(status_code=503,
                            detail={"diagnostics": "search budget exceeded"})

    body: dict = {"outcome": best.outcome, "equivalent": False}
    if q.feedback == "correct-only":
        return body
    body["marks_fraction"] = float(best.marks_fraction)
    descriptions = [e.description for e in best.edit_seq.edits]
    if q.feedback == "first":
        descriptions = descriptions[:1]
    body["edits"] = descriptions
    return body


def create_app(schema: Schema, assignment: Assignment,
               static_dir: str | None = None) -> FastAPI:
    assignment.prepare(schema)
    app = FastAPI(title="sqlgrade learning mode", version="1")
    schema_payload = _schema_payload(schema)

    # 422 is reserved for SQL syntax diagnostics; a body that does not even
    # decode into {question_id, sql} is a plain bad request.
    @app.exception_handler(RequestValidationError)
    def malformed_body(_request, exc):
        return JSONResponse(status_code=400,
                            content={"detail": {"diagnostics": str(exc)}})

    @app.get(f"{API_PREFIX}/questions")
    def questions():
        return {"questions": [
            {"id": q.question_id, "text": q.text,
             "max_marks": float(q.max_marks), "feedback": q.feedback}
            for q in assignment.questions.values()
        ]}

    @app.get(f"{API_PREFIX}/schema")
    def schema_catalog():
        return schema_payload

    @app.post(f"{API_PREFIX}/feedback")
    def feedback(req: FeedbackRequest):
        q = assignment.questions.get(req.question_id)
        if q is None:
            raise HTTPException(status_code=404,
                                detail={"diagnostics": "unknown question"})
        if not req.sql.strip():
            raise HTTPException(status_code=400,
                                detail={"diagnostics": "empty sql"})
        return _feedback(q, req.sql, schema)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
