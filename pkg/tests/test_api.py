import json

import pytest
from fastapi.testclient import TestClient

from sqlgrade.grader import load_assignment
from sqlgrade.server import create_app

from helpers import ROOT, UNIVERSITY


@pytest.fixture(scope="module")
def client():
    assignment = load_assignment(
        (ROOT / "sample" / "assignment.yaml").read_text())
    app = create_app(UNIVERSITY, assignment)
    return TestClient(app)


def test_question_list(client):
    r = client.get("/api/v1/questions")
    assert r.status_code == 200
    qs = {q["id"]: q for q in r.json()["questions"]}
    assert set(qs) == {"q1", "q2", "q3"}
    assert qs["q1"]["text"]
    assert qs["q2"]["max_marks"] == 5.0
    # the answer key never travels to the browser
    assert "correct" not in json.dumps(r.json()).lower()


def test_schema_catalog(client):
    r = client.get("/api/v1/schema")
    assert r.status_code == 200
    rels = {rel["name"]: rel for rel in r.json()["relations"]}
    assert "instructor" in rels and "takes" in rels
    inst = rels["instructor"]
    attr_names = [a["name"] for a in inst["attributes"]]
    assert "salary" in attr_names
    assert inst["primary_key"] == ["id"]
    assert any(fk["references"] == "department"
               for fk in inst["foreign_keys"])


def test_correct_submission_full_marks(client):
    r = client.post("/api/v1/feedback", json={
        "question_id": "q2",
        "sql": "SELECT DISTINCT course_id FROM takes"})
    assert r.status_code == 200
    body = r.json()
    assert body["outcome"] == "Matched"
    assert body["equivalent"] is True
    assert body["marks_fraction"] == 1.0
    assert body["edits"] == []


def test_equivalent_rewrite_reports_equivalence(client):
    r = client.post("/api/v1/feedback", json={
        "question_id": "q1",
        "sql": "SELECT DISTINCT name FROM teaches, instructor "
               "WHERE year = 2018 AND semester = 'Spring' "
               "AND teaches.id = instructor.id"})
    assert r.status_code == 200
    assert r.json()["equivalent"] is True
    assert r.json()["marks_fraction"] == 1.0


def test_near_miss_gets_edit_hints(client):
    r = client.post("/api/v1/feedback", json={
        "question_id": "q1",
        "sql": "SELECT DISTINCT name FROM instructor, teaches "
               "WHERE instructor.id = teaches.id AND year = 2018"})
    assert r.status_code == 200
    body = r.json()
    assert body["outcome"] == "Matched"
    assert body["equivalent"] is False
    assert 0 < body["marks_fraction"] < 1
    assert len(body["edits"]) == 1
    assert "semester" in body["edits"][0]


def test_feedback_metering_first_truncates(client):
    # q2 is configured feedback: first -- a two-gap answer gets one hint
    r = client.post("/api/v1/feedback", json={
        "question_id": "q2",
        "sql": "SELECT id FROM takes"})
    assert r.status_code == 200
    body = r.json()
    assert body["marks_fraction"] < 1
    assert len(body["edits"]) <= 1


def test_unknown_question_404(client):
    r = client.post("/api/v1/feedback",
                    json={"question_id": "zzz", "sql": "SELECT 1"})
    assert r.status_code == 404


def test_syntax_error_422_with_location(client):
    r = client.post("/api/v1/feedback", json={
        "question_id": "q1", "sql": "SELEC name FROM instructor"})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["diagnostics"]
    assert detail["line"] >= 1 and detail["column"] >= 1


def test_semantic_error_422(client):
    r = client.post("/api/v1/feedback", json={
        "question_id": "q1", "sql": "SELECT nope FROM instructor"})
    assert r.status_code == 422
    assert "nope" in r.json()["detail"]["diagnostics"]


def test_malformed_body_400(client):
    r = client.post("/api/v1/feedback", json={"sql": "SELECT 1"})
    assert r.status_code == 400
    r = client.post("/api/v1/feedback",
                    content=b"not json at all",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400
    r = client.post("/api/v1/feedback",
                    json={"question_id": "q1", "sql": "   "})
    assert r.status_code == 400


def test_responses_never_leak_answer_key(client):
    assignment = load_assignment(
        (ROOT / "sample" / "assignment.yaml").read_text())
    answers = [sql.strip() for q in assignment.questions.values()
               for sql in q.correct_queries]
    probes = [
        {"question_id": "q1", "sql": "SELECT name FROM instructor"},
        {"question_id": "q2", "sql": "SELECT id FROM student"},
        {"question_id": "q3", "sql": "SELECT building FROM department"},
    ]
    for p in probes:
        blob = client.post("/api/v1/feedback", json=p).text
        for ans in answers:
            assert ans not in blob


def test_correct_only_metering_hides_marks_and_edits():
    assignment = load_assignment("""
questions:
  - id: strict
    correct_queries: ["SELECT DISTINCT course_id FROM takes"]
    feedback: correct-only
""")
    app = create_app(UNIVERSITY, assignment)
    c = TestClient(app)
    r = c.post("/api/v1/feedback", json={
        "question_id": "strict", "sql": "SELECT course_id FROM takes"})
    assert r.status_code == 200
    body = r.json()
    assert body["equivalent"] is False
    assert "marks_fraction" not in body
    assert "edits" not in body
    r = c.post("/api/v1/feedback", json={
        "question_id": "strict",
        "sql": "SELECT DISTINCT course_id FROM takes"})
    assert r.json()["equivalent"] is True
