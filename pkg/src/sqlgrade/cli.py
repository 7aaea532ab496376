"""Command-line interface.

Subcommands:
    grade         batch-grade a submissions file against an assignment
    canonicalize  print the canonical form (and rewrite trace) of one query
    diff          print the per-component distance table for two queries
    equiv         exit 0 iff two queries are canonically equivalent
    serve         run the learning-mode HTTP service

Exit codes: 0 success, 1 usage error (or non-equivalence for `equiv`),
2 input error, 3 budget exceeded somewhere in the batch.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .canonicalize import (
    canonical_root, canonicalize_full, canonicalize_syntactic,
)
from .distance import (
    ComponentWeights, canonicalized_edit_distance, total_component_marks,
)
from .errors import SqlGradeError
from .grader import (
    build_tree, dump_report, grade_batch, load_assignment, load_submissions,
)
from .schema import load_schema
from .search import Budget
from .tree import pretty

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _schema(args):
    return load_schema(_read(args.schema))


def _query_text(args, attr="query", file_attr="file"):
    text = getattr(args, attr, None)
    if text:
        return text
    path = getattr(args, file_attr, None)
    if path:
        return _read(path)
    raise SqlGradeError("provide a query with --query or --file")


def cmd_grade(args):
    schema = _schema(args)
    assignment = load_assignment(_read(args.assignment))
    if args.mode:
        for q in assignment.questions.values():
            q.mode = args.mode
    if args.budget_ms:
        for q in assignment.questions.values():
            q.budget = Budget(args.budget_ms / 1000.0,
                              q.effective_budget().max_states)
    submissions = load_submissions(_read(args.submissions))
    report = grade_batch(submissions, assignment, schema,
                         parallelism=args.parallelism)
    out = dump_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
    else:
        sys.stdout.write(out)
    if report["stats"]["budget_exceeded"]:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_canonicalize(args):
    schema = _schema(args)
    tree = build_tree(_query_text(args), schema)
    if args.syntactic_only:
        out, trace = canonicalize_syntactic(tree, schema)
    else:
        out, trace = canonicalize_full(tree, schema)
    print(pretty(out.root))
    if args.trace:
        print()
        if not trace:
            print("(no rewrites applied)")
        for rule, _, before, after in trace:
            print(f"{rule}:")
            print(f"  - {before}")
            print(f"  + {after}")
    return EXIT_OK


def cmd_diff(args):
    schema = _schema(args)
    w = ComponentWeights()
    a = build_tree(args.query_a, schema)
    b = build_tree(args.query_b, schema)
    a = a.replace_root(canonical_root(a, schema))
    b = b.replace_root(canonical_root(b, schema))
    breakdown = canonicalized_edit_distance(a, b, w)
    print(f"{'component':24} {'N_c':>5} {'E_c':>5} {'W_c':>5} {'W_c*E_c':>8}")
    for cls, n, e, wc, contrib in breakdown.as_rows(w):
        print(f"{cls:24} {n:>5} {e:>5} {str(wc):>5} {str(contrib):>8}")
    print(f"{'total':24} {'':>5} {'':>5} {'':>5} {str(breakdown.total):>8}")
    return EXIT_OK


def cmd_equiv(args):
    schema = _schema(args)
    a = build_tree(args.query_a, schema)
    b = build_tree(args.query_b, schema)
    if canonical_root(a, schema).serial == canonical_root(b, schema).serial:
        print("equivalent")
        return EXIT_OK
    print("not equivalent")
    return EXIT_USAGE


def cmd_serve(args):
    import uvicorn

    from .server import create_app
    schema = _schema(args)
    assignment = load_assignment(_read(args.assignment))
    app = create_app(schema, assignment, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="sqlgrade",
        description="Edit-based grading of SQL queries")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grade", help="batch-grade submissions")
    g.add_argument("--schema", required=True)
    g.add_argument("--assignment", required=True)
    g.add_argument("--submissions", required=True)
    g.add_argument("--out")
    g.add_argument("--mode", choices=["greedy", "exhaustive"])
    g.add_argument("--budget-ms", type=int)
    g.add_argument("--parallelism", type=int, default=1)
    g.set_defaults(fn=cmd_grade)

    c = sub.add_parser("canonicalize", help="print a query's canonical form")
    c.add_argument("--schema", required=True)
    c.add_argument("--query")
    c.add_argument("--file")
    c.add_argument("--trace", action="store_true")
    c.add_argument("--syntactic-only", action="store_true")
    c.set_defaults(fn=cmd_canonicalize)

    d = sub.add_parser("diff", help="per-component distance table")
    d.add_argument("--schema", required=True)
    d.add_argument("--query-a", required=True)
    d.add_argument("--query-b", required=True)
    d.set_defaults(fn=cmd_diff)

    e = sub.add_parser("equiv", help="exit 0 iff canonically equivalent")
    e.add_argument("--schema", required=True)
    e.add_argument("--query-a", required=True)
    e.add_argument("--query-b", required=True)
    e.set_defaults(fn=cmd_equiv)

    s = sub.add_parser("serve", help="run the learning-mode HTTP service")
    s.add_argument("--schema", required=True)
    s.add_argument("--assignment", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--static", help="directory of frontend assets to serve")
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SqlGradeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
