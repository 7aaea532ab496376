"""Edit-based partial-credit grading for SQL assignments.

Pipeline: parse SQL -> resolve names against a schema catalog -> flatten to
an immutable canonical tree -> rewrite to a canonical form -> measure a
weighted, component-classed edit distance against one or more correct
queries -> search for a guided edit sequence that explains the gap -> award
marks proportional to the unexplained weight.
"""

from .canonicalize import (
    canonical_root,
    canonicalize_full,
    canonicalize_syntactic,
)
from .distance import (
    COMPONENT_CLASSES,
    DEFAULT_WEIGHTS,
    ComponentWeights,
    DistanceBreakdown,
    canonicalized_edit_distance,
    marks_from_distance,
    total_component_marks,
)
from .edits import (
    Edit,
    EditSequence,
    adjust_with_cost,
    apply_edit,
    check_consistency,
    enumerate_edits,
)
from .errors import (
    BudgetExceeded,
    CycleDetected,
    DegenerateTotal,
    FixpointOverrun,
    InconsistentEdit,
    ParseError,
    ResolutionError,
    SchemaValidationError,
    SqlGradeError,
    SqlSyntaxError,
)
from .grader import (
    Assignment,
    Question,
    ReportEntry,
    build_tree,
    dump_report,
    grade_batch,
    grade_submission,
    load_assignment,
    load_submissions,
)
from .schema import Schema, load_schema
from .search import (
    Budget,
    EXHAUSTIVE_BUDGET,
    GREEDY_BUDGET,
    LEARNING_BUDGET,
    SearchResult,
    exhaustive_search,
    greedy_search,
)
from .tree import FlatNode, FlatTree, pretty

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Budget",
    "BudgetExceeded",
    "COMPONENT_CLASSES",
    "ComponentWeights",
    "CycleDetected",
    "DEFAULT_WEIGHTS",
    "DegenerateTotal",
    "DistanceBreakdown",
    "EXHAUSTIVE_BUDGET",
    "Edit",
    "EditSequence",
    "FixpointOverrun",
    "FlatNode",
    "FlatTree",
    "GREEDY_BUDGET",
    "InconsistentEdit",
    "LEARNING_BUDGET",
    "ParseError",
    "Question",
    "ReportEntry",
    "ResolutionError",
    "Schema",
    "SchemaValidationError",
    "SearchResult",
    "SqlGradeError",
    "SqlSyntaxError",
    "adjust_with_cost",
    "apply_edit",
    "build_tree",
    "canonical_root",
    "canonicalize_full",
    "canonicalize_syntactic",
    "canonicalized_edit_distance",
    "check_consistency",
    "dump_report",
    "enumerate_edits",
    "exhaustive_search",
    "grade_batch",
    "grade_submission",
    "greedy_search",
    "load_assignment",
    "load_schema",
    "load_submissions",
    "marks_from_distance",
    "pretty",
    "total_component_marks",
]
