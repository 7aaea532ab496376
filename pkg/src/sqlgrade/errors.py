"""Exception types shared across the grading engine."""


class SqlGradeError(Exception):
    """Base class for all engine errors."""


class ParseError(SqlGradeError):
    """Malformed schema document."""


class SchemaValidationError(SqlGradeError):
    """Schema document violates an integrity constraint."""


class SqlSyntaxError(SqlGradeError):
    """SQL text could not be parsed.

    Carries (line, column) of the offending token so diagnostics can be
    anchored in submission text.
    """

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ResolutionError(SqlGradeError):
    """Base class for name-resolution failures."""


class UnknownRelation(ResolutionError):
    pass


class UnknownAttribute(ResolutionError):
    pass


class AmbiguousAttribute(ResolutionError):
    pass


class ScopeError(ResolutionError):
    pass


class FixpointOverrun(SqlGradeError):
    """The canonicalization loop exceeded its application cap."""


class InconsistentEdit(SqlGradeError):
    """An edit was applied whose result violates attribute scoping."""


class DegenerateTotal(SqlGradeError):
    """All component weights of the correct query sum to zero."""


class BudgetExceeded(SqlGradeError):
    """Search ran out of wall-clock time or state budget."""


class CycleDetected(SqlGradeError):
    """Greedy search revisited a canonical state."""
