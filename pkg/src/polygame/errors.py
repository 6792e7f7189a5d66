"""Exception hierarchy shared by every polygame module."""

from __future__ import annotations


class PolygameError(Exception):
    """Base class for all errors raised by polygame."""

    code = "PolygameError"


class ModelError(PolygameError):
    """The model itself is malformed (bad polytope, bad DSL source, ...)."""

    code = "ModelError"


class EmptyPolytope(ModelError):
    code = "EmptyPolytope"


class UnknownState(ModelError):
    code = "UnknownState"


class NotInSimplex(PolygameError):
    code = "NotInSimplex"


class DslError(ModelError):
    """Error in a ``.psg`` source, optionally carrying a source location."""

    code = "DslError"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class PsgSyntaxError(DslError):
    code = "SyntaxError"


class SemanticError(DslError):
    code = "SemanticError"


class DuplicateLabel(DslError):
    code = "DuplicateLabel"


class UnknownIdentifier(DslError):
    code = "UnknownIdentifier"


class MixedOwners(DslError):
    code = "MixedOwners"


class Unbounded(DslError):
    """State-space exploration exceeded the configured cap."""

    code = "Unbounded"


class BadTerrainValue(ModelError):
    code = "BadTerrainValue"

    def __init__(self, matrix: str, x: int, y: int, value):
        self.matrix = matrix
        self.cell = (x, y)
        self.value = value
        super().__init__(f"{matrix}[{x},{y}] = {value} is out of range")


class PreconditionFailed(PolygameError):
    """Solver precondition (almost-sure stopping, irreducibility) does not hold."""

    code = "PreconditionFailed"

    def __init__(self, condition: str, message: str | None = None):
        self.condition = condition
        super().__init__(message or f"precondition failed: {condition}")


class NotConverged(PolygameError):
    """Iteration hit ``max_iterations``; ``result`` holds the flagged partial result."""

    code = "NotConverged"

    def __init__(self, result, message: str | None = None):
        self.result = result
        super().__init__(message or f"not converged after {result.iterations} iterations")


class SingularSystem(PolygameError):
    code = "SingularSystem"


class TooManyStrategies(PolygameError):
    code = "TooManyStrategies"
