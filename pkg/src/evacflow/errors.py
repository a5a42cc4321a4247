"""Exception hierarchy.

Each top-level class maps to one CLI exit code (see ``EXIT_CODES``).
"""


class EvacflowError(Exception):
    exit_code = 1


class ScenarioSyntaxError(EvacflowError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(EvacflowError):
    """One or more named validation rules failed.

    ``violations`` is a list of ``(rule, message)`` pairs.
    """

    exit_code = 3
    rule = "Validation"

    def __init__(self, message="", violations=None):
        if violations is None:
            violations = [(self.rule, message)]
        self.violations = list(violations)
        if not message:
            message = "; ".join(f"{r}: {m}" for r, m in self.violations)
        super().__init__(message)


class GeometryError(ValidationError):
    rule = "Geometry"


class EmptyDomain(GeometryError):
    rule = "EmptyDomain"


class DisconnectedDomain(GeometryError):
    rule = "DisconnectedDomain"


class NoExit(GeometryError):
    rule = "NoExit"


class AdjacentExitRuns(GeometryError):
    rule = "AdjacentExitRuns"


class DanglingExitCell(GeometryError):
    rule = "DanglingExitCell"


class SolverError(EvacflowError):
    exit_code = 4


class CgDivergence(SolverError):
    pass


class MaximumPrincipleViolation(SolverError):
    pass


class NonpositiveExitFlux(SolverError):
    pass


class StabilityError(EvacflowError):
    exit_code = 5


class DomainError(StabilityError):
    """Density argument outside ``[0, R_max]``."""


class RangeViolation(StabilityError):
    pass


class DegenerateField(StabilityError):
    pass


class OutsideDomain(EvacflowError, ValueError):
    pass


EXIT_CODES = {
    "ok": 0,
    "parse": ScenarioSyntaxError.exit_code,
    "validation": ValidationError.exit_code,
    "solver": SolverError.exit_code,
    "stability": StabilityError.exit_code,
}
