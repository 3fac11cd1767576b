"""Exception types shared across the engine."""

from __future__ import annotations


class FieldOpsError(Exception):
    """Base class for all engine errors."""


class ContractError(FieldOpsError):
    """An operation was called with arguments violating its precondition."""


class ValidationError(FieldOpsError):
    """Input data breaks one or more model invariants.

    Carries the full violation list so callers can surface field paths.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.path}: {v.message}" for v in self.violations)
        super().__init__(f"validation failed: {lines}")


class ParseError(FieldOpsError):
    """A document could not be parsed; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class VersionError(FieldOpsError):
    """Unsupported document format version."""


class InfeasibleStrategyError(FieldOpsError):
    """No feasible agent assignment exists; names the blocking threads."""

    def __init__(self, thread_ids, message: str | None = None):
        self.thread_ids = tuple(sorted(thread_ids))
        super().__init__(
            message or f"infeasible strategy: threads {', '.join(self.thread_ids)}"
        )


class StaleDecisionError(FieldOpsError):
    """A strategic decision no longer matches the current world."""


class ReplanRequired(FieldOpsError):
    """Signal: the active decision became infeasible, a new one is needed."""

    def __init__(self, thread_ids):
        self.thread_ids = tuple(sorted(thread_ids))
        super().__init__(f"replan required: threads {', '.join(self.thread_ids)}")


class SizeGuardError(FieldOpsError):
    """Instance exceeds the brute-force oracle guard."""


class StalenessError(FieldOpsError):
    """Inputs were computed against different world snapshots."""


class ConflictError(FieldOpsError):
    """Two accepted recommendations edit the same field incompatibly."""

    def __init__(self, first: str, second: str, field: str):
        self.pair = (first, second)
        self.field = field
        super().__init__(f"conflicting recommendations {first} and {second} on {field}")


class OrderingError(FieldOpsError):
    """Event appended out of time order."""


class LivelockError(FieldOpsError):
    """Simulation made no progress: world state repeated without time advance."""


class VersionConflictError(FieldOpsError):
    """Optimistic-concurrency check failed."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"version conflict: expected {expected}, actual {actual}")
