"""Exception hierarchy shared by every module."""
from __future__ import annotations


class OMDError(Exception):
    """Base class for all library errors."""


class UnboundVariable(OMDError):
    def __init__(self, variable: object) -> None:
        super().__init__(f"variable {variable} is not bound by the assignment")
        self.variable = variable


class UnknownPredicate(OMDError):
    def __init__(self, predicate: str) -> None:
        super().__init__(f"unknown predicate {predicate}")
        self.predicate = predicate


class ParseError(OMDError):
    """Syntax error with a 1-based source location.

    Named ParseError so it does not shadow the builtin SyntaxError.
    """

    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        loc = f"{line}:{col}: " if line else ""
        super().__init__(f"{loc}{message}")
        self.message = message
        self.line = line
        self.col = col


class ArityMismatch(ParseError):
    pass


class NegationOutsideNC(ParseError):
    pass


class ExistentialInEgd(ParseError):
    pass


class ExistentialInCategoricalPosition(ParseError):
    pass


class NotComparable(OMDError):
    def __init__(self, low: str, high: str) -> None:
        super().__init__(f"category {high} is not an ancestor of {low}")
        self.low = low
        self.high = high


class NotApplicable(OMDError):
    pass


class NegatedOpenPredicate(OMDError):
    def __init__(self, predicate: str) -> None:
        super().__init__(
            f"negated atom over {predicate}, which has no closed extension"
        )
        self.predicate = predicate


class Indeterminate(OMDError):
    """The bounded chase stopped before a verdict could be reached."""


class LayeringViolation(OMDError):
    pass


class MissingQualityVersion(OMDError):
    pass


class UnknownSourcePredicate(OMDError):
    def __init__(self, predicate: str) -> None:
        super().__init__(f"{predicate} is not a source predicate")
        self.predicate = predicate


class RecursiveDefinition(OMDError):
    pass


class UndefinedQualityPredicate(OMDError):
    pass
