"""Exception types shared across the package."""

from __future__ import annotations


class SwigIdentError(Exception):
    """Base class for all package errors."""


class GraphValidationError(SwigIdentError):
    """A graph failed structural validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid graph: {lines}")


class ExprError(SwigIdentError):
    """Malformed probability expression (unbound symbol, duplicate variable, ...)."""


class RuleRefusedError(SwigIdentError):
    """A rewrite rule's side condition failed; carries the blocking check."""

    def __init__(self, message, blocking=None):
        super().__init__(message)
        self.blocking = blocking


class ZeroProbabilityError(SwigIdentError):
    """A query conditioned on an event with (numerically) zero probability."""


class StateSpaceLimitError(SwigIdentError):
    """The joint state space exceeds the enumeration limit."""


class ParseError(SwigIdentError):
    """Syntax error in a DSL document, with position information."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
