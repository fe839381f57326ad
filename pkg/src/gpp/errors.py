"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class GppError(Exception):
    """Base class for every error raised by the toolchain."""


class ParseError(GppError):
    def __init__(self, message, span=None, expected=()):
        self.span = span
        self.expected = frozenset(expected)
        loc = f"{span}: " if span is not None else ""
        extra = ""
        if self.expected:
            extra = " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(f"{loc}{message}{extra}")
        self.message = message


class TypeCheckError(GppError):
    """A static typing failure."""

    def __init__(self, message, span=None, where=None):
        self.span = span
        self.where = where
        prefix = ""
        if span is not None:
            prefix += f"{span}: "
        if where:
            prefix += f"in {where}: "
        super().__init__(prefix + message)
        self.message = message


class UnknownOperator(TypeCheckError):
    pass


class ChannelMismatch(TypeCheckError):
    pass


# ---- runtime -------------------------------------------------------------

class RuntimeFault(GppError):
    pass


class UnboundVariable(RuntimeFault):
    pass


class DistParamOutOfDomain(RuntimeFault):
    pass


class TraceGetOutOfBounds(RuntimeFault):
    pass


class TraceGetTypeMismatch(RuntimeFault):
    pass


class TraceMismatch(RuntimeFault):
    """A trace does not fit the command structure (wrong kind, leftovers, ...)."""


class Stuck(RuntimeFault):
    def __init__(self, rule, cursors, detail=""):
        self.rule = rule
        self.cursors = cursors
        super().__init__(f"stuck at {rule} with cursors {cursors}" + (f": {detail}" if detail else ""))


class StepLimitExceeded(RuntimeFault):
    pass


class ObservationExhausted(RuntimeFault):
    pass


class ObservationMismatch(RuntimeFault):
    pass


class ProtocolMismatch(RuntimeFault):
    pass


class DeadlockError(RuntimeFault):
    pass


# ---- inference -----------------------------------------------------------

class InferenceError(GppError):
    pass


class AllImpossible(InferenceError):
    pass


class InitImpossible(InferenceError):
    pass


class NonFiniteGradient(InferenceError):
    pass
