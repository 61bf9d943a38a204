# core/errors.py
from dataclasses import dataclass
from enum import Enum


class AbortKind(str, Enum):
    QUEUE = "AbortQueue"
    LEAF = "AbortLeaf"


@dataclass(frozen=True)
class AbortEvent:
    kind: AbortKind
    op_serial: int


class OramError(Exception):
    """Base class for every error raised by the ORAM lab."""


class InvalidConfig(OramError, ValueError):
    pass


class InvalidNode(OramError, KeyError):
    pass


class CapacityExceeded(OramError):
    pass


class DuplicateIndex(OramError):
    """A live block with the same index is already queued (broken block-path invariance)."""


class InvariantViolation(OramError):
    pass


class OramAbort(OramError):
    """Raised when the ORAM hits one of its two abort conditions."""

    def __init__(self, event: AbortEvent):
        super().__init__(f"{event.kind.value} at op {event.op_serial}")
        self.event = event


class InstanceHalted(OramError):
    """Operation attempted on an instance that already aborted."""

    def __init__(self, event: AbortEvent):
        super().__init__(f"instance halted after {event.kind.value} at op {event.op_serial}")
        self.event = event


class MalformedTrace(OramError, ValueError):
    pass


class InsufficientSamples(OramError, ValueError):
    pass


class NoConvergence(OramError):
    pass


class UnequalLengths(OramError, ValueError):
    pass


class CouplingViolation(OramError):
    pass
