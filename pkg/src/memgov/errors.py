"""Exception hierarchy shared by every module.

Validation errors map to CLI exit status 1 and HTTP 400; lookups map to 404.
"""

from __future__ import annotations


class MemGovError(Exception):
    """Base class for all governance errors."""


class ValidationError(MemGovError):
    """Caller supplied input outside an operation's domain."""


class EmptyContent(ValidationError):
    def __init__(self) -> None:
        super().__init__("memory content is empty")


class EmptyQuery(ValidationError):
    def __init__(self) -> None:
        super().__init__("query is empty")


class EmptyText(ValidationError):
    def __init__(self) -> None:
        super().__init__("text is empty")


class EmptyCorpus(ValidationError):
    def __init__(self) -> None:
        super().__init__("entropy probe needs non-empty content")


class UnknownParent(ValidationError):
    def __init__(self, memory_id: int) -> None:
        super().__init__(f"unknown or tombstoned parent memory {memory_id}")
        self.memory_id = memory_id


class DimensionMismatch(ValidationError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"embedding dimension {got} does not match store dimension {expected}")
        self.expected = expected
        self.got = got


class DomainError(ValidationError):
    """A numeric argument is outside the documented domain."""


class NonPositiveStability(DomainError):
    def __init__(self, stability: float) -> None:
        super().__init__(f"stability must be positive, got {stability!r}")


class WindowTooSmall(ValidationError):
    def __init__(self, window: int, reserve: int) -> None:
        super().__init__(f"total window {window} must exceed the reasoning reserve {reserve}")


class SameRecord(ValidationError):
    def __init__(self, memory_id: int) -> None:
        super().__init__(f"conflict needs two distinct records, got {memory_id} twice")


class ConfigError(ValidationError):
    """Unknown key, bad value, or a config file that cannot be read."""


class ParseError(ValidationError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonMonotoneClock(ValidationError):
    def __init__(self, line: int, at: float, clock: float) -> None:
        super().__init__(f"line {line}: timestamp {at} precedes clock {clock}")
        self.line = line


class NotFound(MemGovError):
    def __init__(self, memory_id: int) -> None:
        super().__init__(f"memory {memory_id} not found")
        self.memory_id = memory_id


class Tombstoned(NotFound):
    def __init__(self, memory_id: int) -> None:
        MemGovError.__init__(self, f"memory {memory_id} has been deleted")
        self.memory_id = memory_id


class WriteRejected(MemGovError):
    """The write-path guard refused an entry."""

    def __init__(self, reason: str) -> None:
        super().__init__(f"write rejected: {reason}")
        self.reason = reason


class SnapshotError(MemGovError):
    pass


class IoFailure(SnapshotError):
    pass


class ConfigMismatch(SnapshotError):
    pass


class CorruptRecord(SnapshotError):
    def __init__(self, line: int, message: str = "corrupt record") -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class AdapterError(MemGovError):
    pass


class AdapterUnavailable(AdapterError):
    pass


class MalformedResponse(AdapterError):
    pass
