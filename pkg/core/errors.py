"""Exception hierarchy shared by services, storage and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class RPWError(Exception):
    """Base class for all toolkit errors."""


class DomainError(RPWError, ValueError):
    """A mathematical precondition does not hold."""


class ResourceLimitError(RPWError, RuntimeError):
    """A configured cost cap would be exceeded."""


class UsageError(RPWError):
    """The command line could not be interpreted."""


class DataError(RPWError, ValueError):
    """Input data is malformed or unusable."""


@dataclass(frozen=True)
class RowError:
    """One rejected input row."""

    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


class IngestError(DataError):
    """A file contained one or more invalid rows."""

    def __init__(self, path: str, errors: Sequence[RowError]):
        self.path = path
        self.errors = list(errors)
        shown = "; ".join(str(e) for e in self.errors[:10])
        more = f" (+{len(self.errors) - 10} more)" if len(self.errors) > 10 else ""
        super().__init__(f"{path}: {len(self.errors)} invalid row(s): {shown}{more}")


__all__ = [
    "RPWError",
    "DomainError",
    "ResourceLimitError",
    "UsageError",
    "DataError",
    "RowError",
    "IngestError",
]
