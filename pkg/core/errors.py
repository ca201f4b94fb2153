# core/errors.py
"""
Named failures raised across the harness.

Lookup-style errors also derive from the builtin they resemble so callers
can catch either `NotFound` or `KeyError`.
"""

from __future__ import annotations

from typing import List, Optional


class GridQAError(Exception):
    """Base class for every harness failure."""


class MalformedTag(GridQAError, ValueError):
    def __init__(self, text: str):
        super().__init__(f"malformed cell tag: {text!r}")
        self.text = text


class NotFound(GridQAError, KeyError):
    def __init__(self, what: str):
        super().__init__(what)
        self.what = what

    def __str__(self) -> str:
        return f"not found: {self.what}"


class ScenarioMismatch(GridQAError, ValueError):
    pass


class EmptyRegion(GridQAError, ValueError):
    pass


class EmptySelection(GridQAError, ValueError):
    pass


class MissingColumn(GridQAError, ValueError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} missing from header")
        self.column = column


class EmptyTable(GridQAError, ValueError):
    pass


class UnknownTemplate(GridQAError, KeyError):
    def __init__(self, template_id: str):
        super().__init__(template_id)
        self.template_id = template_id

    def __str__(self) -> str:
        return f"unknown template: {self.template_id}"


class GateFailure(GridQAError):
    """Records whose reference answer does not recover its own gold claims."""

    def __init__(self, record_ids: List[str]):
        super().__init__(
            f"{len(record_ids)} record(s) failed the self-consistency gate: "
            + ", ".join(record_ids)
        )
        self.record_ids = record_ids


class DataValidationError(GridQAError):
    pass


class GatewayError(GridQAError):
    """
    kind: timeout | rate_limited | protocol | auth | server | connection
    """

    def __init__(
        self,
        kind: str,
        message: str = "",
        attempts: int = 1,
        record_id: Optional[str] = None,
    ):
        self.kind = kind
        self.message = message
        self.attempts = attempts
        self.record_id = record_id
        super().__init__(str(self))

    def __str__(self) -> str:
        where = f" [record {self.record_id}]" if self.record_id else ""
        return f"gateway {self.kind} after {self.attempts} attempt(s){where}: {self.message}"

    def for_record(self, record_id: str) -> "GatewayError":
        return GatewayError(self.kind, self.message, self.attempts, record_id)


class EmptyBatch(GridQAError, ValueError):
    pass


class DimensionMismatch(GridQAError, ValueError):
    pass


class ZeroVector(GridQAError, ValueError):
    pass


class SinkError(GridQAError, IOError):
    pass


class AllRecordsFailed(GridQAError):
    def __init__(self, failures: int):
        super().__init__(f"all {failures} record(s) failed")
        self.failures = failures


class SchemaError(GridQAError, ValueError):
    pass


class ConfigError(GridQAError):
    pass
