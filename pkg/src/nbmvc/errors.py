"""Error taxonomy shared by every layer of the workbench.

Each exception carries a stable ``code`` string that is used verbatim in
protocol messages, CLI output and diagnostics, so clients can switch on it
without parsing prose.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all workbench failures."""

    code = "error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def __str__(self) -> str:
        if self.details:
            extras = ", ".join(f"{k}={v!r}" for k, v in self.details.items())
            return f"{self.message} ({extras})"
        return self.message


class InvalidArgument(WorkbenchError):
    code = "invalid-argument"


class NotFound(WorkbenchError):
    code = "not-found"


class CycleError(WorkbenchError):
    code = "cycle-error"


class SequenceGap(WorkbenchError):
    code = "sequence-gap"


class UnsupportedVersion(WorkbenchError):
    code = "unsupported-version"


class ParseError(WorkbenchError):
    code = "parse-error"


class AnchorError(WorkbenchError):
    code = "anchor-error"


class GuardFailed(WorkbenchError):
    code = "guard-failed"


class TransactionRolledBack(WorkbenchError):
    """Raised when a processor application fails; carries the causing error."""

    code = "transaction-rolled-back"

    def __init__(self, message: str = "", cause: WorkbenchError | None = None, **details):
        super().__init__(message, **details)
        self.cause = cause

    def __str__(self) -> str:
        base = super().__str__()
        if self.cause is not None:
            return f"{base}: {self.cause}"
        return base


class NoProcessor(WorkbenchError):
    code = "no-processor"


class ReplaceRejected(WorkbenchError):
    code = "replace-rejected"


class NothingToUndo(WorkbenchError):
    code = "nothing-to-undo"


class NothingToRedo(WorkbenchError):
    code = "nothing-to-redo"


class MalformedRawEvent(WorkbenchError):
    code = "malformed-raw-event"


class InvalidAnswer(WorkbenchError):
    code = "invalid-answer"

    def __init__(self, message: str = "", field: str = "", **details):
        super().__init__(message, field=field, **details)
        self.field = field


class ProfileError(WorkbenchError):
    code = "profile-error"

    def __init__(self, message: str = "", location: str = "", **details):
        super().__init__(message, location=location, **details)
        self.location = location


class ProfileMismatch(WorkbenchError):
    code = "profile-mismatch"


class SelectionError(WorkbenchError):
    code = "selection-error"


class CannotGenerate(WorkbenchError):
    code = "cannot-generate"

    def __init__(self, message: str = "", diagnostics=None, **details):
        super().__init__(message, **details)
        self.diagnostics = list(diagnostics or [])


class InputError(WorkbenchError):
    code = "input-error"


class SessionGone(WorkbenchError):
    code = "session-gone"
