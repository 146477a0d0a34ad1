"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class CAAFCError(Exception):
    """Base class for all pipeline errors."""


class InvalidInput(CAAFCError, ValueError):
    pass


# -- gateway -----------------------------------------------------------------


class MissingPlaceholder(CAAFCError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"missing binding for placeholder {{{self.name}}}"


class UnknownPlaceholder(CAAFCError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"binding {self.name!r} does not match any placeholder"


class TransportError(CAAFCError):
    """Raised by backends for failures worth retrying."""


class BackendUnavailable(CAAFCError):
    pass


class BudgetExceeded(CAAFCError):
    pass


class NoJsonFound(CAAFCError):
    pass


class SchemaViolation(CAAFCError):
    def __init__(self, field: str, message: str = ""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field


class StructuredOutputFailure(CAAFCError):
    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = list(attempts)


# -- segmentation / retrieval / verdicts -------------------------------------


class EmptyDialogue(InvalidInput):
    pass


class EmptyExtraction(CAAFCError):
    pass


class RetrievalUnavailable(CAAFCError):
    pass


class EmptyNarrative(CAAFCError):
    pass


class VerdictCountMismatch(CAAFCError):
    def __init__(self, missing: list[str], extra: list[str]):
        super().__init__(f"verdicts missing for {missing!r}; unexpected verdicts for {extra!r}")
        self.missing = missing
        self.extra = extra


class EmptyInput(CAAFCError, ValueError):
    pass


class InvariantViolation(CAAFCError):
    pass


class StageError(CAAFCError):
    """Wraps an upstream failure with the name of the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


# -- datasets / metrics ------------------------------------------------------


class UnknownRawLabel(CAAFCError, ValueError):
    def __init__(self, record_id: str, raw: str):
        super().__init__(f"record {record_id!r}: unmapped raw label {raw!r}")
        self.record_id = record_id
        self.raw = raw


class ParseError(CAAFCError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class LengthMismatch(CAAFCError, ValueError):
    pass


class InsufficientData(CAAFCError, ValueError):
    pass


class DegenerateVariance(CAAFCError, ValueError):
    pass


class ConfigError(CAAFCError):
    pass
