"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and maps onto one of the
CLI exit codes (3 for backend failures, 4 for data/format errors).
"""
from __future__ import annotations


class FragselError(Exception):
    code = "E_FRAGSEL"
    exit_code = 1


# ---------------------------------------------------------------- data errors


class DataError(FragselError, ValueError):
    code = "E_DATA"
    exit_code = 4


class ConfigError(DataError):
    code = "E_CONFIG"


class EmptyDocument(DataError):
    code = "E_EMPTY_DOCUMENT"


class SingleSentence(DataError):
    code = "E_SINGLE_SENTENCE"


class NotAnImage(DataError):
    code = "E_NOT_AN_IMAGE"


class LengthMismatch(DataError):
    code = "E_LENGTH_MISMATCH"


class DimensionMismatch(DataError):
    code = "E_DIMENSION_MISMATCH"


class DomainError(DataError):
    code = "E_DOMAIN"


class PreconditionViolation(DataError):
    code = "E_PRECONDITION"


class MissingTeacherLogits(DataError):
    code = "E_MISSING_TEACHER_LOGITS"


class EmptyRetrieval(DataError):
    code = "E_EMPTY_RETRIEVAL"


class UnsortedEdges(DataError):
    code = "E_UNSORTED_EDGES"


class FixtureParseError(DataError):
    code = "E_FIXTURE_PARSE"


# ------------------------------------------------------------- backend errors


class BackendFailure(FragselError):
    """A model backend failed or violated its output contract."""

    code = "E_BACKEND"
    exit_code = 3

    def __init__(self, message: str, *, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class BackendTimeout(BackendFailure):
    code = "E_BACKEND_TIMEOUT"


class ScorerFailure(BackendFailure):
    code = "E_SCORER"


class DetectorFailure(BackendFailure):
    code = "E_DETECTOR"


class FixtureMiss(BackendFailure, KeyError):
    """A mock backend was asked for a key its fixture does not contain."""

    code = "E_FIXTURE_MISS"

    def __init__(self, key):
        super().__init__(f"fixture has no entry for {key!r}")
        self.key = key

    def __str__(self) -> str:
        return self.args[0]
