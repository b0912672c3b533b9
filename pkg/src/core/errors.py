# Engine exception hierarchy
from typing import Optional


class InvariantEngineError(Exception):
    """Base class for every error raised by the invariant engine"""


class MalformedInputError(InvariantEngineError):
    pass


class ExpressionSyntaxError(MalformedInputError):
    def __init__(self, message: str, position: int = -1):
        self.position = position
        if position >= 0:
            message = f"{message} (at position {position})"
        super().__init__(message)


class FreeIndexError(MalformedInputError):
    """An index letter occurs other than exactly twice in a monomial"""


class UnsupportedCaseError(InvariantEngineError):
    pass


class ResourceLimitError(InvariantEngineError):
    """Slot or memory bound exceeded; builds can resume from written units"""


class UnknownInvariantError(InvariantEngineError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DependencyError(InvariantEngineError):
    def __init__(self, message: str, missing_case: Optional[object] = None):
        self.missing_case = missing_case
        super().__init__(message)


class InconsistentRelationError(InvariantEngineError):
    """A relation reduced to a nonzero constant: generator bug"""


class DatabaseError(InvariantEngineError):
    pass


class CorruptDatabaseError(DatabaseError):
    pass


class VersionMismatchError(DatabaseError):
    pass


class InsufficientJetError(InvariantEngineError):
    pass


class VerificationError(InvariantEngineError):
    pass
