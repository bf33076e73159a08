# errors.py
from typing import Optional


class EigenmeasureError(Exception):
    """Base class for every error raised by the package."""


class PrecisionError(EigenmeasureError):
    """Residues or matrices known at incompatible or insufficient precision."""


class PreconditionError(EigenmeasureError, ValueError):
    pass


class DomainError(EigenmeasureError, ValueError):
    """Input outside the domain of an operation (non-squares, foreign matrices)."""


class InvalidRingError(EigenmeasureError, ValueError):
    pass


class SpecError(EigenmeasureError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ResourceError(EigenmeasureError):
    def __init__(self, message: str, modulus_exp: Optional[int] = None, predicted: Optional[int] = None):
        if modulus_exp is not None:
            message = f"{message} at modulus exponent {modulus_exp}"
        if predicted is not None:
            message = f"{message} (predicted {predicted} entries)"
        super().__init__(message)
        self.modulus_exp = modulus_exp
        self.predicted = predicted


class ConsistencyError(EigenmeasureError):
    """An engine produced data that contradicts a checked invariant."""


class PartitionError(EigenmeasureError):
    pass
