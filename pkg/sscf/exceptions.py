"""
Custom exceptions for the sscf package.
"""
from typing import Any, Optional


class SscfError(Exception):
    """Base exception for all sscf errors."""
    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class SscfValidationError(SscfError):
    """Raised when an input fails validation (dimensions, domains, file contents)."""
    pass


class SignatureError(SscfValidationError):
    """Raised when a block signature does not fit the requested variant or totals."""
    pass


class ParseError(SscfValidationError):
    """Raised when a JSON or YAML file cannot be parsed. `details` carries the location."""
    pass


class CorpusIntegrityError(SscfValidationError):
    """Raised when a corpus manifest checksum does not match an instance file."""
    pass


class NearSingularError(SscfError):
    """Raised when a pointwise nonsingularity certificate fails on the sampling grid."""
    pass


class ConstantRankError(SscfError):
    """Raised when a matrix function changes rank across the sampling grid."""
    pass


class AlignmentError(SscfError):
    """Raised when smooth SVD factors cannot be aligned between consecutive nodes."""
    pass


class PredicateError(SscfError):
    """Raised when a structural predicate required by an operation does not hold."""
    pass


class CoincidenceError(SscfError):
    """Raised when a canonicalization step loses its coincidence with the elementary target."""
    pass


class VerificationError(SscfError):
    """Raised when an equivalence or solution does not verify within tolerance."""
    pass


class NonConvergenceError(SscfError):
    """Raised when an adaptive fit or a solver does not reach its tolerance."""
    pass


__all__ = [
    "SscfError",
    "SscfValidationError",
    "SignatureError",
    "ParseError",
    "CorpusIntegrityError",
    "NearSingularError",
    "ConstantRankError",
    "AlignmentError",
    "PredicateError",
    "CoincidenceError",
    "VerificationError",
    "NonConvergenceError",
]
