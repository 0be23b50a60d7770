"""
Strong standard canonical forms for linear time-varying DAEs.

This package reduces pairs in standard canonical form to a constant nilpotent part, computes
their canonical characteristics and Jordan structure, solves the resulting systems and
generates seeded benchmark corpora.
"""

from .chebmat import Interval, MatrixFunction
from .dae import Problem, ScfPair, canonicalize_pair, solve_equivalent, solve_problem, solve_sscf
from .equivalence import DaePair, EquivalenceTransform
from .canon_col import canonicalize_col
from .canon_row import canonicalize_row
from .exceptions import (
    SscfError,
    SscfValidationError,
    SignatureError,
    ParseError,
    CorpusIntegrityError,
    NearSingularError,
    ConstantRankError,
    AlignmentError,
    PredicateError,
    CoincidenceError,
    VerificationError,
    NonConvergenceError,
)
from .models import (
    Variant,
    BlockSignature,
    Characteristics,
    VerificationReport,
    SolveResult,
    GenSpec,
    Report,
)
from .settings import DEFAULT_TOLERANCES, Tolerances
from .structure import SutMatrixFunction

__version__ = "0.1.0"

__all__ = [
    "Interval",
    "MatrixFunction",
    "SutMatrixFunction",
    "DaePair",
    "EquivalenceTransform",
    "ScfPair",
    "Problem",
    "canonicalize_col",
    "canonicalize_row",
    "canonicalize_pair",
    "solve_sscf",
    "solve_problem",
    "solve_equivalent",
    "Tolerances",
    "DEFAULT_TOLERANCES",
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
    "Variant",
    "BlockSignature",
    "Characteristics",
    "VerificationReport",
    "SolveResult",
    "GenSpec",
    "Report",
]
