"""
Numerical tolerances shared by every sscf module.

The defaults leave three orders of magnitude between fitting and checking so that
refitted compositions still pass their verification grids.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Any, Optional


@dataclass(frozen=True)
class Tolerances:
    """
    Tolerance bundle passed through the library.

    Attributes:
        fit_tol (float): Chebyshev tail bound for adaptive fits (relative to the sample scale)
        check_tol (float): residual bound for structural checks on the verification grid
        rank_gap_tol (float): singular values at or below this count as zero
        singularity_threshold (float): minimum singular value certifying nonsingularity
        rank_rel_tol (float): relative threshold for numerical rank of constant matrices
        degree_cap (int): largest Chebyshev degree an adaptive fit may use
        grid (int): number of Chebyshev-Lobatto nodes of the verification grid
        verify_tol (float): bound for end-to-end equivalence verification
    """
    fit_tol: float = 1e-12
    check_tol: float = 1e-9
    rank_gap_tol: float = 1e-6
    singularity_threshold: float = 1e-8
    rank_rel_tol: float = 1e-8
    degree_cap: int = 512
    grid: int = 65
    verify_tol: float = 1e-8

    def replace(self, **overrides: Any) -> Tolerances:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def resolve(tolerances: Optional[Tolerances]) -> Tolerances:
    return DEFAULT_TOLERANCES if tolerances is None else tolerances
