"""
Equivalence transformations of DAE pairs.

A transform (L, K) of pointwise nonsingular matrix functions maps the pair {E, F} of
E x' + F x = q to {L E K, L F K + L E K'}; the solution changes as x = K x~ and the
inhomogeneity as q~ = L q.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from . import chebmat
from .chebmat import Interval, MatrixFunction
from .exceptions import SscfValidationError
from .models import VerificationReport
from .settings import Tolerances, resolve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DaePair:
    """
    Coefficient pair {E, F} of E(t) x' + F(t) x = q(t).
    """
    E: MatrixFunction
    F: MatrixFunction

    def __post_init__(self):
        if self.E.shape != self.F.shape or self.E.rows != self.E.cols:
            raise SscfValidationError(f"E {self.E.shape} and F {self.F.shape} must be square of equal size")
        if self.E.interval != self.F.interval:
            raise SscfValidationError(f"E and F live on different intervals: {self.E.interval} vs {self.F.interval}")

    @property
    def m(self) -> int:
        return self.E.rows

    @property
    def interval(self) -> Interval:
        return self.E.interval

    def to_dict(self) -> Dict[str, Any]:
        return {"E": self.E.to_dict(), "F": self.F.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> DaePair:
        try:
            return cls(MatrixFunction.from_dict(data["E"]), MatrixFunction.from_dict(data["F"]))
        except KeyError as e:
            raise SscfValidationError(f"Malformed pair, missing {e}")


@dataclass(frozen=True)
class EquivalenceTransform:
    """
    Pair (L, K) with the sampling certificates of their pointwise nonsingularity.

    Attributes:
        L (MatrixFunction): left factor
        K (MatrixFunction): right factor (change of unknowns x = K x~)
        certificate_L (float): smallest singular value of L on the certificate grid
        certificate_K (float): smallest singular value of K on the certificate grid
    """
    L: MatrixFunction
    K: MatrixFunction
    certificate_L: float
    certificate_K: float

    @classmethod
    def create(cls, L: MatrixFunction, K: MatrixFunction, *,
               tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
        """
        Raises:
            NearSingularError: L or K fails its nonsingularity certificate
        """
        if L.shape != K.shape or L.rows != L.cols:
            raise SscfValidationError(f"L {L.shape} and K {K.shape} must be square of equal size")
        if L.interval != K.interval:
            raise SscfValidationError(f"L and K live on different intervals: {L.interval} vs {K.interval}")
        tols = resolve(tolerances)
        return cls(L, K, chebmat.require_nonsingular(L, tols, "L"), chebmat.require_nonsingular(K, tols, "K"))

    @classmethod
    def identity(cls, m: int, interval: Interval = chebmat.DEFAULT_INTERVAL) -> EquivalenceTransform:
        eye = chebmat.identity(m, interval)
        return cls(eye, eye, 1.0, 1.0)

    @classmethod
    def from_constants(cls, L: np.ndarray, K: np.ndarray,
                       interval: Interval = chebmat.DEFAULT_INTERVAL, *,
                       tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
        return cls.create(chebmat.constant(L, interval), chebmat.constant(K, interval), tolerances=tolerances)

    @classmethod
    def permutation(cls, P: np.ndarray, interval: Interval = chebmat.DEFAULT_INTERVAL) -> EquivalenceTransform:
        """Similarity by a constant permutation matrix: L = P, K = P^T."""
        P = np.asarray(P, dtype=float)
        return cls(chebmat.constant(P, interval), chebmat.constant(P.T, interval), 1.0, 1.0)

    @property
    def m(self) -> int:
        return self.K.rows

    @property
    def interval(self) -> Interval:
        return self.K.interval

    def inverse(self, *, tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
        """(L^-1, K^-1): maps apply(self, p) back to p."""
        return inverse(self, tolerances=tolerances)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L": self.L.to_dict(),
            "K": self.K.to_dict(),
            "certificates": {"L": self.certificate_L, "K": self.certificate_K},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], *, tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
        """Rebuild a transform; certificates are recomputed, not trusted."""
        try:
            L, K = MatrixFunction.from_dict(data["L"]), MatrixFunction.from_dict(data["K"])
        except KeyError as e:
            raise SscfValidationError(f"Malformed transform, missing {e}")
        return cls.create(L, K, tolerances=tolerances)


def _check_compatible(T: EquivalenceTransform, p: DaePair) -> None:
    if T.m != p.m:
        raise SscfValidationError(f"Transform of size {T.m} cannot act on a pair of size {p.m}")
    if T.interval != p.interval:
        raise SscfValidationError(f"Transform and pair live on different intervals: {T.interval} vs {p.interval}")


def apply(T: EquivalenceTransform, p: DaePair, *, tolerances: Optional[Tolerances] = None) -> DaePair:
    """
    {E, F} -> {L E K, L F K + L E K'}, refitted.

    Raises:
        NonConvergenceError: a refit reaches the degree cap
    """
    _check_compatible(T, p)
    tols = resolve(tolerances)
    L, K, E, F = T.L, T.K, p.E, p.F
    dK = K.derivative()
    E_new = chebmat.product(L, E, K, tolerances=tols)
    if L.is_constant and K.is_constant:
        return DaePair(E_new, chebmat.product(L, F, K, tolerances=tols))

    def f_nodes(ts):
        l_vals, e_vals = L.values(ts), E.values(ts)
        return l_vals @ F.values(ts) @ K.values(ts) + l_vals @ e_vals @ dK.values(ts)

    F_new = chebmat.fit_nodes(f_nodes, p.interval, min_degree=L.degree + max(F.degree, E.degree) + K.degree,
                              tolerances=tols)
    return DaePair(E_new, F_new)


def compose(T1: EquivalenceTransform, T2: EquivalenceTransform, *,
            tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
    """
    T1 first, then T2: K = K1 K2, L = L2 L1.

    Raises:
        NearSingularError: a product fails its certificate
    """
    if T1.m != T2.m or T1.interval != T2.interval:
        raise SscfValidationError("Transforms to compose must share size and interval")
    tols = resolve(tolerances)
    K = chebmat.mul(T1.K, T2.K, tolerances=tols)
    L = chebmat.mul(T2.L, T1.L, tolerances=tols)
    return EquivalenceTransform.create(L, K, tolerances=tols)


def compose_all(*transforms: EquivalenceTransform, tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
    out = transforms[0]
    for T in transforms[1:]:
        out = compose(out, T, tolerances=tolerances)
    return out


def inverse(T: EquivalenceTransform, *, tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
    tols = resolve(tolerances)
    return EquivalenceTransform.create(chebmat.inverse(T.L, tolerances=tols),
                                       chebmat.inverse(T.K, tolerances=tols), tolerances=tols)


def lift(T: EquivalenceTransform, d: int) -> EquivalenceTransform:
    """Block-diagonal lift diag(I_d, L), diag(I_d, K)."""
    if d == 0:
        return T
    eye = chebmat.identity(d, T.interval)
    return EquivalenceTransform(chebmat.block_diag(eye, T.L), chebmat.block_diag(eye, T.K),
                                min(1.0, T.certificate_L), min(1.0, T.certificate_K))


def transform_rhs(T: EquivalenceTransform, q: MatrixFunction, *,
                  tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """Forward inhomogeneity map q~ = L q."""
    if q.rows != T.m:
        raise SscfValidationError(f"Right-hand side has {q.rows} rows, transform has size {T.m}")
    return chebmat.mul(T.L, q, tolerances=tolerances)


def verify(T: EquivalenceTransform, p: DaePair, p_tilde: DaePair, grid: Optional[int] = None,
           tol: Optional[float] = None, *, tolerances: Optional[Tolerances] = None) -> VerificationReport:
    """
    Check E~ = L E K and F~ = L F K + L E K' on a Chebyshev-Lobatto grid.

    Never raises on a failed check; the report carries pass/fail and the worst node.
    """
    _check_compatible(T, p)
    _check_compatible(T, p_tilde)
    tols = resolve(tolerances)
    grid = tols.grid if grid is None else grid
    tol = tols.verify_tol if tol is None else tol
    ts = chebmat.verification_grid(p.interval, grid)
    L, K, dK = T.L.values(ts), T.K.values(ts), T.K.derivative().values(ts)
    E, F = p.E.values(ts), p.F.values(ts)
    res_E = np.abs(L @ E @ K - p_tilde.E.values(ts)).sum(axis=2).max(axis=1)
    res_F = np.abs(L @ F @ K + L @ E @ dK - p_tilde.F.values(ts)).sum(axis=2).max(axis=1)
    worst = int(np.argmax(np.maximum(res_E, res_F)))
    report = VerificationReport(
        residual_E=float(res_E.max()),
        residual_F=float(res_F.max()),
        worst_t=float(ts[worst]),
        passed=bool(max(res_E.max(), res_F.max()) <= tol),
        tol=float(tol),
        grid=int(grid),
    )
    logger.debug(f"verify: residual_E={report.residual_E:.2e} residual_F={report.residual_F:.2e} "
                 f"worst t={report.worst_t:.6g}")
    return report


def lemma_inner(p: DaePair, K: MatrixFunction, *,
                tolerances: Optional[Tolerances] = None) -> Tuple[EquivalenceTransform, MatrixFunction]:
    """
    With G = F K + E K' and L = G^-1 the pair {E, F} becomes {L E K, I}.

    Raises:
        NearSingularError: G fails its nonsingularity certificate
    """
    if K.shape != p.E.shape:
        raise SscfValidationError(f"K has shape {K.shape}, pair has size {p.m}")
    tols = resolve(tolerances)
    dK = K.derivative()
    G = chebmat.fit_nodes(
        lambda ts: p.F.values(ts) @ K.values(ts) + p.E.values(ts) @ dK.values(ts),
        p.interval, min_degree=max(p.F.degree, p.E.degree) + K.degree, tolerances=tols,
    )
    chebmat.require_nonsingular(G, tols, "G = F K + E K'")
    L = chebmat.inverse(G, tolerances=tols)
    T = EquivalenceTransform.create(L, K, tolerances=tols)
    return T, chebmat.product(L, p.E, K, tolerances=tols)


@dataclass(frozen=True)
class TriangularStep:
    """
    One application of the triangular construction on {E, I}.

    Attributes:
        transform (EquivalenceTransform): L = (K + E K')^-1 = H^-1 K^-1 and K
        E_hat (MatrixFunction): L E K
        H (MatrixFunction): I + K^-1 E K'
        triangular (bool): K^-1 E K' is strictly upper or strictly lower triangular within tolerance
    """
    transform: EquivalenceTransform
    E_hat: MatrixFunction
    H: MatrixFunction
    triangular: bool


def _strictly_triangular(M: MatrixFunction, tol: float) -> bool:
    values = np.abs(M.coeffs).max(axis=0)
    return bool(np.tril(values).max() <= tol or np.triu(values).max() <= tol)


def triangular_step(E: MatrixFunction, K: MatrixFunction, *,
                    tolerances: Optional[Tolerances] = None) -> TriangularStep:
    """
    Construct the transform mapping {E, I} to {L E K, I} with H = I + K^-1 E K'.

    H is unit triangular whenever K^-1 E K' is strictly triangular; otherwise its sampling
    certificate is checked.

    Raises:
        NearSingularError: K, or H when not triangular, fails its certificate
    """
    if E.shape != K.shape or E.rows != E.cols:
        raise SscfValidationError(f"E {E.shape} and K {K.shape} must be square of equal size")
    tols = resolve(tolerances)
    m = E.rows
    chebmat.require_nonsingular(K, tols, "K")
    if K.is_constant:
        correction = chebmat.zeros(m, m, K.interval)
    else:
        correction = chebmat.solve(K, chebmat.mul(E, K.derivative(), tolerances=tols), tolerances=tols,
                                   certified=True)
    H = chebmat.add(chebmat.identity(m, K.interval), correction)
    triangular = _strictly_triangular(correction, tols.check_tol)
    if not triangular:
        chebmat.require_nonsingular(H, tols, "H = I + K^-1 E K'")
    # L = H^-1 K^-1
    if K.is_constant:
        L = chebmat.constant(np.linalg.inv(K.constant_value()), K.interval)
    else:
        L = chebmat.solve(H, chebmat.inverse(K, tolerances=tols), tolerances=tols, certified=True)
    T = EquivalenceTransform.create(L, K, tolerances=tols)
    E_hat = chebmat.product(L, E, K, tolerances=tols)
    logger.debug(f"triangular step: degrees K={K.degree} H={H.degree} L={L.degree} E_hat={E_hat.degree}, "
                 f"strictly triangular={triangular}")
    return TriangularStep(T, E_hat, H, triangular)


def lemma_triangular(E: MatrixFunction, K: MatrixFunction, *,
                     tolerances: Optional[Tolerances] = None) -> Tuple[EquivalenceTransform, MatrixFunction]:
    step = triangular_step(E, K, tolerances=tolerances)
    return step.transform, step.E_hat
