"""
Reduction of {N, I} with N in SUT_columns to the constant pair {N^(Ec), I}.

Step 0 rotates every secondary block to the form [R; 0] with smooth SVD factors. Each
following step factors N^(k) = K N^(Ec) and moves to N^(k+1) = L N^(k) K; after step k the last
kappa_k = m - (l_1 + ... + l_(mu-k-1)) rows of N^(k) coincide with N^(Ec), so mu - 1 steps reach
the constant target.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from . import chebmat
from .chebmat import MatrixFunction
from .equivalence import DaePair, EquivalenceTransform, compose, triangular_step, verify
from .exceptions import CoincidenceError, NearSingularError, PredicateError, VerificationError
from .models import BlockSignature, Variant, VerificationReport
from .settings import Tolerances, resolve
from .structure import SutMatrixFunction, elementary_col, is_sut_columns

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColStep:
    """
    State after step k.

    Attributes:
        k (int): step index, 0 is the Step-0 output
        N (MatrixFunction): N^(k)
        K (MatrixFunction | None): K^(k) with K^(k) N^(Ec) = N^(k); None for the final state
        H (MatrixFunction | None): I + (K^(k))^-1 N^(k) (K^(k))'
        kappa (int): number of trailing rows expected to coincide with N^(Ec)
        residual (float): max deviation of those rows from N^(Ec) on the grid
    """
    k: int
    N: MatrixFunction
    K: Optional[MatrixFunction]
    H: Optional[MatrixFunction]
    kappa: int
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "kappa": self.kappa,
            "residual": self.residual,
            "degrees": {
                "N": self.N.degree,
                "K": None if self.K is None else self.K.degree,
                "H": None if self.H is None else self.H.degree,
            },
        }


@dataclass
class ColPipelineTrace:
    sig: BlockSignature
    steps: List[ColStep] = field(default_factory=list)
    total: Optional[EquivalenceTransform] = None
    report: Optional[VerificationReport] = None

    @property
    def kappas(self) -> list[int]:
        return [s.kappa for s in self.steps]

    @property
    def target(self) -> np.ndarray:
        return elementary_col(self.sig)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "signature": self.sig.to_dict(),
            "steps": [s.to_dict() for s in self.steps],
            "verification": None if self.report is None else self.report.to_dict(),
        }


def kappa(sig: BlockSignature, k: int) -> int:
    """kappa_k = m - sum_{i=1}^{mu-(k+1)} l_i."""
    return sig.m - sum(sig.ells[: sig.mu - (k + 1)])


def _as_sut(N: Union[SutMatrixFunction, MatrixFunction], sig: Optional[BlockSignature]) -> SutMatrixFunction:
    if isinstance(N, SutMatrixFunction):
        return N
    if sig is None:
        raise PredicateError("A block signature is required for a bare matrix function")
    return SutMatrixFunction(N, sig, Variant.COLUMNS)


def _row_deviation(N: MatrixFunction, target: np.ndarray, rows: slice, grid_size: int) -> float:
    ts = chebmat.verification_grid(N.interval, grid_size)
    return float(np.abs(N.values(ts)[:, rows, :] - target[rows, :]).max(initial=0.0))


def _check_r_blocks(N: MatrixFunction, sig: BlockSignature, tols: Tolerances) -> None:
    """Secondary blocks must read [R; 0] with R uniformly nonsingular."""
    ts = chebmat.verification_grid(N.interval, tols.grid)
    values = N.values(ts)
    offsets = sig.offsets
    for i in range(sig.mu - 1):
        size = sig.ells[i + 1]
        cols = sig.block_slice(i + 1)
        R = values[:, offsets[i]:offsets[i] + size, cols]
        below = values[:, offsets[i] + size:offsets[i + 1], cols]
        if below.size and np.abs(below).max() > tols.check_tol:
            raise CoincidenceError(f"Secondary block {i + 1} is not of the form [R; 0]",
                                   details={"block": i + 1, "residual": float(np.abs(below).max())})
        smallest = np.linalg.svd(R, compute_uv=False)[:, -1]
        if smallest.min() <= tols.singularity_threshold:
            worst = int(np.argmin(smallest))
            raise NearSingularError(
                f"R block {i + 1} is numerically singular at t={ts[worst]:.6g}",
                details={"worst_t": float(ts[worst]), "min_singular": float(smallest[worst])},
            )


def step0_normalize(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
                    sig: Optional[BlockSignature] = None,
                    tolerances: Optional[Tolerances] = None) -> Tuple[SutMatrixFunction, EquivalenceTransform]:
    """
    Rotate every secondary block to [R; 0] by B_U = diag(U_1, ..., U_(mu-1), I).

    Raises:
        PredicateError: N is not in SUT_columns
        ConstantRankError, AlignmentError: a smooth SVD fails
        CoincidenceError: the trailing rows that must vanish do not
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    sut = _as_sut(N, sig)
    sig = sut.sig
    if not is_sut_columns(sut.N, sig, tol, tolerances=tols):
        raise PredicateError(f"N is not in SUT_columns for signature {list(sig.ells)}")

    blocks = [chebmat.smooth_svd(sut.secondary_block(i), tolerances=tols).U for i in range(sig.mu - 1)]
    blocks.append(chebmat.identity(sig.ells[-1], sut.N.interval))
    B_U = chebmat.block_diag(*blocks)
    step = triangular_step(sut.N, B_U, tolerances=tols)
    N0 = step.E_hat

    zero_rows = slice(sig.m - sig.ells[-2], sig.m)
    residual = _row_deviation(N0, np.zeros((sig.m, sig.m)), zero_rows, tols.grid)
    if residual > tol:
        raise CoincidenceError(f"Last {sig.ells[-2]} rows of N^(0) do not vanish (residual {residual:.2e})",
                               details={"residual": residual})
    _check_r_blocks(N0, sig, tols)
    logger.debug(f"step 0: B_U degree {B_U.degree}, N^(0) degree {N0.degree}, H strictly triangular={step.triangular}")
    return SutMatrixFunction(N0, sig, Variant.COLUMNS), step.transform


def build_K_col(Nk: MatrixFunction, sig: BlockSignature, *,
                tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """
    K = N Ec^T + (I - Ec Ec^T), so that K Ec = N.

    Diagonal block i of K is diag(R_(i+1), I); the result is block upper triangular.

    Raises:
        NearSingularError: K fails its nonsingularity certificate
    """
    Ec = elementary_col(sig)
    K = chebmat.add(chebmat.mul(Nk, chebmat.constant(Ec.T, Nk.interval)),
                    chebmat.constant(np.eye(sig.m) - Ec @ Ec.T, Nk.interval))
    chebmat.require_nonsingular(K, tolerances, "K")
    return K


def iterate_col(N0: SutMatrixFunction, tol: Optional[float] = None, *, early_exit: bool = False,
                tolerances: Optional[Tolerances] = None) -> ColPipelineTrace:
    """
    Run the mu - 1 steps from the Step-0 output to N^(Ec).

    `trace.total` holds the composition of the step transforms only.

    Raises:
        CoincidenceError: trailing rows deviate from N^(Ec) beyond `tol`; details["trace"] holds
            the partial trace
        NearSingularError: K^(k) or H^(k) fails its certificate
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    sig = N0.sig
    Ec = elementary_col(sig)
    trace = ColPipelineTrace(sig)
    total = EquivalenceTransform.identity(sig.m, N0.N.interval)
    Nk = N0.N
    for k in range(sig.mu):
        kap = kappa(sig, k)
        residual = _row_deviation(Nk, Ec, slice(sig.m - kap, sig.m), tols.grid)
        logger.debug(f"column step {k}: kappa={kap}, coincidence residual {residual:.2e}, degree {Nk.degree}")
        if residual > tol:
            trace.steps.append(ColStep(k, Nk, None, None, kap, residual))
            raise CoincidenceError(
                f"Step {k}: last {kap} rows deviate from N^(Ec) by {residual:.2e}",
                details={"step": k, "kappa": kap, "residual": residual, "trace": trace},
            )
        if k == sig.mu - 1:
            trace.steps.append(ColStep(k, Nk, None, None, kap, residual))
            break
        if early_exit and _row_deviation(Nk, Ec, slice(0, sig.m), tols.grid) <= tol:
            logger.info(f"column pipeline reached N^(Ec) after {k} steps, stopping early")
            trace.steps.append(ColStep(k, Nk, None, None, kap, residual))
            break
        K = build_K_col(Nk, sig, tolerances=tols)
        step = triangular_step(Nk, K, tolerances=tols)
        trace.steps.append(ColStep(k, Nk, K, step.H, kap, residual))
        total = compose(total, step.transform, tolerances=tols)
        Nk = step.E_hat
    trace.total = total
    return trace


def run_col(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
            sig: Optional[BlockSignature] = None, early_exit: bool = False,
            tolerances: Optional[Tolerances] = None) -> ColPipelineTrace:
    """
    Step 0, the iteration and the final verification; `trace.total` includes Step 0.

    Raises:
        VerificationError: the total transform does not verify against {N^(Ec), I}
    """
    tols = resolve(tolerances)
    sut = _as_sut(N, sig)
    N0, T0 = step0_normalize(sut, tol, tolerances=tols)
    trace = iterate_col(N0, tol, early_exit=early_exit, tolerances=tols)
    trace.total = compose(T0, trace.total, tolerances=tols)
    interval = sut.N.interval
    eye = chebmat.identity(sut.sig.m, interval)
    trace.report = verify(trace.total, DaePair(sut.N, eye), DaePair(chebmat.constant(trace.target, interval), eye),
                          tolerances=tols)
    if not trace.report.passed:
        raise VerificationError(
            f"Column pipeline result fails verification: residual_E={trace.report.residual_E:.2e}, "
            f"residual_F={trace.report.residual_F:.2e} at t={trace.report.worst_t:.6g}",
            details={"report": trace.report.to_dict(), "trace": trace},
        )
    logger.info(f"column pipeline done for {list(sut.sig.ells)}: residuals "
                f"{trace.report.residual_E:.2e}/{trace.report.residual_F:.2e}")
    return trace


def canonicalize_col(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
                     sig: Optional[BlockSignature] = None, early_exit: bool = False,
                     tolerances: Optional[Tolerances] = None) -> Tuple[EquivalenceTransform, np.ndarray]:
    """
    Transform {N, I} into {N^(Ec), I}; returns the total transform and the constant N^(Ec).

    Example:
        >>> N = from_polynomials([[[0], [2, 1]], [[0], [0]]])
        >>> T, Nc = canonicalize_col(N, sig=BlockSignature((1, 1)))
        >>> Nc
        array([[0., 1.],
               [0., 0.]])
    """
    trace = run_col(N, tol, sig=sig, early_exit=early_exit, tolerances=tolerances)
    return trace.total, trace.target
