"""
Reduction of {N, I} with N in SUT_rows to the constant pair {N^(Er), I}.

Mirror of :mod:`sscf.canon_col`: Step 0 brings the secondary blocks to [0 R] with
B_V = diag(I, V_1, ..., V_(mu-1)) followed by a constant block-reversal permutation; each step
factors N^(k) = N^(Er) K and the leading lambda_k = l_1 + ... + l_(k+1) columns of N^(k)
coincide with N^(Er).
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
from .structure import SutMatrixFunction, elementary_row, is_sut_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RowStep:
    """
    State after step k.

    Attributes:
        k (int): step index, 0 is the Step-0 output
        N (MatrixFunction): N^(k)
        K (MatrixFunction | None): K^(k) with N^(Er) K^(k) = N^(k); None for the final state
        H (MatrixFunction | None): I + K^(k) N^(k) ((K^(k))^-1)'
        lam (int): number of leading columns expected to coincide with N^(Er)
        residual (float): max deviation of those columns from N^(Er) on the grid
    """
    k: int
    N: MatrixFunction
    K: Optional[MatrixFunction]
    H: Optional[MatrixFunction]
    lam: int
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "lambda": self.lam,
            "residual": self.residual,
            "degrees": {
                "N": self.N.degree,
                "K": None if self.K is None else self.K.degree,
                "H": None if self.H is None else self.H.degree,
            },
        }


@dataclass
class RowPipelineTrace:
    sig: BlockSignature
    steps: List[RowStep] = field(default_factory=list)
    total: Optional[EquivalenceTransform] = None
    report: Optional[VerificationReport] = None

    @property
    def lambdas(self) -> list[int]:
        return [s.lam for s in self.steps]

    @property
    def target(self) -> np.ndarray:
        return elementary_row(self.sig)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "signature": self.sig.to_dict(),
            "steps": [s.to_dict() for s in self.steps],
            "verification": None if self.report is None else self.report.to_dict(),
        }


def lam(sig: BlockSignature, k: int) -> int:
    """lambda_k = sum_{i=1}^{k+1} l_i."""
    return sum(sig.ells[: k + 1])


def block_reversal(sig: BlockSignature) -> np.ndarray:
    """diag(P_1, ..., P_mu) with P_i the order reversal of block i; symmetric and involutive."""
    out = np.zeros((sig.m, sig.m))
    for i in range(sig.mu):
        part = sig.block_slice(i)
        out[part, part] = np.fliplr(np.eye(sig.ells[i]))
    return out


def _as_sut(N: Union[SutMatrixFunction, MatrixFunction], sig: Optional[BlockSignature]) -> SutMatrixFunction:
    if isinstance(N, SutMatrixFunction):
        return N
    if sig is None:
        raise PredicateError("A block signature is required for a bare matrix function")
    return SutMatrixFunction(N, sig, Variant.ROWS)


def _column_deviation(N: MatrixFunction, target: np.ndarray, cols: slice, grid_size: int) -> float:
    ts = chebmat.verification_grid(N.interval, grid_size)
    return float(np.abs(N.values(ts)[:, :, cols] - target[:, cols]).max(initial=0.0))


def _check_r_blocks(N: MatrixFunction, sig: BlockSignature, tols: Tolerances) -> None:
    """Secondary blocks must read [0 R] with R uniformly nonsingular."""
    ts = chebmat.verification_grid(N.interval, tols.grid)
    values = N.values(ts)
    offsets = sig.offsets
    for i in range(sig.mu - 1):
        size = sig.ells[i]
        rows = sig.block_slice(i)
        split = offsets[i + 2] - size
        left = values[:, rows, offsets[i + 1]:split]
        R = values[:, rows, split:offsets[i + 2]]
        if left.size and np.abs(left).max() > tols.check_tol:
            raise CoincidenceError(f"Secondary block {i + 1} is not of the form [0 R]",
                                   details={"block": i + 1, "residual": float(np.abs(left).max())})
        smallest = np.linalg.svd(R, compute_uv=False)[:, -1]
        if smallest.min() <= tols.singularity_threshold:
            worst = int(np.argmin(smallest))
            raise NearSingularError(
                f"R block {i + 1} is numerically singular at t={ts[worst]:.6g}",
                details={"worst_t": float(ts[worst]), "min_singular": float(smallest[worst])},
            )


def step0_normalize_row(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
                        sig: Optional[BlockSignature] = None,
                        tolerances: Optional[Tolerances] = None) -> Tuple[SutMatrixFunction, EquivalenceTransform]:
    """
    Bring every secondary block to [0 R].

    B_V conjugation (through the triangular construction) gives blocks [R~ 0]; the constant
    block reversal P (K = L = P) then moves R to the right.

    Raises:
        PredicateError: N is not in SUT_rows
        ConstantRankError, AlignmentError: a smooth SVD fails
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    sut = _as_sut(N, sig)
    sig = sut.sig
    if not is_sut_rows(sut.N, sig, tol, tolerances=tols):
        raise PredicateError(f"N is not in SUT_rows for signature {list(sig.ells)}")

    interval = sut.N.interval
    blocks = [chebmat.identity(sig.ells[0], interval)]
    blocks += [chebmat.smooth_svd(sut.secondary_block(i), tolerances=tols).V for i in range(sig.mu - 1)]
    B_V = chebmat.block_diag(*blocks)
    step = triangular_step(sut.N, B_V, tolerances=tols)

    P = block_reversal(sig)
    flip = EquivalenceTransform.permutation(P, interval)
    N0 = chebmat.product(flip.L, step.E_hat, flip.K, tolerances=tols)
    _check_r_blocks(N0, sig, tols)
    logger.debug(f"row step 0: B_V degree {B_V.degree}, N^(0) degree {N0.degree}, H strictly triangular={step.triangular}")
    return SutMatrixFunction(N0, sig, Variant.ROWS), compose(step.transform, flip, tolerances=tols)


def build_K_row(Nk: MatrixFunction, sig: BlockSignature, *,
                tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """
    K = Er^T N + (I - Er^T Er), so that Er K = N.

    Diagonal block i of K is diag(I, R_(i-1)); the result is block upper triangular.

    Raises:
        NearSingularError: K fails its nonsingularity certificate
    """
    Er = elementary_row(sig)
    K = chebmat.add(chebmat.mul(chebmat.constant(Er.T, Nk.interval), Nk),
                    chebmat.constant(np.eye(sig.m) - Er.T @ Er, Nk.interval))
    chebmat.require_nonsingular(K, tolerances, "K")
    return K


def iterate_row(N0: SutMatrixFunction, tol: Optional[float] = None, *, early_exit: bool = False,
                tolerances: Optional[Tolerances] = None) -> RowPipelineTrace:
    """
    Run the mu - 1 steps from the Step-0 output to N^(Er).

    Step k uses the transform (H^-1 K, K^-1) with K = build_K_row(N^(k)), giving
    N^(k+1) = H^-1 K N^(Er).

    Raises:
        CoincidenceError: leading columns deviate from N^(Er) beyond `tol`; details["trace"]
            holds the partial trace
        NearSingularError: K^(k) or H^(k) fails its certificate
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    sig = N0.sig
    Er = elementary_row(sig)
    trace = RowPipelineTrace(sig)
    total = EquivalenceTransform.identity(sig.m, N0.N.interval)
    Nk = N0.N
    for k in range(sig.mu):
        lead = lam(sig, k)
        residual = _column_deviation(Nk, Er, slice(0, lead), tols.grid)
        logger.debug(f"row step {k}: lambda={lead}, coincidence residual {residual:.2e}, degree {Nk.degree}")
        if residual > tol:
            trace.steps.append(RowStep(k, Nk, None, None, lead, residual))
            raise CoincidenceError(
                f"Step {k}: first {lead} columns deviate from N^(Er) by {residual:.2e}",
                details={"step": k, "lambda": lead, "residual": residual, "trace": trace},
            )
        if k == sig.mu - 1:
            trace.steps.append(RowStep(k, Nk, None, None, lead, residual))
            break
        if early_exit and _column_deviation(Nk, Er, slice(0, sig.m), tols.grid) <= tol:
            logger.info(f"row pipeline reached N^(Er) after {k} steps, stopping early")
            trace.steps.append(RowStep(k, Nk, None, None, lead, residual))
            break
        K = build_K_row(Nk, sig, tolerances=tols)
        step = triangular_step(Nk, chebmat.inverse(K, tolerances=tols), tolerances=tols)
        trace.steps.append(RowStep(k, Nk, K, step.H, lead, residual))
        total = compose(total, step.transform, tolerances=tols)
        Nk = step.E_hat
    trace.total = total
    return trace


def run_row(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
            sig: Optional[BlockSignature] = None, early_exit: bool = False,
            tolerances: Optional[Tolerances] = None) -> RowPipelineTrace:
    """
    Step 0, the iteration and the final verification; `trace.total` includes Step 0.

    Raises:
        VerificationError: the total transform does not verify against {N^(Er), I}
    """
    tols = resolve(tolerances)
    sut = _as_sut(N, sig)
    N0, T0 = step0_normalize_row(sut, tol, tolerances=tols)
    trace = iterate_row(N0, tol, early_exit=early_exit, tolerances=tols)
    trace.total = compose(T0, trace.total, tolerances=tols)
    interval = sut.N.interval
    eye = chebmat.identity(sut.sig.m, interval)
    trace.report = verify(trace.total, DaePair(sut.N, eye), DaePair(chebmat.constant(trace.target, interval), eye),
                          tolerances=tols)
    if not trace.report.passed:
        raise VerificationError(
            f"Row pipeline result fails verification: residual_E={trace.report.residual_E:.2e}, "
            f"residual_F={trace.report.residual_F:.2e} at t={trace.report.worst_t:.6g}",
            details={"report": trace.report.to_dict(), "trace": trace},
        )
    logger.info(f"row pipeline done for {list(sut.sig.ells)}: residuals "
                f"{trace.report.residual_E:.2e}/{trace.report.residual_F:.2e}")
    return trace


def canonicalize_row(N: Union[SutMatrixFunction, MatrixFunction], tol: Optional[float] = None, *,
                     sig: Optional[BlockSignature] = None, early_exit: bool = False,
                     tolerances: Optional[Tolerances] = None) -> Tuple[EquivalenceTransform, np.ndarray]:
    """Transform {N, I} into {N^(Er), I}; returns the total transform and the constant N^(Er)."""
    trace = run_row(N, tol, sig=sig, early_exit=early_exit, tolerances=tolerances)
    return trace.total, trace.target
