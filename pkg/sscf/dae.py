"""
Standard canonical form pairs {diag(I_d, N), diag(Omega, I)}.

Assembly, reduction of the nilpotent part to a constant matrix (strong standard canonical form),
Jordan form, solving E x' + F x = q and mapping solutions back through transforms.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import chebmat, equivalence
from .canon_col import ColPipelineTrace, run_col
from .canon_row import RowPipelineTrace, run_row
from .chebmat import Interval, MatrixFunction
from .equivalence import DaePair, EquivalenceTransform
from .exceptions import NonConvergenceError, SscfValidationError, VerificationError
from .models import BlockSignature, Characteristics, SolveResult, Variant
from .settings import Tolerances, resolve
from .structure import (
    characteristics_from_nilpotent,
    characteristics_from_signature,
    elementary,
    jordan_orders,
    jordan_permutation,
    permutation_matrix,
    ranks_of_powers,
    variant_permutation,
)

logger = logging.getLogger(__name__)

PipelineTrace = Union[ColPipelineTrace, RowPipelineTrace]


@dataclass(frozen=True)
class ScfPair:
    """
    Block pair {diag(I_d, N), diag(Omega, I_(m-d))}.

    Attributes:
        d (int): dimension of the dynamic part
        Omega (MatrixFunction | None): d x d, None when d = 0
        N (MatrixFunction): (m-d) x (m-d) nilpotent part
        sig (BlockSignature | None): block layout of N, when known
        variant (Variant): SUT class of N
        jordan_orders (tuple | None): orders of the Jordan blocks along the diagonal of N, when
            N is in Jordan form
    """
    d: int
    Omega: Optional[MatrixFunction]
    N: MatrixFunction
    sig: Optional[BlockSignature] = None
    variant: Variant = Variant.PLAIN
    jordan_orders: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.N.rows != self.N.cols:
            raise SscfValidationError(f"N must be square, got {self.N.shape}")
        if self.d == 0 and self.Omega is not None:
            raise SscfValidationError("Omega must be absent when d = 0")
        if self.d > 0:
            if self.Omega is None or self.Omega.shape != (self.d, self.d):
                raise SscfValidationError(f"Omega must be {self.d}x{self.d}")
            if self.Omega.interval != self.N.interval:
                raise SscfValidationError("Omega and N live on different intervals")
        if self.sig is not None and self.sig.m != self.N.rows:
            raise SscfValidationError(f"Signature {list(self.sig.ells)} does not fit N of size {self.N.rows}")
        if self.jordan_orders is not None:
            object.__setattr__(self, "jordan_orders", tuple(int(k) for k in self.jordan_orders))
            if sum(self.jordan_orders) != self.N.rows:
                raise SscfValidationError(f"Jordan orders {list(self.jordan_orders)} do not fit N of size {self.N.rows}")

    @property
    def m(self) -> int:
        return self.d + self.N.rows

    @property
    def interval(self) -> Interval:
        return self.N.interval

    @property
    def is_sscf(self) -> bool:
        """N constant (degree 0) and nilpotent."""
        if not self.N.is_constant:
            return False
        try:
            ranks_of_powers(self.N.constant_value())
        except SscfValidationError:
            return False
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": self.interval.to_list(),
            "d": self.d,
            "omega": None if self.Omega is None else self.Omega.to_dict(),
            "n_part": self.N.to_dict(),
            "signature": None if self.sig is None else self.sig.to_dict(),
            "variant": self.variant.value,
            "jordan_orders": None if self.jordan_orders is None else list(self.jordan_orders),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ScfPair:
        try:
            N = MatrixFunction.from_dict(data["n_part"])
            omega = data.get("omega")
            sig = data.get("signature")
            return cls(
                d=int(data.get("d", 0)),
                Omega=None if omega is None else MatrixFunction.from_dict(omega),
                N=N,
                sig=None if sig is None else BlockSignature.from_dict(sig),
                variant=Variant.parse(data.get("variant", "plain")),
                jordan_orders=data.get("jordan_orders"),
            )
        except KeyError as e:
            raise SscfValidationError(f"Malformed SCF pair, missing {e}")


@dataclass(frozen=True)
class Problem:
    """
    Initial value problem E x' + F x = q for an SCF pair, optionally with a known solution.

    Attributes:
        pair (ScfPair): coefficients
        q (MatrixFunction): m x 1 inhomogeneity
        x0_dyn (np.ndarray): initial value of the dynamic part, length d
        x_exact (MatrixFunction | None): manufactured solution
    """
    pair: ScfPair
    q: MatrixFunction
    x0_dyn: np.ndarray
    x_exact: Optional[MatrixFunction] = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0_dyn, dtype=float))
        object.__setattr__(self, "x0_dyn", x0)
        if self.q.shape != (self.pair.m, 1):
            raise SscfValidationError(f"q must be {self.pair.m}x1, got {self.q.shape}")
        if x0.size != self.pair.d:
            raise SscfValidationError(f"x0_dyn must have {self.pair.d} entries, got {x0.size}")

    def to_dict(self) -> Dict[str, Any]:
        out = self.pair.to_dict()
        out["q"] = self.q.to_dict()
        out["x0_dyn"] = [float(v) for v in self.x0_dyn]
        if self.x_exact is not None:
            out["x_exact"] = self.x_exact.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> Problem:
        try:
            x_exact = data.get("x_exact")
            return cls(
                pair=ScfPair.from_dict(data),
                q=MatrixFunction.from_dict(data["q"]),
                x0_dyn=np.asarray(data.get("x0_dyn", []), dtype=float),
                x_exact=None if x_exact is None else MatrixFunction.from_dict(x_exact),
            )
        except KeyError as e:
            raise SscfValidationError(f"Malformed problem, missing {e}")


def assemble(Omega: Optional[MatrixFunction], N: MatrixFunction, sig: Optional[BlockSignature] = None,
             variant: Variant = Variant.PLAIN) -> ScfPair:
    d = 0 if Omega is None else Omega.rows
    if Omega is not None and Omega.rows != Omega.cols:
        raise SscfValidationError(f"Omega must be square, got {Omega.shape}")
    return ScfPair(d, Omega, N, sig, variant)


def to_dae_pair(p: ScfPair) -> DaePair:
    """E = diag(I_d, N), F = diag(Omega, I)."""
    n = p.N.rows
    eye = chebmat.identity(n, p.interval)
    if p.d == 0:
        return DaePair(p.N, eye)
    return DaePair(chebmat.block_diag(chebmat.identity(p.d, p.interval), p.N), chebmat.block_diag(p.Omega, eye))


def _is_zero(N: MatrixFunction, tol: float) -> bool:
    return float(np.abs(N.coeffs).max()) <= tol


def canonicalize_pair(p: ScfPair, variant: Optional[Variant] = None, tol: Optional[float] = None, *,
                      early_exit: bool = False,
                      tolerances: Optional[Tolerances] = None) -> Tuple[EquivalenceTransform, ScfPair]:
    """Like canonicalize_pair_traced, without the pipeline trace."""
    T, sscf, _ = canonicalize_pair_traced(p, variant, tol, early_exit=early_exit, tolerances=tolerances)
    return T, sscf


def canonicalize_pair_traced(p: ScfPair, variant: Optional[Variant] = None, tol: Optional[float] = None, *,
                             early_exit: bool = False, tolerances: Optional[Tolerances] = None
                             ) -> Tuple[EquivalenceTransform, ScfPair, Optional[PipelineTrace]]:
    """
    Reduce the nilpotent part to N^(Ec) or N^(Er) and lift the transform to diag(I_d, .).

    Index-1 pairs (N = 0) and pairs whose N already equals the elementary matrix map by the
    identity. Omega is unchanged.

    Raises:
        SscfValidationError: the signature of N is unknown
        VerificationError: the lifted transform does not verify on the full pair
    """
    tols = resolve(tolerances)
    variant = p.variant if variant is None else Variant.parse(variant)
    if _is_zero(p.N, tols.check_tol):
        logger.info("index-1 pair, nothing to canonicalize")
        return EquivalenceTransform.identity(p.m, p.interval), ScfPair(p.d, p.Omega, p.N, p.sig, p.variant), None
    if p.sig is None:
        raise SscfValidationError("The block signature of N is required to canonicalize")
    if variant is Variant.PLAIN:
        raise SscfValidationError("Choose the columns or rows variant")
    target = elementary(p.sig, variant)
    if p.N.is_constant and np.abs(p.N.constant_value() - target).max() <= tols.check_tol:
        logger.info("pair is already in strong standard canonical form")
        return EquivalenceTransform.identity(p.m, p.interval), ScfPair(p.d, p.Omega, p.N, p.sig, variant), None

    run = run_col if variant is Variant.COLUMNS else run_row
    trace = run(p.N, tol, sig=p.sig, early_exit=early_exit, tolerances=tols)
    T = equivalence.lift(trace.total, p.d)
    sscf = ScfPair(p.d, p.Omega, chebmat.constant(trace.target, p.interval), p.sig, variant)
    report = equivalence.verify(T, to_dae_pair(p), to_dae_pair(sscf), tolerances=tols)
    if not report.passed:
        raise VerificationError(f"Lifted transform fails verification (residuals {report.residual_E:.2e}, "
                                f"{report.residual_F:.2e})", details={"report": report.to_dict()})
    return T, sscf, trace


def _require_sscf(sscf: ScfPair) -> np.ndarray:
    if not sscf.is_sscf:
        raise SscfValidationError("Pair is not in strong standard canonical form (N must be constant nilpotent)")
    return sscf.N.constant_value()


def jordan_transform(sscf: ScfPair) -> EquivalenceTransform:
    """Constant transform K = diag(I_d, P^T), L = diag(I_d, P) bringing N^(Ec)/N^(Er) to Jordan form."""
    N = _require_sscf(sscf)
    if sscf.sig is None or sscf.variant is Variant.PLAIN:
        raise SscfValidationError("Jordan form needs the signature and variant of the elementary matrix")
    if np.abs(N - elementary(sscf.sig, sscf.variant)).max() > 0.0:
        raise SscfValidationError("N is not the elementary matrix of its signature; canonicalize first")
    P = permutation_matrix(jordan_permutation(sscf.sig, sscf.variant))
    return equivalence.lift(EquivalenceTransform.permutation(P, sscf.interval), sscf.d)


def to_jordan(sscf: ScfPair) -> ScfPair:
    """
    Replace N by P N P^T, a direct sum of Jordan blocks of decreasing order.

    The result is no longer elementary, so it carries no signature; the block orders are kept
    in `jordan_orders`.
    """
    N = _require_sscf(sscf)
    T = jordan_transform(sscf)
    P = T.L.constant_value()[sscf.d:, sscf.d:]
    return ScfPair(sscf.d, sscf.Omega, chebmat.constant(P @ N @ P.T, sscf.interval),
                   jordan_orders=tuple(jordan_orders(sscf.sig, sscf.variant)))


def switch_variant(sscf: ScfPair) -> Tuple[EquivalenceTransform, ScfPair]:
    """
    Move between N^(Ec)(l) and N^(Er)(reversed l) by a constant permutation similarity.
    """
    N = _require_sscf(sscf)
    if sscf.sig is None or sscf.variant is Variant.PLAIN:
        raise SscfValidationError("Switching variants needs the signature and variant")
    if sscf.variant is Variant.COLUMNS:
        Q = permutation_matrix(variant_permutation(sscf.sig))
        new_sig, new_variant = sscf.sig.reversed(), Variant.ROWS
    else:
        Q = permutation_matrix(variant_permutation(sscf.sig.reversed())).T
        new_sig, new_variant = sscf.sig.reversed(), Variant.COLUMNS
    T = equivalence.lift(EquivalenceTransform.permutation(Q, sscf.interval), sscf.d)
    return T, ScfPair(sscf.d, sscf.Omega, chebmat.constant(Q @ N @ Q.T, sscf.interval), new_sig, new_variant)


def characteristics(p: ScfPair, *, tolerances: Optional[Tolerances] = None) -> Characteristics:
    """
    Characteristics of the pair: from the ranks of powers of a constant N, otherwise from the
    block signature of its SUT class.
    """
    if p.N.is_constant:
        return characteristics_from_nilpotent(p.N.constant_value(), d=p.d, tolerances=tolerances)
    if p.sig is None or p.variant is Variant.PLAIN:
        raise SscfValidationError("Characteristics of a time-varying N need its signature and variant")
    return characteristics_from_signature(p.sig, p.variant, d=p.d)


def nilpotent_solution(N: np.ndarray, q2: MatrixFunction) -> MatrixFunction:
    """x2 = sum_k (-1)^k N^k q2^(k) for N x2' + x2 = q2 with constant nilpotent N."""
    interval = q2.interval
    x2 = q2
    term_matrix = np.eye(N.shape[0])
    derivative = q2
    for k in range(1, N.shape[0] + 1):
        term_matrix = term_matrix @ N
        if not np.any(term_matrix):
            break
        derivative = derivative.derivative()
        x2 = chebmat.add(x2, chebmat.mul(chebmat.constant((-1) ** k * term_matrix, interval), derivative))
    return x2


def _solve_dynamic(Omega: MatrixFunction, q1: MatrixFunction, x0: np.ndarray, tol: float,
                   tols: Tolerances) -> MatrixFunction:
    interval = Omega.interval
    d = Omega.rows

    def rhs(t, x):
        return q1.values(t)[0, :, 0] - Omega.values(t)[0] @ x

    rtol = max(1e-2 * tol, 1e-13)
    sol = solve_ivp(rhs, (interval.a, interval.b), x0, method="DOP853", rtol=rtol, atol=rtol, dense_output=True)
    if not sol.success:
        raise NonConvergenceError(f"ODE solver failed: {sol.message}")
    logger.debug(f"dynamic part: {sol.t.size - 1} steps, {sol.nfev} evaluations")
    fit_tol = max(1e-1 * tol, tols.fit_tol)
    return chebmat.fit(lambda ts: sol.sol(np.clip(ts, interval.a, interval.b)).T.reshape(-1, d, 1), interval,
                       fit_tol, vectorized=True, tolerances=tols)


def solve_sscf(sscf: ScfPair, q: MatrixFunction, x0_dyn=None, tol: Optional[float] = None, *,
               tolerances: Optional[Tolerances] = None) -> SolveResult:
    """
    Solve diag(I, N) x' + diag(Omega, I) x = q with x_1(a) = x0_dyn.

    The dynamic part x_1' + Omega x_1 = q_1 is integrated with an adaptive Runge-Kutta method and
    refitted; the nilpotent part is the finite sum of derivatives of q_2.

    Raises:
        SscfValidationError: N is not constant nilpotent, or dimensions mismatch
        NonConvergenceError: the residual exceeds 100 tol
    """
    tols = resolve(tolerances)
    tol = tols.verify_tol if tol is None else tol
    N = _require_sscf(sscf)
    if q.shape != (sscf.m, 1) or q.interval != sscf.interval:
        raise SscfValidationError(f"q must be an {sscf.m}x1 function on the pair's interval")
    x0 = np.zeros(0) if x0_dyn is None else np.atleast_1d(np.asarray(x0_dyn, dtype=float))
    if x0.size != sscf.d:
        raise SscfValidationError(f"x0_dyn must have {sscf.d} entries, got {x0.size}")

    timings: Dict[str, float] = {}
    d, m = sscf.d, sscf.m
    start = time.perf_counter()
    x2 = nilpotent_solution(N, q.block(slice(d, m), slice(0, 1)))
    timings["nilpotent"] = time.perf_counter() - start
    if d:
        start = time.perf_counter()
        x1 = _solve_dynamic(sscf.Omega, q.block(slice(0, d), slice(0, 1)), x0, tol, tols)
        timings["dynamic"] = time.perf_counter() - start
        x = chebmat.vstack(x1, x2)
    else:
        x = x2
    res = residual(to_dae_pair(sscf), x, q, tols.grid)
    if res > 100 * tol:
        raise NonConvergenceError(f"Solution residual {res:.2e} exceeds {100 * tol:.2e}", details={"residual": res})
    logger.info(f"solved SSCF system of size {m} (d={d}), residual {res:.2e}")
    return SolveResult(x=x, residual_norm=res, free_initial_dimension=d, timings=timings)


def residual(p: DaePair, x: MatrixFunction, q: MatrixFunction, grid: Optional[int] = None) -> float:
    """max over the grid of ||E x' + F x - q||_inf."""
    if x.shape != (p.m, 1) or q.shape != (p.m, 1):
        raise SscfValidationError(f"x {x.shape} and q {q.shape} must be {p.m}x1")
    grid = resolve(None).grid if grid is None else grid
    ts = chebmat.verification_grid(p.interval, grid)
    values = p.E.values(ts) @ x.derivative().values(ts) + p.F.values(ts) @ x.values(ts) - q.values(ts)
    return float(np.abs(values).max())


def pull_back(T: EquivalenceTransform, x_tilde: MatrixFunction, q_tilde: MatrixFunction, *,
              p: Optional[DaePair] = None,
              tolerances: Optional[Tolerances] = None) -> Tuple[MatrixFunction, MatrixFunction]:
    """
    x = K x~ and q = L^-1 q~. With `p` (the original pair) the residual of the pulled-back
    solution is logged.
    """
    tols = resolve(tolerances)
    x = chebmat.mul(T.K, x_tilde, tolerances=tols)
    if T.L.is_constant:
        q = chebmat.mul(chebmat.constant(np.linalg.inv(T.L.constant_value()), T.interval), q_tilde)
    else:
        q = chebmat.solve(T.L, q_tilde, tolerances=tols)
    if p is not None:
        logger.info(f"pulled-back residual on the original pair: {residual(p, x, q, tols.grid):.2e}")
    return x, q


def solve_problem(problem: Problem, variant: Optional[Variant] = None, tol: Optional[float] = None, *,
                  tolerances: Optional[Tolerances] = None) -> SolveResult:
    """
    Canonicalize the pair if N varies in time, solve in SSCF coordinates and pull back.
    """
    tols = resolve(tolerances)
    tol = tols.verify_tol if tol is None else tol
    pair = problem.pair
    if pair.is_sscf:
        return solve_sscf(pair, problem.q, problem.x0_dyn, tol, tolerances=tols)
    start = time.perf_counter()
    T, sscf = canonicalize_pair(pair, variant, tolerances=tols)
    elapsed = time.perf_counter() - start
    q_tilde = equivalence.transform_rhs(T, problem.q, tolerances=tols)
    # K = diag(I_d, K_N): the dynamic initial value carries over unchanged
    result = solve_sscf(sscf, q_tilde, problem.x0_dyn, tol, tolerances=tols)
    x, _ = pull_back(T, result.x, q_tilde, tolerances=tols)
    res = residual(to_dae_pair(pair), x, problem.q, tols.grid)
    timings = dict(result.timings, canonicalize=elapsed)
    return SolveResult(x=x, residual_norm=res, free_initial_dimension=pair.d, timings=timings)


def solve_equivalent(p: DaePair, q: MatrixFunction, to_scf: EquivalenceTransform, scf: ScfPair, x0_dyn=None,
                     variant: Optional[Variant] = None, tol: Optional[float] = None, *,
                     tolerances: Optional[Tolerances] = None) -> SolveResult:
    """
    Solve E x' + F x = q for a general pair `p` with apply(to_scf, p) = scf.

    The SCF pair is reduced to SSCF, the system is solved there with x0_dyn as the dynamic
    initial value and the solution is mapped back by the composed K. The reported residual is
    measured on `p`.
    """
    tols = resolve(tolerances)
    tol = tols.verify_tol if tol is None else tol
    if to_scf.m != p.m or scf.m != p.m:
        raise SscfValidationError(f"Transform of size {to_scf.m} and SCF pair of size {scf.m} do not fit m={p.m}")
    start = time.perf_counter()
    T_can, sscf = canonicalize_pair(scf, variant, tolerances=tols)
    T = equivalence.compose(to_scf, T_can, tolerances=tols)
    elapsed = time.perf_counter() - start
    q_tilde = equivalence.transform_rhs(T, q, tolerances=tols)
    result = solve_sscf(sscf, q_tilde, x0_dyn, tol, tolerances=tols)
    x = chebmat.mul(T.K, result.x, tolerances=tols)
    res = residual(p, x, q, tols.grid)
    logger.info(f"solution mapped back to the original pair, residual {res:.2e}")
    return SolveResult(x=x, residual_norm=res, free_initial_dimension=scf.d,
                       timings=dict(result.timings, canonicalize=elapsed))
