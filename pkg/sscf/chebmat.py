"""
Matrix-valued functions on a compact interval.

Every entry of a :class:`MatrixFunction` is a Chebyshev interpolant sharing one degree.
Linear operations (sums, scaling, transposition, blocks) act on the coefficients directly;
products, inverses, solves and smooth SVD factors are sampled at Chebyshev points and refitted
adaptively by doubling the number of points until the coefficient tail falls below the fit
tolerance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.fft import dct
from scipy.linalg import polar
from scipy.optimize import linear_sum_assignment

from .exceptions import (
    AlignmentError,
    ConstantRankError,
    NearSingularError,
    NonConvergenceError,
    SscfValidationError,
)
from .settings import Tolerances, resolve

logger = logging.getLogger(__name__)

MIN_POINTS: int = 9
ALIGNMENT_FLOOR: float = 0.5

NodeFunction = Callable[[np.ndarray], Any]


@dataclass(frozen=True)
class Interval:
    """
    Compact time interval [a, b] with a < b.

    Attributes:
        a (float): left end point
        b (float): right end point
    """
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise SscfValidationError(f"Invalid interval [{self.a}, {self.b}]: need finite a < b")

    @property
    def width(self) -> float:
        return self.b - self.a

    def to_reference(self, t):
        return (2.0 * np.asarray(t, dtype=float) - (self.a + self.b)) / self.width

    def from_reference(self, x):
        return 0.5 * self.width * np.asarray(x, dtype=float) + 0.5 * (self.a + self.b)

    def contains(self, t) -> bool:
        slack = 1e-12 * self.width
        t = np.asarray(t, dtype=float)
        return bool(np.all((t >= self.a - slack) & (t <= self.b + slack)))

    def lobatto(self, n: int) -> np.ndarray:
        """Ascending Chebyshev-Lobatto grid with `n` nodes (end points included)."""
        if n < 2:
            raise SscfValidationError(f"A verification grid needs at least 2 nodes, got {n}")
        return self.from_reference(cheb.chebpts2(n))

    def to_list(self) -> list[float]:
        return [float(self.a), float(self.b)]

    @classmethod
    def from_list(cls, data: Sequence[float]) -> Interval:
        if len(data) != 2:
            raise SscfValidationError(f"Interval must have two end points, got {data!r}")
        return cls(float(data[0]), float(data[1]))


DEFAULT_INTERVAL = Interval(-1.0, 1.0)


def _first_kind_points(n: int) -> np.ndarray:
    # descending: x_j = cos(pi (j + 1/2) / n)
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def _values_to_coeffs(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    coeffs = dct(values, type=2, axis=0) / n
    coeffs[0] /= 2.0
    return coeffs


def _next_size(n: int) -> int:
    size = MIN_POINTS
    while size < n:
        size = 2 * size - 1
    return size


def _chop(coeffs: np.ndarray, threshold: float) -> np.ndarray:
    magnitude = np.abs(coeffs).reshape(coeffs.shape[0], -1).max(axis=1)
    keep = np.nonzero(magnitude > threshold)[0]
    last = int(keep[-1]) if keep.size else 0
    return coeffs[: last + 1].copy()


def _adaptive_fit(
    fn: NodeFunction,
    interval: Interval,
    tol: float,
    degree_cap: int,
    min_points: int = MIN_POINTS,
) -> list[np.ndarray]:
    """
    Fit one or more matrix-valued node functions jointly.

    `fn` maps an array of times (shape (n,)) to an array of shape (n, rows, cols) or to a
    sequence of such arrays. All outputs are sampled on the same points and the number of
    points doubles until every output's tail converges. An `AlignmentError` from `fn` means the
    samples are too far apart to be matched and also doubles the points.
    """
    n = _next_size(max(min_points, MIN_POINTS))
    while True:
        x = _first_kind_points(n)
        try:
            raw = fn(interval.from_reference(x))
        except AlignmentError as e:
            if n - 1 >= degree_cap:
                raise
            logger.debug(f"Refining from {n} points: {e}")
            n = 2 * n - 1
            continue
        outputs = [raw] if isinstance(raw, np.ndarray) else list(raw)
        fitted: list[np.ndarray] = []
        converged = True
        for values in outputs:
            values = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(values)):
                raise NonConvergenceError("Sampled values are not finite", details={"points": n})
            coeffs = _values_to_coeffs(values)
            scale = max(float(np.max(np.abs(values))), 1.0)
            tail = np.abs(coeffs[-max(3, n // 8):]).max()
            if tail > tol * scale:
                converged = False
                break
            fitted.append(_chop(coeffs, max(1e-2 * tol, 4 * np.finfo(float).eps) * scale))
        if converged:
            logger.debug(f"Adaptive fit converged with {n} points, degrees {[c.shape[0] - 1 for c in fitted]}")
            return fitted
        if n - 1 >= degree_cap:
            raise NonConvergenceError(
                f"Chebyshev tail did not fall below {tol:g} within degree cap {degree_cap}",
                details={"degree_cap": degree_cap, "tail": float(tail)},
            )
        n = 2 * n - 1


class MatrixFunction:
    """
    Immutable matrix-valued function on a compact interval.

    Attributes:
        coeffs (np.ndarray): Chebyshev coefficients, shape (degree + 1, rows, cols)
        interval (Interval): domain of definition
        fit_tol (float): tolerance the coefficients were fitted to

    Example:
        >>> M = fit(lambda t: [[t ** 2]], Interval(-1.0, 1.0))
        >>> float(M(0.5)[0, 0])
        0.25
    """

    __slots__ = ("coeffs", "interval", "fit_tol")

    def __init__(self, coeffs: np.ndarray, interval: Interval, fit_tol: float = 1e-12):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.ndim == 2:
            coeffs = coeffs[np.newaxis]
        if coeffs.ndim != 3 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1 or coeffs.shape[2] < 1:
            raise SscfValidationError(f"Coefficient array must have shape (degree+1, rows, cols), got {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "interval", interval)
        object.__setattr__(self, "fit_tol", float(fit_tol))

    def __setattr__(self, name, value):
        raise AttributeError("MatrixFunction is immutable")

    def __repr__(self) -> str:
        return (f"MatrixFunction(rows={self.rows}, cols={self.cols}, degree={self.degree}, "
                f"interval=[{self.interval.a:g}, {self.interval.b:g}])")

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def values(self, ts) -> np.ndarray:
        """Evaluate at an array of times without domain checks; shape (n, rows, cols)."""
        x = self.interval.to_reference(np.atleast_1d(ts))
        return np.moveaxis(cheb.chebval(x, self.coeffs), -1, 0)

    def eval(self, t) -> np.ndarray:
        return evaluate(self, t)

    def __call__(self, t) -> np.ndarray:
        return evaluate(self, t)

    def derivative(self) -> MatrixFunction:
        return derivative(self)

    @property
    def T(self) -> MatrixFunction:
        return transpose(self)

    def block(self, rows: slice, cols: slice) -> MatrixFunction:
        """Sub-block by slices; exact (no refit)."""
        part = self.coeffs[:, rows, cols]
        if part.shape[1] == 0 or part.shape[2] == 0:
            raise SscfValidationError(f"Empty block {rows}, {cols} of a {self.rows}x{self.cols} function")
        return MatrixFunction(_chop(part, 0.0), self.interval, self.fit_tol)

    def constant_value(self) -> np.ndarray:
        """Value of a constant function; raises for non-constant ones."""
        if not self.is_constant:
            raise SscfValidationError(f"Matrix function of degree {self.degree} is not constant")
        return np.array(self.coeffs[0])

    def __add__(self, other: MatrixFunction) -> MatrixFunction:
        return add(self, other)

    def __sub__(self, other: MatrixFunction) -> MatrixFunction:
        return sub(self, other)

    def __neg__(self) -> MatrixFunction:
        return scale(self, -1.0)

    def __mul__(self, factor: float) -> MatrixFunction:
        return scale(self, factor)

    __rmul__ = __mul__

    def __matmul__(self, other: MatrixFunction) -> MatrixFunction:
        return mul(self, other)

    def to_dict(self) -> dict[str, Any]:
        """
        Serialize to the JSON layout
        {rows, cols, interval: [a, b], degree, fit_tol, coeffs: row-major list of coefficient lists}.
        """
        entries = self.coeffs.reshape(self.degree + 1, -1).T
        return {
            "rows": self.rows,
            "cols": self.cols,
            "interval": self.interval.to_list(),
            "degree": self.degree,
            "fit_tol": self.fit_tol,
            "coeffs": [[float(c) for c in entry] for entry in entries],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MatrixFunction:
        try:
            rows, cols, degree = int(data["rows"]), int(data["cols"]), int(data["degree"])
            interval = Interval.from_list(data["interval"])
            entries = np.asarray(data["coeffs"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise SscfValidationError(f"Malformed matrix function: {e}")
        if entries.shape != (rows * cols, degree + 1):
            raise SscfValidationError(
                f"Coefficient array shape {entries.shape} does not match rows={rows}, cols={cols}, degree={degree}"
            )
        coeffs = entries.T.reshape(degree + 1, rows, cols)
        return cls(coeffs, interval, float(data.get("fit_tol", 1e-12)))


def _same_interval(*functions: MatrixFunction) -> Interval:
    interval = functions[0].interval
    for f in functions[1:]:
        if f.interval != interval:
            raise SscfValidationError(f"Interval mismatch: {interval} vs {f.interval}")
    return interval


def _pad(coeffs: np.ndarray, degree: int) -> np.ndarray:
    if coeffs.shape[0] > degree:
        return coeffs
    out = np.zeros((degree + 1,) + coeffs.shape[1:])
    out[: coeffs.shape[0]] = coeffs
    return out


def fit(
    sampler: Callable[[float], Any],
    interval: Interval = DEFAULT_INTERVAL,
    tol: Optional[float] = None,
    *,
    vectorized: bool = False,
    min_degree: int = 0,
    tolerances: Optional[Tolerances] = None,
) -> MatrixFunction:
    """
    Adaptively fit a matrix-valued sampler on `interval`.

    Args:
        sampler: maps a time to a matrix-like value; with `vectorized=True` it maps an array of
            times of shape (n,) to an array of shape (n, rows, cols)
        interval: domain of the fit
        tol: tail tolerance (defaults to `fit_tol`)
        min_degree: start the doubling from at least this degree

    Raises:
        NonConvergenceError: the degree cap is reached before the tail converges
    """
    tols = resolve(tolerances)
    tol = tols.fit_tol if tol is None else tol
    if vectorized:
        fn = sampler
    else:
        def fn(ts):
            return np.stack([np.atleast_2d(np.asarray(sampler(float(t)), dtype=float)) for t in ts])
    (coeffs,) = _adaptive_fit(fn, interval, tol, tols.degree_cap, min_degree + 1)
    return MatrixFunction(coeffs, interval, tol)


def fit_nodes(
    fn: NodeFunction,
    interval: Interval,
    *,
    min_degree: int = 0,
    tolerances: Optional[Tolerances] = None,
) -> MatrixFunction:
    """Fit a vectorized node function (times -> (n, rows, cols))."""
    return fit(fn, interval, vectorized=True, min_degree=min_degree, tolerances=tolerances)


def constant(matrix, interval: Interval = DEFAULT_INTERVAL) -> MatrixFunction:
    return MatrixFunction(np.atleast_2d(np.asarray(matrix, dtype=float))[np.newaxis], interval)


def identity(m: int, interval: Interval = DEFAULT_INTERVAL) -> MatrixFunction:
    return constant(np.eye(m), interval)


def zeros(rows: int, cols: int, interval: Interval = DEFAULT_INTERVAL) -> MatrixFunction:
    return constant(np.zeros((rows, cols)), interval)


def from_polynomials(entries, interval: Interval = DEFAULT_INTERVAL) -> MatrixFunction:
    """
    Build a matrix function from entrywise power-series coefficients in the interval variable.

    `entries[i][j]` is a sequence (c0, c1, ...) meaning c0 + c1 t + c2 t^2 + ...
    """
    grid = [[np.atleast_1d(np.asarray(e, dtype=float)) for e in row] for row in entries]
    rows, cols = len(grid), len(grid[0])
    degree = max(len(e) for row in grid for e in row) - 1
    out = np.zeros((degree + 1, rows, cols))
    for i in range(rows):
        for j in range(cols):
            # power series in t -> Chebyshev series in the reference variable
            poly = np.polynomial.Polynomial(grid[i][j])
            mapped = poly(np.polynomial.Polynomial([0.5 * (interval.a + interval.b), 0.5 * interval.width]))
            c = cheb.poly2cheb(mapped.coef)
            out[: c.size, i, j] = c
    return MatrixFunction(_chop(out, 0.0), interval)


def evaluate(M: MatrixFunction, t) -> np.ndarray:
    """
    Evaluate `M` at a time or an array of times (Clenshaw recurrence per entry).

    Raises:
        SscfValidationError: `t` lies outside the interval
    """
    if not M.interval.contains(t):
        raise SscfValidationError(f"t={t} outside interval [{M.interval.a}, {M.interval.b}]")
    if np.ndim(t) == 0:
        x = float(M.interval.to_reference(t))
        return np.asarray(cheb.chebval(x, M.coeffs))
    return M.values(t)


def derivative(M: MatrixFunction) -> MatrixFunction:
    """Exact derivative of the interpolant; the degree drops by one."""
    coeffs = cheb.chebder(M.coeffs, m=1, scl=2.0 / M.interval.width, axis=0)
    return MatrixFunction(coeffs, M.interval, M.fit_tol)


def transpose(M: MatrixFunction) -> MatrixFunction:
    return MatrixFunction(np.transpose(M.coeffs, (0, 2, 1)), M.interval, M.fit_tol)


def scale(M: MatrixFunction, factor: float) -> MatrixFunction:
    return MatrixFunction(float(factor) * M.coeffs, M.interval, M.fit_tol)


def add(A: MatrixFunction, B: MatrixFunction) -> MatrixFunction:
    interval = _same_interval(A, B)
    if A.shape != B.shape:
        raise SscfValidationError(f"Cannot add {A.shape} and {B.shape}")
    degree = max(A.degree, B.degree)
    return MatrixFunction(_pad(A.coeffs, degree) + _pad(B.coeffs, degree), interval, max(A.fit_tol, B.fit_tol))


def sub(A: MatrixFunction, B: MatrixFunction) -> MatrixFunction:
    return add(A, scale(B, -1.0))


def mul(A: MatrixFunction, B: MatrixFunction, *, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """Pointwise product A(t) B(t), sampled and refitted."""
    interval = _same_interval(A, B)
    if A.cols != B.rows:
        raise SscfValidationError(f"Cannot multiply {A.shape} by {B.shape}")
    if A.is_constant or B.is_constant:
        # exact on coefficients
        if A.is_constant:
            coeffs = np.einsum("ij,kjl->kil", A.coeffs[0], B.coeffs)
        else:
            coeffs = np.einsum("kij,jl->kil", A.coeffs, B.coeffs[0])
        return MatrixFunction(coeffs, interval, max(A.fit_tol, B.fit_tol))
    return fit_nodes(lambda ts: A.values(ts) @ B.values(ts), interval,
                     min_degree=A.degree + B.degree, tolerances=tolerances)


def product(*factors: MatrixFunction, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """Pointwise product of several factors with a single refit."""
    interval = _same_interval(*factors)
    for left, right in zip(factors, factors[1:]):
        if left.cols != right.rows:
            raise SscfValidationError(f"Cannot multiply {left.shape} by {right.shape}")
    if len(factors) == 1:
        return factors[0]

    def nodes(ts):
        out = factors[0].values(ts)
        for f in factors[1:]:
            out = out @ f.values(ts)
        return out

    return fit_nodes(nodes, interval, min_degree=sum(f.degree for f in factors), tolerances=tolerances)


def block_diag(*blocks: MatrixFunction) -> MatrixFunction:
    """Block-diagonal assembly; exact on coefficients."""
    interval = _same_interval(*blocks)
    degree = max(b.degree for b in blocks)
    rows, cols = sum(b.rows for b in blocks), sum(b.cols for b in blocks)
    out = np.zeros((degree + 1, rows, cols))
    r = c = 0
    for b in blocks:
        out[: b.degree + 1, r:r + b.rows, c:c + b.cols] = b.coeffs
        r, c = r + b.rows, c + b.cols
    return MatrixFunction(out, interval, max(b.fit_tol for b in blocks))


def vstack(*blocks: MatrixFunction) -> MatrixFunction:
    """Stack blocks with equal column counts on top of each other; exact on coefficients."""
    interval = _same_interval(*blocks)
    if len({b.cols for b in blocks}) != 1:
        raise SscfValidationError(f"Cannot stack blocks with shapes {[b.shape for b in blocks]}")
    degree = max(b.degree for b in blocks)
    coeffs = np.concatenate([_pad(b.coeffs, degree)[: degree + 1] for b in blocks], axis=1)
    return MatrixFunction(coeffs, interval, max(b.fit_tol for b in blocks))


def verification_grid(interval: Interval, grid_size: int) -> np.ndarray:
    return interval.lobatto(grid_size)


def sup_norm(M: MatrixFunction, grid_size: int = 65) -> tuple[float, float]:
    """Maximum over the grid of the infinity norm of M(t); returns (value, worst t)."""
    ts = verification_grid(M.interval, grid_size)
    norms = np.abs(M.values(ts)).sum(axis=2).max(axis=1)
    worst = int(np.argmax(norms))
    return float(norms[worst]), float(ts[worst])


def singular_certificate(M: MatrixFunction, grid_size: int) -> tuple[float, float]:
    """Smallest singular value over a Lobatto grid and the node where it occurs."""
    ts = verification_grid(M.interval, grid_size)
    smallest = np.linalg.svd(M.values(ts), compute_uv=False)[:, -1]
    worst = int(np.argmin(smallest))
    return float(smallest[worst]), float(ts[worst])


def min_singular_on_grid(M: MatrixFunction, grid_size: int = 65) -> float:
    """Sampling certificate for pointwise nonsingularity of a square matrix function."""
    if M.rows != M.cols:
        raise SscfValidationError(f"Expected a square matrix function, got {M.shape}")
    return singular_certificate(M, grid_size)[0]


def _certificate_grid(M: MatrixFunction, tols: Tolerances) -> int:
    return int(min(max(tols.grid, 4 * (M.degree + 1) + 1), 1025))


def require_nonsingular(M: MatrixFunction, tolerances: Optional[Tolerances] = None, name: str = "M") -> float:
    """
    Certify pointwise nonsingularity by sampling.

    Raises:
        NearSingularError: the smallest singular value on the grid is below the threshold
    """
    tols = resolve(tolerances)
    if M.rows != M.cols:
        raise SscfValidationError(f"{name} must be square, got {M.shape}")
    smallest, worst_t = singular_certificate(M, _certificate_grid(M, tols))
    if smallest <= tols.singularity_threshold:
        raise NearSingularError(
            f"{name} is numerically singular: smallest singular value {smallest:.3e} at t={worst_t:.6g}",
            details={"worst_t": worst_t, "min_singular": smallest},
        )
    return smallest


def inverse(M: MatrixFunction, tol: Optional[float] = None, *, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """
    Pointwise inverse, refitted.

    Raises:
        NearSingularError: the nonsingularity certificate fails
        NonConvergenceError: the refit does not satisfy ||M R - I|| <= tol on the grid
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    require_nonsingular(M, tols)
    if M.is_constant:
        result = constant(np.linalg.inv(M.coeffs[0]), M.interval)
    else:
        result = fit_nodes(lambda ts: np.linalg.inv(M.values(ts)), M.interval,
                           min_degree=M.degree, tolerances=tols)
    ts = verification_grid(M.interval, tols.grid)
    residual = float(np.abs(M.values(ts) @ result.values(ts) - np.eye(M.rows)).sum(axis=2).max())
    if residual > tol:
        raise NonConvergenceError(f"Inverse residual {residual:.3e} exceeds {tol:.3e}",
                                  details={"residual": residual, "tol": tol})
    return result


def solve(A: MatrixFunction, B: MatrixFunction, *, tolerances: Optional[Tolerances] = None,
          certified: bool = False) -> MatrixFunction:
    """
    Pointwise solution X(t) of A(t) X(t) = B(t), refitted.

    With `certified=True` the caller guarantees nonsingularity of A (e.g. unit triangular
    structure) and the sampling certificate is skipped.
    """
    tols = resolve(tolerances)
    interval = _same_interval(A, B)
    if A.rows != A.cols or A.cols != B.rows:
        raise SscfValidationError(f"Cannot solve with {A.shape} and {B.shape}")
    if not certified:
        require_nonsingular(A, tols, name="system matrix")
    return fit_nodes(lambda ts: np.linalg.solve(A.values(ts), B.values(ts)), interval,
                     min_degree=A.degree + B.degree, tolerances=tols)


@dataclass(frozen=True)
class SvdTriple:
    """
    Smooth singular value decomposition M = U S V^T.

    Attributes:
        U (MatrixFunction): square, orthogonal within tolerance
        S (MatrixFunction): rectangular, diagonal pattern, nonnegative diagonal
        V (MatrixFunction): square, orthogonal within tolerance
        rank (int): constant rank of the decomposed function
    """
    U: MatrixFunction
    S: MatrixFunction
    V: MatrixFunction
    rank: int

    def reconstruct(self, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
        return product(self.U, self.S, self.V.T, tolerances=tolerances)


def _canonical_sign(vector: np.ndarray) -> float:
    return -1.0 if vector[int(np.argmax(np.abs(vector)))] < 0 else 1.0


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(-values, kind="stable")
    groups: list[list[int]] = []
    for idx in order:
        if groups and abs(values[groups[-1][-1]] - values[idx]) <= tol:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    return groups


def _align_to_reference(basis: np.ndarray, reference: np.ndarray, what: str, t: float) -> np.ndarray:
    """Rotate an orthonormal basis within its span onto the closest one to `reference`."""
    overlap = basis.T @ reference
    if np.linalg.svd(overlap, compute_uv=False).min() < ALIGNMENT_FLOOR:
        raise AlignmentError(f"{what} moved too far between samples near t={t:.6g}",
                             details={"t": float(t)})
    rotation, _ = polar(overlap)
    return basis @ rotation


def _pointwise_svd(ts: np.ndarray, values: np.ndarray, rank_gap_tol: float):
    U, s, Vt = np.linalg.svd(values, full_matrices=True)
    V = np.swapaxes(Vt, 1, 2).copy()
    ranks = (s > rank_gap_tol).sum(axis=1)
    changed = np.nonzero(ranks != ranks[0])[0]
    if changed.size:
        j = int(changed[0])
        raise ConstantRankError(
            f"Rank changes from {ranks[0]} to {ranks[j]} at t={ts[j]:.6g}",
            details={"t": float(ts[j]), "rank_before": int(ranks[0]), "rank_after": int(ranks[j])},
        )
    return U, s, V, int(ranks[0])


def _null_space_frames(M: MatrixFunction, tols: Tolerances) -> list[Optional[MatrixFunction]]:
    """
    Polynomial frames for the left and right null spaces of a constant-rank M.

    Sampled null-space bases are continued from node to node and interpolated. A frame is
    accepted once its projection onto the null space keeps its smallest singular value above
    ALIGNMENT_FLOOR on a dense grid; otherwise the number of samples doubles.
    """
    check_ts = verification_grid(M.interval, _certificate_grid(M, tols))
    check_u, _, check_v, r = _pointwise_svd(check_ts, M.values(check_ts), tols.rank_gap_tol)
    n = _next_size(max(MIN_POINTS, 2 * (M.degree + 1)))
    while True:
        ts = M.interval.from_reference(_first_kind_points(n))
        U, _, V, _ = _pointwise_svd(ts, M.values(ts), tols.rank_gap_tol)
        frames: list[Optional[MatrixFunction]] = []
        try:
            for name, Q, Q_check in (("left null space", U, check_u), ("right null space", V, check_v)):
                if Q.shape[1] == r:
                    frames.append(None)
                    continue
                basis = Q[:, :, r:].copy()
                for j in range(1, n):
                    basis[j] = _align_to_reference(basis[j], basis[j - 1], name, ts[j])
                frame = MatrixFunction(_values_to_coeffs(basis), M.interval, tols.fit_tol)
                overlap = np.swapaxes(Q_check[:, :, r:], 1, 2) @ frame.values(check_ts)
                smallest = np.linalg.svd(overlap, compute_uv=False)[:, -1]
                worst = int(np.argmin(smallest))
                if smallest[worst] < ALIGNMENT_FLOOR:
                    raise AlignmentError(f"{name} frame leaves its subspace near t={check_ts[worst]:.6g}",
                                         details={"t": float(check_ts[worst])})
                frames.append(frame)
            return frames
        except AlignmentError:
            if n - 1 >= tols.degree_cap:
                raise
            n = 2 * n - 1


def _aligned_svd_samples(ts: np.ndarray, values: np.ndarray, rank_gap_tol: float,
                         frames: Sequence[Optional[MatrixFunction]] = (None, None)):
    """
    Pointwise SVDs at ascending nodes, made continuous in t.

    Singular triplets follow the previous node; null-space columns are the basis closest to the
    given frames, which makes them a smooth function of t independent of the nodes.
    """
    _, p, q = values.shape
    U, s, V, r = _pointwise_svd(ts, values, rank_gap_tol)
    sigma = s[:, :r].copy()

    for i in range(r):
        sign = _canonical_sign(U[0, :, i])
        U[0, :, i] *= sign
        V[0, :, i] *= sign

    for j in range(1, len(ts)):
        u, v, sv = U[j], V[j], sigma[j]
        if not r:
            continue
        overlap = np.abs(U[j - 1][:, :r].T @ u[:, :r]) + np.abs(V[j - 1][:, :r].T @ v[:, :r])
        _, order = linear_sum_assignment(overlap, maximize=True)
        u[:, :r], v[:, :r], sv[:] = u[:, order], v[:, order], sv[order]
        for group in _clusters(sv, 1e-10 * max(float(sv.max()), 1.0)):
            if len(group) == 1:
                i = group[0]
                agreement = U[j - 1][:, i] @ u[:, i] + V[j - 1][:, i] @ v[:, i]
                if agreement < 0:
                    u[:, i] *= -1.0
                    v[:, i] *= -1.0
                if abs(agreement) < 2 * ALIGNMENT_FLOOR:
                    raise AlignmentError(
                        f"Singular vectors jump between nodes near t={ts[j]:.6g}",
                        details={"t": float(ts[j]), "agreement": float(abs(agreement) / 2)},
                    )
            else:
                overlap = u[:, group].T @ U[j - 1][:, group] + v[:, group].T @ V[j - 1][:, group]
                rotation, _ = polar(overlap)
                u[:, group] = u[:, group] @ rotation
                v[:, group] = v[:, group] @ rotation

    left, right = frames
    if left is not None:
        F = left.values(ts)
        for j in range(len(ts)):
            U[j][:, r:] = _align_to_reference(U[j][:, r:], F[j], "left null space", ts[j])
    if right is not None:
        F = right.values(ts)
        for j in range(len(ts)):
            V[j][:, r:] = _align_to_reference(V[j][:, r:], F[j], "right null space", ts[j])

    S = np.zeros_like(values)
    idx = np.arange(r)
    S[:, idx, idx] = sigma
    return U, S, V, r


def smooth_svd(M: MatrixFunction, tol: Optional[float] = None, *, tolerances: Optional[Tolerances] = None) -> SvdTriple:
    """
    Smooth singular value decomposition of a constant-rank matrix function.

    Pointwise SVDs at ascending Chebyshev nodes are aligned: singular triplets are matched to
    the previous node by an assignment on |<u_prev, u>| + |<v_prev, v>| with sign correction,
    and groups of equal singular values are rotated onto the previous node's vectors. Null-space
    columns are projected from polynomial frames continued across the interval, so a null space
    may turn arbitrarily far. The aligned samples are refitted and checked on the verification grid.

    Raises:
        ConstantRankError: the numerical rank changes on the sampling grid
        AlignmentError: nodes cannot be matched even at the degree cap
        NonConvergenceError: orthogonality or reconstruction residual above `tol`
    """
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    frames = _null_space_frames(M, tols)
    rank_seen: list[int] = []

    def nodes(ts):
        ascending = np.argsort(ts)
        U, S, V, r = _aligned_svd_samples(ts[ascending], M.values(ts[ascending]), tols.rank_gap_tol, frames)
        rank_seen.append(r)
        back = np.argsort(ascending)
        return U[back], S[back], V[back]

    u_coeffs, s_coeffs, v_coeffs = _adaptive_fit(nodes, M.interval, tols.fit_tol, tols.degree_cap, M.degree + 1)
    triple = SvdTriple(
        MatrixFunction(u_coeffs, M.interval, tols.fit_tol),
        MatrixFunction(s_coeffs, M.interval, tols.fit_tol),
        MatrixFunction(v_coeffs, M.interval, tols.fit_tol),
        rank_seen[-1],
    )
    ts = verification_grid(M.interval, tols.grid)
    u, s, v = triple.U.values(ts), triple.S.values(ts), triple.V.values(ts)
    orth = max(np.abs(np.swapaxes(u, 1, 2) @ u - np.eye(M.rows)).max(),
               np.abs(np.swapaxes(v, 1, 2) @ v - np.eye(M.cols)).max())
    recon = np.abs(u @ s @ np.swapaxes(v, 1, 2) - M.values(ts)).max()
    logger.debug(f"smooth_svd {M.shape}: rank {triple.rank}, orthogonality {orth:.2e}, reconstruction {recon:.2e}")
    if max(orth, recon) > tol:
        raise NonConvergenceError(
            f"Smooth SVD residuals exceed {tol:g}: orthogonality {orth:.2e}, reconstruction {recon:.2e}",
            details={"orthogonality": float(orth), "reconstruction": float(recon)},
        )
    return triple
