"""
Block structure of nilpotent parts.

Strictly upper block-triangular (SUT) predicates for matrix functions, the constant elementary
matrices of the column and row classes, canonical characteristic values and the permutations
that bring elementary matrices to Jordan form.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .chebmat import MatrixFunction, verification_grid
from .exceptions import SignatureError, SscfValidationError
from .models import BlockSignature, Characteristics, Variant
from .settings import Tolerances, resolve

logger = logging.getLogger(__name__)

ConstantOrFunction = Union[np.ndarray, MatrixFunction]


@dataclass(frozen=True)
class SutMatrixFunction:
    """
    A square matrix function N together with its block signature and SUT sub-class.

    Construction does not run the predicates; use :func:`as_sut` for a checked instance.
    """
    N: MatrixFunction
    sig: BlockSignature
    variant: Variant = Variant.PLAIN

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.N.shape != (self.sig.m, self.sig.m):
            raise SscfValidationError(f"N has shape {self.N.shape}, signature needs {self.sig.m}x{self.sig.m}")

    def secondary_block(self, i: int) -> MatrixFunction:
        return secondary_block(self.N, self.sig, i)


def _check_dimensions(N: MatrixFunction, sig: BlockSignature) -> None:
    if N.shape != (sig.m, sig.m):
        raise SscfValidationError(f"N has shape {N.shape}, signature {list(sig.ells)} needs {sig.m}x{sig.m}")


def secondary_block(N: MatrixFunction, sig: BlockSignature, i: int) -> MatrixFunction:
    """Block (i, i+1), 0-based."""
    return N.block(sig.block_slice(i), sig.block_slice(i + 1))


def lower_part_norm(N: MatrixFunction, sig: BlockSignature, grid_size: int) -> float:
    """Max over the grid of the entries on and below the block diagonal."""
    _check_dimensions(N, sig)
    values = N.values(verification_grid(N.interval, grid_size))
    mask = np.zeros((sig.m, sig.m), dtype=bool)
    for i in range(sig.mu):
        for j in range(i + 1):
            mask[sig.block_slice(i), sig.block_slice(j)] = True
    return float(np.abs(values[:, mask]).max())


def is_sut(N: MatrixFunction, sig: BlockSignature, tol: Optional[float] = None, *,
           tolerances: Optional[Tolerances] = None) -> bool:
    """True iff all blocks (i, j) with i >= j vanish within `tol` on the verification grid."""
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    return lower_part_norm(N, sig, tols.grid) <= tol


def secondary_rank_certificates(N: MatrixFunction, sig: BlockSignature, grid_size: int) -> list[float]:
    """Smallest retained singular value of every secondary block over the grid."""
    ts = verification_grid(N.interval, grid_size)
    values = N.values(ts)
    out = []
    for i in range(sig.mu - 1):
        block = values[:, sig.block_slice(i), sig.block_slice(i + 1)]
        out.append(float(np.linalg.svd(block, compute_uv=False)[:, -1].min()))
    return out


def _is_sut_variant(N: MatrixFunction, sig: BlockSignature, variant: Variant, tol: Optional[float],
                    tolerances: Optional[Tolerances]) -> bool:
    tols = resolve(tolerances)
    tol = tols.check_tol if tol is None else tol
    sig.require(variant)
    if not is_sut(N, sig, tol, tolerances=tols):
        return False
    certificates = secondary_rank_certificates(N, sig, tols.grid)
    logger.debug(f"{variant.value} rank certificates for {list(sig.ells)}: {certificates}")
    return min(certificates) > tol


def is_sut_columns(N: MatrixFunction, sig: BlockSignature, tol: Optional[float] = None, *,
                   tolerances: Optional[Tolerances] = None) -> bool:
    """
    True iff N is SUT and every secondary block (i, i+1) has full column rank l_{i+1}
    uniformly on the grid.

    Raises:
        SignatureError: the block sizes are not nonincreasing
    """
    return _is_sut_variant(N, sig, Variant.COLUMNS, tol, tolerances)


def is_sut_rows(N: MatrixFunction, sig: BlockSignature, tol: Optional[float] = None, *,
                tolerances: Optional[Tolerances] = None) -> bool:
    """
    True iff N is SUT and every secondary block (i, i+1) has full row rank l_i uniformly on
    the grid.

    Raises:
        SignatureError: the block sizes are not nondecreasing
    """
    return _is_sut_variant(N, sig, Variant.ROWS, tol, tolerances)


def satisfies(N: MatrixFunction, sig: BlockSignature, variant: Variant, tol: Optional[float] = None, *,
              tolerances: Optional[Tolerances] = None) -> bool:
    variant = Variant.parse(variant)
    if variant is Variant.COLUMNS:
        return is_sut_columns(N, sig, tol, tolerances=tolerances)
    if variant is Variant.ROWS:
        return is_sut_rows(N, sig, tol, tolerances=tolerances)
    return is_sut(N, sig, tol, tolerances=tolerances)


def elementary_col(sig: BlockSignature) -> np.ndarray:
    """
    Constant elementary matrix of the column class: secondary blocks [I; 0], all else zero.

    Example:
        >>> elementary_col(BlockSignature((2, 1)))
        array([[0., 0., 1.],
               [0., 0., 0.],
               [0., 0., 0.]])
    """
    sig.require(Variant.COLUMNS)
    offsets = sig.offsets
    out = np.zeros((sig.m, sig.m))
    for i in range(sig.mu - 1):
        size = sig.ells[i + 1]
        out[offsets[i]:offsets[i] + size, offsets[i + 1]:offsets[i + 1] + size] = np.eye(size)
    return out


def elementary_row(sig: BlockSignature) -> np.ndarray:
    """Constant elementary matrix of the row class: secondary blocks [0 I], all else zero."""
    sig.require(Variant.ROWS)
    offsets = sig.offsets
    out = np.zeros((sig.m, sig.m))
    for i in range(sig.mu - 1):
        size, shift = sig.ells[i], sig.ells[i + 1] - sig.ells[i]
        col = offsets[i + 1] + shift
        out[offsets[i]:offsets[i] + size, col:col + size] = np.eye(size)
    return out


def elementary(sig: BlockSignature, variant: Variant) -> np.ndarray:
    variant = Variant.parse(variant)
    if variant is Variant.COLUMNS:
        return elementary_col(sig)
    if variant is Variant.ROWS:
        return elementary_row(sig)
    raise SignatureError("Elementary matrices exist for the columns and rows variants only")


def _as_constant(N: ConstantOrFunction) -> np.ndarray:
    if isinstance(N, MatrixFunction):
        return N.constant_value()
    out = np.atleast_2d(np.asarray(N, dtype=float))
    if out.shape[0] != out.shape[1]:
        raise SscfValidationError(f"Expected a square matrix, got shape {out.shape}")
    return out


def numerical_rank(A: np.ndarray, threshold: float) -> int:
    if A.size == 0:
        return 0
    return int((np.linalg.svd(A, compute_uv=False) > threshold).sum())


def ranks_of_powers(N: ConstantOrFunction, *, tolerances: Optional[Tolerances] = None) -> list[int]:
    """
    rank N^p for p = 1, 2, ... up to and including the first vanishing power.

    Raises:
        SscfValidationError: N is not nilpotent within tolerance
    """
    tols = resolve(tolerances)
    N = _as_constant(N)
    size = N.shape[0]
    base = max(1.0, float(np.linalg.norm(N, 2)))
    ranks: list[int] = []
    power = np.eye(size)
    for p in range(1, size + 2):
        power = power @ N
        rank = numerical_rank(power, tols.rank_rel_tol * base ** p)
        ranks.append(rank)
        if rank == 0:
            return ranks
    raise SscfValidationError(f"Matrix is not nilpotent within tolerance (rank of N^{size + 1} is {ranks[-1]})")


def characteristics_from_nilpotent(N: ConstantOrFunction, r_total: Optional[int] = None, d: int = 0, *,
                                   tolerances: Optional[Tolerances] = None) -> Characteristics:
    """
    Canonical characteristics of {diag(I_d, N), diag(Omega, I)} from the constant nilpotent N.

    theta_i = rank N^(i+1) - rank N^(i+2), mu is the nilpotency index and r = d + rank N.
    N = 0 gives the index-1 case mu = 1 with no theta values.

    Raises:
        SscfValidationError: N is not nilpotent, or `r_total` disagrees with d + rank N
    """
    N = _as_constant(N)
    ranks = ranks_of_powers(N, tolerances=tolerances)
    mu = len(ranks) if ranks[0] > 0 else 1
    rank_sequence = ranks if ranks[0] > 0 else [0]
    thetas = tuple(rank_sequence[i] - (rank_sequence[i + 1] if i + 1 < len(rank_sequence) else 0)
                   for i in range(mu - 1))
    r = d + rank_sequence[0]
    if r_total is not None and r_total != r:
        raise SscfValidationError(f"r={r_total} inconsistent with d + rank N = {r}")
    return Characteristics(m=N.shape[0] + d, r=r, mu=mu, thetas=thetas, d=d)


def characteristics_from_signature(sig: BlockSignature, variant: Variant, d: int = 0) -> Characteristics:
    """Characteristic values implied by the block sizes of a SUT_columns / SUT_rows nilpotent part."""
    variant = Variant.parse(variant)
    sig.require(variant)
    if variant is Variant.COLUMNS:
        thetas, kernel = sig.ells[1:], sig.ells[0]
    elif variant is Variant.ROWS:
        thetas, kernel = tuple(reversed(sig.ells[:-1])), sig.ells[-1]
    else:
        raise SignatureError("Characteristics follow from block sizes only for columns/rows variants")
    rank = sig.m - kernel
    return Characteristics(m=sig.m + d, r=d + rank, mu=sig.mu, thetas=thetas, d=d)


def signature_from_characteristics(c: Characteristics, m_nilpotent: Optional[int] = None,
                                   variant: Variant = Variant.COLUMNS) -> BlockSignature:
    """
    Block sizes of the column or row class realising the characteristics.

    Column: l_1 = m - r, l_{i+1} = theta_{i-1}. Row: l_mu = m - r, l_i = theta_{mu-i-1}.

    Raises:
        SignatureError: index below 2, or the block sizes do not sum to `m_nilpotent`
    """
    variant = Variant.parse(variant)
    m_nilpotent = c.m_nilpotent if m_nilpotent is None else m_nilpotent
    if c.mu < 2:
        raise SignatureError(f"Index mu={c.mu} has no block signature (needs mu >= 2)")
    kernel = c.m - c.r
    if variant is Variant.COLUMNS:
        ells = (kernel,) + c.thetas
    elif variant is Variant.ROWS:
        ells = tuple(reversed(c.thetas)) + (kernel,)
    else:
        raise SignatureError("Signatures are defined for the columns and rows variants only")
    if sum(ells) != m_nilpotent:
        raise SignatureError(f"Block sizes {list(ells)} sum to {sum(ells)}, expected {m_nilpotent}")
    sig = BlockSignature(ells)
    sig.require(variant)
    return sig


def jordan_blocks(c: Characteristics, m: Optional[int] = None) -> dict[int, int]:
    """
    Multiset of Jordan block orders {order: count} of the nilpotent part.

    Example:
        >>> jordan_blocks(Characteristics(m=26, r=18, mu=5, thetas=(7, 5, 4, 2), d=0))
        {1: 1, 2: 2, 3: 1, 4: 2, 5: 2}

    Raises:
        SscfValidationError: a count would be negative
    """
    m = c.m if m is None else m
    thetas = list(c.thetas) + [0]
    counts = {1: m - c.r - thetas[0]}
    for k in range(1, c.mu):
        counts[k + 1] = thetas[k - 1] - thetas[k]
    if any(v < 0 for v in counts.values()):
        raise SscfValidationError(f"Invalid characteristics: negative Jordan block count in {counts}")
    blocks = {order: count for order, count in counts.items() if count > 0}
    total = sum(order * count for order, count in blocks.items())
    if total != m - c.d:
        raise SscfValidationError(f"Jordan blocks cover {total} rows, nilpotent part has {m - c.d}")
    return blocks


def _jordan_chains(N: np.ndarray) -> list[list[int]]:
    size = N.shape[0]
    successor = [-1] * size
    for a, b in zip(*np.nonzero(N)):
        successor[int(a)] = int(b)
    starts = [a for a in range(size) if not np.any(N[:, a])]
    chains = []
    for start in starts:
        chain, a = [start], successor[start]
        while a != -1:
            chain.append(a)
            a = successor[a]
        chains.append(chain)
    return sorted(chains, key=len, reverse=True)


def jordan_permutation(sig: BlockSignature, variant: Variant) -> np.ndarray:
    """
    Permutation `perm` (0-based) with P[i, perm[i]] = 1 such that P N P^T is a direct sum of
    Jordan blocks J_k (ones on the superdiagonal), ordered by decreasing order; equal orders keep
    the order of their first index in N.
    """
    N = elementary(sig, variant)
    return np.array([a for chain in _jordan_chains(N) for a in chain], dtype=int)


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    perm = np.asarray(perm, dtype=int)
    out = np.zeros((perm.size, perm.size))
    out[np.arange(perm.size), perm] = 1.0
    return out


def jordan_matrix(orders) -> np.ndarray:
    """Direct sum of nilpotent Jordan blocks of the given orders."""
    size = int(sum(orders))
    out = np.zeros((size, size))
    start = 0
    for k in orders:
        for i in range(k - 1):
            out[start + i, start + i + 1] = 1.0
        start += k
    return out


def jordan_orders(sig: BlockSignature, variant: Variant) -> list[int]:
    return [len(chain) for chain in _jordan_chains(elementary(sig, variant))]


def jordan_form(sig: BlockSignature, variant: Variant) -> np.ndarray:
    P = permutation_matrix(jordan_permutation(sig, variant))
    return P @ elementary(sig, variant) @ P.T


def block_counts(orders) -> dict[int, int]:
    return dict(sorted(Counter(int(k) for k in orders).items()))


def variant_permutation(sig_col: BlockSignature) -> np.ndarray:
    """
    Permutation q with Q = permutation_matrix(q) and Q N^(Ec)(sig) Q^T = N^(Er)(reversed sig).
    """
    sig_col.require(Variant.COLUMNS)
    pc = jordan_permutation(sig_col, Variant.COLUMNS)
    pr = jordan_permutation(sig_col.reversed(), Variant.ROWS)
    q = np.empty_like(pc)
    q[pr] = pc
    return q
