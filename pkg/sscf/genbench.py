"""
Seeded test problems.

Random SUT_columns / SUT_rows instances with full-rank secondary blocks built by construction,
SCF pairs around them, scrambled equivalent pairs with their ground-truth transform and
manufactured solutions.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb

from . import chebmat, equivalence
from .chebmat import Interval, MatrixFunction
from .dae import Problem, ScfPair, to_dae_pair
from .equivalence import DaePair, EquivalenceTransform
from .exceptions import VerificationError
from .models import Characteristics, GenSpec, Variant, VerificationReport
from .settings import Tolerances, resolve
from .structure import SutMatrixFunction, characteristics_from_signature

logger = logging.getLogger(__name__)

WIGGLE_FRACTION: float = 0.25


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream for instance `index` of a corpus seeded with `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _chebyshev_poly(rng: np.random.Generator, degree: int, amplitude: float) -> np.ndarray:
    """Random Chebyshev series with sum of |c_k| <= amplitude; c_0 excluded when degree > 0."""
    if degree == 0:
        return np.array([0.0])
    c = np.zeros(degree + 1)
    c[1:] = rng.uniform(-1.0, 1.0, degree) / np.arange(1, degree + 1)
    return amplitude * c / max(np.abs(c).sum(), 1.0)


def _poly_block(rng: np.random.Generator, rows: int, cols: int, degree: int, interval: Interval) -> MatrixFunction:
    coeffs = rng.standard_normal((degree + 1, rows, cols)) / (1.0 + np.arange(degree + 1))[:, None, None]
    return MatrixFunction(coeffs, interval)


def _rotation_angles(rng: np.random.Generator, n: int, degree: int, variation: float) -> list[np.ndarray]:
    """Two sweeps of adjacent rotations; each angle moves by at most `variation` around a random offset."""
    angles = []
    for _ in range(2 * max(n - 1, 0)):
        c = _chebyshev_poly(rng, degree, variation)
        c[0] = rng.uniform(-np.pi, np.pi)
        angles.append(c)
    return angles


def _rotation_values(angles: list[np.ndarray], n: int, x: np.ndarray) -> np.ndarray:
    """Product of adjacent Givens rotations with angles given as Chebyshev series in x."""
    out = np.broadcast_to(np.eye(n), (x.size, n, n)).copy()
    pairs = [(j, j + 1) for j in range(n - 1)] * 2
    for (i, j), c in zip(pairs, angles):
        phi = cheb.chebval(x, c)
        cos, sin = np.cos(phi), np.sin(phi)
        col_i, col_j = out[:, :, i].copy(), out[:, :, j].copy()
        out[:, :, i] = cos[:, None] * col_i + sin[:, None] * col_j
        out[:, :, j] = -sin[:, None] * col_i + cos[:, None] * col_j
    return out


def smooth_rotation(rng: np.random.Generator, n: int, degree: int, interval: Interval,
                    amplitude: float = 1.0, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """Orthogonal matrix function built from Givens rotations with polynomial angles."""
    angles = _rotation_angles(rng, n, degree, amplitude)
    if degree == 0 or n == 1:
        return chebmat.constant(_rotation_values(angles, n, np.zeros(1))[0], interval)
    return chebmat.fit_nodes(lambda ts: _rotation_values(angles, n, interval.to_reference(ts)), interval,
                             tolerances=tolerances)


def full_rank_block(rng: np.random.Generator, rows: int, cols: int, spec: GenSpec,
                    tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """
    Q(t) [D(t); 0] for rows >= cols, or its transpose shape [D(t) 0] Q(t)^T for rows < cols.

    D is diagonal with well separated values in [1, conditioning]; each value wiggles by at most
    a quarter of the separation so the singular values never cross.
    """
    small, large = min(rows, cols), max(rows, cols)
    gap = (spec.conditioning - 1.0) / small
    base = 1.0 + gap * (np.arange(small) + 0.5)
    wiggles = [_chebyshev_poly(rng, spec.entry_degree, WIGGLE_FRACTION * gap) for _ in range(small)]
    # total drift of Q stays below 0.8 rad
    angles = _rotation_angles(rng, large, spec.entry_degree, 0.2 / max(large - 1, 1))
    interval = spec.interval

    def nodes(ts):
        x = interval.to_reference(ts)
        D = np.zeros((x.size, large, small))
        for j in range(small):
            D[:, j, j] = base[j] + cheb.chebval(x, wiggles[j])
        block = _rotation_values(angles, large, x) @ D
        return block if rows >= cols else np.swapaxes(block, 1, 2)

    if spec.entry_degree == 0:
        return chebmat.constant(nodes(np.array([interval.a]))[0], interval)
    return chebmat.fit_nodes(nodes, interval, tolerances=tolerances)


def random_sut(spec: GenSpec, index: int = 0, *, tolerances: Optional[Tolerances] = None) -> SutMatrixFunction:
    """
    Deterministic SUT_columns (or SUT_rows) instance for `spec` and `index`.

    Secondary blocks have full column (row) rank with singular values in [1, conditioning];
    the blocks above them are random polynomials of degree entry_degree.
    """
    rng = make_rng(spec.seed, index)
    sig, interval = spec.sig, spec.interval
    degree = spec.entry_degree
    blocks = {}
    for i in range(sig.mu - 1):
        blocks[i, i + 1] = full_rank_block(rng, sig.ells[i], sig.ells[i + 1], spec, tolerances)
        for j in range(i + 2, sig.mu):
            blocks[i, j] = _poly_block(rng, sig.ells[i], sig.ells[j], degree, interval)
    top = max(b.degree for b in blocks.values())
    coeffs = np.zeros((top + 1, sig.m, sig.m))
    for (i, j), b in blocks.items():
        coeffs[: b.degree + 1, sig.block_slice(i), sig.block_slice(j)] = b.coeffs
    logger.debug(f"random_sut {spec.variant.value} {list(sig.ells)} seed={spec.seed} index={index}: degree {top}")
    return SutMatrixFunction(MatrixFunction(coeffs, interval, resolve(tolerances).fit_tol), sig, spec.variant)


def random_scf_pair(spec: GenSpec, index: int = 0, *, tolerances: Optional[Tolerances] = None) -> ScfPair:
    """SCF pair with a random polynomial Omega of size spec.d and N = random_sut(spec)."""
    sut = random_sut(spec, index, tolerances=tolerances)
    Omega = None
    if spec.d:
        rng = make_rng(spec.seed, index).spawn(1)[0]
        Omega = _poly_block(rng, spec.d, spec.d, spec.entry_degree, spec.interval)
    return ScfPair(spec.d, Omega, sut.N, sut.sig, sut.variant)


def _unit_triangular(rng: np.random.Generator, m: int, degree: int, magnitude: float, interval: Interval,
                     lower: bool) -> MatrixFunction:
    coeffs = magnitude / m * rng.uniform(-1.0, 1.0, (degree + 1, m, m)) / (1.0 + np.arange(degree + 1))[:, None, None]
    coeffs = np.tril(coeffs, -1) if lower else np.triu(coeffs, 1)
    coeffs[0] += np.eye(m)
    return MatrixFunction(coeffs, interval)


def random_transform(rng: np.random.Generator, m: int, degree: int, interval: Interval, magnitude: float = 0.5, *,
                     tolerances: Optional[Tolerances] = None) -> EquivalenceTransform:
    """K, L = (I + strictly lower) Q (I + strictly upper) with smooth rotations Q."""
    tols = resolve(tolerances)
    factors = []
    for _ in range(2):
        lower = _unit_triangular(rng, m, degree, magnitude, interval, lower=True)
        rotation = smooth_rotation(rng, m, degree, interval, magnitude, tols)
        upper = _unit_triangular(rng, m, degree, magnitude, interval, lower=False)
        factors.append(chebmat.product(lower, rotation, upper, tolerances=tols))
    K, L = factors
    return EquivalenceTransform.create(L, K, tolerances=tols)


def scramble(p: ScfPair, seed: int, degree: int = 1, magnitude: float = 0.5, *,
             tolerances: Optional[Tolerances] = None) -> Tuple[DaePair, EquivalenceTransform]:
    """
    Hide the SCF structure of `p` behind a random smooth transform.

    Returns p~ = apply(T_true, p) and T_true; magnitude 0 gives the identity.

    Raises:
        VerificationError: T_true does not verify between p and p~
    """
    tols = resolve(tolerances)
    if magnitude == 0.0:
        T = EquivalenceTransform.identity(p.m, p.interval)
    else:
        T = random_transform(make_rng(seed, 1 << 32), p.m, degree, p.interval, magnitude, tolerances=tols)
    source = to_dae_pair(p)
    scrambled = equivalence.apply(T, source, tolerances=tols)
    report = equivalence.verify(T, source, scrambled, tolerances=tols)
    if not report.passed:
        raise VerificationError(f"Scrambled pair does not verify (residuals {report.residual_E:.2e}, "
                                f"{report.residual_F:.2e})", details={"report": report.to_dict()})
    return scrambled, T


def manufactured_solution(rng: np.random.Generator, m: int, interval: Interval, *,
                          tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """Smooth m x 1 function with components a exp(b t) + c sin(w t + phi)."""
    a, b = rng.uniform(0.5, 1.5, m), rng.uniform(-1.0, 1.0, m)
    c, w, phi = rng.uniform(-1.0, 1.0, m), rng.uniform(0.5, 2.0, m), rng.uniform(0.0, 2 * np.pi, m)

    def nodes(ts):
        t = ts[:, None]
        return (a * np.exp(b * t) + c * np.sin(w * t + phi))[:, :, None]

    return chebmat.fit_nodes(nodes, interval, tolerances=tolerances)


def rhs_for(p: DaePair, x: MatrixFunction, *, tolerances: Optional[Tolerances] = None) -> MatrixFunction:
    """q = E x' + F x."""
    dx = x.derivative()
    return chebmat.fit_nodes(lambda ts: p.E.values(ts) @ dx.values(ts) + p.F.values(ts) @ x.values(ts),
                             p.interval, min_degree=max(p.E.degree, p.F.degree) + x.degree, tolerances=tolerances)


def manufactured_problem(spec: GenSpec, index: int = 0, *, tolerances: Optional[Tolerances] = None) -> Problem:
    """SCF pair of `spec` with a manufactured solution and its inhomogeneity."""
    pair = random_scf_pair(spec, index, tolerances=tolerances)
    x = manufactured_solution(make_rng(spec.seed, index).spawn(2)[1], pair.m, pair.interval, tolerances=tolerances)
    q = rhs_for(to_dae_pair(pair), x, tolerances=tolerances)
    return Problem(pair, q, x.values(pair.interval.a)[0, : pair.d, 0], x)


@dataclass
class Instance:
    """
    One corpus entry.

    Attributes:
        name (str): file stem
        spec (GenSpec): generation recipe
        index (int): position in the corpus, part of the random stream key
        pair (ScfPair): SCF pair (Omega absent when spec.d = 0)
        characteristics (Characteristics): ground truth from the signature
        scrambled (DaePair | None): scrambled equivalent pair
        transform (EquivalenceTransform | None): ground truth with apply(transform, pair) = scrambled
        verification (VerificationReport | None): check of `transform` at generation time
    """
    name: str
    spec: GenSpec
    index: int
    pair: ScfPair
    characteristics: Characteristics
    scrambled: Optional[DaePair] = None
    transform: Optional[EquivalenceTransform] = None
    verification: Optional[VerificationReport] = None


def generate_instance(spec: GenSpec, index: int = 0, *, scramble_degree: Optional[int] = None,
                      tolerances: Optional[Tolerances] = None) -> Instance:
    tols = resolve(tolerances)
    pair = random_scf_pair(spec, index, tolerances=tols)
    truth = characteristics_from_signature(spec.sig, spec.variant, d=spec.d)
    instance = Instance(f"instance-{index:05d}", spec, index, pair, truth)
    if scramble_degree is not None:
        instance.scrambled, instance.transform = scramble(pair, spec.seed + index, scramble_degree, tolerances=tols)
        instance.verification = equivalence.verify(instance.transform, to_dae_pair(pair), instance.scrambled,
                                                   tolerances=tols)
    return instance


def generate_corpus(specs: Iterable[GenSpec], *, scramble_degree: Optional[int] = None, workers: int = 1,
                    tolerances: Optional[Tolerances] = None) -> List[Instance]:
    """
    Generate one instance per spec; instance i uses the stream (spec.seed, i). With workers > 1
    instances are built concurrently and returned in spec order.
    """
    specs = list(specs)

    def build(item):
        index, spec = item
        return generate_instance(spec, index, scramble_degree=scramble_degree, tolerances=tolerances)

    if workers <= 1:
        instances = [build(item) for item in enumerate(specs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            instances = list(pool.map(build, enumerate(specs)))
    logger.info(f"generated {len(instances)} instances")
    return instances


def sweep_specs(signatures, variant: Variant, degrees: Iterable[int], seeds: Iterable[int], *,
                interval: Interval = chebmat.DEFAULT_INTERVAL, conditioning: float = 4.0, d: int = 0) -> List[GenSpec]:
    """Cartesian product of signatures, entry degrees and seeds."""
    return [
        GenSpec(sig=sig, variant=variant, interval=interval, entry_degree=degree, seed=seed,
                conditioning=conditioning, d=d)
        for sig in signatures for degree in degrees for seed in seeds
    ]
