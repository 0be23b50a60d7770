import time

import numpy as np
import pytest

from sscf import chebmat, genbench, structure
from sscf.chebmat import Interval
from sscf.canon_row import block_reversal, build_K_row, canonicalize_row, lam, run_row, step0_normalize_row
from sscf.exceptions import PredicateError, SignatureError
from sscf.models import BlockSignature, GenSpec, Variant
from sscf.structure import SutMatrixFunction
from tests.conftest import ROW_ELLS, grid_error

SWEEP_SIGNATURES = [BlockSignature(e) for e in [(1, 1), (1, 2), (1, 2, 2), (1, 2, 2, 3), (1, 1, 2, 2, 2)]]
FULL_SWEEP_SIGNATURES = SWEEP_SIGNATURES + [BlockSignature(e) for e in [(3, 3), (1, 2, 4), (3, 3, 3), (2, 4, 5, 7, 8)]]


def assert_reaches_target(sut: SutMatrixFunction, **kwargs):
    trace = run_row(sut, **kwargs)
    assert trace.report.passed
    N_final = trace.steps[-1].N
    assert grid_error(N_final, chebmat.constant(structure.elementary_row(sut.sig), N_final.interval)) <= 1e-9
    return trace


class TestLambda:
    def test_five_block_sequence(self):
        sig = BlockSignature(ROW_ELLS)
        assert [lam(sig, k) for k in range(5)] == [2, 6, 11, 18, 26]

    def test_block_reversal_is_involutive(self):
        P = block_reversal(BlockSignature((1, 2, 3)))
        np.testing.assert_array_equal(P, P.T)
        np.testing.assert_array_equal(P @ P, np.eye(6))


class TestWorkedExample:
    def test_single_iteration(self, worked_n):
        trace = run_row(worked_n, sig=BlockSignature((1, 1)))
        assert len([s for s in trace.steps if s.K is not None]) == 1
        step = trace.steps[0]
        assert grid_error(step.K, chebmat.from_polynomials([[[1], [0]], [[0], [2, 1]]])) <= 1e-10
        # H = [[1, -1/(2+t)], [0, 1]]
        np.testing.assert_allclose(step.H(0.5), [[1.0, -0.4], [0.0, 1.0]], atol=1e-10)
        assert trace.report.residual_E <= 1e-10
        assert trace.report.residual_F <= 1e-10
        assert trace.lambdas == [1, 2]

    def test_canonicalize_returns_elementary(self, worked_n):
        T, Nr = canonicalize_row(worked_n, sig=BlockSignature((1, 1)))
        np.testing.assert_array_equal(Nr, [[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(T.K(0.5), [[1.0, 0.0], [0.0, 0.4]], atol=1e-10)


class TestSteps:
    @pytest.fixture
    def sut(self):
        return genbench.random_sut(GenSpec(sig=BlockSignature((1, 2, 2, 3)), variant=Variant.ROWS,
                                           entry_degree=2, seed=11))

    def test_step0_blocks_read_zero_then_r(self, sut):
        N0, _ = step0_normalize_row(sut)
        ts = chebmat.verification_grid(N0.N.interval, 33)
        # block (0, 1) is 1 x 2: its first column must vanish
        assert np.abs(N0.N.values(ts)[:, 0, 1]).max() <= 1e-9
        assert structure.is_sut_rows(N0.N, sut.sig)

    def test_k_factor_holds_for_any_sut(self, sut):
        K = build_K_row(sut.N, sut.sig)
        Er = chebmat.constant(structure.elementary_row(sut.sig), K.interval)
        assert grid_error(chebmat.mul(Er, K), sut.N) <= 1e-10

    def test_each_step_stays_in_row_class(self, sut):
        trace = run_row(sut)
        for step in trace.steps:
            assert structure.is_sut_rows(step.N, sut.sig), step.lam

    def test_leading_columns_coincide_after_each_step(self, sut):
        trace = run_row(sut)
        Er = structure.elementary_row(sut.sig)
        ts = chebmat.verification_grid(sut.N.interval, 33)
        for step in trace.steps:
            cols = slice(0, step.lam)
            assert np.abs(step.N.values(ts)[:, :, cols] - Er[:, cols]).max() <= 1e-9
        assert trace.lambdas == [lam(sut.sig, k) for k in range(sut.sig.mu)]


class TestFailures:
    def test_zero_secondary_block(self):
        with pytest.raises(PredicateError):
            run_row(chebmat.zeros(3, 3), sig=BlockSignature((1, 2)))

    def test_wrong_ordering(self):
        with pytest.raises(SignatureError):
            run_row(chebmat.zeros(3, 3), sig=BlockSignature((2, 1)))

    def test_column_class_is_not_row_class(self):
        sig = BlockSignature((2, 2))
        # secondary block [[1, 0], [0, 0]] has neither full row nor full column rank
        N = chebmat.constant(np.block([[np.zeros((2, 2)), np.diag([1.0, 0.0])], [np.zeros((2, 4))]]))
        with pytest.raises(PredicateError):
            run_row(N, sig=sig)


class TestSweep:
    @pytest.mark.parametrize("sig", SWEEP_SIGNATURES, ids=lambda s: "-".join(map(str, s.ells)))
    @pytest.mark.parametrize("degree", [0, 1, 3])
    def test_reduced_sweep(self, sig, degree):
        sut = genbench.random_sut(GenSpec(sig=sig, variant=Variant.ROWS, entry_degree=degree, seed=3))
        assert_reaches_target(sut)

    def test_col_signature(self):
        sut = genbench.random_sut(GenSpec(sig=BlockSignature(ROW_ELLS), variant=Variant.ROWS,
                                          entry_degree=1, seed=5))
        trace = assert_reaches_target(sut)
        assert trace.lambdas == [2, 6, 11, 18, 26]

    @pytest.mark.corpus
    @pytest.mark.parametrize("seed", range(6))
    def test_full_sweep(self, seed):
        specs = genbench.sweep_specs(FULL_SWEEP_SIGNATURES, Variant.ROWS, degrees=[0, 1, 2, 3, 4, 6], seeds=[seed])
        for spec in specs:
            start = time.perf_counter()
            assert_reaches_target(genbench.random_sut(spec))
            assert time.perf_counter() - start <= 5.0, spec.to_dict()

    @pytest.mark.corpus
    @pytest.mark.parametrize("seed", range(100))
    def test_k_factor_corpus(self, seed):
        sig = FULL_SWEEP_SIGNATURES[seed % len(FULL_SWEEP_SIGNATURES)]
        sut = genbench.random_sut(GenSpec(sig=sig, variant=Variant.ROWS, entry_degree=seed % 4, seed=seed))
        K = build_K_row(sut.N, sut.sig)
        Er = chebmat.constant(structure.elementary_row(sut.sig), K.interval)
        assert grid_error(chebmat.mul(Er, K), sut.N) <= 1e-10


class TestTurningSecondaryBlock:
    @pytest.mark.parametrize("interval", [Interval(-1.0, 1.0), Interval(0.0, 3.0)], ids=["short", "long"])
    def test_null_space_turning_with_the_block(self, interval):
        def sample(t):
            N = np.zeros((3, 3))
            N[0, 1:3] = [np.cos(t), np.sin(t)]
            return N

        sig = BlockSignature((1, 2))
        sut = SutMatrixFunction(chebmat.fit(sample, interval), sig, Variant.ROWS)
        assert_reaches_target(sut)
        _, Nr = canonicalize_row(sut)
        np.testing.assert_array_equal(Nr, structure.elementary_row(sig))
