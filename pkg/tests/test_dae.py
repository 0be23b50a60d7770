import numpy as np
import pytest

from sscf import chebmat, dae, equivalence, genbench, structure
from sscf.chebmat import Interval
from sscf.dae import Problem, ScfPair
from sscf.exceptions import SscfValidationError
from sscf.models import BlockSignature, GenSpec, Variant
from tests.conftest import COL_ELLS, JORDAN_ORDERS, ROW_ELLS, grid_error


def sscf_pair(ells=(2, 1), variant=Variant.COLUMNS, d=0, interval=Interval(-1.0, 1.0)):
    sig = BlockSignature(ells)
    N = chebmat.constant(structure.elementary(sig, variant), interval)
    Omega = chebmat.from_polynomials([[[1, 0.5] if i == j else [0.2] for j in range(d)] for i in range(d)],
                                     interval) if d else None
    return ScfPair(d, Omega, N, sig, variant)


class TestScfPair:
    def test_assemble_and_blocks(self, worked_n):
        Omega = chebmat.from_polynomials([[[1, 1]]])
        p = dae.assemble(Omega, worked_n, BlockSignature((1, 1)), Variant.COLUMNS)
        assert p.m == 3
        pair = dae.to_dae_pair(p)
        np.testing.assert_allclose(pair.E(0.0), [[1, 0, 0], [0, 0, 2], [0, 0, 0]])
        np.testing.assert_allclose(pair.F(0.0), [[1, 0, 0], [0, 1, 0], [0, 0, 1]])

    def test_omega_must_match_d(self, worked_n):
        with pytest.raises(SscfValidationError):
            ScfPair(1, None, worked_n)
        with pytest.raises(SscfValidationError):
            ScfPair(0, chebmat.identity(1), worked_n)

    def test_signature_must_fit(self, worked_n):
        with pytest.raises(SscfValidationError):
            ScfPair(0, None, worked_n, BlockSignature((2, 1)))

    def test_is_sscf(self, worked_pair):
        assert not worked_pair.is_sscf
        assert sscf_pair().is_sscf

    def test_serialization_layout(self, worked_pair):
        data = worked_pair.to_dict()
        assert set(data) == {"interval", "d", "omega", "n_part", "signature", "variant", "jordan_orders"}
        again = ScfPair.from_dict(data)
        assert again.sig == worked_pair.sig
        assert grid_error(again.N, worked_pair.N) == 0.0


class TestCanonicalizePair:
    def test_index_one_maps_by_identity(self):
        p = ScfPair(1, chebmat.identity(1), chebmat.zeros(2, 2))
        T, sscf, trace = dae.canonicalize_pair_traced(p)
        assert trace is None
        assert grid_error(T.K, chebmat.identity(3)) == 0.0
        assert dae.characteristics(sscf).mu == 1

    def test_already_elementary(self):
        p = sscf_pair((3, 2, 1))
        T, sscf, trace = dae.canonicalize_pair_traced(p)
        assert trace is None
        assert grid_error(T.L, chebmat.identity(6)) == 0.0

    def test_worked_example_with_dynamic_part(self, worked_n):
        Omega = chebmat.from_polynomials([[[0, 1]]])
        p = ScfPair(1, Omega, worked_n, BlockSignature((1, 1)), Variant.COLUMNS)
        T, sscf = dae.canonicalize_pair(p)
        assert sscf.is_sscf
        np.testing.assert_array_equal(sscf.N.constant_value(), [[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(T.K(0.5), np.diag([1.0, 2.5, 1.0]), atol=1e-10)
        assert equivalence.verify(T, dae.to_dae_pair(p), dae.to_dae_pair(sscf)).passed

    def test_variant_override(self, worked_pair):
        _, sscf = dae.canonicalize_pair(worked_pair, "row")
        assert sscf.variant is Variant.ROWS

    def test_signature_required(self, worked_n):
        with pytest.raises(SscfValidationError):
            dae.canonicalize_pair(ScfPair(0, None, worked_n, None, Variant.COLUMNS))

    def test_plain_variant_rejected(self, worked_n):
        with pytest.raises(SscfValidationError):
            dae.canonicalize_pair(ScfPair(0, None, worked_n, BlockSignature((1, 1))))


class TestJordanAndVariants:
    def test_to_jordan(self, col_sig, mixed_jordan):
        p = ScfPair(0, None, chebmat.constant(structure.elementary_col(col_sig)), col_sig, Variant.COLUMNS)
        np.testing.assert_array_equal(dae.to_jordan(p).N.constant_value(), mixed_jordan)

    @pytest.mark.parametrize("variant", [Variant.COLUMNS, Variant.ROWS])
    def test_jordan_result_keeps_block_orders(self, variant):
        ells = COL_ELLS if variant is Variant.COLUMNS else ROW_ELLS
        jordan = dae.to_jordan(sscf_pair(ells, variant, d=1))
        assert jordan.jordan_orders == JORDAN_ORDERS
        assert jordan.sig is None
        assert ScfPair.from_dict(jordan.to_dict()).jordan_orders == JORDAN_ORDERS

    def test_jordan_orders_must_fit(self, mixed_jordan):
        with pytest.raises(SscfValidationError):
            ScfPair(0, None, chebmat.constant(mixed_jordan), jordan_orders=(5, 5))

    def test_jordan_keeps_dynamic_part(self):
        p = sscf_pair((2, 1), d=2)
        T = dae.jordan_transform(p)
        np.testing.assert_array_equal(T.K.constant_value()[:2, :2], np.eye(2))
        assert dae.to_jordan(p).d == 2

    def test_jordan_needs_elementary_n(self, mixed_jordan):
        p = ScfPair(0, None, chebmat.constant(mixed_jordan), BlockSignature((8, 7, 5, 4, 2)), Variant.COLUMNS)
        with pytest.raises(SscfValidationError):
            dae.to_jordan(p)

    @pytest.mark.parametrize("ells", [(2, 1), (3, 2, 2, 1), (8, 7, 5, 4, 2)])
    def test_switch_variant_roundtrip(self, ells):
        p = sscf_pair(ells, d=1)
        T, row = dae.switch_variant(p)
        assert row.variant is Variant.ROWS
        assert row.sig.ells == tuple(reversed(ells))
        np.testing.assert_array_equal(row.N.constant_value(), structure.elementary_row(row.sig))
        assert equivalence.verify(T, dae.to_dae_pair(p), dae.to_dae_pair(row)).passed
        _, back = dae.switch_variant(row)
        np.testing.assert_array_equal(back.N.constant_value(), p.N.constant_value())

    def test_characteristics_are_variant_independent(self, col_sig):
        p = sscf_pair(col_sig.ells, d=2)
        _, row = dae.switch_variant(p)
        assert dae.characteristics(p) == dae.characteristics(row)
        assert dae.characteristics(p).d == 2


class TestSolve:
    def test_nilpotent_solution(self):
        N = np.array([[0.0, 1.0], [0.0, 0.0]])
        q2 = chebmat.fit(lambda t: np.array([[np.sin(t)], [np.cos(t)]]))
        x2 = dae.nilpotent_solution(N, q2)
        expected = chebmat.fit(lambda t: np.array([[2 * np.sin(t)], [np.cos(t)]]))
        assert grid_error(x2, expected) <= 1e-10

    def test_solve_sscf_with_dynamic_part(self):
        p = sscf_pair((2, 1), d=1)
        q = chebmat.fit(lambda t: np.array([[np.cos(t)], [t], [1.0], [np.exp(t)]]))
        result = dae.solve_sscf(p, q, [0.5])
        assert result.residual_norm <= 1e-6
        assert result.free_initial_dimension == 1
        assert result.x(-1.0)[0, 0] == pytest.approx(0.5, abs=1e-8)

    def test_solve_sscf_needs_constant_n(self, worked_pair):
        q = chebmat.zeros(2, 1)
        with pytest.raises(SscfValidationError):
            dae.solve_sscf(worked_pair, q)

    def test_initial_value_size(self):
        p = sscf_pair((1, 1), d=1)
        with pytest.raises(SscfValidationError):
            dae.solve_sscf(p, chebmat.zeros(3, 1), [0.0, 1.0])

    @pytest.mark.parametrize("variant", [Variant.COLUMNS, Variant.ROWS])
    def test_manufactured_problem(self, variant):
        ells = (2, 1, 1) if variant is Variant.COLUMNS else (1, 1, 2)
        spec = GenSpec(sig=BlockSignature(ells), variant=variant, entry_degree=1, seed=7, d=2)
        problem = genbench.manufactured_problem(spec)
        result = dae.solve_problem(problem)
        assert result.residual_norm <= 1e-6
        assert grid_error(result.x, problem.x_exact) <= 1e-6
        assert "canonicalize" in result.timings

    def test_problem_serialization(self):
        problem = genbench.manufactured_problem(GenSpec(sig=BlockSignature((1, 1)), seed=2, d=1))
        again = Problem.from_dict(problem.to_dict())
        np.testing.assert_array_equal(again.x0_dyn, problem.x0_dyn)
        assert grid_error(again.q, problem.q) == 0.0


class TestScrambled:
    @pytest.fixture(params=[Variant.COLUMNS, Variant.ROWS])
    def instance(self, request):
        ells = (2, 2, 1) if request.param is Variant.COLUMNS else (1, 2, 2)
        spec = GenSpec(sig=BlockSignature(ells), variant=request.param, entry_degree=1, seed=13, d=1)
        return genbench.generate_instance(spec, scramble_degree=1)

    def test_characteristics_survive_scrambling(self, instance):
        d = instance.pair.d
        recovered = equivalence.apply(equivalence.inverse(instance.transform), instance.scrambled)
        m = recovered.m
        N = recovered.E.block(slice(d, m), slice(d, m))
        Omega = recovered.F.block(slice(0, d), slice(0, d))
        pair = ScfPair(d, Omega, N, instance.pair.sig, instance.pair.variant)
        _, sscf = dae.canonicalize_pair(pair)
        assert dae.characteristics(sscf) == instance.characteristics

    def test_solution_maps_back_to_scrambled_pair(self, instance):
        spec = instance.spec
        rng = genbench.make_rng(spec.seed, 99)
        x_scf = genbench.manufactured_solution(rng, instance.pair.m, instance.pair.interval)
        q_scf = genbench.rhs_for(dae.to_dae_pair(instance.pair), x_scf)
        T_true = instance.transform
        q = equivalence.transform_rhs(T_true, q_scf)
        x0 = x_scf.values(instance.pair.interval.a)[0, : instance.pair.d, 0]
        result = dae.solve_equivalent(instance.scrambled, q, equivalence.inverse(T_true), instance.pair, x0)
        assert result.residual_norm <= 1e-6
        expected = chebmat.solve(T_true.K, x_scf)
        assert grid_error(result.x, expected) <= 1e-6


SCRAMBLE_SIGNATURES = [(2, 1), (2, 2, 1), (3, 2, 2, 1), (3, 3), (4, 2, 1)]


@pytest.mark.corpus
@pytest.mark.parametrize("seed", range(50))
def test_characteristics_survive_scrambling_corpus(seed):
    variant = Variant.COLUMNS if seed % 2 == 0 else Variant.ROWS
    ells = SCRAMBLE_SIGNATURES[seed % len(SCRAMBLE_SIGNATURES)]
    if variant is Variant.ROWS:
        ells = tuple(reversed(ells))
    spec = GenSpec(sig=BlockSignature(ells), variant=variant, entry_degree=1 + seed % 2, seed=seed, d=seed % 3)
    instance = genbench.generate_instance(spec, scramble_degree=1)
    d = instance.pair.d
    recovered = equivalence.apply(equivalence.inverse(instance.transform), instance.scrambled)
    N = recovered.E.block(slice(d, recovered.m), slice(d, recovered.m))
    Omega = recovered.F.block(slice(0, d), slice(0, d)) if d else None
    _, sscf = dae.canonicalize_pair(ScfPair(d, Omega, N, instance.pair.sig, variant))
    assert dae.characteristics(sscf) == instance.characteristics


@pytest.mark.corpus
@pytest.mark.parametrize("d", [0, 1, 3])
@pytest.mark.parametrize("ells", [(2, 1), (2, 2, 1)], ids=["mu2", "mu3"])
@pytest.mark.parametrize("variant", [Variant.COLUMNS, Variant.ROWS])
@pytest.mark.parametrize("seed", [0, 1])
def test_manufactured_problem_corpus(d, ells, variant, seed):
    if variant is Variant.ROWS:
        ells = tuple(reversed(ells))
    spec = GenSpec(sig=BlockSignature(ells), variant=variant, entry_degree=2, seed=100 + seed, d=d)
    problem = genbench.manufactured_problem(spec)
    result = dae.solve_problem(problem)
    assert result.residual_norm <= 1e-6
    assert grid_error(result.x, problem.x_exact) <= 1e-6
