import numpy as np
import pytest
from hypothesis import given, strategies as st

from sscf import chebmat, equivalence
from sscf.equivalence import DaePair, EquivalenceTransform
from sscf.exceptions import NearSingularError, SscfValidationError
from tests.conftest import grid_error


@pytest.fixture
def pair(interval):
    E = chebmat.from_polynomials([[[1], [0, 1]], [[0], [0]]], interval)
    F = chebmat.from_polynomials([[[2], [0]], [[1, 1], [1]]], interval)
    return DaePair(E, F)


@pytest.fixture
def transform(interval):
    L = chebmat.from_polynomials([[[2], [0, 1]], [[0], [1]]], interval)
    K = chebmat.from_polynomials([[[1], [0]], [[0, 0, 1], [3]]], interval)
    return EquivalenceTransform.create(L, K)


@pytest.fixture
def other_transform(interval):
    L = chebmat.from_polynomials([[[1], [0]], [[0, 1], [1]]], interval)
    K = chebmat.from_polynomials([[[2, 1], [1]], [[0], [1]]], interval)
    return EquivalenceTransform.create(L, K)


class TestApply:
    def test_identity_leaves_pair_unchanged(self, pair):
        p = equivalence.apply(EquivalenceTransform.identity(2), pair)
        assert grid_error(p.E, pair.E) <= 1e-12
        assert grid_error(p.F, pair.F) <= 1e-12

    def test_apply_verifies(self, pair, transform):
        p_tilde = equivalence.apply(transform, pair)
        report = equivalence.verify(transform, pair, p_tilde)
        assert report.passed
        assert report.residual_E <= 1e-10
        assert report.residual_F <= 1e-10

    def test_derivative_term_enters_f(self, pair, transform):
        p_tilde = equivalence.apply(transform, pair)
        without = chebmat.product(transform.L, pair.F, transform.K)
        assert grid_error(p_tilde.F, without) > 1e-3

    def test_verify_reports_mismatch_without_raising(self, pair, transform):
        p_tilde = equivalence.apply(transform, pair)
        broken = DaePair(p_tilde.E, chebmat.add(p_tilde.F, chebmat.constant(np.eye(2))))
        report = equivalence.verify(transform, pair, broken)
        assert not report.passed
        assert report.residual_F == pytest.approx(1.0, abs=1e-8)
        assert report.residual_E <= 1e-10

    def test_size_mismatch_raises(self, pair):
        with pytest.raises(SscfValidationError):
            equivalence.apply(EquivalenceTransform.identity(3), pair)

    def test_rhs_map(self, transform, interval):
        q = chebmat.from_polynomials([[[1, 1]], [[0, 2]]], interval)
        q_tilde = equivalence.transform_rhs(transform, q)
        assert grid_error(q_tilde, chebmat.mul(transform.L, q)) <= 1e-12


class TestComposition:
    def test_compose_matches_sequential_application(self, pair, transform, other_transform):
        sequential = equivalence.apply(other_transform, equivalence.apply(transform, pair))
        T = equivalence.compose(transform, other_transform)
        assert grid_error(T.K, chebmat.mul(transform.K, other_transform.K)) <= 1e-12
        report = equivalence.verify(T, pair, sequential)
        assert report.passed

    def test_compose_all(self, pair, transform, other_transform):
        T = equivalence.compose_all(transform, other_transform, EquivalenceTransform.identity(2))
        assert equivalence.verify(T, pair, equivalence.apply(T, pair)).passed

    def test_inverse_maps_back(self, pair, transform):
        p_tilde = equivalence.apply(transform, pair)
        back = equivalence.apply(equivalence.inverse(transform), p_tilde)
        assert grid_error(back.E, pair.E) <= 1e-9
        assert grid_error(back.F, pair.F) <= 1e-9

    def test_double_inverse_is_identity(self, transform):
        twice = equivalence.inverse(equivalence.inverse(transform))
        assert grid_error(twice.L, transform.L) <= 1e-9
        assert grid_error(twice.K, transform.K) <= 1e-9

    def test_lift(self, transform):
        lifted = equivalence.lift(transform, 2)
        assert lifted.m == 4
        np.testing.assert_array_equal(lifted.K(0.3)[:2, :2], np.eye(2))
        np.testing.assert_allclose(lifted.K(0.3)[2:, 2:], transform.K(0.3))
        assert equivalence.lift(transform, 0) is transform

    def test_permutation_transform(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        T = EquivalenceTransform.permutation(P)
        np.testing.assert_array_equal(T.L.constant_value() @ T.K.constant_value(), np.eye(2))


class TestCertificates:
    def test_singular_factor_is_rejected(self, interval):
        K = chebmat.from_polynomials([[[0, 1], [0]], [[0], [1]]], interval)
        with pytest.raises(NearSingularError) as exc:
            EquivalenceTransform.create(chebmat.identity(2, interval), K)
        assert "worst_t" in exc.value.details

    def test_certificates_are_recorded(self, transform):
        assert transform.certificate_L > 0.5
        assert transform.certificate_K > 0.5

    def test_serialization_recomputes_certificates(self, transform):
        again = EquivalenceTransform.from_dict(transform.to_dict())
        assert again.certificate_K == pytest.approx(transform.certificate_K)
        with pytest.raises(SscfValidationError):
            EquivalenceTransform.from_dict({"L": transform.L.to_dict()})


class TestConstructions:
    def test_lemma_inner_gives_identity_f(self, pair):
        # G = F K + E K' = [[2 + t, 0], [1 + 2t, 1]]
        K = chebmat.from_polynomials([[[1], [0]], [[0, 1], [1]]])
        T, E_hat = equivalence.lemma_inner(pair, K)
        result = equivalence.apply(T, pair)
        assert grid_error(result.E, E_hat) <= 1e-9
        assert grid_error(result.F, chebmat.identity(2)) <= 1e-9

    def test_triangular_step_on_worked_example(self, worked_n):
        K = chebmat.from_polynomials([[[2, 1], [0]], [[0], [1]]])
        step = equivalence.triangular_step(worked_n, K)
        assert step.triangular
        assert grid_error(step.H, chebmat.identity(2)) <= 1e-12
        assert grid_error(step.E_hat, chebmat.constant([[0.0, 1.0], [0.0, 0.0]])) <= 1e-10
        result = equivalence.apply(step.transform, DaePair(worked_n, chebmat.identity(2)))
        assert grid_error(result.F, chebmat.identity(2)) <= 1e-9

    def test_triangular_step_with_nontrivial_h(self, worked_n):
        K = chebmat.from_polynomials([[[1], [0]], [[0], [2, 1]]])
        step = equivalence.triangular_step(worked_n, K)
        assert step.triangular
        # H = I + K^-1 N K' = [[1, 2 + t], [0, 1]]
        np.testing.assert_allclose(step.H(0.4), [[1.0, 2.4], [0.0, 1.0]], atol=1e-12)
        np.testing.assert_allclose(step.E_hat(0.4), [[0.0, 2.4 ** 2], [0.0, 0.0]], atol=1e-9)

    def test_shape_mismatch(self, worked_n):
        with pytest.raises(SscfValidationError):
            equivalence.triangular_step(worked_n, chebmat.identity(3))

    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
    def test_lemma_triangular_on_strictly_triangular_data(self, seed, m):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(-1, 1, (2, m, m)), rng.uniform(-1, 1, (2, m, m))
        E = chebmat.fit(lambda t: np.triu(a[0] + t * a[1], 1))
        K = chebmat.fit(lambda t: np.eye(m) + np.triu(b[0] + t * b[1], 1))
        T, E_hat = equivalence.lemma_triangular(E, K)
        result = equivalence.apply(T, DaePair(E, chebmat.identity(m)))
        assert grid_error(result.E, E_hat) <= 1e-9
        assert grid_error(result.F, chebmat.identity(m)) <= 1e-9
