import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmtsdp.errors import DimensionMismatchError, NotInformationallyCompleteError
from qmtsdp.quantum import (
    IDENTITY,
    PAULI_LABELS,
    Povm,
    StateEnsemble,
    born_probabilities,
    hermitian,
    hermitian_basis,
    is_density_matrix,
    ket_to_dm,
    mean_effect_trace_distance,
    operator_rank,
    pauli_eigenstate_ensemble,
    random_density_matrix,
    random_ic_ensemble,
    random_povm,
    real_coordinates,
    sic_povm,
    trace_distance,
)

KET0 = ket_to_dm([1, 0])
KET1 = ket_to_dm([0, 1])


def test_hermitian_symmetrizes():
    a = np.array([[1, 2 + 1j], [0, 3]])
    h = hermitian(a)
    assert np.allclose(h, h.conj().T, atol=1e-12)
    assert np.allclose(h[0, 1], (2 + 1j) / 2)


def test_hermitian_basis_is_orthonormal():
    for d in (2, 3, 4):
        basis = hermitian_basis(d)
        gram = np.einsum("aij,bji->ab", basis, basis)
        assert basis.shape == (d * d, d, d)
        assert np.allclose(gram, np.eye(d * d), atol=1e-12)
        assert np.allclose(basis[0], np.eye(d) / np.sqrt(d))


class TestBorn:
    def test_maximally_mixed_on_sic_is_uniform(self):
        p = born_probabilities(StateEnsemble([IDENTITY / 2]), sic_povm())
        assert np.allclose(p, 0.25, atol=1e-12)

    def test_projective_measurement(self):
        p = born_probabilities(StateEnsemble([KET0]), Povm([KET0, KET1]))
        assert np.allclose(p, [[1, 0]])

    def test_plus_x_on_sic(self):
        # hand computation with n_k . (1, 0, 0) for the four tetrahedral vectors
        r2 = np.sqrt(2)
        expected = [0.25, 0.25 + r2 / 6, 0.25 - r2 / 12, 0.25 - r2 / 12]
        plus_x = ket_to_dm(np.array([1, 1]) / np.sqrt(2))
        p = born_probabilities(StateEnsemble([plus_x]), sic_povm())
        assert np.allclose(p[0], expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            born_probabilities(StateEnsemble([np.eye(3) / 3]), sic_povm())

    def test_rows_sum_to_one(self, rng):
        for d in (2, 3):
            states = random_ic_ensemble(d, d * d + 1, rng)
            p = born_probabilities(states, random_povm(d, 5, rng))
            assert np.allclose(p.sum(axis=1), 1, atol=1e-9)
            assert p.min() >= 0 and p.max() <= 1


class TestSic:
    def test_first_effect(self):
        assert np.allclose(sic_povm().effects[0], [[0.5, 0], [0, 0]], atol=1e-15)

    def test_completeness_and_traces(self):
        effects = sic_povm().effects
        assert np.allclose(effects.sum(axis=0), np.eye(2), atol=1e-15)
        assert np.allclose(np.trace(effects, axis1=1, axis2=2), 0.5)

    def test_pairwise_overlaps(self):
        effects = sic_povm().effects
        for k in range(4):
            for l in range(4):
                if k != l:
                    assert np.trace(effects[k] @ effects[l]).real == pytest.approx(1 / 12, abs=1e-14)

    def test_is_informationally_complete(self):
        assert sic_povm().is_informationally_complete


class TestPauliEnsemble:
    def test_states_and_labels(self):
        ens = pauli_eigenstate_ensemble()
        assert ens.label_list() == list(PAULI_LABELS)
        lab = dict(zip(ens.label_list(), ens.states))
        assert np.allclose(lab["+z"], [[1, 0], [0, 0]])
        assert np.allclose(lab["+x"], [[0.5, 0.5], [0.5, 0.5]])

    def test_gram_rank(self):
        coords = real_coordinates(pauli_eigenstate_ensemble().states)
        assert coords.shape == (6, 4)
        assert np.linalg.matrix_rank(coords, tol=1e-8) == 4


class TestTypes:
    def test_povm_rejects_incomplete(self):
        with pytest.raises(ValueError):
            Povm([KET0, KET0])

    def test_povm_rejects_negative_effect(self):
        with pytest.raises(ValueError):
            Povm([np.diag([1.2, 0.5]), np.diag([-0.2, 0.5])])

    def test_ensemble_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            StateEnsemble([np.eye(2)])

    def test_ensemble_rejects_mixed_dims(self):
        with pytest.raises(DimensionMismatchError):
            StateEnsemble([KET0, np.eye(3) / 3])

    def test_require_ic(self):
        with pytest.raises(NotInformationallyCompleteError):
            StateEnsemble([KET0, KET1, IDENTITY / 2, KET0], require_ic=True)

    def test_label_count(self):
        with pytest.raises(ValueError):
            StateEnsemble([KET0, KET1], labels=["a"])


class TestRandom:
    def test_density_matrix_snapshot(self):
        rho = random_density_matrix(2, np.random.default_rng(2024))
        expected = np.array(
            [
                [0.6358842115885577, -0.17669380295305323 - 0.37767906212648145j],
                [-0.17669380295305323 + 0.37767906212648145j, 0.36411578841144243],
            ]
        )
        assert np.allclose(rho, expected, atol=1e-14)

    def test_mean_purity(self):
        # Monte-Carlo oracle: 1e5 Ginibre draws give 0.8006 +- 0.0004 for d = 2
        rng = np.random.default_rng(7)
        purity = [np.trace(r @ r).real for r in (random_density_matrix(2, rng) for _ in range(10_000))]
        assert np.mean(purity) == pytest.approx(0.80, abs=0.01)

    def test_samples_are_density_matrices(self):
        rng = np.random.default_rng(3)
        for d in (2, 3, 4):
            for _ in range(1000 if d == 2 else 200):
                assert is_density_matrix(random_density_matrix(d, rng))

    def test_ic_ensembles(self, rng):
        assert operator_rank(random_ic_ensemble(2, 4, rng).states) == 4
        ens = random_ic_ensemble(3, 9, rng)
        sv = np.linalg.svd(real_coordinates(ens.states), compute_uv=False)
        assert sv[-1] / sv[0] > 1e-8

    def test_ic_ensemble_too_small(self, rng):
        with pytest.raises(ValueError):
            random_ic_ensemble(2, 3, rng)

    def test_random_povm(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            povm = random_povm(2, 4, rng)
            assert np.allclose(povm.effects.sum(axis=0), np.eye(2), atol=1e-10)
            assert min(np.linalg.eigvalsh(e).min() for e in povm.effects) >= -1e-9

    def test_random_povm_snapshot(self):
        effect = random_povm(2, 4, np.random.default_rng(2024)).effects[0]
        expected = np.array(
            [
                [0.29867510549208304, 0.0832780944726483 + 0.11366254564679348j],
                [0.0832780944726483 - 0.11366254564679348j, 0.5622727666604171],
            ]
        )
        assert np.allclose(effect, expected, atol=1e-14)

    def test_single_outcome_rejected(self, rng):
        with pytest.raises(ValueError):
            random_povm(2, 1, rng)


class TestTraceDistance:
    def test_orthogonal(self):
        assert trace_distance(KET0, KET1) == pytest.approx(1.0)

    def test_self(self):
        assert trace_distance(KET0, KET0) == 0.0

    def test_mixed_vs_pure(self):
        assert trace_distance(IDENTITY / 2, KET0) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            trace_distance(KET0, np.eye(3) / 3)

    def test_mean_effect_distance_zero(self):
        assert mean_effect_trace_distance(sic_povm(), sic_povm()) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([2, 3]))
def test_trace_distance_triangle_and_symmetry(seed, d):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density_matrix(d, rng) for _ in range(3))
    assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-12)
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-10
