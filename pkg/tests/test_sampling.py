import math

import numpy as np
import pytest

from qmtsdp.errors import DimensionMismatchError
from qmtsdp.quantum import IDENTITY, Povm, StateEnsemble, born_probabilities, ket_to_dm, pauli_eigenstate_ensemble, random_ic_ensemble, sic_povm
from qmtsdp.sampling import FrequencyTable, exact_frequencies, sample_frequencies

KET0 = ket_to_dm([1, 0])
KET1 = ket_to_dm([0, 1])


def test_deterministic_distribution(rng):
    table = sample_frequencies(StateEnsemble([KET0]), Povm([KET0, KET1]), 777, rng)
    assert table.frequencies.tolist() == [[1.0, 0.0]]
    assert table.counts.tolist() == [[777, 0]]


def test_bookkeeping(rng):
    ens = pauli_eigenstate_ensemble()
    table = sample_frequencies(ens, sic_povm(), 600, rng)
    assert table.shots_per_state == 100
    assert table.total_shots == 600
    assert (table.counts.sum(axis=1) == 100).all()
    assert np.array_equal(table.frequencies, table.counts / 100)
    assert np.array_equal(table.frequencies.sum(axis=1), np.ones(6))


def test_indivisible_total_rejected(rng):
    with pytest.raises(ValueError):
        sample_frequencies(pauli_eigenstate_ensemble(), sic_povm(), 1000, rng)


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatchError):
        sample_frequencies(StateEnsemble([np.eye(3) / 3]), sic_povm(), 10, rng)


def test_fixed_seed_snapshot():
    table = sample_frequencies(pauli_eigenstate_ensemble(), sic_povm(), 600, np.random.default_rng(9))
    expected = [
        [30, 48, 12, 10],
        [28, 2, 42, 28],
        [31, 16, 49, 4],
        [25, 19, 1, 55],
        [52, 18, 13, 17],
        [0, 42, 30, 28],
    ]
    assert table.counts.tolist() == expected


def test_large_shot_count_is_close():
    # Hoeffding: P(|f - p| > t) <= 2 exp(-2 n t^2) per entry; union bound over 16 entries
    n_states, total, t = 4, 10**7, 5e-3
    n = total // n_states
    assert 16 * 2 * math.exp(-2 * n * t**2) < 0.01
    rng = np.random.default_rng(17)
    states = random_ic_ensemble(2, n_states, rng)
    table = sample_frequencies(states, sic_povm(), total, rng)
    assert np.abs(table.frequencies - born_probabilities(states, sic_povm())).max() < t


def test_std_scales_with_inverse_sqrt_shots():
    rng = np.random.default_rng(21)
    ens = pauli_eigenstate_ensemble()
    stds = []
    for shots in (100, 10_000):
        draws = np.array([sample_frequencies(ens, sic_povm(), 6 * shots, rng).frequencies for _ in range(400)])
        stds.append(draws.std(axis=0).mean())
    ratio = stds[0] / stds[1]
    assert 10 / 2 <= ratio <= 10 * 2


def test_exact_frequencies():
    table = exact_frequencies(StateEnsemble([IDENTITY / 2]), sic_povm())
    assert table.counts is None
    assert np.allclose(table.frequencies, 0.25)
    ens = pauli_eigenstate_ensemble()
    assert np.allclose(exact_frequencies(ens, sic_povm()).frequencies.sum(axis=1), 1)


def test_sampled_converges_to_exact():
    rng = np.random.default_rng(4)
    ens = pauli_eigenstate_ensemble()
    exact = exact_frequencies(ens, sic_povm()).frequencies
    errs = [np.abs(sample_frequencies(ens, sic_povm(), 6 * n, rng).frequencies - exact).max() for n in (10**2, 10**4, 10**6)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


def test_table_validation():
    with pytest.raises(ValueError):
        FrequencyTable(np.array([[0.5, 0.4]]))
    with pytest.raises(ValueError):
        FrequencyTable(np.array([[0.5, 0.5]]), counts=np.array([[5, 4]]), shots_per_state=10)
    table = FrequencyTable.from_counts([[3, 1], [2, 2]])
    assert table.shots_per_state == 4
    assert np.allclose(table.frequencies, [[0.75, 0.25], [0.5, 0.5]])
