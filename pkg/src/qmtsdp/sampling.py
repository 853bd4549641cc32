"""Finite-shot simulation of tomography experiments."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .quantum import Povm, StateEnsemble, _check_dims, born_matrix


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Outcome frequencies ``f_jk`` of ``N`` input states on an ``m``-outcome measurement.

    ``counts`` is ``None`` for the infinite-shot idealization returned by
    :func:`exact_frequencies`; in that case ``shots_per_state`` is 0.
    """

    frequencies: np.ndarray
    counts: Optional[np.ndarray] = None
    shots_per_state: int = 0

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float)
        if f.ndim != 2:
            raise ValueError(f"frequencies must be an N x m matrix, got shape {f.shape}")
        if (f < 0).any() or np.abs(f.sum(axis=1) - 1).max(initial=0.0) > 1e-9:
            raise ValueError("frequencies must be nonnegative with rows summing to 1")
        if self.counts is not None:
            c = np.array(self.counts, dtype=np.int64)
            if c.shape != f.shape:
                raise ValueError("counts and frequencies shapes differ")
            if (c < 0).any():
                raise ValueError("counts must be nonnegative")
            if (c.sum(axis=1) != self.shots_per_state).any():
                raise ValueError("every row of counts must sum to shots_per_state")
            c.setflags(write=False)
            object.__setattr__(self, "counts", c)
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    @property
    def num_states(self) -> int:
        return self.frequencies.shape[0]

    @property
    def num_outcomes(self) -> int:
        return self.frequencies.shape[1]

    @property
    def total_shots(self) -> int:
        return self.shots_per_state * self.num_states

    @classmethod
    def from_counts(cls, counts) -> "FrequencyTable":
        counts = np.asarray(counts, dtype=np.int64)
        shots = counts.sum(axis=1)
        if shots.size == 0 or (shots != shots[0]).any() or shots[0] <= 0:
            raise ValueError("all states must have the same positive number of shots")
        return cls(counts / shots[0], counts=counts, shots_per_state=int(shots[0]))


def _normalized_rows(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum(axis=1, keepdims=True)


def sample_frequencies(
    states: StateEnsemble, povm: Povm, total_shots: int, rng: np.random.Generator
) -> FrequencyTable:
    """Simulate ``total_shots`` measurements split evenly over the input states.

    Each row is one multinomial draw with ``total_shots / N`` trials over the
    Born probabilities of that state.
    """
    _check_dims(states, povm)
    n = len(states)
    if total_shots <= 0 or total_shots % n:
        raise ValueError(f"total_shots={total_shots} is not a positive multiple of N={n}")
    per_state = total_shots // n
    p = _normalized_rows(born_matrix(states.states, povm.effects))
    counts = np.array([rng.multinomial(per_state, row) for row in p])
    return FrequencyTable(counts / per_state, counts=counts, shots_per_state=per_state)


def exact_frequencies(states: StateEnsemble, povm: Povm) -> FrequencyTable:
    """Infinite-shot frequency table equal to the Born probabilities."""
    _check_dims(states, povm)
    return FrequencyTable(_normalized_rows(born_matrix(states.states, povm.effects)))
