"""Qubit state-preparation noise: incoherent channels and random coherent rotations."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .quantum import StateEnsemble, hermitian


class NoiseKind(str, Enum):
    NONE = "none"
    INCOHERENT_MIXTURE = "incoherent_mixture"
    COHERENT_ROTATION = "coherent_rotation"


@dataclass(frozen=True)
class NoiseSpec:
    """Which noise to apply, how strong, and (optionally) to which states.

    ``strength`` is the channel parameter ``p`` in [0, 1] for incoherent
    noise and the rotation magnitude ``epsilon`` in [0, 1) for coherent
    noise. An empty ``targets`` means every state.
    """

    kind: NoiseKind = NoiseKind.NONE
    strength: float = 0.0
    targets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        s = float(self.strength)
        if self.kind is NoiseKind.INCOHERENT_MIXTURE and not 0.0 <= s <= 1.0:
            raise ValueError(f"incoherent noise strength must lie in [0, 1], got {s}")
        if self.kind is NoiseKind.COHERENT_ROTATION and not 0.0 <= s < 1.0:
            raise ValueError(f"coherent noise magnitude must lie in [0, 1), got {s}")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "strength": self.strength, "targets": list(self.targets)}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(
            kind=data.get("kind", "none"),
            strength=data.get("strength", 0.0),
            targets=tuple(data.get("targets", ())),
        )


def _check_probability(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"channel parameter must lie in [0, 1], got {p}")


def _check_qubit(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"noise channels are defined for qubits, got shape {rho.shape}")
    return rho


def _kraus(rho, kraus_ops):
    return hermitian(sum(k @ rho @ k.conj().T for k in kraus_ops))


def depolarizing(rho, p: float) -> np.ndarray:
    """``(1 - p) rho + p I / 2``."""
    _check_probability(p)
    rho = _check_qubit(rho)
    return hermitian((1 - p) * rho + 0.5 * p * np.eye(2))


def amplitude_damping_kraus(p: float):
    return (
        np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
        np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex),
    )


def phase_damping_kraus(p: float):
    return (
        np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
        np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex),
    )


def amplitude_damping(rho, p: float) -> np.ndarray:
    _check_probability(p)
    return _kraus(_check_qubit(rho), amplitude_damping_kraus(p))


def phase_damping(rho, p: float) -> np.ndarray:
    """Phase damping; populations are kept and coherences scale by ``sqrt(1 - p)``."""
    _check_probability(p)
    return _kraus(_check_qubit(rho), phase_damping_kraus(p))


INCOHERENT_CHANNELS = (depolarizing, amplitude_damping, phase_damping)


def incoherent_mixture(
    ensemble: StateEnsemble, p: float, rng: np.random.Generator, return_choices: bool = False
):
    """Apply a uniformly chosen channel (depolarizing, amplitude or phase damping) to each state.

    The channel index is drawn independently for every state. With
    ``return_choices`` the drawn indices are returned as well.
    """
    _check_probability(p)
    choices = rng.integers(0, 3, size=len(ensemble))
    noisy = ensemble.with_states([INCOHERENT_CHANNELS[x](rho, p) for x, rho in zip(choices, ensemble)])
    return (noisy, choices) if return_choices else noisy


def rotation(phi: float, varphi: float, psi: float) -> np.ndarray:
    """Qubit rotation parametrized by three angles."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array(
        [
            [np.exp(1j * psi) * c, -np.exp(-1j * varphi) * s],
            [np.exp(1j * varphi) * s, np.exp(-1j * psi) * c],
        ]
    )


def random_unitary_near_identity(eps: float, rng: np.random.Generator) -> np.ndarray:
    """Haar-style random rotation with two of its angles shrunk by ``eps``.

    ``psi`` and ``varphi`` are uniform on [0, 2 pi], ``phi = arcsin(sqrt(zeta))``
    with ``zeta`` uniform on [0, 1]; ``psi`` and ``phi`` are then multiplied
    by ``eps`` while ``varphi`` is left unscaled.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"coherent noise magnitude must lie in [0, 1), got {eps}")
    psi = rng.uniform(0.0, 2 * np.pi)
    varphi = rng.uniform(0.0, 2 * np.pi)
    zeta = rng.uniform(0.0, 1.0)
    phi = np.arcsin(np.sqrt(zeta))
    return rotation(eps * phi, varphi, eps * psi)


def coherent_noise(ensemble: StateEnsemble, eps: float, rng: np.random.Generator) -> StateEnsemble:
    """Conjugate each state by its own independent near-identity rotation."""
    rotated = []
    for rho in ensemble:
        u = random_unitary_near_identity(eps, rng)
        rotated.append(hermitian(u @ rho @ u.conj().T))
    return ensemble.with_states(rotated)


def apply_noise(ensemble: StateEnsemble, spec: NoiseSpec, rng: np.random.Generator) -> StateEnsemble:
    """Apply ``spec`` to the whole ensemble, or only to ``spec.targets`` when given."""
    if spec.targets:
        return targeted_noise(ensemble, spec.targets, spec, rng)
    if spec.kind is NoiseKind.NONE:
        return ensemble
    if spec.kind is NoiseKind.INCOHERENT_MIXTURE:
        return incoherent_mixture(ensemble, spec.strength, rng)
    return coherent_noise(ensemble, spec.strength, rng)


def targeted_noise(
    ensemble: StateEnsemble, targets: Iterable[str], spec: NoiseSpec, rng: np.random.Generator
) -> StateEnsemble:
    """Apply the noise of ``spec`` only to the states whose labels are in ``targets``."""
    labels = ensemble.label_list()
    targets = list(targets)
    unknown = [t for t in targets if t not in labels]
    if unknown:
        raise KeyError(f"unknown state labels {unknown}; ensemble has {labels}")
    if not targets or spec.kind is NoiseKind.NONE:
        return ensemble
    idx = [labels.index(t) for t in targets]
    sub = StateEnsemble(ensemble.states[idx], labels=[labels[i] for i in idx])
    sub = apply_noise(sub, NoiseSpec(spec.kind, spec.strength), rng)
    states = ensemble.states.copy()
    states[idx] = sub.states
    return ensemble.with_states(states)


