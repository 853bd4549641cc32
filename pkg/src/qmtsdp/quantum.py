"""Dense Hermitian linear algebra, state and POVM containers, standard constructions.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``. Collections
of operators (the effects of a POVM, the states of an ensemble) are stacked
into arrays of shape ``(n, d, d)`` and wrapped in small immutable containers
that validate their physical constraints on construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, NotInformationallyCompleteError

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])

# tetrahedral Bloch vectors of the qubit SIC-POVM
SIC_BLOCH_VECTORS = np.array(
    [
        [0.0, 0.0, 1.0],
        [2 * np.sqrt(2) / 3, 0.0, -1 / 3],
        [-np.sqrt(2) / 3, np.sqrt(2 / 3), -1 / 3],
        [-np.sqrt(2) / 3, -np.sqrt(2 / 3), -1 / 3],
    ]
)

STATE_TOL = 1e-9
COMPLETENESS_TOL = 1e-8
IC_RTOL = 1e-8


def hermitian(a) -> np.ndarray:
    """Return the Hermitian part ``(A + A^dagger) / 2`` of a square matrix (or stack)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    return 0.5 * (a + np.swapaxes(a, -1, -2).conj())


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.asarray(a), -1, -2).conj()


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of the d x d operators.

    The first element is ``I / sqrt(d)``, followed by the generalized
    Gell-Mann matrices (symmetric, antisymmetric, diagonal), each normalized
    so that ``Tr(B_a B_b) = delta_ab``.

    Returns
    -------
    ndarray of shape (d**2, d, d)
    """
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for i in range(d):
        for j in range(i + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[i, j] = s[j, i] = 1 / np.sqrt(2)
            basis.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[i, j] = -1j / np.sqrt(2)
            a[j, i] = 1j / np.sqrt(2)
            basis.append(a)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return np.array(basis)


def real_coordinates(ops) -> np.ndarray:
    """Coordinates ``Tr(B_a A)`` of Hermitian operators in :func:`hermitian_basis`.

    Accepts a single ``(d, d)`` operator or a stack ``(n, d, d)``; returns
    ``(d**2,)`` or ``(n, d**2)`` real arrays respectively.
    """
    ops = np.asarray(ops, dtype=complex)
    basis = hermitian_basis(ops.shape[-1])
    return np.einsum("aij,...ji->...a", basis, ops).real


def from_real_coordinates(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    d = int(round(np.sqrt(coords.shape[-1])))
    return np.einsum("...a,aij->...ij", coords, hermitian_basis(d))


def operator_rank(ops, rtol: float = IC_RTOL) -> int:
    """Rank of a family of Hermitian operators viewed as real d**2-vectors."""
    sv = np.linalg.svd(real_coordinates(ops), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def is_informationally_complete(ops, rtol: float = IC_RTOL) -> bool:
    ops = np.asarray(ops)
    return operator_rank(ops, rtol) == ops.shape[-1] ** 2


def is_density_matrix(rho, tol: float = STATE_TOL) -> bool:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if np.max(np.abs(rho - dagger(rho)), initial=0.0) > 1e-12 * max(1.0, np.abs(rho).max()):
        return False
    return abs(np.trace(rho).real - 1) <= tol and np.linalg.eigvalsh(rho).min() >= -tol


def check_density_matrix(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Hermitize ``rho`` and raise ``ValueError`` unless it is a valid state."""
    rho = hermitian(rho)
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise ValueError(f"density matrix has trace {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(rho).min()
    if lmin < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {lmin:.3e}")
    return rho


def inv_sqrtm(a: np.ndarray) -> np.ndarray:
    """Inverse square root of a positive definite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitian(a))
    if w.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


def _stack(ops, what: str) -> np.ndarray:
    shapes = {np.shape(a) for a in ops} if isinstance(ops, (list, tuple)) else set()
    if len(shapes) > 1:
        raise DimensionMismatchError(f"{what} have different shapes {sorted(shapes)}")
    return hermitian(ops)


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered collection of ``m`` effects ``Pi_k >= 0`` with ``sum_k Pi_k = I``.

    Parameters
    ----------
    effects : array_like, shape (m, d, d)
        The effects. They are Hermitized on construction.
    tol : float
        Eigenvalue tolerance for positivity. Completeness is checked
        entrywise to ``COMPLETENESS_TOL``.
    """

    effects: np.ndarray
    tol: float = STATE_TOL

    def __post_init__(self):
        effects = _stack(self.effects, "effects")
        if effects.ndim != 3:
            raise ValueError(f"effects must have shape (m, d, d), got {effects.shape}")
        if effects.shape[0] < 1:
            raise ValueError("a POVM needs at least one effect")
        lmin = np.linalg.eigvalsh(effects).min()
        if lmin < -self.tol:
            raise ValueError(f"effect with negative eigenvalue {lmin:.3e}")
        dev = np.abs(effects.sum(axis=0) - np.eye(effects.shape[1])).max()
        if dev > COMPLETENESS_TOL:
            raise ValueError(f"effects do not sum to identity (max deviation {dev:.3e})")
        effects.setflags(write=False)
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def num_outcomes(self) -> int:
        return self.effects.shape[0]

    def __len__(self):
        return self.num_outcomes

    def __getitem__(self, k):
        return self.effects[k]

    def __iter__(self):
        return iter(self.effects)

    def is_informationally_complete(self) -> bool:
        return is_informationally_complete(self.effects)


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    """Ordered collection of ``N`` density matrices sharing a dimension.

    Parameters
    ----------
    states : array_like, shape (N, d, d)
    labels : sequence of str, optional
        One label per state, e.g. ``"+x"``.
    require_ic : bool
        If set, raise :class:`NotInformationallyCompleteError` unless the
        states span the d**2-dimensional operator space.
    """

    states: np.ndarray
    labels: Optional[tuple] = None
    require_ic: bool = False

    def __post_init__(self):
        states = _stack(self.states, "states")
        if states.ndim != 3:
            raise ValueError(f"states must have shape (N, d, d), got {states.shape}")
        for j, rho in enumerate(states):
            try:
                check_density_matrix(rho)
            except ValueError as exc:
                raise ValueError(f"state {j}: {exc}") from None
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(states):
                raise ValueError(f"{len(labels)} labels for {len(states)} states")
            if len(set(labels)) != len(labels):
                raise ValueError("state labels must be unique")
            object.__setattr__(self, "labels", labels)
        if self.require_ic and not self.is_informationally_complete():
            raise NotInformationallyCompleteError(
                f"{len(states)} states of dimension {states.shape[1]} have operator rank "
                f"{operator_rank(states)} < {states.shape[1] ** 2}"
            )

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, j):
        return self.states[j]

    def __iter__(self):
        return iter(self.states)

    def label_list(self) -> list:
        return list(self.labels) if self.labels is not None else [str(j) for j in range(len(self))]

    def is_informationally_complete(self) -> bool:
        return is_informationally_complete(self.states)

    def with_states(self, states) -> "StateEnsemble":
        """Same labels, new states (e.g. after applying noise)."""
        return StateEnsemble(np.asarray(states), labels=self.labels)


def _check_dims(states: StateEnsemble, povm: Povm):
    if states.dim != povm.dim:
        raise DimensionMismatchError(f"states have d={states.dim}, POVM has d={povm.dim}")


def born_matrix(states, effects) -> np.ndarray:
    """Raw ``Tr(rho_j Pi_k)`` for stacked arrays, without clamping."""
    return np.einsum("jab,kba->jk", states, effects).real


def born_probabilities(states: StateEnsemble, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``p_jk = Tr(rho_j Pi_k)``.

    Returns
    -------
    ndarray of shape (N, m)
        Real probabilities clamped to ``[0, 1]``.
    """
    _check_dims(states, povm)
    p = born_matrix(states.states, povm.effects)
    return np.clip(p, 0.0, 1.0)


def sic_povm() -> Povm:
    """The qubit SIC-POVM ``Pi_k = I/4 + n_k . sigma / 4``."""
    effects = IDENTITY / 4 + np.einsum("ka,aij->kij", SIC_BLOCH_VECTORS, PAULIS) / 4
    return Povm(effects)


PAULI_LABELS = ("+x", "-x", "+y", "-y", "+z", "-z")


def pauli_eigenstate_ensemble() -> StateEnsemble:
    """Projectors onto the six eigenstates of the Pauli matrices."""
    s = 1 / np.sqrt(2)
    kets = [[s, s], [s, -s], [s, 1j * s], [s, -1j * s], [1, 0], [0, 1]]
    return StateEnsemble(np.array([ket_to_dm(k) for k in kets]), labels=PAULI_LABELS, require_ic=True)


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_density_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt random state ``G G^dagger / Tr(G G^dagger)`` from a Ginibre matrix."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    g = _ginibre(rng, (d, d))
    rho = g @ g.conj().T
    return hermitian(rho / np.trace(rho).real)


def random_ic_ensemble(d: int, n: int, rng: np.random.Generator, max_attempts: int = 100) -> StateEnsemble:
    """Draw ``n >= d**2`` random states, resampling the whole set until it is IC."""
    if n < d * d:
        raise ValueError(f"an IC ensemble in d={d} needs at least {d * d} states, got {n}")
    for _ in range(max_attempts):
        states = np.array([random_density_matrix(d, rng) for _ in range(n)])
        if is_informationally_complete(states):
            return StateEnsemble(states, require_ic=True)
    raise NotInformationallyCompleteError(f"no IC ensemble after {max_attempts} attempts")


def random_povm(d: int, m: int, rng: np.random.Generator, max_attempts: int = 100) -> Povm:
    """Random POVM ``Pi_k = S^{-1/2} A_k S^{-1/2}`` with ``A_k = G_k G_k^dagger``, ``S = sum_k A_k``."""
    if m < 2:
        raise ValueError(f"a random POVM needs m >= 2 outcomes, got {m}")
    for _ in range(max_attempts):
        g = _ginibre(rng, (m, d, d))
        a = g @ dagger(g)
        try:
            s_inv = inv_sqrtm(a.sum(axis=0))
        except np.linalg.LinAlgError:
            continue
        return Povm(s_inv @ a @ s_inv)
    raise np.linalg.LinAlgError(f"singular frame operator in {max_attempts} attempts")


def trace_distance(a, b) -> float:
    """``1/2 sum_i |lambda_i(A - B)|`` for Hermitian ``A``, ``B``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    return 0.5 * float(np.abs(np.linalg.eigvalsh(hermitian(a - b))).sum())


def mean_effect_trace_distance(povm_a, povm_b) -> float:
    """Trace distance averaged over corresponding effects of two POVMs."""
    ea = povm_a.effects if isinstance(povm_a, Povm) else np.asarray(povm_a)
    eb = povm_b.effects if isinstance(povm_b, Povm) else np.asarray(povm_b)
    if ea.shape != eb.shape:
        raise DimensionMismatchError(f"shapes {ea.shape} and {eb.shape} differ")
    return float(np.mean([trace_distance(x, y) for x, y in zip(ea, eb)]))


def project_to_povm(effects) -> np.ndarray:
    """Nearby valid POVM: clip negative eigenvalues, then restore completeness.

    Intended for cleaning solver round-off (deviations ~1e-9), not as a
    general projection.
    """
    effects = hermitian(effects)
    w, v = np.linalg.eigh(effects)
    effects = np.einsum("kij,kj,klj->kil", v, np.clip(w, 0, None), v.conj())
    s_inv = inv_sqrtm(effects.sum(axis=0))
    return hermitian(s_inv @ effects @ s_inv)


def project_to_states(states) -> np.ndarray:
    """Clip negative eigenvalues and renormalize traces (solver round-off cleanup)."""
    states = hermitian(states)
    w, v = np.linalg.eigh(states)
    w = np.clip(w, 0, None)
    w = w / w.sum(axis=-1, keepdims=True)
    return hermitian(np.einsum("kij,kj,klj->kil", v, w, v.conj()))
