"""Fitting POVMs (and states) to frequency tables.

All estimators take the frequency table and the assumed input states and
return a :class:`FitReport`. The norm-minimizing fits are semidefinite
programs:

* :func:`fit_single_delta` minimizes the largest absolute deviation
  ``max_jk |f_jk - Tr(rho_j Pi_k)|`` (one shared slack ``delta``);
* :func:`fit_many_deltas` minimizes the sum of absolute deviations
  (one slack ``delta_jk`` per table entry);
* :func:`fit_states_qst` is the state-side counterpart of the single-delta
  fit, used by the see-saw.

:func:`fit_least_squares` and :func:`fit_log_mle` are the usual baselines.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from .conic import OperatorProgram, SolveOptions, SolveResult, SolveStatus, solve
from .errors import NotInformationallyCompleteError, SolverError
from .quantum import (
    Povm,
    StateEnsemble,
    born_matrix,
    from_real_coordinates,
    hermitian,
    hermitian_basis,
    is_informationally_complete,
    operator_rank,
    project_to_povm,
    project_to_states,
    real_coordinates,
)
from .sampling import FrequencyTable

FrequencyLike = Union[FrequencyTable, np.ndarray]


@dataclass
class FitReport:
    """Result of one estimator call.

    Only the fields relevant to the method are set: ``delta_star`` for the
    single-delta and state fits, ``delta_matrix`` / ``per_state_delta`` for
    the many-deltas fit, ``objective`` for least squares and log-MLE.
    ``residual_table`` is always ``f_jk - Tr(rho_j Pi_k)`` recomputed from
    the returned operators.
    """

    method: str
    povm: Optional[Povm] = None
    states: Optional[StateEnsemble] = None
    delta_star: Optional[float] = None
    delta_matrix: Optional[np.ndarray] = None
    per_state_delta: Optional[np.ndarray] = None
    objective: Optional[float] = None
    status: str = SolveStatus.OPTIMAL.value
    residual_table: Optional[np.ndarray] = None
    solve_time: float = 0.0
    stats: Dict[str, object] = field(default_factory=dict)


def _frequencies(freqs: FrequencyLike) -> np.ndarray:
    f = freqs.frequencies if isinstance(freqs, FrequencyTable) else np.asarray(freqs, dtype=float)
    if f.ndim != 2:
        raise ValueError(f"frequencies must be an N x m matrix, got shape {f.shape}")
    return f


def _states_array(states) -> np.ndarray:
    return states.states if isinstance(states, StateEnsemble) else hermitian(states)


def _require_ic_states(states: np.ndarray, n_rows: int, require_ic: bool = True):
    if states.shape[0] != n_rows:
        raise ValueError(f"{states.shape[0]} states but frequency table has {n_rows} rows")
    if require_ic and not is_informationally_complete(states):
        raise NotInformationallyCompleteError(
            f"assumed states have operator rank {operator_rank(states)} < {states.shape[1] ** 2}"
        )


def _raise_on_failure(result: SolveResult, method: str):
    if not result.status.ok:
        raise SolverError(f"{method}: solver returned {result.status.value}", status=result.status)


def _povm_program(states: np.ndarray, m: int) -> OperatorProgram:
    """Program with effect variables ``Pi_0..Pi_{m-1}`` and completeness constraints.

    ``sum_k Pi_k = I`` is imposed as ``d**2`` real equalities
    ``sum_k Tr(B_a Pi_k) = Tr(B_a)`` over an orthonormal Hermitian basis.
    """
    d = states.shape[1]
    prog = OperatorProgram()
    names = [prog.add_psd(f"Pi{k}", d) for k in range(m)]
    for b in hermitian_basis(d):
        prog.add_constraint(ops={n: b for n in names}, sense="==", rhs=np.trace(b).real)
    return prog


def _extract_povm(result: SolveResult, m: int) -> Povm:
    return Povm(project_to_povm(np.array([result[f"Pi{k}"] for k in range(m)])))


def _bracket(prog, ops, slack, f):
    # f - delta <= Tr(.) <= f + delta
    prog.add_constraint(ops=ops, scalars={slack: -1.0}, sense="<=", rhs=f)
    prog.add_constraint(ops=ops, scalars={slack: 1.0}, sense=">=", rhs=f)


def linear_inversion(freqs: FrequencyLike, states) -> np.ndarray:
    """Least-squares solution of ``Tr(rho_j Pi_k) = f_jk`` without positivity.

    Returns
    -------
    ndarray of shape (m, d, d)
        Hermitian operators; they may have negative eigenvalues.
    """
    f = _frequencies(freqs)
    rho = _states_array(states)
    _require_ic_states(rho, f.shape[0])
    coords, *_ = np.linalg.lstsq(real_coordinates(rho), f, rcond=None)
    return hermitian(from_real_coordinates(coords.T))


def fit_single_delta(
    freqs: FrequencyLike, states, options: Optional[SolveOptions] = None, *, require_ic: bool = True
) -> FitReport:
    """Smallest uniform perturbation ``delta`` of the frequencies admitting a POVM.

    Solves ``min delta`` subject to ``|f_jk - Tr(rho_j Pi_k)| <= delta`` and
    ``Pi_k >= 0``, ``sum_k Pi_k = I``. ``delta_star`` is zero (up to solver
    tolerance) exactly when the table has a quantum realization on the
    assumed states.

    With ``require_ic=False`` the states need not be informationally
    complete; the optimal value is still well defined but the optimal POVM
    is then not unique. The same switch exists on the other POVM fits.
    """
    f = _frequencies(freqs)
    rho = _states_array(states)
    _require_ic_states(rho, f.shape[0], require_ic)
    n, m = f.shape
    prog = _povm_program(rho, m)
    prog.add_scalar("delta", lower=0.0)
    for j in range(n):
        for k in range(m):
            _bracket(prog, {f"Pi{k}": rho[j]}, "delta", f[j, k])
    prog.minimize(scalars={"delta": 1.0})
    result = solve(prog, options)
    _raise_on_failure(result, "single-delta")
    povm = _extract_povm(result, m)
    residual = f - born_matrix(rho, povm.effects)
    return FitReport(
        method="single_delta",
        povm=povm,
        delta_star=float(np.abs(residual).max()),
        status=result.status.value,
        residual_table=residual,
        solve_time=result.solve_time,
        stats={**result.stats, "solver_delta": result["delta"]},
    )


def fit_many_deltas(
    freqs: FrequencyLike, states, options: Optional[SolveOptions] = None, *, require_ic: bool = True
) -> FitReport:
    """One perturbation per table entry: minimize ``sum_jk |f_jk - Tr(rho_j Pi_k)|``.

    ``per_state_delta[j]`` is the mean of ``delta_jk`` over outcomes and
    points at the state whose preparation disagrees most with the data.
    """
    f = _frequencies(freqs)
    rho = _states_array(states)
    _require_ic_states(rho, f.shape[0], require_ic)
    n, m = f.shape
    prog = _povm_program(rho, m)
    for j in range(n):
        for k in range(m):
            prog.add_scalar(f"delta_{j}_{k}", lower=0.0)
            _bracket(prog, {f"Pi{k}": rho[j]}, f"delta_{j}_{k}", f[j, k])
    prog.minimize(scalars={f"delta_{j}_{k}": 1.0 for j in range(n) for k in range(m)})
    result = solve(prog, options)
    _raise_on_failure(result, "many-deltas")
    povm = _extract_povm(result, m)
    residual = f - born_matrix(rho, povm.effects)
    deltas = np.abs(residual)
    solver_deltas = np.array([[result[f"delta_{j}_{k}"] for k in range(m)] for j in range(n)])
    return FitReport(
        method="many_deltas",
        povm=povm,
        delta_matrix=deltas,
        per_state_delta=deltas.mean(axis=1),
        objective=float(deltas.sum()),
        status=result.status.value,
        residual_table=residual,
        solve_time=result.solve_time,
        stats={**result.stats, "solver_delta_matrix": solver_deltas},
    )


def fit_least_squares(
    freqs: FrequencyLike, states, options: Optional[SolveOptions] = None, *, require_ic: bool = True
) -> FitReport:
    """Minimize ``sum_jk (f_jk - Tr(rho_j Pi_k))**2`` over POVMs.

    Solved as the equivalent conic program ``min ||r||_2`` with
    ``r_jk = f_jk - Tr(rho_j Pi_k)``; ``objective`` is the squared norm.
    """
    f = _frequencies(freqs)
    rho = _states_array(states)
    _require_ic_states(rho, f.shape[0], require_ic)
    n, m = f.shape
    prog = _povm_program(rho, m)
    for j in range(n):
        for k in range(m):
            r = prog.add_scalar(f"r_{j}_{k}")
            prog.add_constraint(ops={f"Pi{k}": rho[j]}, scalars={r: 1.0}, sense="==", rhs=f[j, k])
    # minimizing the norm rather than its square keeps the solver's
    # optimality tolerance linear in the residuals
    prog.add_scalar("norm", lower=0.0)
    prog.add_norm_bound("norm", [f"r_{j}_{k}" for j in range(n) for k in range(m)])
    prog.minimize(scalars={"norm": 1.0})
    result = solve(prog, options)
    _raise_on_failure(result, "least-squares")
    povm = _extract_povm(result, m)
    residual = f - born_matrix(rho, povm.effects)
    return FitReport(
        method="least_squares",
        povm=povm,
        objective=float(np.sum(residual**2)),
        status=result.status.value,
        residual_table=residual,
        solve_time=result.solve_time,
        stats=result.stats,
    )


def fit_states_qst(
    freqs: FrequencyLike,
    povm: Povm,
    options: Optional[SolveOptions] = None,
    labels=None,
    *,
    require_ic: bool = True,
) -> FitReport:
    """Fit all input states at once for a known POVM with one shared ``delta``.

    Solves ``min delta`` s.t. ``|f_jk - Tr(rho_j Pi_k)| <= delta``,
    ``rho_j >= 0`` and ``Tr(rho_j) = 1``.
    """
    f = _frequencies(freqs)
    effects = povm.effects if isinstance(povm, Povm) else hermitian(povm)
    n, m = f.shape
    if effects.shape[0] != m:
        raise ValueError(f"POVM has {effects.shape[0]} effects but table has {m} columns")
    if require_ic and not is_informationally_complete(effects):
        raise NotInformationallyCompleteError(
            f"POVM has operator rank {operator_rank(effects)} < {effects.shape[1] ** 2}"
        )
    d = effects.shape[1]
    prog = OperatorProgram()
    prog.add_scalar("delta", lower=0.0)
    for j in range(n):
        prog.add_psd(f"rho{j}", d)
        prog.add_constraint(ops={f"rho{j}": np.eye(d)}, sense="==", rhs=1.0)
        for k in range(m):
            _bracket(prog, {f"rho{j}": effects[k]}, "delta", f[j, k])
    prog.minimize(scalars={"delta": 1.0})
    result = solve(prog, options)
    _raise_on_failure(result, "state tomography")
    states = StateEnsemble(project_to_states(np.array([result[f"rho{j}"] for j in range(n)])), labels=labels)
    residual = f - born_matrix(states.states, effects)
    return FitReport(
        method="qst",
        states=states,
        delta_star=float(np.abs(residual).max()),
        status=result.status.value,
        residual_table=residual,
        solve_time=result.solve_time,
        stats={**result.stats, "solver_delta": result["delta"]},
    )


# -- log-likelihood --------------------------------------------------------

PROB_FLOOR = 1e-12


def negative_log_likelihood(freqs: FrequencyLike, states, povm) -> float:
    """``-sum_jk f_jk log Tr(rho_j Pi_k)`` with ``0 log 0 = 0``; ``inf`` if a seen outcome has ~zero probability."""
    f = _frequencies(freqs)
    effects = povm.effects if isinstance(povm, Povm) else np.asarray(povm)
    p = born_matrix(_states_array(states), effects)
    seen = f > 0
    if np.any(p[seen] <= PROB_FLOOR):
        return float("inf")
    return float(-np.sum(f[seen] * np.log(p[seen])))


def _mle_gap_bound(f, rho, effects):
    """Upper bound on ``NLL(Pi) - min NLL`` from a dual-feasible point.

    With ``R_k = sum_j f_jk / p_jk rho_j``, any Hermitian ``L >= R_k`` for
    all ``k`` certifies ``max_S sum_k Tr(R_k S_k) <= Tr(L)`` over POVMs
    ``S``, which bounds the Frank-Wolfe gap by ``Tr(L) - N``. We take
    ``L = H + c I`` with ``H`` the Hermitian part of ``sum_k R_k Pi_k``.
    """
    p = born_matrix(rho, effects)
    ratio = np.where(f > 0, f / np.maximum(p, PROB_FLOOR), 0.0)
    r = np.einsum("jk,jab->kab", ratio, rho)
    h = hermitian(np.einsum("kab,kbc->ac", r, effects))
    c = max(np.linalg.eigvalsh(rk - h).max() for rk in r)
    d = rho.shape[1]
    gap = np.trace(h).real + d * c - f.sum()
    return float(max(gap, 0.0)), r


@dataclass
class MleOptions:
    tol: float = 1e-7
    max_iter: int = 100
    armijo: float = 1e-4
    starts: int = 1
    # Newton steps need a much tighter inner solve than the SDP fits
    solve_options: SolveOptions = field(default_factory=lambda: SolveOptions(solver_margin=1e-4))


def _mle_newton(f, rho, effects, opts: MleOptions):
    """Projected Newton iteration; each step solves a PSD-constrained QP.

    Returns ``(effects, nll, gap, decrement, iterations, history)``. The
    iteration stops when the certified gap bound or half the squared Newton
    decrement (the decrease predicted by the quadratic model, which bounds
    the suboptimality of a self-concordant objective near its optimum)
    falls below ``opts.tol``.
    """
    n, m = f.shape
    seen = f > 0
    nll = negative_log_likelihood(f, rho, effects)
    history = [nll]
    gap = decrement = float("inf")
    for it in range(opts.max_iter):
        gap, r = _mle_gap_bound(f, rho, effects)
        if gap <= opts.tol:
            return effects, nll, gap, decrement, it, history
        p = born_matrix(rho, effects)
        w = np.where(seen, f / np.maximum(p, PROB_FLOOR) ** 2, 0.0)
        # second-order model in t_jk = Tr(rho_j S_k) - p_jk:
        #   sum_jk -(f_jk / p_jk) t_jk + 1/2 (f_jk / p_jk**2) t_jk**2
        # (equal to sum_k Tr(-R_k (S_k - Pi_k)) + curvature); zero-frequency
        # entries carry neither gradient nor curvature
        prog = _povm_program(rho, m)
        lin, quad = {}, {}
        for j in range(n):
            for k in range(m):
                if w[j, k] > 0:
                    t = prog.add_scalar(f"t_{j}_{k}")
                    prog.add_constraint(ops={f"Pi{k}": rho[j]}, scalars={t: -1.0}, sense="==", rhs=p[j, k])
                    lin[t] = -f[j, k] / p[j, k]
                    quad[t] = 0.5 * w[j, k]
        prog.minimize(scalars=lin, quadratic=quad)
        result = solve(prog, opts.solve_options)
        if not result.status.ok:
            raise SolverError(f"log-MLE Newton step: solver returned {result.status.value}", result.status)
        decrement = max(-result.objective_value, 0.0)
        if decrement <= opts.tol:
            return effects, nll, gap, decrement, it, history
        target = project_to_povm(np.array([result[f"Pi{k}"] for k in range(m)]))
        direction = target - effects
        slope = -np.einsum("kab,kba->", r, direction).real
        if slope >= 0:
            # no descent left at solver precision
            return effects, nll, gap, decrement, it, history
        step = 1.0
        while step > 1e-10:
            trial = effects + step * direction
            trial_nll = negative_log_likelihood(f, rho, trial)
            if trial_nll <= nll + opts.armijo * step * slope:
                break
            step *= 0.5
        else:
            return effects, nll, gap, decrement, it, history
        effects, nll = hermitian(trial), trial_nll
        history.append(nll)
    gap, _ = _mle_gap_bound(f, rho, effects)
    return effects, nll, gap, decrement, opts.max_iter, history


def fit_log_mle(
    freqs: FrequencyLike,
    states,
    options: Optional[MleOptions] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    require_ic: bool = True,
) -> FitReport:
    """Maximum-likelihood POVM: minimize ``-sum_jk f_jk log Tr(rho_j Pi_k)``.

    Starts from ``Pi_k = I / m`` and takes projected Newton steps with
    Armijo backtracking. The iteration stops once either a certified bound
    on the distance to the optimal value (``stats["gap_bound"]``) or the
    decrease predicted by the Newton model (``stats["newton_decrement"]``)
    drops below ``options.tol``. Extra starts
    (``options.starts > 1``) draw random POVMs from ``rng`` and keep the
    best result.
    """
    from .quantum import random_povm

    opts = options or MleOptions()
    f = _frequencies(freqs)
    rho = _states_array(states)
    _require_ic_states(rho, f.shape[0], require_ic)
    if (f < 0).any():
        raise ValueError("frequencies must be nonnegative")
    n, m = f.shape
    d = rho.shape[1]
    t0 = time.perf_counter()
    starts = [np.array([np.eye(d, dtype=complex) / m] * m)]
    if opts.starts > 1:
        rng = rng if rng is not None else np.random.default_rng(0)
        starts += [random_povm(d, m, rng).effects for _ in range(opts.starts - 1)]
    best = None
    for start in starts:
        out = _mle_newton(f, rho, start, opts)
        if best is None or out[1] < best[1]:
            best = out
    effects, nll, gap, decrement, iters, history = best
    povm = Povm(project_to_povm(effects))
    residual = f - born_matrix(rho, povm.effects)
    converged = min(gap, decrement) <= opts.tol
    return FitReport(
        method="log_mle",
        povm=povm,
        objective=negative_log_likelihood(f, rho, povm),
        status=SolveStatus.OPTIMAL.value if converged else SolveStatus.NEAR_OPTIMAL.value,
        residual_table=residual,
        solve_time=time.perf_counter() - t0,
        stats={
            "iterations": iters,
            "gap_bound": gap,
            "newton_decrement": decrement,
            "history": history,
            "converged": converged,
        },
    )


ESTIMATORS = {
    "single_delta": fit_single_delta,
    "many_deltas": fit_many_deltas,
    "least_squares": fit_least_squares,
    "log_mle": fit_log_mle,
}
