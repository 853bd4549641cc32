"""Self-consistent tomography by alternating measurement and state fits.

Starting from a guess of the input states, the see-saw fits a POVM to the
frequencies (QMT side), then re-fits all states against that POVM (QST side),
and so on. Each side's previous solution is feasible for the next problem,
so the sequence of ``delta`` values is non-increasing up to solver tolerance.
The recovered pair is only defined up to a gauge transformation; no gauge
fixing is attempted.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .conic import SolveOptions
from .errors import NotInformationallyCompleteError, SolverError
from .estimators import FrequencyLike, _frequencies, _states_array, fit_single_delta, fit_states_qst
from .quantum import Povm, StateEnsemble, is_informationally_complete


class Side(str, Enum):
    QMT = "QMT"
    QST = "QST"


@dataclass(frozen=True)
class SeesawStep:
    index: int
    side: Side
    delta: float
    solve_time: float
    status: str = "optimal"


@dataclass
class SeesawTrace:
    """History of a see-saw run.

    ``final_states`` and ``final_povm`` are the most recent outputs of each
    side; ``states_step`` and ``povm_step`` record which steps produced them.
    Together they reproduce the frequencies up to the last step's ``delta``.
    """

    steps: List[SeesawStep] = field(default_factory=list)
    final_states: Optional[StateEnsemble] = None
    final_povm: Optional[Povm] = None
    converged: bool = False
    nu_delta: float = 1e-7
    states_step: Optional[int] = None
    povm_step: Optional[int] = None
    failure: Optional[str] = None

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.steps])

    @property
    def final_delta(self) -> float:
        return self.steps[-1].delta

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "side", "delta"])
        for s in self.steps:
            writer.writerow([s.index, s.side.value, repr(float(s.delta))])
        return buf.getvalue()


def run_seesaw(
    freqs: FrequencyLike,
    initial_states,
    nu_delta: float = 1e-7,
    max_steps: int = 200,
    options: Optional[SolveOptions] = None,
) -> SeesawTrace:
    """Alternate single-delta POVM fits and state fits until ``delta`` stalls.

    Step 0 fits a POVM to ``initial_states``; odd steps fit states to the
    latest POVM, even steps fit a POVM to the latest states. The run stops
    after step ``s >= 1`` once ``|delta_s - delta_{s-1}| < nu_delta`` or when
    ``max_steps`` steps have been taken.

    A solver failure (or a fitted POVM that is not informationally
    complete) ends the run early: the trace up to that point is returned
    with ``converged=False`` and the reason in ``failure``.
    """
    f = _frequencies(freqs)
    rho = _states_array(initial_states)
    if not is_informationally_complete(rho):
        raise NotInformationallyCompleteError("initial states are not informationally complete")
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    labels = initial_states.labels if isinstance(initial_states, StateEnsemble) else None
    states = StateEnsemble(rho, labels=labels)
    trace = SeesawTrace(nu_delta=nu_delta, final_states=states, states_step=None)

    for s in range(max_steps):
        side = Side.QMT if s % 2 == 0 else Side.QST
        try:
            if side is Side.QMT:
                report = fit_single_delta(f, states, options)
                trace.final_povm, trace.povm_step = report.povm, s
            else:
                report = fit_states_qst(f, trace.final_povm, options, labels=labels)
                states = report.states
                trace.final_states, trace.states_step = states, s
        except (SolverError, NotInformationallyCompleteError) as exc:
            trace.failure = f"step {s} ({side.value}): {exc}"
            return trace
        trace.steps.append(SeesawStep(s, side, report.delta_star, report.solve_time, report.status))
        if s >= 1 and abs(trace.steps[-1].delta - trace.steps[-2].delta) < nu_delta:
            trace.converged = True
            break
    return trace


def seesaw_report(trace: SeesawTrace) -> dict:
    """Summary of a trace: delta curve, step count and improvement factor."""
    if not trace.steps:
        raise ValueError("empty see-saw trace")
    deltas = trace.deltas
    first, last = float(deltas[0]), float(deltas[-1])
    return {
        "deltas": deltas.tolist(),
        "sides": [s.side.value for s in trace.steps],
        "num_steps": len(deltas),
        "initial_delta": first,
        "final_delta": last,
        "improvement": first / last if last > 0 else float("inf"),
        "converged": trace.converged,
        "failure": trace.failure,
    }
