"""JSON and CSV (de)serialization of operators, tables, reports and traces.

Complex matrices are stored as nested lists of ``[re, im]`` pairs, so a
``d x d`` matrix becomes a ``d x d x 2`` nested list. Every top-level
object carries a ``"type"`` tag; see README for the full schemas.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .estimators import FitReport
from .quantum import Povm, StateEnsemble
from .sampling import FrequencyTable
from .seesaw import SeesawStep, SeesawTrace, Side


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _check_type(data: dict, expected: str):
    if data.get("type") != expected:
        raise ValueError(f"expected a {expected!r} object, got type {data.get('type')!r}")


def povm_to_dict(povm: Povm) -> dict:
    return {"type": "povm", "dim": povm.dim, "effects": matrix_to_json(povm.effects)}


def povm_from_dict(data: dict) -> Povm:
    _check_type(data, "povm")
    return Povm(matrix_from_json(data["effects"]))


def ensemble_to_dict(ensemble: StateEnsemble) -> dict:
    return {
        "type": "state_ensemble",
        "dim": ensemble.dim,
        "labels": list(ensemble.labels) if ensemble.labels is not None else None,
        "states": matrix_to_json(ensemble.states),
    }


def ensemble_from_dict(data: dict) -> StateEnsemble:
    _check_type(data, "state_ensemble")
    return StateEnsemble(matrix_from_json(data["states"]), labels=data.get("labels"))


def frequency_table_to_dict(table: FrequencyTable) -> dict:
    return {
        "type": "frequency_table",
        "counts": table.counts.tolist() if table.counts is not None else None,
        "shots_per_state": table.shots_per_state,
        "total_shots": table.total_shots,
        "frequencies": table.frequencies.tolist(),
    }


def frequency_table_from_dict(data: dict) -> FrequencyTable:
    _check_type(data, "frequency_table")
    if data.get("counts") is not None:
        return FrequencyTable.from_counts(data["counts"])
    return FrequencyTable(np.asarray(data["frequencies"], dtype=float))


def frequency_table_to_csv(table: FrequencyTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["state_index", "outcome_index", "count", "frequency"])
    n, m = table.frequencies.shape
    for j in range(n):
        for k in range(m):
            count = "" if table.counts is None else int(table.counts[j, k])
            writer.writerow([j, k, count, repr(float(table.frequencies[j, k]))])
    return buf.getvalue()


def _float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _array(x):
    return None if x is None else np.asarray(x, dtype=float).tolist()


def fit_report_to_dict(report: FitReport) -> dict:
    return {
        "type": "fit_report",
        "method": report.method,
        "status": report.status,
        "delta_star": _float(report.delta_star),
        "delta_matrix": _array(report.delta_matrix),
        "per_state_delta": _array(report.per_state_delta),
        "objective": _float(report.objective),
        "residual_table": _array(report.residual_table),
        "solve_time": report.solve_time,
        "povm": povm_to_dict(report.povm) if report.povm is not None else None,
        "states": ensemble_to_dict(report.states) if report.states is not None else None,
    }


def fit_report_from_dict(data: dict) -> FitReport:
    _check_type(data, "fit_report")

    def arr(key):
        return None if data.get(key) is None else np.asarray(data[key], dtype=float)

    def num(key):
        return None if data.get(key) is None else float(data[key])

    return FitReport(
        method=data["method"],
        povm=povm_from_dict(data["povm"]) if data.get("povm") else None,
        states=ensemble_from_dict(data["states"]) if data.get("states") else None,
        delta_star=num("delta_star"),
        delta_matrix=arr("delta_matrix"),
        per_state_delta=arr("per_state_delta"),
        objective=num("objective"),
        status=data.get("status", "optimal"),
        residual_table=arr("residual_table"),
        solve_time=float(data.get("solve_time", 0.0)),
    )


def seesaw_trace_to_dict(trace: SeesawTrace) -> dict:
    return {
        "type": "seesaw_trace",
        "nu_delta": trace.nu_delta,
        "converged": trace.converged,
        "failure": trace.failure,
        "states_step": trace.states_step,
        "povm_step": trace.povm_step,
        "steps": [
            {"index": s.index, "side": s.side.value, "delta": s.delta, "solve_time": s.solve_time, "status": s.status}
            for s in trace.steps
        ],
        "final_states": ensemble_to_dict(trace.final_states) if trace.final_states is not None else None,
        "final_povm": povm_to_dict(trace.final_povm) if trace.final_povm is not None else None,
    }


def seesaw_trace_from_dict(data: dict) -> SeesawTrace:
    _check_type(data, "seesaw_trace")
    return SeesawTrace(
        steps=[
            SeesawStep(s["index"], Side(s["side"]), float(s["delta"]), float(s["solve_time"]), s.get("status", "optimal"))
            for s in data["steps"]
        ],
        final_states=ensemble_from_dict(data["final_states"]) if data.get("final_states") else None,
        final_povm=povm_from_dict(data["final_povm"]) if data.get("final_povm") else None,
        converged=bool(data["converged"]),
        nu_delta=float(data["nu_delta"]),
        states_step=data.get("states_step"),
        povm_step=data.get("povm_step"),
        failure=data.get("failure"),
    )


_LOADERS = {
    "povm": povm_from_dict,
    "state_ensemble": ensemble_from_dict,
    "frequency_table": frequency_table_from_dict,
    "fit_report": fit_report_from_dict,
    "seesaw_trace": seesaw_trace_from_dict,
}

_DUMPERS = (
    (Povm, povm_to_dict),
    (StateEnsemble, ensemble_to_dict),
    (FrequencyTable, frequency_table_to_dict),
    (FitReport, fit_report_to_dict),
    (SeesawTrace, seesaw_trace_to_dict),
)


def to_dict(obj) -> dict:
    for cls, dump in _DUMPERS:
        if isinstance(obj, cls):
            return dump(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(data: dict):
    try:
        return _LOADERS[data["type"]](data)
    except KeyError:
        raise ValueError(f"unknown object type {data.get('type')!r}") from None


def save(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_dict(obj), indent=1) + "\n")
    return path


def load(path):
    return from_dict(json.loads(Path(path).read_text()))
