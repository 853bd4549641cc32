"""Batch tomography experiments: configuration, execution, aggregation, output.

A scenario sweeps over total shot counts ``n_S`` and noise strengths; at
every sweep point it runs ``repetitions`` independent experiments (draw or
load the true states and POVM, add preparation noise, sample frequencies,
fit) and aggregates the per-repetition metrics.

Randomness is derived from the master seed by counter: repetition ``r``
draws its states and POVM from ``[seed, r, 0]`` and its noise and shot
sampling from ``[seed, r, 1]``. Results therefore do not depend on execution
order or on the number of worker processes. Every sweep point of a
repetition restarts the same two streams, so the points share their states,
noise draws and sampling randomness (common random numbers), which keeps
differences between sweep points from being swamped by draw-to-draw noise.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import estimators
from .noise import NoiseKind, NoiseSpec, apply_noise
from .quantum import (
    Povm,
    StateEnsemble,
    born_matrix,
    mean_effect_trace_distance,
    pauli_eigenstate_ensemble,
    random_ic_ensemble,
    random_povm,
    sic_povm,
)
from .sampling import exact_frequencies, sample_frequencies
from .seesaw import run_seesaw

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCENARIOS = ("shot_noise", "incoherent", "coherent", "targeted", "seesaw", "bench")
SCENARIO_NOISE = {
    "incoherent": NoiseKind.INCOHERENT_MIXTURE,
    "coherent": NoiseKind.COHERENT_ROTATION,
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """One batch experiment.

    ``povm`` is ``{"source": "sic"}``, ``{"source": "random", "d": .., "m": ..}``
    or ``{"source": "file", "path": ..}``; ``ensemble`` is
    ``{"source": "pauli6"}``, ``{"source": "random", "d": .., "N": ..}`` or
    ``{"source": "file", "path": ..}``. ``n_S`` lists the total shot counts
    to sweep; ``None`` stands for infinite shots (exact Born frequencies).
    ``strengths`` optionally sweeps the noise strength.
    """

    scenario: str = "shot_noise"
    povm: dict = field(default_factory=lambda: {"source": "sic"})
    ensemble: dict = field(default_factory=lambda: {"source": "random", "d": 2, "N": 4})
    n_S: list = field(default_factory=lambda: [10**4])
    repetitions: int = 20
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    strengths: Optional[list] = None
    estimator: str = "single_delta"
    seed: int = 0
    output_dir: str = "results"
    name: Optional[str] = None
    nu_delta: float = 1e-7
    max_steps: int = 200
    workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if isinstance(self.noise, dict):
            self.noise = NoiseSpec.from_dict(self.noise)
        if not isinstance(self.n_S, (list, tuple)):
            self.n_S = [self.n_S]
        self.n_S = list(self.n_S)
        self.validate()

    @property
    def label(self) -> str:
        return self.name or self.scenario

    def num_states(self) -> int:
        src = self.ensemble.get("source")
        if src == "pauli6":
            return 6
        if src == "random":
            return int(self.ensemble["N"])
        if src == "file":
            return len(_load_ensemble(self.ensemble))
        raise ConfigError(f"unknown ensemble source {src!r}")

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.povm.get("source") not in ("sic", "random", "file"):
            raise ConfigError(f"unknown povm source {self.povm.get('source')!r}")
        if self.estimator not in estimators.ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if not self.n_S:
            raise ConfigError("n_S must list at least one shot count")
        n = self.num_states()
        for shots in self.n_S:
            if shots is not None and (int(shots) <= 0 or int(shots) % n):
                raise ConfigError(f"n_S={shots} is not a positive multiple of N={n}")
        if self.scenario in SCENARIO_NOISE and self.noise.kind is not SCENARIO_NOISE[self.scenario]:
            raise ConfigError(f"scenario {self.scenario!r} needs noise kind {SCENARIO_NOISE[self.scenario].value!r}")
        for s in self.strengths or []:
            NoiseSpec(self.noise.kind, s)

    def sweep(self) -> List[dict]:
        strengths = self.strengths if self.strengths is not None else [self.noise.strength]
        return [{"n_S": n, "strength": s} for n, s in product(self.n_S, strengths)]

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["noise"] = self.noise.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def _load_ensemble(spec: dict) -> StateEnsemble:
    from .serialization import load

    return load(spec["path"])


def _make_povm(spec: dict, rng) -> Povm:
    src = spec["source"]
    if src == "sic":
        return sic_povm()
    if src == "random":
        return random_povm(int(spec["d"]), int(spec["m"]), rng)
    from .serialization import load

    return load(spec["path"])


def _make_ensemble(spec: dict, rng) -> StateEnsemble:
    src = spec["source"]
    if src == "pauli6":
        return pauli_eigenstate_ensemble()
    if src == "random":
        return random_ic_ensemble(int(spec["d"]), int(spec["N"]), rng)
    return _load_ensemble(spec)


def repetition_rngs(seed: int, rep: int):
    """Fresh (setup, experiment) generators for repetition ``rep``."""
    return np.random.default_rng([seed, rep, 0]), np.random.default_rng([seed, rep, 1])


@dataclass
class AggregateResult:
    """Per-repetition records plus mean/std of every metric at each sweep point."""

    config: ExperimentConfig
    records: List[dict]
    aggregates: List[dict]
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def num_failed(self) -> int:
        return sum(r["status"] != "ok" for r in self.records)

    def column(self, metric: str, **where) -> np.ndarray:
        rows = [r for r in self.records if r["status"] == "ok" and all(r.get(k) == v for k, v in where.items())]
        return np.array([r[metric] for r in rows], dtype=float)

    def aggregate(self, **where) -> dict:
        for row in self.aggregates:
            if all(row.get(k) == v for k, v in where.items()):
                return row
        raise KeyError(where)


def _fit_metrics(config, report, truth: Povm, labels) -> dict:
    out = {}
    if report.delta_star is not None:
        out["delta_star"] = report.delta_star
    if report.objective is not None:
        out["objective"] = report.objective
    if report.delta_matrix is not None:
        out["delta_sum"] = float(report.delta_matrix.sum())
        for lab, dj in zip(labels, report.per_state_delta):
            out[f"delta_{lab}"] = float(dj)
    if report.povm is not None and report.povm.effects.shape == truth.effects.shape:
        out["trace_distance"] = mean_effect_trace_distance(report.povm, truth)
    return out


def run_repetition(config: ExperimentConfig, point_index: int, rep: int) -> dict:
    """One experiment at one sweep point. Never raises; failures are recorded."""
    point = config.sweep()[point_index]
    record = {"point": point_index, "n_S": point["n_S"], "strength": point["strength"], "rep": rep}
    try:
        setup_rng, rng = repetition_rngs(config.seed, rep)
        povm = _make_povm(config.povm, setup_rng)
        assumed = _make_ensemble(config.ensemble, setup_rng)
        spec = replace(config.noise, strength=point["strength"])
        true_states = apply_noise(assumed, spec, rng)
        if point["n_S"] is None:
            freqs = exact_frequencies(true_states, povm)
        else:
            freqs = sample_frequencies(true_states, povm, int(point["n_S"]), rng)
        labels = assumed.label_list()

        if config.scenario == "seesaw":
            trace = run_seesaw(freqs, assumed, nu_delta=config.nu_delta, max_steps=config.max_steps)
            if trace.failure:
                raise RuntimeError(trace.failure)
            deltas = trace.deltas
            born = born_matrix(trace.final_states.states, trace.final_povm.effects)
            record.update(
                initial_delta=float(deltas[0]),
                final_delta=float(deltas[-1]),
                steps=len(deltas),
                converged=int(trace.converged),
                max_increase=float(np.max(np.diff(deltas), initial=0.0)),
                born_violation=float(np.abs(born - freqs.frequencies).max() - deltas[-1]),
            )
            record["_trace"] = [(s.index, s.side.value, s.delta) for s in trace.steps]
        else:
            estimator = config.estimator
            if config.scenario == "targeted" and estimator == "single_delta":
                estimator = "many_deltas"
            report = estimators.ESTIMATORS[estimator](freqs, assumed)
            record.update(_fit_metrics(config, report, povm, labels))
        record["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - a failed repetition must not abort the batch
        log.warning("repetition %d at point %d failed: %s", rep, point_index, exc)
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def _task(args):
    return run_repetition(*args)


ID_COLUMNS = ("point", "n_S", "strength", "rep", "status")


def aggregate_records(records: Sequence[dict]) -> List[dict]:
    """Mean and (population) standard deviation of every metric, per sweep point."""
    points = sorted({r["point"] for r in records})
    rows = []
    for p in points:
        group = [r for r in records if r["point"] == p]
        ok = [r for r in group if r["status"] == "ok"]
        row = {"point": p, "n_S": group[0]["n_S"], "strength": group[0]["strength"]}
        row["num_ok"] = len(ok)
        row["num_failed"] = len(group) - len(ok)
        metrics = sorted({k for r in ok for k in r if k not in ID_COLUMNS and not k.startswith("_") and k != "error"})
        for m in metrics:
            vals = np.array([r[m] for r in ok if m in r], dtype=float)
            row[f"mean_{m}"] = float(vals.mean()) if vals.size else float("nan")
            row[f"std_{m}"] = float(vals.std()) if vals.size else float("nan")
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return "exact"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns and not k.startswith("_"):
                    columns.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) if c in r else "" for c in columns])
    return buf.getvalue()


def _record_columns(records) -> List[str]:
    metrics = []
    for r in records:
        for k in r:
            if k not in ID_COLUMNS and k != "error" and not k.startswith("_") and k not in metrics:
                metrics.append(k)
    return [*ID_COLUMNS, *metrics, "error"]


def run_scenario(config: ExperimentConfig, write: bool = True) -> AggregateResult:
    """Run every repetition at every sweep point and aggregate.

    Writes ``<name>_repetitions.csv`` and ``<name>_aggregate.csv`` (and, for
    see-saw runs, ``<name>_traces.csv``) into ``config.output_dir``. Column
    order is fixed and no timing data is written, so identical configs give
    byte-identical files.
    """
    if config.scenario == "bench":
        raise ConfigError("use run_bench for the bench scenario")
    tasks = [(config, i, r) for i in range(len(config.sweep())) for r in range(config.repetitions)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_task, tasks))
    else:
        records = [_task(t) for t in tasks]
    result = AggregateResult(config, records, aggregate_records(records))
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "repetitions": out / f"{config.label}_repetitions.csv",
            "aggregate": out / f"{config.label}_aggregate.csv",
        }
        paths["repetitions"].write_text(rows_to_csv(records, _record_columns(records)))
        paths["aggregate"].write_text(rows_to_csv(result.aggregates))
        if config.scenario == "seesaw":
            trace_rows = [
                {"point": r["point"], "rep": r["rep"], "step": s, "side": side, "delta": float(dlt)}
                for r in records
                for s, side, dlt in r.get("_trace", [])
            ]
            paths["traces"] = out / f"{config.label}_traces.csv"
            paths["traces"].write_text(rows_to_csv(trace_rows, ["point", "rep", "step", "side", "delta"]))
        result.files = {k: str(v) for k, v in paths.items()}
    return result


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def run_trace_distance_study(config: ExperimentConfig, write: bool = True) -> AggregateResult:
    """Shot-noise sweep reporting the mean effect trace distance to the true POVM.

    Adds ``slope_trace_distance`` and ``slope_delta_star`` (log-log slopes
    against ``n_S`` over the finite shot counts) to every aggregate row.
    """
    result = run_scenario(config, write=write)
    rows = [r for r in result.aggregates if r["n_S"] is not None]
    if len(rows) >= 2:
        x = [r["n_S"] for r in rows]
        for metric in ("trace_distance", "delta_star"):
            if all(f"mean_{metric}" in r and r[f"mean_{metric}"] > 0 for r in rows):
                slope = loglog_slope(x, [r[f"mean_{metric}"] for r in rows])
                for r in result.aggregates:
                    r[f"slope_{metric}"] = slope
    if write:
        Path(result.files["aggregate"]).write_text(rows_to_csv(result.aggregates))
    return result


BENCH_METHODS = ("single_delta", "many_deltas", "log_mle")
BENCH_COLUMNS = ("method", "d", "N", "ensemble", "shots_per_state", "rep", "status", "tau", "trace_distance", "error")


def run_bench(
    dims: Sequence[int] = (2, 3),
    shots_per_state: Sequence[int] = (10**4,),
    ensemble_sizes: Sequence[str] = ("complete", "overcomplete"),
    reps: int = 5,
    seed: int = 0,
    methods: Sequence[str] = BENCH_METHODS,
    output_dir: Optional[str] = None,
) -> List[dict]:
    """Runtime and accuracy of the fitting methods against dimension.

    For each dimension ``d``, shot count and ensemble size (``complete``:
    ``N = d**2``; ``overcomplete``: ``N = d(d + 1)``) a random POVM with
    ``d**2`` outcomes and a random IC ensemble are drawn per repetition;
    every method fits the same sampled table. One row per
    (method, d, N, shots, rep) with runtime ``tau`` in seconds and the mean
    effect trace distance to the true POVM.
    """
    sizes = {"complete": lambda d: d * d, "overcomplete": lambda d: d * (d + 1)}
    rows = []
    for d in dims:
        if d < 2:
            raise ValueError("bench dimensions must be >= 2")
        for shots, kind, rep in product(shots_per_state, ensemble_sizes, range(reps)):
            n = sizes[kind](d)
            rng = np.random.default_rng([seed, d, n, shots, rep])
            try:
                povm = random_povm(d, d * d, rng)
                states = random_ic_ensemble(d, n, rng)
                freqs = sample_frequencies(states, povm, shots * n, rng)
            except Exception as exc:  # noqa: BLE001
                for method in methods:
                    rows.append(dict(method=method, d=d, N=n, ensemble=kind, shots_per_state=shots, rep=rep,
                                     status="failed", tau=float("nan"), trace_distance=float("nan"), error=str(exc)))
                continue
            for method in methods:
                row = dict(method=method, d=d, N=n, ensemble=kind, shots_per_state=shots, rep=rep)
                try:
                    report = estimators.ESTIMATORS[method](freqs, states)
                    row.update(status="ok", tau=report.solve_time,
                               trace_distance=mean_effect_trace_distance(report.povm, povm), error="")
                except Exception as exc:  # noqa: BLE001
                    row.update(status="failed", tau=float("nan"), trace_distance=float("nan"), error=str(exc))
                rows.append(row)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.csv").write_text(rows_to_csv(rows, BENCH_COLUMNS))
        (out / "bench_aggregate.csv").write_text(rows_to_csv(aggregate_bench(rows)))
    return rows


def aggregate_bench(rows: Sequence[dict]) -> List[dict]:
    keys = sorted({(r["method"], r["d"], r["N"], r["shots_per_state"]) for r in rows}, key=lambda k: (k[1], k[2], k[3], k[0]))
    out = []
    for method, d, n, shots in keys:
        group = [r for r in rows if (r["method"], r["d"], r["N"], r["shots_per_state"]) == (method, d, n, shots)]
        ok = [r for r in group if r["status"] == "ok"]
        tau = np.array([r["tau"] for r in ok])
        td = np.array([r["trace_distance"] for r in ok])
        nan = float("nan")
        out.append(dict(
            method=method, d=d, N=n, shots_per_state=shots, num_ok=len(ok), num_failed=len(group) - len(ok),
            mean_tau=float(tau.mean()) if ok else nan, std_tau=float(tau.std()) if ok else nan,
            mean_trace_distance=float(td.mean()) if ok else nan, std_trace_distance=float(td.std()) if ok else nan,
        ))
    return out


# -- plot data -----------------------------------------------------------

PLOT_KINDS = ("shot_noise", "trace_distance", "noise_sweep", "per_state", "seesaw_hist", "bench")


def _write_plot(out: Path, stem: str, columns, rows, meta) -> List[str]:
    out.mkdir(parents=True, exist_ok=True)
    dat = out / f"{stem}.dat"
    lines = ["# " + " ".join(columns)]
    for row in rows:
        lines.append(" ".join(_fmt(v) for v in row))
    dat.write_text("\n".join(lines) + "\n")
    side = out / f"{stem}.json"
    side.write_text(json.dumps({"columns": list(columns), **meta}, indent=1) + "\n")
    return [str(dat), str(side)]


def emit_plotdata(result, kind: str, output_dir, bins: int = 20) -> List[str]:
    """Write whitespace-separated data plus a JSON sidecar for one figure.

    ``result`` is an :class:`AggregateResult` (or the row list of
    :func:`run_bench` for ``kind="bench"``). Returns the written paths.
    """
    out = Path(output_dir)
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {PLOT_KINDS}")
    errbars = {"error_bars": "std over repetitions"}
    if kind == "bench":
        agg = aggregate_bench(result)
        cols = ("method", "d", "N", "shots_per_state", "mean_tau", "std_tau", "mean_trace_distance", "std_trace_distance")
        return _write_plot(out, "bench", cols, [[r[c] for c in cols] for r in agg],
                           {"xlabel": "d", "ylabel": "tau [s] / trace distance", **errbars})
    label = result.config.label
    if kind in ("shot_noise", "trace_distance"):
        metric = "delta_star" if kind == "shot_noise" else "trace_distance"
        rows = [[r["n_S"], r.get(f"mean_{metric}"), r.get(f"std_{metric}")] for r in result.aggregates]
        ylabel = "mean delta*" if kind == "shot_noise" else "mean trace distance"
        return _write_plot(out, f"{label}_{kind}", ("n_S", f"mean_{metric}", f"std_{metric}"), rows,
                           {"xlabel": "n_S", "ylabel": ylabel, "logx": True, "logy": True, **errbars})
    if kind == "noise_sweep":
        metric = "final_delta" if result.config.scenario == "seesaw" else "delta_star"
        rows = [[r["strength"], r.get(f"mean_{metric}"), r.get(f"std_{metric}")] for r in result.aggregates]
        return _write_plot(out, f"{label}_noise_sweep", ("strength", f"mean_{metric}", f"std_{metric}"), rows,
                           {"xlabel": "noise strength", "ylabel": f"mean {metric}", **errbars})
    if kind == "per_state":
        agg = result.aggregates[0]
        # records keep the ensemble's label order; aggregate keys are sorted
        first = next(r for r in result.records if r["status"] == "ok")
        labels = [k[len("delta_"):] for k in first if k.startswith("delta_") and k not in ("delta_sum", "delta_star")]
        rows = [[lab, agg[f"mean_delta_{lab}"], agg[f"std_delta_{lab}"]] for lab in labels]
        return _write_plot(out, f"{label}_per_state", ("state_label", "mean_delta_j", "std_delta_j"), rows,
                           {"xlabel": "input state", "ylabel": "mean delta_j", **errbars})
    # seesaw_hist: log10-spaced bins of the final delta
    vals = result.column("final_delta")
    vals = np.clip(vals, 1e-16, None)
    edges = np.logspace(np.floor(np.log10(vals.min())), np.ceil(np.log10(vals.max())) + 1e-12, bins + 1)
    counts, edges = np.histogram(vals, bins=edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    rows = [[float(c), int(n)] for c, n in zip(centers, counts)]
    return _write_plot(out, f"{label}_seesaw_hist", ("delta_bin", "count"), rows,
                       {"xlabel": "final delta", "ylabel": "count", "logx": True, "bin_edges": edges.tolist()})
