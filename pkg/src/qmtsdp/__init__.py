"""Quantum measurement tomography by semidefinite programming."""
from .conic import OperatorProgram, SolveOptions, SolveResult, SolveStatus, solve
from .errors import DimensionMismatchError, NotInformationallyCompleteError, SolverError
from .estimators import (
    ESTIMATORS,
    FitReport,
    MleOptions,
    fit_least_squares,
    fit_log_mle,
    fit_many_deltas,
    fit_single_delta,
    fit_states_qst,
    linear_inversion,
)
from .experiments import (
    AggregateResult,
    ConfigError,
    ExperimentConfig,
    emit_plotdata,
    run_bench,
    run_scenario,
    run_trace_distance_study,
)
from .noise import NoiseKind, NoiseSpec, apply_noise, coherent_noise, incoherent_mixture, targeted_noise
from .quantum import (
    Povm,
    StateEnsemble,
    born_probabilities,
    mean_effect_trace_distance,
    pauli_eigenstate_ensemble,
    random_density_matrix,
    random_ic_ensemble,
    random_povm,
    sic_povm,
    trace_distance,
)
from .sampling import FrequencyTable, exact_frequencies, sample_frequencies
from .seesaw import SeesawTrace, run_seesaw, seesaw_report

__version__ = "0.1.0"

__all__ = [
    "OperatorProgram",
    "SolveOptions",
    "SolveResult",
    "SolveStatus",
    "solve",
    "DimensionMismatchError",
    "NotInformationallyCompleteError",
    "SolverError",
    "ESTIMATORS",
    "FitReport",
    "MleOptions",
    "fit_least_squares",
    "fit_log_mle",
    "fit_many_deltas",
    "fit_single_delta",
    "fit_states_qst",
    "linear_inversion",
    "AggregateResult",
    "ConfigError",
    "ExperimentConfig",
    "emit_plotdata",
    "run_bench",
    "run_scenario",
    "run_trace_distance_study",
    "NoiseKind",
    "NoiseSpec",
    "apply_noise",
    "coherent_noise",
    "incoherent_mixture",
    "targeted_noise",
    "Povm",
    "StateEnsemble",
    "born_probabilities",
    "mean_effect_trace_distance",
    "pauli_eigenstate_ensemble",
    "random_density_matrix",
    "random_ic_ensemble",
    "random_povm",
    "sic_povm",
    "trace_distance",
    "FrequencyTable",
    "exact_frequencies",
    "sample_frequencies",
    "SeesawTrace",
    "run_seesaw",
    "seesaw_report",
]
