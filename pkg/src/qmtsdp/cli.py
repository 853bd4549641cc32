"""Command-line interface: ``qmtsdp {simulate,fit,seesaw,bench,scenario}``.

Exit codes: 0 success, 1 configuration or input error, 2 some repetitions
(or bench cells) failed, 3 everything failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import estimators, serialization
from .errors import SolverError
from .experiments import (
    ConfigError,
    ExperimentConfig,
    PLOT_KINDS,
    _make_ensemble,
    _make_povm,
    emit_plotdata,
    load_config,
    repetition_rngs,
    run_bench,
    run_scenario,
    run_trace_distance_study,
)
from .noise import apply_noise
from .sampling import exact_frequencies, sample_frequencies
from .seesaw import run_seesaw, seesaw_report

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3

log = logging.getLogger("qmtsdp")


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "reps", None) is not None:
        overrides["repetitions"] = args.reps
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    return config


def cmd_simulate(args) -> int:
    """Draw the truth of repetition 0 at the first sweep point and sample it."""
    config = _config(args)
    setup_rng, rng = repetition_rngs(config.seed, 0)
    povm = _make_povm(config.povm, setup_rng)
    assumed = _make_ensemble(config.ensemble, setup_rng)
    point = config.sweep()[0]
    true_states = apply_noise(assumed, replace(config.noise, strength=point["strength"]), rng)
    if point["n_S"] is None:
        freqs = exact_frequencies(true_states, povm)
    else:
        freqs = sample_frequencies(true_states, povm, int(point["n_S"]), rng)
    out = Path(config.output_dir)
    serialization.save(povm, out / "povm.json")
    serialization.save(assumed, out / "states.json")
    serialization.save(true_states, out / "true_states.json")
    serialization.save(freqs, out / "frequencies.json")
    (out / "frequencies.csv").write_text(serialization.frequency_table_to_csv(freqs))
    print(f"wrote simulation to {out}")
    return EXIT_OK


def _load_inputs(args):
    try:
        return serialization.load(args.frequencies), serialization.load(args.states)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load inputs: {exc}") from exc


def cmd_fit(args) -> int:
    freqs, states = _load_inputs(args)
    try:
        report = estimators.ESTIMATORS[args.method](freqs, states)
    except SolverError as exc:
        log.error("fit failed: %s", exc)
        return EXIT_FAILED
    path = serialization.save(report, Path(args.out) / f"fit_{args.method}.json")
    summary = report.delta_star if report.delta_star is not None else report.objective
    print(f"{args.method}: status={report.status} value={summary!r} -> {path}")
    return EXIT_OK


def cmd_seesaw(args) -> int:
    freqs, states = _load_inputs(args)
    trace = run_seesaw(freqs, states, nu_delta=args.nu_delta, max_steps=args.max_steps)
    out = Path(args.out)
    serialization.save(trace, out / "seesaw_trace.json")
    (out / "seesaw_trace.csv").write_text(trace.to_csv())
    if not trace.steps:
        log.error("see-saw failed: %s", trace.failure)
        return EXIT_FAILED
    summary = seesaw_report(trace)
    print(f"steps={summary['num_steps']} initial={summary['initial_delta']!r} final={summary['final_delta']!r} "
          f"converged={summary['converged']}")
    return EXIT_PARTIAL if trace.failure else EXIT_OK


def _exit_for(num_failed: int, total: int) -> int:
    if num_failed == 0:
        return EXIT_OK
    return EXIT_FAILED if num_failed == total else EXIT_PARTIAL


def cmd_bench(args) -> int:
    rows = run_bench(
        dims=args.dims,
        shots_per_state=args.shots,
        ensemble_sizes=args.ensembles,
        reps=args.reps if args.reps is not None else 5,
        seed=args.seed if args.seed is not None else 0,
        methods=args.methods,
        output_dir=args.out,
    )
    if args.plot:
        emit_plotdata(rows, "bench", args.out)
    print(f"wrote {len(rows)} bench rows to {args.out}")
    return _exit_for(sum(r["status"] != "ok" for r in rows), len(rows))


def cmd_scenario(args) -> int:
    config = _config(args)
    study = run_trace_distance_study if config.scenario == "shot_noise" else run_scenario
    result = study(config)
    for kind in args.plot or []:
        emit_plotdata(result, kind, Path(config.output_dir) / "plotdata")
    for path in result.files.values():
        print(f"wrote {path}")
    if result.num_failed:
        log.warning("%d of %d repetitions failed", result.num_failed, len(result.records))
    return _exit_for(result.num_failed, len(result.records))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmtsdp", description="SDP-based quantum measurement tomography experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, reps=True):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if reps:
            p.add_argument("--reps", type=int)

    p = sub.add_parser("simulate", help="sample a frequency table from a config")
    common(p, reps=False)
    p.set_defaults(func=cmd_simulate)

    for name, func in (("fit", cmd_fit), ("seesaw", cmd_seesaw)):
        p = sub.add_parser(name, help=f"run {name} on saved frequencies and states")
        p.add_argument("--frequencies", required=True, help="frequency table JSON")
        p.add_argument("--states", required=True, help="state ensemble JSON")
        p.add_argument("--out", default=".")
        p.set_defaults(func=func)
    sub.choices["fit"].add_argument("--method", choices=sorted(estimators.ESTIMATORS), default="single_delta")
    sub.choices["seesaw"].add_argument("--nu-delta", type=float, default=1e-7)
    sub.choices["seesaw"].add_argument("--max-steps", type=int, default=200)

    p = sub.add_parser("bench", help="runtime and accuracy against dimension")
    common(p)
    p.set_defaults(out="bench")
    p.add_argument("--dims", type=int, nargs="+", default=[2, 3])
    p.add_argument("--shots", type=int, nargs="+", default=[10**4], help="shots per state")
    p.add_argument("--ensembles", nargs="+", choices=["complete", "overcomplete"], default=["complete", "overcomplete"])
    p.add_argument("--methods", nargs="+", choices=sorted(estimators.ESTIMATORS),
                   default=["single_delta", "many_deltas", "log_mle"])
    p.add_argument("--plot", action="store_true", help="also write plot data")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scenario", help="run a batch experiment from a config")
    common(p)
    p.add_argument("--workers", type=int)
    p.add_argument("--plot", nargs="*", choices=PLOT_KINDS, help="plot data kinds to emit")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "bench" and args.config:
        log.warning("bench ignores --config")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
