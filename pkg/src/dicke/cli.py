"""
pydicke command line.

Every subcommand reads one config file, runs one experiment and writes one
CSV or JSON file (stdout by default). Outputs carry the resolved config, the
seed and the package version, and never depend on --jobs, so a rerun with
the same config and seed reproduces them byte for byte.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Sequence, TextIO

import numpy as np

from dicke import __version__, analytic
from dicke.analysis import click_time_gof
from dicke.analytic import DegenerateLimitError
from dicke.config import MAX_SEED, RunConfig, read_config
from dicke.diagnostics import ConfigError
from dicke.dynamics import IntegrationError, integrate_conditional
from dicke.model import (
    DEFAULT_FULL_TENSOR_CAP,
    BasisError,
    ParameterError,
    PreconditionError,
    StateError,
    SystemParams,
    optimal_detuning,
)
from dicke.trajectory import (
    TERMINALS,
    JumpError,
    estimate_ladder,
    estimate_protocol,
    estimate_success,
    injected_sector,
    run_ladder,
)

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PROTOCOL = 4
EXIT_NOINPUT = 66  # sysexits EX_NOINPUT

NUMERICAL_ERRORS = (
    ParameterError,
    BasisError,
    PreconditionError,
    StateError,
    DegenerateLimitError,
    IntegrationError,
    JumpError,
)

# The success probability quoted for the practical parameter set in the
# literature; reported next to the computed value, not reconciled with it
LITERATURE_SUCCESS = 0.36


class ProtocolFailure(Exception):
    """A ladder run exhausted its trial budget; the report is still written."""


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    if value is None:
        return ""
    return str(value)


def _metadata(config: RunConfig, command: str) -> Dict[str, Any]:
    metadata = config.metadata()
    return {"command": command, **metadata}


def _write_json(report: Dict[str, Any], stream: TextIO) -> None:
    stream.write(json.dumps(report, indent=2, allow_nan=False))
    stream.write("\n")


def _write_csv(
    metadata: Dict[str, Any], header: Sequence[str], rows, stream: TextIO
) -> None:
    stream.write(f"# command = {metadata['command']}\n")
    stream.write(f"# version = {metadata['version']}\n")
    for key, value in metadata["config"].items():
        if isinstance(value, dict):
            continue
        stream.write(f"# {key} = {_format(value)}\n")
    for key, source in metadata["sources"].items():
        stream.write(f"# source {key} = {source}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(value) for value in row])


def _finite(value: float) -> float | None:
    # JSON has no nan or inf
    return float(value) if math.isfinite(value) else None


def _is_practical(params: SystemParams) -> bool:
    reference = SystemParams.practical(params.n_atoms)
    fields = ("g_L", "g_R", "kappa_L", "kappa_R", "delta_L", "delta_R", "wait_time")
    return (
        params.n_atoms == 3
        and params.gamma_s == 0.0
        and params.detector_efficiency == 1.0
        and all(
            math.isclose(getattr(params, f), getattr(reference, f), rel_tol=1e-12)
            for f in fields
        )
    )


def _closed_form_or_none(params: SystemParams, step: int) -> float | None:
    # The closed forms need kappa_L == kappa_R
    if params.kappa_L != params.kappa_R:
        return None
    return analytic.success_probability_closed(params, step)


# Commands


def cmd_analytic(config: RunConfig) -> Dict[str, Any]:
    params = config.system_params()
    step = config.step
    rabi = analytic.rabi_frequencies(params, step)
    p_closed = analytic.success_probability_closed(params, step)
    p_integral = analytic.success_probability_integral(params, step=step)
    cumulative = [
        {"trials": k, "cumulative_success": analytic.cumulative_success(p_closed, k)}
        for k in range(1, config.trials + 1)
    ]
    report: Dict[str, Any] = {
        "metadata": _metadata(config, "analytic"),
        "ladder_step": step,
        "omega0": rabi.omega0,
        "omega1": rabi.omega1,
        "delta_L": params.delta_L,
        "delta_R": params.delta_R,
        "delta_R_optimal": optimal_detuning(params, step),
        "p_closed": p_closed,
        "p_general": analytic.success_probability_general(params, step),
        "p_integral": p_integral,
        "wait_time": params.wait_time,
        "cumulative": cumulative,
        "trials_for_99_percent": (
            analytic.trials_for_confidence(p_closed, 0.99) if p_closed > 0 else None
        ),
        "excited_population_bound": analytic.excited_population_bound(params, step),
    }
    if _is_practical(params):
        report["literature_value"] = LITERATURE_SUCCESS
        report["literature_note"] = (
            f"The literature quotes ~{LITERATURE_SUCCESS} for these parameters; "
            f"the closed form gives {p_closed:.4f}."
        )
    return report


def cmd_evolve(config: RunConfig):
    """Header and rows of the conditional amplitudes over [0, t_end]."""
    params = config.system_params()
    hamiltonian, psi0 = injected_sector(
        params, config.descriptor(), config.profile, config.step
    )
    trajectory = integrate_conditional(
        hamiltonian, psi0, config.t_end, samples=config.samples
    )
    header = ["t_seconds"]
    for label in hamiltonian.basis:
        header += [f"re {label}", f"im {label}"]
    header.append("norm_sq")
    rows = []
    for t, amplitudes, norm_sq in zip(
        trajectory.times, trajectory.samples, trajectory.norm_sq, strict=True
    ):
        row: List[Any] = [t]
        for amplitude in amplitudes:
            row += [amplitude.real, amplitude.imag]
        row.append(norm_sq)
        rows.append(row)
    return header, rows


def cmd_trajectories(
    config: RunConfig, jobs: int = 1, events: TextIO | None = None
) -> Dict[str, Any]:
    params = config.system_params()
    step = config.step
    descriptor = config.descriptor()
    estimate = estimate_success(
        params,
        config.n_traj,
        seed=config.seed,
        bins=config.bins,
        jobs=jobs,
        profile=config.profile,
        descriptor=descriptor,
        step=step,
    )
    p_closed = _closed_form_or_none(params, step)
    report: Dict[str, Any] = {
        "metadata": _metadata(config, "trajectories"),
        "p_hat": estimate.p_hat,
        "stderr": estimate.stderr,
        "n_traj": estimate.n_traj,
        "seed": estimate.seed,
        "p_closed": p_closed,
        "t_max": estimate.t_max,
        "counts": estimate.counts,
        "losses": estimate.losses,
        "histogram": {
            "bin_width": float(estimate.edges[1] - estimate.edges[0]),
            "edges": estimate.edges.tolist(),
            "counts": estimate.histogram.tolist(),
        },
        "goodness_of_fit": _goodness_of_fit(config, params, estimate),
    }
    if config.runs > 0 and config.max_trials > 0 and step == 0:
        protocol = estimate_protocol(
            params,
            config.runs,
            config.max_trials,
            seed=config.seed,
            jobs=jobs,
            profile=config.profile,
            descriptor=descriptor,
        )
        report["protocol"] = {
            "runs": protocol.n_runs,
            "max_trials": protocol.max_trials,
            "success_rate": protocol.success_rate,
            "stderr": protocol.stderr,
            "expected": (
                None
                if p_closed is None
                else analytic.cumulative_success(p_closed, protocol.max_trials)
            ),
            "mean_trials": _finite(protocol.mean_trials),
            "trial_histogram": protocol.trial_histogram.tolist(),
        }
    if events is not None:
        _write_events(estimate, events)
    return report


def _goodness_of_fit(config: RunConfig, params: SystemParams, estimate):
    if config.profile is not None or config.basis not in ("reduced", "ladder"):
        return None
    if params.kappa_L != params.kappa_R or estimate.histogram.sum() == 0:
        return None
    try:
        fit = click_time_gof(estimate.histogram, estimate.edges, params, config.step)
    except ParameterError as error:
        logger.info("Skipping goodness of fit: %s", error)
        return None
    return {
        "statistic": fit.statistic,
        "p_value": fit.p_value,
        "degrees_of_freedom": fit.degrees_of_freedom,
        "passes_at_0.01": fit.passes(0.01),
    }


def _write_events(estimate, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["trial", "terminal", "time", "channel"])
    for i in range(estimate.n_traj):
        writer.writerow(
            [
                i,
                TERMINALS[estimate.terminals[i]].label,
                _format(estimate.times[i]),
                estimate.channel_name(i) or "",
            ]
        )


def cmd_sweep(config: RunConfig, jobs: int = 1):
    """Header and rows of p_suc over the g/κ and n grid at Δ_L = ratio·g."""
    low, high, steps = config.grid_g_over_kappa
    ratios = np.linspace(low, high, steps)
    if ratios.size == 0 or not config.grid_n:
        raise ParameterError("The sweep grid is empty.")
    with_mc = config.grid_mc_traj > 0
    header = ["g_over_kappa", "n", "p_closed"] + (["p_mc"] if with_mc else [])
    rows = []
    for n in config.grid_n:
        for ratio in ratios:
            params = SystemParams.uniform(
                g=config.g,
                kappa=config.g / ratio,
                delta_L=config.grid_delta_over_g * config.g,
                n_atoms=n,
                wait_time=config.T,
                gamma_s=config.gamma_s,
                detector_efficiency=config.eta,
            )
            row: List[Any] = [ratio, n, analytic.success_probability_closed(params)]
            if with_mc:
                row.append(
                    estimate_success(
                        params, config.grid_mc_traj, seed=config.seed, jobs=jobs
                    ).p_hat
                )
            rows.append(row)
    logger.info("Swept %d grid points", len(rows))
    return header, rows


def cmd_ladder(config: RunConfig, jobs: int = 1) -> Dict[str, Any]:
    params = config.system_params(step=0)
    target = config.m
    oracle = config.oracle and config.n <= DEFAULT_FULL_TENSOR_CAP
    result = run_ladder(
        params, target, config.max_trials, seed=config.seed, oracle=oracle
    )
    steps = []
    for k in range(target):
        tuned = params.replace(delta_R=optimal_detuning(params, k))
        entry: Dict[str, Any] = {
            "step": k,
            "transition": f"|{config.n},{k}> -> |{config.n},{k + 1}>",
            "delta_R": tuned.delta_R,
            "p_closed": _closed_form_or_none(tuned, k),
            "trials": result.trials_used[k] if k < len(result.trials_used) else 0,
            "elapsed": (
                result.step_elapsed[k] if k < len(result.step_elapsed) else 0.0
            ),
            "heralded": k < result.m_reached,
        }
        if k < len(result.step_fidelities):
            entry["oracle_fidelity"] = result.step_fidelities[k]
        steps.append(entry)

    report: Dict[str, Any] = {
        "metadata": _metadata(config, "ladder"),
        "target_m": target,
        "success": result.success,
        "m_reached": result.m_reached,
        "total_trials": result.total_trials,
        "elapsed": result.elapsed,
        "fidelity": result.fidelity,
        "oracle": oracle,
        "steps": steps,
    }
    if config.runs > 0:
        aggregate = estimate_ladder(
            params, target, config.max_trials, config.runs, seed=config.seed, jobs=jobs
        )
        report["aggregate"] = {
            "runs": aggregate.n_runs,
            "success_rate": aggregate.success_rate,
            "attempts": aggregate.attempts.tolist(),
            "heralds": aggregate.heralds.tolist(),
            "p_hat": [_finite(p) for p in aggregate.step_probabilities],
            "stderr": [_finite(s) for s in aggregate.step_stderr],
        }
    if not result.success:
        raise ProtocolFailure(report)
    return report


# Entry point


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pydicke",
        description="Heralded Dicke-state preparation in a bimodal cavity.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument(
        "--jobs", type=int, default=1, help="worker processes (default: 1)"
    )
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="WARNING",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(
        "analytic", parents=[common], help="closed-form rates and probabilities"
    )
    commands.add_parser(
        "evolve", parents=[common], help="conditional amplitudes as CSV"
    )
    trajectories = commands.add_parser(
        "trajectories", parents=[common], help="Monte Carlo of single trials"
    )
    trajectories.add_argument("--events", type=Path, help="per-trial CSV log")
    commands.add_parser(
        "sweep", parents=[common], help="success probability over g/kappa and n"
    )
    commands.add_parser(
        "ladder", parents=[common], help="climb the Dicke ladder to |n,m>"
    )
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    config = RunConfig() if args.config is None else read_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < MAX_SEED:
            raise ParameterError(f"Seed must lie in [0, 2^64), got {args.seed}.")
        config = config.replace(seed=args.seed)
    return config


def _run(args: argparse.Namespace, config: RunConfig, stream: TextIO) -> int:
    jobs = max(1, args.jobs)
    match args.command:
        case "analytic":
            _write_json(cmd_analytic(config), stream)
        case "evolve":
            header, rows = cmd_evolve(config)
            _write_csv(_metadata(config, "evolve"), header, rows, stream)
        case "trajectories":
            if args.events is None:
                report = cmd_trajectories(config, jobs)
            else:
                with open(args.events, "w", encoding="utf-8", newline="") as events:
                    report = cmd_trajectories(config, jobs, events)
            _write_json(report, stream)
        case "sweep":
            header, rows = cmd_sweep(config, jobs)
            _write_csv(_metadata(config, "sweep"), header, rows, stream)
        case "ladder":
            try:
                _write_json(cmd_ladder(config, jobs), stream)
            except ProtocolFailure as failure:
                _write_json(failure.args[0], stream)
                print("Error: a ladder step ran out of trials.", file=sys.stderr)
                return EXIT_PROTOCOL
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _load(args)
    except UnicodeDecodeError as error:
        print(f"Error: Could not decode file {args.config}: {error}", file=sys.stderr)
        return EXIT_NOINPUT
    except OSError as error:
        print(f"Error: Could not read {args.config}: {error}", file=sys.stderr)
        return EXIT_NOINPUT
    except ConfigError as error:
        for diagnostic in error.diagnostics:
            print(diagnostic, file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as error:
        print(f"Error: {error}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.out is None:
            return _run(args, config, sys.stdout)
        with open(args.out, "w", encoding="utf-8", newline="") as stream:
            return _run(args, config, stream)
    except NUMERICAL_ERRORS as error:
        print(f"Error: {error}", file=sys.stderr)
        return EXIT_NUMERICAL
