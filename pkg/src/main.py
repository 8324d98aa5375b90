#!/usr/bin/env python3
"""
kerrsim - command-line experiment runner

    python -m src.main parity --alpha 100 --theta 0.3 --trials 1e6 --seed 42
    python -m src.main sweep --theta 0.05:0.5:0.05 --target-xd 8 --format csv
    python -m src.main validate --alpha 2 --theta 0.5
"""

import argparse
import json
import math
import sys
import time
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic.alias_generators import to_camel

from src import __version__
from src.analysis.error_model import error_model, misidentification_probability, resource_sweep
from src.analysis.experiments import (
    BellExperiment,
    CnotExperiment,
    DetectorExperiment,
    ParityErrorExperiment,
    ParityFidelityExperiment,
    parse_qubit,
)
from src.analysis.fidelity import fidelity
from src.analysis.monte_carlo import MonteCarloReport, run_trials
from src.core.errors import (
    ConfigError,
    ImpossibleOutcomeError,
    InvalidInputError,
    KerrSimError,
    NumericalError,
    TrialFailure,
)
from src.core.gates import Basis, BellLabel, GateConfig, Quadrature, bell_state, parity_gate
from src.core.homodyne import density_values, outcome_grid
from src.core.hybrid_state import MAX_ALPHA, PolLabel, allocate_probe, conditional_kerr, new_product_state
from src.utils.config import load_config_file, load_settings
from src.utils.logging import configure_logging, get_logger
from src.utils.reports import build_report, write_csv, write_json
from src.validation.cross_check import cross_check

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

FIDELITY_TRIALS = 10_000
MAX_DENSITY_ROWS = 2001
CNOT_ROWS = (("H", "H", "HH"), ("H", "V", "HV"), ("V", "H", "VV"), ("V", "V", "VH"))
GATE_DEFAULTS = {"alpha": 100.0, "theta": 0.3}
VALIDATE_DEFAULTS = {"alpha": 2.0, "theta": 0.5}


class Command(str, Enum):
    DETECTOR = "detector"
    PARITY = "parity"
    BELL = "bell"
    CNOT = "cnot"
    SWEEP = "sweep"
    VALIDATE = "validate"


def parse_theta_range(text: str) -> List[float]:
    """``lo:hi:step`` inclusive of ``hi`` up to half a step."""
    try:
        lo, hi, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise InvalidInputError(f"theta range must look like lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise InvalidInputError(f"empty theta range {text!r}")
    count = int(math.floor((hi - lo) / step + 0.5)) + 1
    return [lo + k * step for k in range(count)]


class ExperimentSpec(BaseModel):
    """Everything that determines a run's numbers; embedded in its report."""

    model_config = ConfigDict(frozen=True, extra="forbid", alias_generator=to_camel, populate_by_name=True)

    command: Command
    alpha: float = Field(gt=0.0, le=MAX_ALPHA)
    theta: float = Field(gt=0.0, le=math.pi / 2)
    theta_range: Optional[str] = None
    noise_sigma: float = Field(default=0.0, ge=0.0)
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(ge=0, lt=2**64)
    input: Optional[str] = None
    quadrature: Quadrature = Quadrature.P
    basis: Basis = Basis.RECTILINEAR
    target_xd: float = Field(default=8.0, gt=0.0)
    extra_thetas: Tuple[float, ...] = (0.01,)
    grid_step: float = Field(default=1e-2, gt=0.0, le=1e-2)
    grid_span: float = Field(default=10.0, gt=0.0)
    engine: Literal["auto", "state", "batch"] = "auto"
    format: Literal["json", "csv"] = "json"
    jobs: int = Field(default=1, ge=1, exclude=True)
    out: Optional[str] = Field(default=None, exclude=True)

    @model_validator(mode="before")
    @classmethod
    def _command_defaults(cls, data: Any) -> Any:
        if isinstance(data, dict):
            defaults = VALIDATE_DEFAULTS if data.get("command") in (Command.VALIDATE, "validate") else GATE_DEFAULTS
            data = {**defaults, **{k: v for k, v in data.items() if v is not None}}
        return data

    @field_validator("trials", mode="before")
    @classmethod
    def _scientific_trials(cls, value: Any) -> Any:
        if isinstance(value, str):
            number = float(value)
            if not number.is_integer():
                raise ValueError(f"trial count must be integral, got {value}")
            return int(number)
        return value

    @model_validator(mode="after")
    def _sweep_needs_range(self) -> "ExperimentSpec":
        if self.command == Command.SWEEP and self.theta_range is None:
            raise ValueError("sweep needs --theta lo:hi:step")
        if self.theta_range is not None:
            parse_theta_range(self.theta_range)
        return self

    @property
    def gate(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "theta": self.theta, "noise_sigma": self.noise_sigma}


Results = Tuple[Dict[str, Any], List[Dict[str, Any]]]


def _mc(report: MonteCarloReport) -> Dict[str, Any]:
    return report.deterministic_dict()


def _noisy_gap_error(gap: float, noise_sigma: float) -> float:
    return misidentification_probability(gap / math.sqrt(1.0 + noise_sigma**2))


def _summary_row(name: str, report: MonteCarloReport, expected: float) -> Dict[str, Any]:
    lo, hi = report.wilson95
    return {
        "quantity": name,
        "trials": report.trials,
        "events": report.successes,
        "estimate": report.point_estimate,
        "wilson_lo": lo,
        "wilson_hi": hi,
        "expected": expected,
    }


def run_detector(spec: ExperimentSpec) -> Results:
    model = error_model(spec.alpha, spec.theta)
    gap = model.snr if spec.quadrature == Quadrature.P else model.xd
    expected = _noisy_gap_error(gap, spec.noise_sigma)
    experiment = DetectorExperiment(**spec.gate, quadrature=spec.quadrature)
    mc = run_trials(experiment, spec.trials, spec.seed, spec.jobs, spec.engine)
    lo, hi = mc.wilson95
    results = {
        "errorModel": model.model_dump(by_alias=True),
        "monteCarlo": _mc(mc),
        "expected": expected,
        "withinWilson95": lo <= expected <= hi,
    }
    return results, [_summary_row("detector_error", mc, expected)]


def _forced_peak_fidelities(cfg: GateConfig) -> Dict[str, float]:
    """Parity gate on |D⟩|D⟩ with the outcome pinned to each peak centre."""
    start = new_product_state([(math.sqrt(0.5), math.sqrt(0.5))] * 2)
    fids = {}
    for name, x, target in (
        ("even", 2.0 * cfg.alpha, BellLabel.PHI_PLUS),
        ("odd", 2.0 * cfg.alpha * math.cos(cfg.theta), BellLabel.PSI_PLUS),
    ):
        _, post = parity_gate(start, 0, 1, Basis.RECTILINEAR, cfg, None, forced_x=x)
        fids[name] = fidelity(post, bell_state(target)).value
    return fids


def _parity_density_rows(spec: ExperimentSpec) -> List[Dict[str, Any]]:
    state = new_product_state([(math.sqrt(0.5), math.sqrt(0.5))] * 2)
    state, probe = allocate_probe(state, spec.alpha)
    state = conditional_kerr(state, 0, PolLabel.H, probe, spec.theta)
    state = conditional_kerr(state, 1, PolLabel.H, probe, -spec.theta)
    grid = outcome_grid(state, probe, step=spec.grid_step, span=spec.grid_span)
    if len(grid) > MAX_DENSITY_ROWS:
        grid = np.linspace(grid[0], grid[-1], MAX_DENSITY_ROWS)
    return [{"x": float(x), "density": float(p)} for x, p in zip(grid, density_values(state, probe, grid))]


def run_parity(spec: ExperimentSpec) -> Results:
    model = error_model(spec.alpha, spec.theta)
    expected = _noisy_gap_error(model.xd, spec.noise_sigma)
    herald = run_trials(ParityErrorExperiment(**spec.gate, basis=spec.basis), spec.trials, spec.seed, spec.jobs, spec.engine)
    conditional = run_trials(
        ParityFidelityExperiment(**spec.gate),
        min(spec.trials, FIDELITY_TRIALS),
        spec.seed,
        spec.jobs,
    )
    lo, hi = herald.wilson95
    results = {
        "errorModel": model.model_dump(by_alias=True),
        "heraldError": _mc(herald),
        "expected": expected,
        "withinWilson95": lo <= expected <= hi,
        "conditionalFidelity": _mc(conditional),
        "forcedPeakFidelity": _forced_peak_fidelities(GateConfig(**spec.gate)),
    }
    return results, _parity_density_rows(spec) if spec.format == "csv" else []


def run_bell(spec: ExperimentSpec) -> Results:
    try:
        inputs = [BellLabel(spec.input)] if spec.input else list(BellLabel)
    except ValueError:
        raise InvalidInputError(f"unknown Bell label {spec.input!r}; use one of {[b.value for b in BellLabel]}") from None
    confusion: Dict[str, Dict[str, float]] = {}
    fidelities: Dict[str, Optional[float]] = {}
    rows = []
    for label in inputs:
        mc = run_trials(BellExperiment(**spec.gate, input=label), spec.trials, spec.seed, spec.jobs)
        confusion[label.value] = {out.value: mc.categories.get(out.value, 0) / mc.trials for out in BellLabel}
        fidelities[label.value] = mc.mean_value
        rows.extend(
            {"input": label.value, "reported": out, "fraction": frac} for out, frac in confusion[label.value].items()
        )
    model = error_model(spec.alpha, spec.theta)
    results = {
        "errorModel": model.model_dump(by_alias=True),
        "confusion": confusion,
        "meanPostFidelity": fidelities,
        "minDiagonal": min(confusion[k][k] for k in confusion),
    }
    return results, rows


def _cnot_row(spec: ExperimentSpec, control: str, target: str, bound: float) -> Dict[str, Any]:
    mc = run_trials(CnotExperiment(**spec.gate, control=control, target=target), spec.trials, spec.seed, spec.jobs)
    return {
        "control": control,
        "target": target,
        "trials": mc.trials,
        "failures": mc.successes,
        "failureRate": mc.point_estimate,
        "meanFidelity": mc.mean_value,
        "withinBound": mc.point_estimate <= bound + mc.three_sigma(bound),
        "heralds": mc.categories,
    }


def run_cnot(spec: ExperimentSpec) -> Results:
    model = error_model(spec.alpha, spec.theta)
    # two parity heralds and the ancilla readout, each with gap X_d
    bound = min(1.0, 3.0 * _noisy_gap_error(model.xd, spec.noise_sigma))
    table = []
    for control, target, expected in CNOT_ROWS:
        row = _cnot_row(spec, control, target, bound)
        row["expected"] = expected
        table.append(row)
    entangling = _cnot_row(spec, "D", "H", bound)
    entangling["expected"] = "phi+"
    custom = []
    if spec.input:
        control, _, target = spec.input.partition(":")
        parse_qubit(control)
        parse_qubit(target)
        custom.append(_cnot_row(spec, control, target, bound))
    results = {
        "errorModel": model.model_dump(by_alias=True),
        "analyticFailureBound": bound,
        "truthTable": table,
        "entangling": entangling,
        "custom": custom,
        "allRowsCorrect": all(row["withinBound"] for row in table),
    }
    rows = [{k: v for k, v in row.items() if k != "heralds"} for row in table + [entangling] + custom]
    return results, rows


def run_sweep(spec: ExperimentSpec) -> Results:
    thetas = parse_theta_range(spec.theta_range) + list(spec.extra_thetas)
    estimates = resource_sweep(thetas, spec.target_xd)
    rows = [e.model_dump(by_alias=True) for e in estimates]
    return {"targetXd": spec.target_xd, "rows": rows}, rows


def run_validate(spec: ExperimentSpec) -> Results:
    report = cross_check(spec.alpha, spec.theta)
    results = report.model_dump(by_alias=True, exclude={"wall_time"})
    return results, [case.model_dump(by_alias=True) for case in report.cases]


RUNNERS = {
    Command.DETECTOR: run_detector,
    Command.PARITY: run_parity,
    Command.BELL: run_bell,
    Command.CNOT: run_cnot,
    Command.SWEEP: run_sweep,
    Command.VALIDATE: run_validate,
}


def run(spec: ExperimentSpec) -> int:
    """Execute one spec, write its outputs, return the exit status."""
    started = time.perf_counter()
    logger.info("run start", command=spec.command.value, seed=spec.seed, trials=spec.trials)
    results, rows = RUNNERS[spec.command](spec)
    report = build_report(spec.model_dump(mode="json", by_alias=True), results, time.perf_counter() - started, __version__)
    logger.info("report ready", command=spec.command.value, digest=report["metadata"]["digest"])

    if spec.format == "csv":
        write_csv(rows, spec.out)
        if spec.out in (None, "-"):
            write_json(report, None, stream=sys.stderr)
        else:
            write_json(report, Path(spec.out).with_suffix(".json"))
    else:
        write_json(report, spec.out)

    if spec.command == Command.VALIDATE and not results["passed"]:
        logger.warning("engine and oracle disagree", max_density_delta=results["maxDensityDelta"])
        return EXIT_CHECK_FAILED
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kerrsim", description="Weak cross-Kerr + homodyne gate simulator")
    parser.add_argument("--version", action="version", version=f"kerrsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--alpha", type=float, help="probe amplitude (real)")
    common.add_argument("--noise-sigma", dest="noise_sigma", type=float, help="homodyne detector noise")
    common.add_argument("--trials", type=str, help="Monte Carlo trials; accepts 1e6")
    common.add_argument("--seed", type=int, help="master seed (default: KERRSIM_SEED)")
    common.add_argument("--out", type=str, help="output path; '-' or omitted for stdout")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--config", type=str, help="JSON/YAML file of experiment fields")
    common.add_argument("--jobs", type=int, help="worker processes; never changes results")
    common.add_argument("--engine", choices=("auto", "state", "batch"))
    common.add_argument("--log-level", dest="log_level", type=str)
    common.add_argument("--input", type=str, help="input state descriptor for the command")

    single_theta = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    single_theta.add_argument("--theta", type=float, help="Kerr phase per photon, (0, π/2]")

    detector = sub.add_parser("detector", parents=[common, single_theta], help="QND photon presence detector")
    detector.add_argument("--quadrature", choices=[q.value for q in Quadrature], default=argparse.SUPPRESS)

    parity = sub.add_parser("parity", parents=[common, single_theta], help="two-qubit parity gate")
    parity.add_argument("--basis", choices=[b.value for b in Basis], default=argparse.SUPPRESS)

    sub.add_parser("bell", parents=[common, single_theta], help="non-destructive Bell analyzer")
    sub.add_parser("cnot", parents=[common, single_theta], help="ancilla-assisted CNOT truth table")

    sweep = sub.add_parser("sweep", parents=[common], help="probe resources against θ")
    sweep.add_argument("--theta", dest="theta_range", type=str, default=argparse.SUPPRESS, help="lo:hi:step")
    sweep.add_argument("--target-xd", dest="target_xd", type=float, default=argparse.SUPPRESS)
    sweep.add_argument("--extra-theta", dest="extra_thetas", type=float, action="append", default=argparse.SUPPRESS)

    sub.add_parser("validate", parents=[common, single_theta], help="branch engine vs Fock oracle")
    return parser


def _resolve(args: argparse.Namespace) -> Tuple[ExperimentSpec, str]:
    settings = load_settings()
    flags = vars(args).copy()
    command = flags.pop("command")
    config_path = flags.pop("config", None)
    log_level = flags.pop("log_level", settings.log_level)

    values: Dict[str, Any] = {
        "seed": settings.seed,
        "jobs": settings.jobs,
        "grid_step": settings.grid_step,
        "grid_span": settings.grid_span,
    }
    if config_path:
        values.update(load_config_file(config_path))
    values.update(flags)
    values["command"] = command
    try:
        return ExperimentSpec(**values), log_level
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment spec: {exc}") from exc


def _emit_error(exc: KerrSimError) -> None:
    sys.stdout.write(json.dumps({"error": exc.to_dict()}, indent=2) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    try:
        args = build_parser().parse_args(argv)
        spec, log_level = _resolve(args)
        configure_logging(log_level, load_settings().log_json)
        return run(spec)
    except (ConfigError, InvalidInputError) as exc:
        _emit_error(exc)
        return EXIT_USAGE
    except ValidationError as exc:
        _emit_error(InvalidInputError(str(exc)))
        return EXIT_USAGE
    except (ImpossibleOutcomeError, NumericalError, TrialFailure) as exc:
        _emit_error(exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
