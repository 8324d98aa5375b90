"""
Branch engine vs truncated Fock oracle.

Every corpus state is pushed through the same cross-Kerr coupling in both
simulators; the X densities and the posteriors after a projection must agree.
"""

import math
import time
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from src.core.homodyne import density_values, outcome_grid, peak_midpoint, project
from src.core.hybrid_state import (
    HybridState,
    PolLabel,
    allocate_probe,
    conditional_kerr,
    from_label_amplitudes,
    new_product_state,
)
from src.utils.logging import get_logger
from src.validation.fock_oracle import (
    FockVector,
    apply_cross_kerr,
    coherent_state,
    oracle_density,
    oracle_project,
    qubit_signal,
    tensor,
    truncation_for,
)

logger = get_logger(__name__)

DENSITY_TOL = 1e-8
FIDELITY_TOL = 1e-10
GRID_POINTS = 1601

_S = 1.0 / math.sqrt(2.0)

SINGLE_QUBIT_CORPUS: Dict[str, Tuple[complex, complex]] = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_S, _S),
    "A": (_S, -_S),
    "R": (_S, 1j * _S),
    "L": (_S, -1j * _S),
    "pi/8": (math.cos(math.pi / 8), math.sin(math.pi / 8)),
    "-pi/8": (math.cos(math.pi / 8), -math.sin(math.pi / 8)),
    "0.6,0.8i": (0.6, 0.8j),
    "0.8,-0.6": (0.8, -0.6),
    "pi/3 e^(i pi/4)": (math.cos(math.pi / 3), np.exp(1j * math.pi / 4) * math.sin(math.pi / 3)),
    "0.1 weight": (math.sqrt(0.1), math.sqrt(0.9) * np.exp(2j)),
}

TWO_QUBIT_CORPUS: Dict[str, Dict[str, complex]] = {
    "DD": {"HH": 0.5, "HV": 0.5, "VH": 0.5, "VV": 0.5},
    "HV": {"HV": 1.0},
    "RA": {"HH": 0.5, "HV": -0.5, "VH": 0.5j, "VV": -0.5j},
    "phi+": {"HH": 1.0, "VV": 1.0},
    "psi-": {"HV": 1.0, "VH": -1.0},
    "skewed": {"HH": 0.3, "HV": 0.5j, "VH": -0.4, "VV": 0.2 + 0.1j},
}


class CaseResult(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)

    name: str
    kind: Literal["single", "parity"]
    density_delta: float
    posterior_fidelity: float


class ValidationReport(BaseModel):
    """Worst-case agreement over the corpus."""

    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)

    alpha: float
    theta: float
    cutoff: int
    density_tolerance: float = DENSITY_TOL
    fidelity_tolerance: float = FIDELITY_TOL
    max_density_delta: float
    min_posterior_fidelity: float
    passed: bool
    wall_time: float = Field(default=0.0, ge=0.0)
    cases: List[CaseResult]


def _to_signal_array(state: HybridState) -> np.ndarray:
    """Probe-free engine state as H-rail occupations, index 1 for H and 0 for V."""
    out = np.zeros((2,) * state.register_size, dtype=np.complex128)
    for label, weight in state.label_amplitudes().items():
        out[tuple(1 if lab == PolLabel.H else 0 for lab in label)] += weight
    return out


def _engine_signal(state: HybridState) -> FockVector:
    return FockVector(_to_signal_array(state))


def _overlap_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def _compare(
    name: str,
    kind: str,
    engine: HybridState,
    probe: int,
    joint: FockVector,
    points: Sequence[float],
) -> CaseResult:
    grid = np.linspace(*_grid_bounds(engine, probe), GRID_POINTS)
    delta = float(np.max(np.abs(density_values(engine, probe, grid) - oracle_density(joint, grid).values)))
    worst = 1.0
    for x in points:
        ours = _to_signal_array(project(engine, probe, x))
        theirs = oracle_project(joint, x).amplitudes
        worst = min(worst, _overlap_fidelity(ours, theirs))
    logger.debug("cross check case", name=name, kind=kind, density_delta=delta, posterior_fidelity=worst)
    return CaseResult(name=name, kind=kind, density_delta=delta, posterior_fidelity=worst)


def _grid_bounds(state: HybridState, probe: int) -> Tuple[float, float]:
    grid = outcome_grid(state, probe, step=1e-2, span=8.0)
    return float(grid[0]), float(grid[-1])


def check_single_qubit(name: str, amps: Tuple[complex, complex], alpha: float, theta: float) -> CaseResult:
    """Kerr on the H rail of one qubit."""
    engine, probe = allocate_probe(new_product_state([amps]), alpha)
    engine = conditional_kerr(engine, 0, PolLabel.H, probe, theta)

    probe_vec = coherent_state(alpha, truncation_for(alpha))
    joint = apply_cross_kerr(tensor(qubit_signal(*amps), probe_vec), 0, theta)
    x0 = peak_midpoint(alpha, theta)
    return _compare(name, "single", engine, probe, joint, (x0 - 2.0, x0, x0 + 2.0))


def check_parity_coupling(name: str, amplitudes: Dict[str, complex], alpha: float, theta: float) -> CaseResult:
    """+θ from the first qubit's H rail and −θ from the second's, as inside the parity gate."""
    start = from_label_amplitudes(amplitudes)
    engine, probe = allocate_probe(start, alpha)
    engine = conditional_kerr(engine, 0, PolLabel.H, probe, theta)
    engine = conditional_kerr(engine, 1, PolLabel.H, probe, -theta)

    joint = tensor(_engine_signal(start), coherent_state(alpha, truncation_for(alpha)))
    joint = apply_cross_kerr(apply_cross_kerr(joint, 0, theta), 1, -theta)
    x_even, x_odd = 2.0 * alpha, 2.0 * alpha * math.cos(theta)
    return _compare(name, "parity", engine, probe, joint, (x_odd, 0.5 * (x_even + x_odd), x_even))


def cross_check(alpha: float = 2.0, theta: float = 0.5) -> ValidationReport:
    """Run the full corpus and summarize the worst deltas."""
    started = time.perf_counter()
    cases = [check_single_qubit(name, amps, alpha, theta) for name, amps in SINGLE_QUBIT_CORPUS.items()]
    cases += [check_parity_coupling(name, amps, alpha, theta) for name, amps in TWO_QUBIT_CORPUS.items()]
    max_delta = max(c.density_delta for c in cases)
    min_fid = min(c.posterior_fidelity for c in cases)
    passed = max_delta <= DENSITY_TOL and min_fid >= 1.0 - FIDELITY_TOL
    report = ValidationReport(
        alpha=alpha,
        theta=theta,
        cutoff=truncation_for(alpha),
        max_density_delta=max_delta,
        min_posterior_fidelity=min_fid,
        passed=passed,
        wall_time=time.perf_counter() - started,
        cases=cases,
    )
    logger.info("cross check finished", passed=passed, max_density_delta=max_delta, min_posterior_fidelity=min_fid)
    return report
