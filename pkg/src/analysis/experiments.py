"""
Experiment descriptors for ``run_trials``.

Each descriptor is a pydantic model (serializable into reports and picklable
into worker processes). ``run_trial`` simulates one trial on the branch
engine. Where the outcome law is a Gaussian mixture over definite-herald
inputs, ``run_batch`` samples it vectorized from counter-based uniforms,
with the branch means read off the device's own pre-measurement state and
the device's own decision rule applied to the draws.
"""

import math
from functools import cached_property
from typing import Annotated, ClassVar, Literal, Optional, Tuple, Union

import numpy as np
from numpy.random import Generator
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.analysis.fidelity import fidelity
from src.analysis.monte_carlo import BatchResult, TrialResult
from src.core.errors import InvalidInputError
from src.core.gates import (
    BellLabel,
    Basis,
    GateConfig,
    Quadrature,
    bell_measure,
    bell_state,
    cnot,
    parity_gate,
    parity_probe,
    presence_mask,
    presence_probe,
    qnd_presence_detect,
)
from src.core.homodyne import Parity, even_mask, probe_means
from src.core.hybrid_state import MAX_ALPHA, HybridState, PolLabel, ProbeId, from_label_amplitudes, new_product_state
from src.utils.rng import counter_normals, counter_uniforms

_S = 1.0 / math.sqrt(2.0)

NAMED_QUBITS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_S, _S),
    "A": (_S, -_S),
    "R": (_S, 1j * _S),
    "L": (_S, -1j * _S),
}

_BASIS_INPUTS = (("H", "H"), ("H", "V"), ("V", "H"), ("V", "V"))
_DIAGONAL_INPUTS = (("D", "D"), ("D", "A"), ("A", "D"), ("A", "A"))
_EVEN_PICKS = (0, 3)
MEAN_TOL = 1e-9


def parse_qubit(text: str) -> Tuple[complex, complex]:
    """A named qubit (H, V, D, A, R, L) or an ``"a,b"`` pair of complex literals, normalized."""
    key = text.strip().upper()
    if key in NAMED_QUBITS:
        return NAMED_QUBITS[key]
    try:
        a, b = (complex(part.strip().replace(" ", "")) for part in text.split(","))
    except ValueError:
        raise InvalidInputError(f"cannot parse qubit {text!r}; use H/V/D/A/R/L or 'a,b'") from None
    total = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    if total == 0.0:
        raise InvalidInputError(f"qubit {text!r} has zero norm")
    return a / total, b / total


def herald_mean(state: HybridState, probe: ProbeId) -> float:
    """Outcome mean of a pre-measurement state whose branches share one probe amplitude."""
    means = probe_means(state, probe)
    if np.ptp(means) > MEAN_TOL * max(1.0, float(np.max(np.abs(means)))):
        raise InvalidInputError("vectorized sampling needs an input with a definite herald")
    return float(means[0])


class _GateExperiment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(gt=0.0, le=MAX_ALPHA)
    theta: float = Field(gt=0.0, le=math.pi / 2)
    noise_sigma: float = Field(default=0.0, ge=0.0)

    batch_capable: ClassVar[bool] = False

    @cached_property
    def config(self) -> GateConfig:
        return GateConfig(alpha=self.alpha, theta=self.theta, noise_sigma=self.noise_sigma)

    def run_batch(self, keys: np.ndarray) -> Optional[BatchResult]:
        return None

    def _noisy(self, keys: np.ndarray, means: np.ndarray) -> np.ndarray:
        x = means + counter_normals(keys, 1)
        if self.noise_sigma > 0:
            x = x + self.noise_sigma * counter_normals(keys, 2)
        return x


class DetectorExperiment(_GateExperiment):
    """Photon present or absent at random; event = detector misidentification."""

    kind: Literal["detector"] = "detector"
    quadrature: Quadrature = Quadrature.P
    presence_probability: float = Field(default=0.5, ge=0.0, le=1.0)

    batch_capable: ClassVar[bool] = True

    def run_trial(self, index: int, rng: Generator) -> TrialResult:
        present = bool(rng.random() < self.presence_probability)
        signal = new_product_state([NAMED_QUBITS["D"] if present else PolLabel.VAC])
        outcome, post = qnd_presence_detect(signal, 0, self.config, rng, self.quadrature)
        return TrialResult(
            event=outcome.photon_present != present,
            value=fidelity(post, signal).value,
            category="present" if outcome.photon_present else "absent",
        )

    @cached_property
    def batch_means(self) -> Tuple[float, float]:
        """(absent, present) outcome means taken from the detector's own pre-measurement state."""
        return tuple(
            herald_mean(*presence_probe(new_product_state([signal]), 0, self.config, self.quadrature))
            for signal in (PolLabel.VAC, NAMED_QUBITS["D"])
        )

    def run_batch(self, keys: np.ndarray) -> BatchResult:
        present = counter_uniforms(keys, 0) < self.presence_probability
        absent_mean, present_mean = self.batch_means
        x = self._noisy(keys, np.where(present, present_mean, absent_mean))
        return BatchResult(events=presence_mask(x, self.config, self.quadrature) != present)


class ParityErrorExperiment(_GateExperiment):
    """Uniformly random basis input of definite parity; event = wrong herald."""

    kind: Literal["parity_error"] = "parity_error"
    basis: Basis = Basis.RECTILINEAR

    batch_capable: ClassVar[bool] = True

    @property
    def inputs(self) -> Tuple[Tuple[str, str], ...]:
        return _BASIS_INPUTS if self.basis == Basis.RECTILINEAR else _DIAGONAL_INPUTS

    @cached_property
    def batch_means(self) -> np.ndarray:
        """Outcome mean per input, taken from the gate's own pre-measurement state."""
        states = (new_product_state([NAMED_QUBITS[name] for name in pair]) for pair in self.inputs)
        return np.array([herald_mean(*parity_probe(s, 0, 1, self.basis, self.config)) for s in states])

    def run_trial(self, index: int, rng: Generator) -> TrialResult:
        pick = int(rng.integers(4))
        truth = Parity.EVEN if pick in _EVEN_PICKS else Parity.ODD
        state = new_product_state([NAMED_QUBITS[name] for name in self.inputs[pick]])
        outcome, _ = parity_gate(state, 0, 1, self.basis, self.config, rng)
        return TrialResult(event=outcome.parity != truth, category=outcome.parity.value)

    def run_batch(self, keys: np.ndarray) -> BatchResult:
        pick = np.minimum((counter_uniforms(keys, 0) * 4).astype(np.intp), 3)
        even = np.isin(pick, _EVEN_PICKS)
        x = self._noisy(keys, self.batch_means[pick])
        return BatchResult(events=even_mask(x, self.alpha, self.theta) != even)


class ParityFidelityExperiment(_GateExperiment):
    """Uniform two-qubit input; value = fidelity to the heralded Bell target."""

    kind: Literal["parity_fidelity"] = "parity_fidelity"
    threshold: float = Field(default=1.0 - 1e-4, ge=0.0, le=1.0)

    def run_trial(self, index: int, rng: Generator) -> TrialResult:
        state = new_product_state([NAMED_QUBITS["D"], NAMED_QUBITS["D"]])
        outcome, post = parity_gate(state, 0, 1, Basis.RECTILINEAR, self.config, rng)
        target = bell_state(BellLabel.PHI_PLUS if outcome.parity == Parity.EVEN else BellLabel.PSI_PLUS)
        value = fidelity(post, target).value
        return TrialResult(event=value < self.threshold, value=value, category=outcome.parity.value)


class BellExperiment(_GateExperiment):
    """One Bell input; category = reported label, value = post-state fidelity to it."""

    kind: Literal["bell"] = "bell"
    input: BellLabel = BellLabel.PHI_PLUS

    def run_trial(self, index: int, rng: Generator) -> TrialResult:
        outcome, post = bell_measure(bell_state(self.input), 0, 1, self.config, rng)
        return TrialResult(
            event=outcome.label != self.input,
            value=fidelity(post, bell_state(outcome.label)).value,
            category=outcome.label.value,
        )


class CnotExperiment(_GateExperiment):
    """Product control/target input; value = fidelity to the ideal CNOT output."""

    kind: Literal["cnot"] = "cnot"
    control: str = "H"
    target: str = "H"
    threshold: float = Field(default=0.999, ge=0.0, le=1.0)

    @field_validator("control", "target")
    @classmethod
    def _parseable(cls, value: str) -> str:
        parse_qubit(value)
        return value

    def run_trial(self, index: int, rng: Generator) -> TrialResult:
        c, d = parse_qubit(self.control), parse_qubit(self.target)
        state = new_product_state([c, d])
        post, outcome = cnot(state, 0, 1, self.config, rng)
        value = fidelity(post, ideal_cnot_output(c, d)).value
        return TrialResult(event=value < self.threshold, value=value, category=outcome.heralds)


def ideal_cnot_output(control: Tuple[complex, complex], target: Tuple[complex, complex]):
    """c₀d₀|HH⟩ + c₀d₁|HV⟩ + c₁d₀|VV⟩ + c₁d₁|VH⟩."""
    (c0, c1), (d0, d1) = control, target
    return from_label_amplitudes({"HH": c0 * d0, "HV": c0 * d1, "VV": c1 * d0, "VH": c1 * d1})


ExperimentDescriptor = Annotated[
    Union[DetectorExperiment, ParityErrorExperiment, ParityFidelityExperiment, BellExperiment, CnotExperiment],
    Field(discriminator="kind"),
]
