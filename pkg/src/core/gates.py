"""
Composite devices built from cross-Kerr kicks, X homodyne and feed-forward:
QND photon detectors, the two-qubit parity gate, the non-destructive Bell
analyzer and the ancilla-assisted CNOT.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.random import Generator, default_rng
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, computed_field, model_validator

from src.core.errors import InvalidInputError, NumericalError
from src.core.homodyne import (
    HomodyneRecord,
    Parity,
    kernel_phase,
    measure,
    peak_midpoint,
    peak_separation,
    threshold_classify,
)
from src.core.hybrid_state import (
    HADAMARD,
    MAX_ALPHA,
    PAULI_X,
    PAULI_Z,
    HybridState,
    PolLabel,
    ProbeId,
    QubitId,
    Unitary2,
    allocate_probe,
    append_qubit,
    apply_1q,
    conditional_kerr,
    from_label_amplitudes,
    gram,
    remove_qubit,
    rotate_probe,
)
from src.utils.logging import get_logger

logger = get_logger(__name__)

MIN_SAFE_SEPARATION = 8.0
MIN_RAIL_WEIGHT = 1e-12
BALANCE_TOL = 1e-9
ANCILLA_STATE = (1 / np.sqrt(2.0), 1 / np.sqrt(2.0))


class Basis(str, Enum):
    RECTILINEAR = "rectilinear"
    DIAGONAL = "diagonal"


class Quadrature(str, Enum):
    X = "x"
    P = "p"


class BellLabel(str, Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


BELL_BY_PARITIES: Dict[Tuple[Parity, Parity], BellLabel] = {
    (Parity.EVEN, Parity.EVEN): BellLabel.PHI_PLUS,
    (Parity.EVEN, Parity.ODD): BellLabel.PHI_MINUS,
    (Parity.ODD, Parity.EVEN): BellLabel.PSI_PLUS,
    (Parity.ODD, Parity.ODD): BellLabel.PSI_MINUS,
}
PARITIES_BY_BELL = {label: pair for pair, label in BELL_BY_PARITIES.items()}

_BELL_AMPLITUDES = {
    BellLabel.PHI_PLUS: {"HH": 1.0, "VV": 1.0},
    BellLabel.PHI_MINUS: {"HH": 1.0, "VV": -1.0},
    BellLabel.PSI_PLUS: {"HV": 1.0, "VH": 1.0},
    BellLabel.PSI_MINUS: {"HV": 1.0, "VH": -1.0},
}


def bell_state(label: BellLabel) -> HybridState:
    """Two-qubit Bell state, e.g. Φ⁺ = (|HH⟩ + |VV⟩)/√2."""
    return from_label_amplitudes(_BELL_AMPLITUDES[BellLabel(label)])


class GateConfig(BaseModel):
    """Probe amplitude, Kerr angle, detector noise and seed shared by the devices."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(gt=0.0, le=MAX_ALPHA)
    theta: float = Field(gt=0.0, le=np.pi / 2)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    _stream: Optional[Generator] = PrivateAttr(default=None)

    def stream(self, rng: Optional[Generator]) -> Generator:
        """``rng`` when given, else the config's own stream seeded from ``seed``."""
        if rng is not None:
            return rng
        if self._stream is None:
            self._stream = default_rng(self.seed)
        return self._stream

    @computed_field
    @property
    def xd(self) -> float:
        return peak_separation(self.alpha, self.theta)

    @computed_field
    @property
    def x0(self) -> float:
        return peak_midpoint(self.alpha, self.theta)

    @computed_field
    @property
    def low_separation(self) -> bool:
        return self.xd < MIN_SAFE_SEPARATION

    @computed_field
    @property
    def phase_resolution(self) -> float:
        """2π/(α sin θ): the homodyne precision the feed-forward phase needs."""
        return 2.0 * np.pi / (self.alpha * np.sin(self.theta))

    @model_validator(mode="after")
    def _warn_regime(self) -> "GateConfig":
        if self.low_separation:
            logger.warning("peak separation below 8, heralds unreliable", xd=self.xd, alpha=self.alpha, theta=self.theta)
        if self.noise_sigma >= 0.1 * self.phase_resolution:
            logger.warning(
                "homodyne noise comparable to phase resolution, feed-forward will leave residual phase",
                noise_sigma=self.noise_sigma,
                phase_resolution=self.phase_resolution,
            )
        return self


@dataclass(frozen=True)
class Correction:
    """A feed-forward unitary applied to one qubit."""

    qubit: QubitId
    unitary: Unitary2

    def to_dict(self) -> dict:
        return {"qubit": self.qubit, **self.unitary.describe()}


@dataclass(frozen=True)
class ParityOutcome:
    parity: Parity
    record: HomodyneRecord
    basis: Basis = Basis.RECTILINEAR
    corrections: Tuple[Correction, ...] = ()

    def to_dict(self) -> dict:
        return {
            "parity": self.parity.value,
            "basis": self.basis.value,
            "record": self.record.to_dict(),
            "corrections": [c.to_dict() for c in self.corrections],
        }


@dataclass(frozen=True)
class DetectionOutcome:
    photon_present: bool
    polarization: Optional[PolLabel] = None
    records: Tuple[HomodyneRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "photonPresent": self.photon_present,
            "polarization": self.polarization.name if self.polarization is not None else None,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass(frozen=True)
class BellOutcome:
    label: BellLabel
    parities: Tuple[ParityOutcome, ParityOutcome]


@dataclass(frozen=True)
class CnotOutcome:
    parities: Tuple[ParityOutcome, ParityOutcome]
    ancilla: DetectionOutcome
    corrections: Tuple[Correction, ...] = field(default=())

    @property
    def heralds(self) -> str:
        """Compact herald string, e.g. ``even/odd/V``."""
        return f"{self.parities[0].parity.value}/{self.parities[1].parity.value}/{self.ancilla.polarization.name}"


def _require_photon(state: HybridState, qubit: QubitId, what: str, allow_vac_branches: bool = False) -> None:
    state.check_qubit(qubit)
    column = state.labels[:, qubit]
    if allow_vac_branches:
        if np.all(column == PolLabel.VAC):
            raise InvalidInputError(f"{what}: qubit {qubit} holds no photon in any branch")
    elif np.any(column == PolLabel.VAC):
        raise InvalidInputError(f"{what}: qubit {qubit} has a vacuum component")


def _forced(forced_x: Optional[Sequence[Optional[float]]], index: int) -> Optional[float]:
    if forced_x is None:
        return None
    return forced_x[index] if index < len(forced_x) else None


def _apply(state: HybridState, corrections: List[Correction], qubit: QubitId, u: Unitary2) -> HybridState:
    corrections.append(Correction(qubit, u))
    return apply_1q(state, qubit, u)


def rail_balance(state: HybridState, qubit: QubitId) -> Optional[float]:
    """p(H) / (p(H) + p(V)) on ``qubit``; None when no photon branch is left."""
    state.check_qubit(qubit)
    overlaps = gram(state, state)
    column = state.labels[:, qubit]

    def weight(label: PolLabel) -> float:
        sel = column == label
        w = state.weights[sel]
        return float(np.real(w.conj() @ overlaps[np.ix_(sel, sel)] @ w))

    h, v = weight(PolLabel.H), weight(PolLabel.V)
    if h + v <= MIN_RAIL_WEIGHT:
        return None
    return h / (h + v)


def presence_probe(
    state: HybridState, qubit: QubitId, cfg: GateConfig, quadrature: Quadrature = Quadrature.X
) -> Tuple[HybridState, ProbeId]:
    """State just before the presence detector's homodyne: both rails kicked by θ."""
    state.check_qubit(qubit)
    state, probe = allocate_probe(state, cfg.alpha)
    state = conditional_kerr(state, qubit, PolLabel.H, probe, cfg.theta)
    state = conditional_kerr(state, qubit, PolLabel.V, probe, cfg.theta)
    if Quadrature(quadrature) == Quadrature.P:
        state = rotate_probe(state, probe, -np.pi / 2)
    return state, probe


def presence_mask(x, cfg: GateConfig, quadrature: Quadrature = Quadrature.X) -> np.ndarray:
    """Vectorized presence decision on reported outcomes."""
    x = np.asarray(x, dtype=np.float64)
    if Quadrature(quadrature) == Quadrature.P:
        return x >= cfg.alpha * np.sin(cfg.theta)
    return x < cfg.x0


def qnd_presence_detect(
    state: HybridState,
    qubit: QubitId,
    cfg: GateConfig,
    rng: Optional[Generator],
    quadrature: Quadrature = Quadrature.X,
    forced_x: Optional[float] = None,
) -> Tuple[DetectionOutcome, HybridState]:
    """Polarization-preserving photon-presence QND detector.

    Both rails kick one shared probe by θ, so the probe only learns whether a
    photon is there. X readout: present iff x < X₀. P readout (probe phase
    shifted by −π/2 before the X measurement): present iff y ≥ α sin θ.
    The H/V balance of the qubit is checked to survive the readout.
    """
    quadrature = Quadrature(quadrature)
    balance_before = rail_balance(state, qubit)
    state, probe = presence_probe(state, qubit, cfg, quadrature)

    absent_amp = complex(cfg.alpha) * (-1j if quadrature == Quadrature.P else 1.0)
    present_amp = absent_amp * np.exp(1j * cfg.theta)

    rng = cfg.stream(rng) if forced_x is None else rng
    _, x, state = measure(state, probe, rng, cfg.noise_sigma, forced_x)
    present = bool(presence_mask(x, cfg, quadrature))

    phi = kernel_phase(x, present_amp) - kernel_phase(x, absent_amp)
    if present:
        state = apply_1q(state, qubit, Unitary2.phase(-phi, -phi, name="presence-ff"))

    balance_after = rail_balance(state, qubit)
    if balance_before is not None and balance_after is not None:
        if abs(balance_after - balance_before) > BALANCE_TOL:
            logger.warning("presence detector disturbed polarization", before=balance_before, after=balance_after)
            raise NumericalError(f"polarization balance moved from {balance_before:.12g} to {balance_after:.12g}")

    record = HomodyneRecord(probe=probe, x=x, phi=phi if present else 0.0, noise_sigma=cfg.noise_sigma, forced=forced_x is not None)
    logger.debug("presence detect", qubit=qubit, present=present, x=x, quadrature=quadrature.value)
    return DetectionOutcome(photon_present=present, records=(record,)), state


def qnd_polarization_measure(
    state: HybridState,
    qubit: QubitId,
    cfg: GateConfig,
    rng: Optional[Generator],
    forced_x: Optional[float] = None,
) -> Tuple[DetectionOutcome, HybridState]:
    """QND readout of H vs V: Kerr on the H rail only, H iff x < X₀."""
    _require_photon(state, qubit, "polarization measurement", allow_vac_branches=True)
    state, probe = allocate_probe(state, cfg.alpha)
    state = conditional_kerr(state, qubit, PolLabel.H, probe, cfg.theta)
    rng = cfg.stream(rng) if forced_x is None else rng
    _, x, state = measure(state, probe, rng, cfg.noise_sigma, forced_x)

    polarization = PolLabel.H if x < cfg.x0 else PolLabel.V
    phi = kernel_phase(x, cfg.alpha * np.exp(1j * cfg.theta)) - kernel_phase(x, cfg.alpha)
    if polarization == PolLabel.H:
        state = apply_1q(state, qubit, Unitary2.phase(-phi, 0.0, name="polarization-ff"))
    record = HomodyneRecord(
        probe=probe,
        x=x,
        phi=phi if polarization == PolLabel.H else 0.0,
        noise_sigma=cfg.noise_sigma,
        forced=forced_x is not None,
    )
    logger.debug("polarization measure", qubit=qubit, polarization=polarization.name, x=x)
    return DetectionOutcome(photon_present=True, polarization=polarization, records=(record,)), state


def parity_probe(
    state: HybridState, q1: QubitId, q2: QubitId, basis: Basis, cfg: GateConfig
) -> Tuple[HybridState, ProbeId]:
    """State just before the parity gate's homodyne: +θ on q1's H rail, −θ on q2's."""
    if q1 == q2:
        raise InvalidInputError("parity gate needs two distinct qubits")
    _require_photon(state, q1, "parity gate")
    _require_photon(state, q2, "parity gate")
    if Basis(basis) == Basis.DIAGONAL:
        state = apply_1q(apply_1q(state, q1, HADAMARD), q2, HADAMARD)
    state, probe = allocate_probe(state, cfg.alpha)
    state = conditional_kerr(state, q1, PolLabel.H, probe, cfg.theta)
    state = conditional_kerr(state, q2, PolLabel.H, probe, -cfg.theta)
    return state, probe


def parity_gate(
    state: HybridState,
    q1: QubitId,
    q2: QubitId,
    basis: Basis,
    cfg: GateConfig,
    rng: Optional[Generator],
    forced_x: Optional[float] = None,
) -> Tuple[ParityOutcome, HybridState]:
    """Non-destructive parity check of (q1, q2).

    Rectilinear even = span{HH, VV}; diagonal runs the same check between
    Hadamards (the 45° PBS). Odd heralds get the kernel-derived phases removed
    by a phase shifter on each qubit's V rail.
    """
    basis = Basis(basis)
    state, probe = parity_probe(state, q1, q2, basis, cfg)
    rng = cfg.stream(rng) if forced_x is None else rng
    _, x, state = measure(state, probe, rng, cfg.noise_sigma, forced_x)
    parity = threshold_classify(x, cfg.alpha, cfg.theta)

    corrections: List[Correction] = []
    phi = 0.0
    if parity == Parity.ODD:
        even_phase = kernel_phase(x, cfg.alpha)
        phi = kernel_phase(x, cfg.alpha * np.exp(1j * cfg.theta)) - even_phase
        phi_vh = kernel_phase(x, cfg.alpha * np.exp(-1j * cfg.theta)) - even_phase
        state = _apply(state, corrections, q1, Unitary2.phase(0.0, -phi_vh, name="parity-ff"))
        state = _apply(state, corrections, q2, Unitary2.phase(0.0, -phi, name="parity-ff"))

    if basis == Basis.DIAGONAL:
        state = apply_1q(apply_1q(state, q1, HADAMARD), q2, HADAMARD)

    record = HomodyneRecord(probe=probe, x=x, phi=phi, noise_sigma=cfg.noise_sigma, forced=forced_x is not None)
    logger.debug("parity gate", q1=q1, q2=q2, basis=basis.value, parity=parity.value, x=x)
    return ParityOutcome(parity=parity, record=record, basis=basis, corrections=tuple(corrections)), state


def bell_measure(
    state: HybridState,
    q1: QubitId,
    q2: QubitId,
    cfg: GateConfig,
    rng: Optional[Generator],
    forced_x: Optional[Sequence[Optional[float]]] = None,
) -> Tuple[BellOutcome, HybridState]:
    """Rectilinear then diagonal parity gate; the parity pair names the Bell state."""
    first, state = parity_gate(state, q1, q2, Basis.RECTILINEAR, cfg, rng, _forced(forced_x, 0))
    second, state = parity_gate(state, q1, q2, Basis.DIAGONAL, cfg, rng, _forced(forced_x, 1))
    label = BELL_BY_PARITIES[(first.parity, second.parity)]
    logger.debug("bell measure", q1=q1, q2=q2, label=label.value)
    return BellOutcome(label=label, parities=(first, second)), state


def cnot(
    state: HybridState,
    control: QubitId,
    target: QubitId,
    cfg: GateConfig,
    rng: Optional[Generator],
    forced_x: Optional[Sequence[Optional[float]]] = None,
) -> Tuple[HybridState, CnotOutcome]:
    """CNOT from two parity gates, one (|H⟩+|V⟩)/√2 ancilla and a QND ancilla readout.

    ``forced_x`` may pin the three homodyne outcomes (parity 1, parity 2,
    ancilla readout). The ancilla leaves the register at the end.
    """
    if control == target:
        raise InvalidInputError("cnot needs distinct control and target")
    _require_photon(state, control, "cnot")
    _require_photon(state, target, "cnot")

    corrections: List[Correction] = []
    state, ancilla = append_qubit(state, ANCILLA_STATE)

    first, state = parity_gate(state, control, ancilla, Basis.RECTILINEAR, cfg, rng, _forced(forced_x, 0))
    if first.parity == Parity.ODD:
        state = _apply(state, corrections, ancilla, PAULI_X)

    second, state = parity_gate(state, ancilla, target, Basis.DIAGONAL, cfg, rng, _forced(forced_x, 1))
    if second.parity == Parity.ODD:
        # bit flip of the ancilla in the {D, D̄} basis, sign flip V → −V on the control
        state = _apply(state, corrections, ancilla, PAULI_Z)
        state = _apply(state, corrections, control, PAULI_Z)

    readout, state = qnd_polarization_measure(state, ancilla, cfg, rng, _forced(forced_x, 2))
    if readout.polarization == PolLabel.V:
        state = _apply(state, corrections, target, PAULI_X)
    state = remove_qubit(state, ancilla, readout.polarization)

    outcome = CnotOutcome(parities=(first, second), ancilla=readout, corrections=tuple(corrections))
    logger.debug("cnot", control=control, target=target, heralds=outcome.heralds, branches=state.branch_count)
    return state, outcome
