"""
Branch representation of polarization qubits entangled with coherent probes.

A state is a finite sum  Σᵢ wᵢ |Lᵢ⟩ ⊗ₖ |αᵢₖ⟩  where Lᵢ assigns VAC/H/V to every
register slot and αᵢₖ is the coherent amplitude of live probe k in branch i.
Cross-Kerr kicks, probe phase shifters and single-qubit unitaries keep this
form closed, so the protocols are simulated exactly.

Probe amplitudes are stored in polar form (modulus, phase): Kerr kicks then
add phases, opposite kicks cancel exactly, and coherent overlaps between
large nearby amplitudes are evaluated without cancellation.
"""

import itertools
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import ImpossibleOutcomeError, InvalidInputError, NumericalError
from src.utils.logging import get_logger

logger = get_logger(__name__)

QubitId = int
ProbeId = int

NORM_TOL = 1e-10
UNITARY_TOL = 1e-12
MERGE_TOL = 1e-12
DROP_TOL = 1e-15
MAX_ALPHA = 1e6
MIN_LOG_NORM = np.log(1e-150)


class PolLabel(IntEnum):
    """Occupation of one dual-rail photonic mode."""

    VAC = 0
    H = 1
    V = 2


QubitSpec = Union[PolLabel, str, None, Tuple[complex, complex], Sequence[complex]]


@dataclass(frozen=True, eq=False)
class Unitary2:
    """2×2 unitary on the {H, V} subspace; VAC is left untouched."""

    matrix: np.ndarray
    name: str = "U"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape != (2, 2) or not np.all(np.isfinite(m)):
            raise InvalidInputError(f"{self.name}: expected a finite 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m.conj().T @ m - np.eye(2))) > UNITARY_TOL:
            raise InvalidInputError(f"{self.name}: matrix is not unitary within {UNITARY_TOL}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dagger(self) -> "Unitary2":
        return Unitary2(self.matrix.conj().T, name=f"{self.name}†")

    @classmethod
    def phase(cls, phi_h: float = 0.0, phi_v: float = 0.0, name: Optional[str] = None) -> "Unitary2":
        """diag(e^{iφ_H}, e^{iφ_V}): a pair of phase shifters on the two rails."""
        return cls(np.diag([np.exp(1j * phi_h), np.exp(1j * phi_v)]), name=name or f"P({phi_h:.6g},{phi_v:.6g})")

    def describe(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "matrix": [[[z.real, z.imag] for z in row] for row in self.matrix.tolist()],
        }


IDENTITY = Unitary2(np.eye(2), name="I")
PAULI_X = Unitary2(np.array([[0, 1], [1, 0]]), name="X")
PAULI_Z = Unitary2(np.diag([1, -1]), name="Z")
HADAMARD = Unitary2(np.array([[1, 1], [1, -1]]) / np.sqrt(2.0), name="Hd")


@dataclass(frozen=True)
class Branch:
    """One term of a HybridState."""

    label: Tuple[PolLabel, ...]
    probe_amps: Mapping[ProbeId, complex]
    weight: complex


@dataclass(frozen=True, eq=False)
class HybridState:
    """Immutable superposition of branches; build through the module functions."""

    labels: np.ndarray
    weights: np.ndarray
    moduli: np.ndarray
    phases: np.ndarray
    probes: Tuple[ProbeId, ...] = ()
    next_probe_id: ProbeId = 0

    def __post_init__(self):
        for name in ("labels", "weights", "moduli", "phases"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def register_size(self) -> int:
        return self.labels.shape[1]

    @property
    def branch_count(self) -> int:
        return self.labels.shape[0]

    @property
    def live_probes(self) -> FrozenSet[ProbeId]:
        return frozenset(self.probes)

    @property
    def amplitudes(self) -> np.ndarray:
        """Complex probe amplitudes, shape (branches, live probes)."""
        return self.moduli * np.exp(1j * self.phases)

    def probe_column(self, probe: ProbeId) -> int:
        try:
            return self.probes.index(probe)
        except ValueError:
            raise InvalidInputError(f"probe {probe} is not live (live: {sorted(self.probes)})") from None

    def check_qubit(self, qubit: QubitId) -> None:
        if not 0 <= qubit < self.register_size:
            raise InvalidInputError(f"qubit {qubit} outside register of size {self.register_size}")

    @property
    def branches(self) -> List[Branch]:
        amps = self.amplitudes
        return [
            Branch(
                label=tuple(PolLabel(int(v)) for v in self.labels[i]),
                probe_amps={p: complex(amps[i, k]) for k, p in enumerate(self.probes)},
                weight=complex(self.weights[i]),
            )
            for i in range(self.branch_count)
        ]

    def label_amplitudes(self) -> Dict[Tuple[PolLabel, ...], complex]:
        """Weights keyed by label; only meaningful once every probe is measured."""
        if self.probes:
            raise InvalidInputError("label_amplitudes needs a state without live probes")
        return {b.label: b.weight for b in self.branches}

    def __repr__(self) -> str:
        terms = []
        for b in self.branches:
            label = "".join(l.name if l != PolLabel.VAC else "0" for l in b.label)
            probes = ",".join(f"{a:.4g}" for a in b.probe_amps.values())
            terms.append(f"({b.weight:.4g})|{label}⟩" + (f"|{probes}⟩" if probes else ""))
        return "HybridState[" + " + ".join(terms) + "]"


def _build(
    labels: np.ndarray,
    weights: np.ndarray,
    moduli: np.ndarray,
    phases: np.ndarray,
    probes: Tuple[ProbeId, ...],
    next_probe_id: ProbeId,
) -> HybridState:
    """Merge coincident branches, drop vanishing ones and freeze the arrays."""
    labels = np.asarray(labels, dtype=np.int8)
    weights = np.asarray(weights, dtype=np.complex128)
    moduli = np.asarray(moduli, dtype=np.float64).reshape(len(weights), len(probes))
    phases = np.asarray(phases, dtype=np.float64).reshape(len(weights), len(probes))
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(moduli)) and np.all(np.isfinite(phases))):
        raise InvalidInputError("non-finite branch data")

    amps = moduli * np.exp(1j * phases)
    count = len(weights)
    used = np.zeros(count, dtype=bool)
    keep: List[int] = []
    merged: List[complex] = []
    for i in range(count):
        if used[i]:
            continue
        same = ~used & np.all(labels == labels[i], axis=1)
        if probes:
            scale = max(1.0, float(np.max(np.abs(amps[i]))))
            same &= np.max(np.abs(amps - amps[i]), axis=1) <= MERGE_TOL * scale
        members = np.flatnonzero(same)
        used[members] = True
        keep.append(i)
        merged.append(complex(np.sum(weights[members])))

    merged_w = np.array(merged, dtype=np.complex128)
    alive = np.abs(merged_w) > DROP_TOL
    rows = np.array(keep, dtype=np.intp)[alive]
    n_qubits = labels.shape[1] if labels.ndim == 2 else 0
    return HybridState(
        labels=labels[rows].reshape(len(rows), n_qubits),
        weights=merged_w[alive],
        moduli=moduli[rows],
        phases=phases[rows],
        probes=tuple(probes),
        next_probe_id=next_probe_id,
    )


def _qubit_components(spec: QubitSpec) -> List[Tuple[PolLabel, complex]]:
    if spec is None or (isinstance(spec, str) and spec.upper() in ("VAC", "0")) or spec is PolLabel.VAC:
        return [(PolLabel.VAC, 1.0 + 0j)]
    if isinstance(spec, PolLabel):
        return [(spec, 1.0 + 0j)]
    if isinstance(spec, str):
        try:
            return [(PolLabel[spec.upper()], 1.0 + 0j)]
        except KeyError:
            raise InvalidInputError(f"unknown qubit label {spec!r}") from None
    amps = np.asarray(spec, dtype=np.complex128).ravel()
    if amps.shape != (2,):
        raise InvalidInputError(f"qubit amplitudes must be an (H, V) pair, got {spec!r}")
    total = float(np.sum(np.abs(amps) ** 2))
    if total == 0.0:
        raise InvalidInputError("qubit amplitude pair has zero norm")
    if abs(total - 1.0) > NORM_TOL:
        raise InvalidInputError(f"qubit amplitude pair has norm {total}, expected 1")
    return [(lab, complex(a)) for lab, a in zip((PolLabel.H, PolLabel.V), amps) if a != 0]


def new_product_state(qubit_amps: Sequence[QubitSpec]) -> HybridState:
    """Product state of the given qubits, no probes.

    Each entry is an (H, V) amplitude pair of unit norm, a PolLabel, or a VAC
    marker (``None``, ``"VAC"``, ``PolLabel.VAC``).
    """
    per_qubit = [_qubit_components(spec) for spec in qubit_amps]
    terms = list(itertools.product(*per_qubit))
    labels = np.array([[lab for lab, _ in term] for term in terms], dtype=np.int8).reshape(len(terms), len(per_qubit))
    weights = np.array([np.prod([a for _, a in term]) for term in terms], dtype=np.complex128)
    empty = np.zeros((len(terms), 0))
    return _build(labels, weights, empty, empty, (), 0)


def from_label_amplitudes(amplitudes: Mapping[Sequence[Union[PolLabel, str]], complex]) -> HybridState:
    """Probe-free state Σ a_L |L⟩, normalized; labels given as PolLabels or strings like ``"HV"``."""
    rows, weights = [], []
    for key, amp in amplitudes.items():
        if isinstance(key, str):
            key = [PolLabel.VAC if ch == "0" else PolLabel[ch] for ch in key.upper()]
        rows.append([PolLabel(k) for k in key])
        weights.append(complex(amp))
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidInputError("labels must be non-empty and of equal length")
    empty = np.zeros((len(rows), 0))
    state = _build(np.array(rows, dtype=np.int8), np.array(weights), empty, empty, (), 0)
    if state.branch_count == 0:
        raise InvalidInputError("all amplitudes vanish")
    return normalize(state)


def allocate_probe(state: HybridState, alpha: complex) -> Tuple[HybridState, ProbeId]:
    """Attach a fresh coherent probe |alpha⟩ to every branch."""
    alpha = complex(alpha)
    if abs(alpha) > MAX_ALPHA:
        raise InvalidInputError(f"|alpha| = {abs(alpha):.3g} exceeds the supported {MAX_ALPHA:.0e}")
    probe = state.next_probe_id
    count = state.branch_count
    moduli = np.hstack([state.moduli, np.full((count, 1), abs(alpha))])
    phases = np.hstack([state.phases, np.full((count, 1), np.angle(alpha) if alpha != 0 else 0.0)])
    new = _build(state.labels, state.weights, moduli, phases, state.probes + (probe,), probe + 1)
    return new, probe


def conditional_kerr(
    state: HybridState, qubit: QubitId, trigger: PolLabel, probe: ProbeId, theta: float
) -> HybridState:
    """Rotate the probe by e^{iθ} in every branch whose qubit equals ``trigger``.

    This is the PBS → cross-Kerr → PBS composite for a single photon: the
    which-path mode selected by ``trigger`` holds one photon exactly when the
    qubit label matches.
    """
    trigger = PolLabel(trigger)
    if trigger == PolLabel.VAC:
        raise InvalidInputError("vacuum cannot trigger a cross-Kerr phase")
    state.check_qubit(qubit)
    col = state.probe_column(probe)
    phases = state.phases.copy()
    phases[state.labels[:, qubit] == trigger, col] += float(theta)
    return _build(state.labels, state.weights, state.moduli, phases, state.probes, state.next_probe_id)


def rotate_probe(state: HybridState, probe: ProbeId, phi: float) -> HybridState:
    """Phase shifter on a probe beam: α → α e^{iφ} in every branch."""
    col = state.probe_column(probe)
    phases = state.phases.copy()
    phases[:, col] += float(phi)
    return _build(state.labels, state.weights, state.moduli, phases, state.probes, state.next_probe_id)


def apply_1q(state: HybridState, qubit: QubitId, u: Unitary2) -> HybridState:
    """Apply ``u`` to one qubit; VAC branches pass through."""
    if not isinstance(u, Unitary2):
        u = Unitary2(np.asarray(u))
    state.check_qubit(qubit)
    col = state.labels[:, qubit]
    active = col != PolLabel.VAC
    source = col[active].astype(np.intp) - 1

    pieces_labels = [state.labels[~active]]
    pieces_weights = [state.weights[~active]]
    pieces_mod = [state.moduli[~active]]
    pieces_ph = [state.phases[~active]]
    for out, target in enumerate((PolLabel.H, PolLabel.V)):
        labels = state.labels[active].copy()
        labels[:, qubit] = target
        pieces_labels.append(labels)
        pieces_weights.append(u.matrix[out, source] * state.weights[active])
        pieces_mod.append(state.moduli[active])
        pieces_ph.append(state.phases[active])

    return _build(
        np.vstack(pieces_labels),
        np.concatenate(pieces_weights),
        np.vstack(pieces_mod),
        np.vstack(pieces_ph),
        state.probes,
        state.next_probe_id,
    )


def log_coherent_overlap(
    mod_a: np.ndarray, ph_a: np.ndarray, mod_b: np.ndarray, ph_b: np.ndarray
) -> np.ndarray:
    """log⟨a|b⟩ = −½|a−b|² + i·Im(a*b), evaluated in polar form."""
    delta = ph_b - ph_a
    cross = mod_a * mod_b
    distance_sq = (mod_a - mod_b) ** 2 + 4.0 * cross * np.sin(0.5 * delta) ** 2
    return -0.5 * distance_sq + 1j * cross * np.sin(delta)


def probe_gram(bra: HybridState, ket: HybridState) -> np.ndarray:
    """Π_k ⟨α_ik|β_jk⟩ over the (identical) live probes, shape (bra branches, ket branches)."""
    if bra.probes != ket.probes:
        raise InvalidInputError(f"probe sets differ: {bra.probes} vs {ket.probes}")
    if not bra.probes:
        return np.ones((bra.branch_count, ket.branch_count), dtype=np.complex128)
    log_ov = log_coherent_overlap(
        bra.moduli[:, None, :], bra.phases[:, None, :], ket.moduli[None, :, :], ket.phases[None, :, :]
    )
    return np.exp(np.sum(log_ov, axis=2))


def gram(bra: HybridState, ket: HybridState) -> np.ndarray:
    """Branch-pair overlaps δ(L_i, L_j) Π_k ⟨α_ik|β_jk⟩."""
    if bra.register_size != ket.register_size:
        raise InvalidInputError(f"register sizes differ: {bra.register_size} vs {ket.register_size}")
    same_label = np.all(bra.labels[:, None, :] == ket.labels[None, :, :], axis=2)
    return same_label * probe_gram(bra, ket)


def inner(bra: HybridState, ket: HybridState) -> complex:
    """⟨bra|ket⟩ over qubits and probes."""
    return complex(bra.weights.conj() @ gram(bra, ket) @ ket.weights)


def norm(state: HybridState) -> float:
    """⟨Ψ|Ψ⟩ with the coherent-state overlap formula."""
    return float(inner(state, state).real)


def normalize(state: HybridState) -> HybridState:
    total = norm(state)
    if not np.isfinite(total):
        raise NumericalError(f"state norm is not finite: {total}")
    if not total > 0.0:
        raise ImpossibleOutcomeError("cannot normalize a state with zero norm")
    out = _build(
        state.labels, state.weights / np.sqrt(total), state.moduli, state.phases, state.probes, state.next_probe_id
    )
    check_normalized(out)
    return out


def check_normalized(state: HybridState, tol: float = NORM_TOL) -> None:
    """Raise NumericalError when |⟨Ψ|Ψ⟩ − 1| exceeds ``tol``."""
    drift = abs(norm(state) - 1.0)
    if not drift <= tol:
        logger.warning("normalization drift", drift=drift, branches=state.branch_count)
        raise NumericalError(f"norm drifted by {drift:.3g} (tolerance {tol:.0e})")


def append_qubit(state: HybridState, amps: QubitSpec) -> Tuple[HybridState, QubitId]:
    """Tensor a new qubit onto the register; returns its QubitId."""
    components = _qubit_components(amps)
    labels, weights, moduli, phases = [], [], [], []
    for lab, a in components:
        labels.append(np.hstack([state.labels, np.full((state.branch_count, 1), lab, dtype=np.int8)]))
        weights.append(state.weights * a)
        moduli.append(state.moduli)
        phases.append(state.phases)
    new = _build(
        np.vstack(labels), np.concatenate(weights), np.vstack(moduli), np.vstack(phases), state.probes, state.next_probe_id
    )
    return new, state.register_size


def remove_qubit(state: HybridState, qubit: QubitId, label: PolLabel) -> HybridState:
    """Project ``qubit`` onto ``label``, renormalize and drop it from the register."""
    state.check_qubit(qubit)
    rows = state.labels[:, qubit] == PolLabel(label)
    if not np.any(rows):
        raise ImpossibleOutcomeError(f"qubit {qubit} has no {PolLabel(label).name} component")
    labels = np.delete(state.labels[rows], qubit, axis=1)
    reduced = _build(labels, state.weights[rows], state.moduli[rows], state.phases[rows], state.probes, state.next_probe_id)
    total = norm(reduced)
    if total <= 0.0 or np.log(total) < MIN_LOG_NORM:
        raise ImpossibleOutcomeError(f"qubit {qubit} has vanishing {PolLabel(label).name} component")
    return normalize(reduced)


def replace_weights(state: HybridState, weights: np.ndarray) -> HybridState:
    """Same branches with new weights (used by measurement code)."""
    return _build(state.labels, weights, state.moduli, state.phases, state.probes, state.next_probe_id)


def drop_probe(state: HybridState, probe: ProbeId, weights: np.ndarray) -> HybridState:
    """Remove a measured probe, installing the post-measurement weights."""
    col = state.probe_column(probe)
    keep = [k for k in range(len(state.probes)) if k != col]
    return _build(
        state.labels,
        weights,
        state.moduli[:, keep],
        state.phases[:, keep],
        tuple(p for k, p in enumerate(state.probes) if k != col),
        state.next_probe_id,
    )
