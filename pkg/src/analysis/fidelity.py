"""
State fidelity between branch-represented states.
"""

from dataclasses import dataclass

import numpy as np

from src.core.errors import InvalidInputError
from src.core.hybrid_state import HybridState, inner, norm, probe_gram


@dataclass(frozen=True)
class FidelityValue:
    value: float
    reference: str = ""

    def __float__(self) -> float:
        return self.value


def fidelity(state: HybridState, reference: HybridState, description: str = "") -> FidelityValue:
    """|⟨ref|state⟩|² for normalized states.

    With identical probe sets the probes take part in the overlap. A probe-free
    reference against a state with live probes gives ⟨ref|ρ|ref⟩ for the
    qubits' reduced state.
    """
    if state.register_size != reference.register_size:
        raise InvalidInputError(f"register sizes differ: {state.register_size} vs {reference.register_size}")
    if state.probes == reference.probes:
        value = abs(inner(reference, state)) ** 2 / (norm(reference) * norm(state))
    elif not reference.probes:
        value = _reduced_fidelity(state, reference)
    else:
        raise InvalidInputError(f"reference probes {reference.probes} do not match state probes {state.probes}")
    return FidelityValue(value=float(min(max(value, 0.0), 1.0)), reference=description)


def _reduced_fidelity(state: HybridState, reference: HybridState) -> float:
    ref = {row.tobytes(): w for row, w in zip(reference.labels, reference.weights)}
    ref_amp = np.array([ref.get(row.tobytes(), 0.0) for row in state.labels], dtype=np.complex128)
    v = state.weights * ref_amp.conj()
    # ⟨ref|ρ|ref⟩ = Σᵢⱼ vᵢ v̄ⱼ ⟨αⱼ|αᵢ⟩
    value = (v.conj() @ probe_gram(state, state) @ v).real
    ref_norm = float(np.sum(np.abs(reference.weights) ** 2))
    return float(value / (ref_norm * norm(state)))
