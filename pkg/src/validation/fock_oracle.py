"""
Brute-force truncated Fock-space simulation of signal ⊗ probe.

Used only to certify the branch engine at small amplitudes: the cross-Kerr
interaction is the diagonal unitary e^{iθ n_a n_c}, and homodyne statistics
come from Hermite functions evaluated by a log-scaled three-term recurrence.
The probe is always the last axis of a joint vector.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from src.core.errors import ImpossibleOutcomeError, InvalidInputError
from src.core.homodyne import MeasurementDensity

_LOG_PSI0_NORM = -0.25 * math.log(2.0 * math.pi)
_RESCALE_ABOVE = 1e100
MIN_POSTERIOR_NORM = 1e-150


def truncation_for(alpha: complex) -> int:
    """Fock cutoff N ≥ |α|² + 12|α| + 20, enough for leakage ≤ 1e-10."""
    r = abs(alpha)
    return int(math.ceil(r * r + 12.0 * r + 20.0))


@dataclass(frozen=True, eq=False)
class FockVector:
    """Amplitudes over |n₁, n₂, …⟩, one axis per mode."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoffs(self) -> tuple:
        return self.amplitudes.shape

    @property
    def modes(self) -> int:
        return self.amplitudes.ndim

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def fock_state(n: int, cutoff: int) -> FockVector:
    if not 0 <= n < cutoff:
        raise InvalidInputError(f"photon number {n} outside cutoff {cutoff}")
    amps = np.zeros(cutoff, dtype=np.complex128)
    amps[n] = 1.0
    return FockVector(amps)


def coherent_state(alpha: complex, cutoff: int = 0) -> FockVector:
    """Truncated |α⟩; the default cutoff follows ``truncation_for``."""
    alpha = complex(alpha)
    cutoff = cutoff or truncation_for(alpha)
    n = np.arange(cutoff)
    if alpha == 0:
        return fock_state(0, cutoff)
    r, phase = abs(alpha), np.angle(alpha)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return FockVector(np.exp(log_mag + 1j * n * phase))


def qubit_signal(h_amp: complex, v_amp: complex) -> FockVector:
    """H-rail occupation of a polarization qubit: |1⟩ for H, |0⟩ for V."""
    return FockVector(np.array([v_amp, h_amp], dtype=np.complex128))


def tensor(*vectors: FockVector) -> FockVector:
    amps = vectors[0].amplitudes
    for vec in vectors[1:]:
        amps = np.multiply.outer(amps, vec.amplitudes)
    return FockVector(amps)


def hermite_functions(n_max: int, x) -> np.ndarray:
    """ψ₀…ψ_{n_max−1} at ``x``, shape (n_max, len(x)).

    ψₙ(x) = (2π)^{−1/4} (2ⁿ n!)^{−1/2} Hₙ(x/√2) e^{−x²/4}, via
    ψ_{n+1} = x ψₙ/√(n+1) − √(n/(n+1)) ψ_{n−1} on scaled values with a
    running log-scale, so neither factorials nor e^{−x²/4} over/underflow
    inside the recurrence.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.zeros((n_max, x.size))
    if n_max == 0:
        return out
    log_scale = _LOG_PSI0_NORM - 0.25 * x * x
    prev = np.zeros_like(x)
    cur = np.ones_like(x)

    def emit(row: int, values: np.ndarray) -> None:
        with np.errstate(divide="ignore"):
            out[row] = np.sign(values) * np.exp(log_scale + np.log(np.abs(values)))

    emit(0, cur)
    for n in range(n_max - 1):
        nxt = x * cur / math.sqrt(n + 1) - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE_ABOVE
        if np.any(big):
            factor = np.where(big, np.abs(cur), 1.0)
            cur = cur / factor
            prev = prev / factor
            log_scale = log_scale + np.log(factor)
        emit(n + 1, cur)
    return out


def apply_cross_kerr(joint: FockVector, mode: int, theta: float) -> FockVector:
    """amp(…, n_mode, …, n_c) ← amp · e^{iθ n_mode n_c} with the probe on the last axis."""
    if not 0 <= mode < joint.modes - 1:
        raise InvalidInputError(f"signal mode {mode} invalid for a {joint.modes}-mode joint vector")
    shape = [1] * joint.modes
    n_signal = np.arange(joint.cutoffs[mode]).reshape([-1 if k == mode else 1 for k in range(joint.modes)])
    shape[-1] = -1
    n_probe = np.arange(joint.cutoffs[-1]).reshape(shape)
    return FockVector(joint.amplitudes * np.exp(1j * theta * n_signal * n_probe))


def oracle_kerr(signal: FockVector, probe: FockVector, theta: float) -> FockVector:
    """Joint state after the cross-Kerr coupling of every signal mode to the probe by θ."""
    joint = tensor(signal, probe)
    for mode in range(signal.modes):
        joint = apply_cross_kerr(joint, mode, theta)
    return joint


def _signal_wavefunctions(joint: FockVector, grid) -> np.ndarray:
    psi = hermite_functions(joint.cutoffs[-1], grid)
    return joint.amplitudes.reshape(-1, joint.cutoffs[-1]) @ psi


def oracle_density(joint: FockVector, grid: Sequence[float]) -> MeasurementDensity:
    """p(x) = Σ_signal |Σ_{n_c} amp(signal, n_c) ψ_{n_c}(x)|² on a uniform grid."""
    grid = np.asarray(grid, dtype=np.float64)
    values = np.sum(np.abs(_signal_wavefunctions(joint, grid)) ** 2, axis=0)
    step = float(grid[1] - grid[0]) if grid.size > 1 else 1.0
    return MeasurementDensity(grid=grid, values=values, step=step)


def oracle_project(joint: FockVector, x: float) -> FockVector:
    """Signal-side state after projecting the probe onto |x⟩, renormalized."""
    amps = _signal_wavefunctions(joint, [float(x)])[:, 0].reshape(joint.cutoffs[:-1])
    total = float(np.sum(np.abs(amps) ** 2))
    if total < MIN_POSTERIOR_NORM:
        raise ImpossibleOutcomeError(f"oracle posterior vanishes at x={x:.6g}")
    return FockVector(amps / math.sqrt(total))
