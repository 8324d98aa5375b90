"""
X-quadrature homodyne measurement of a probe beam.

Conventions: X = c + c†, unit vacuum variance, so a coherent probe |α⟩ gives a
Gaussian outcome of mean 2 Re α and variance 1. The position kernel keeps its
complex phase; that phase is what the gates later strip off by feed-forward.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from numpy.random import Generator
from scipy.integrate import cumulative_trapezoid

from src.core.errors import ImpossibleOutcomeError, InvalidInputError
from src.core.hybrid_state import (
    MIN_LOG_NORM,
    HybridState,
    ProbeId,
    drop_probe,
    log_coherent_overlap,
    norm,
    normalize,
)
from src.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_GRID_STEP = 1e-2
DEFAULT_GRID_SPAN = 10.0
TWO_PI = 2.0 * np.pi
_LOG_KERNEL_NORM = -0.25 * np.log(TWO_PI)


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


def one_minus_cos(theta: float) -> float:
    """1 − cos θ without cancellation at small θ."""
    return 2.0 * np.sin(0.5 * theta) ** 2


def peak_midpoint(alpha: float, theta: float) -> float:
    """X₀ = α(1 + cos θ), midway between the 2α and 2α cos θ peaks."""
    return alpha * (2.0 - one_minus_cos(theta))


def peak_separation(alpha: float, theta: float) -> float:
    """X_d = 2α(1 − cos θ)."""
    return 2.0 * alpha * one_minus_cos(theta)


def log_position_kernel(x, alpha) -> np.ndarray:
    """log⟨x|α⟩ = −(x − 2Re α)²/4 + i·Im α·(x − Re α) − ¼ log 2π."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.complex128)
    re, im = alpha.real, alpha.imag
    return (_LOG_KERNEL_NORM - 0.25 * (x - 2.0 * re) ** 2) + 1j * (im * (x - re))


def position_kernel(x, alpha) -> np.ndarray:
    """⟨x|α⟩; for real α this is exactly f(x, α) with zero imaginary part."""
    return np.exp(log_position_kernel(x, alpha))


def kernel_phase(x: float, alpha: complex) -> float:
    """Phase Im α·(x − Re α) imprinted on a branch measured at x."""
    alpha = complex(alpha)
    return alpha.imag * (x - alpha.real)


def even_mask(x, alpha: float, theta: float) -> np.ndarray:
    """Vectorized parity decision: True where x ≥ X₀."""
    return np.asarray(x, dtype=np.float64) >= peak_midpoint(alpha, theta)


def threshold_classify(x: float, alpha: float, theta: float) -> Parity:
    """Even iff x ≥ X₀ (ties go to even)."""
    return Parity.EVEN if bool(even_mask(x, alpha, theta)) else Parity.ODD


@dataclass(frozen=True)
class HomodyneRecord:
    """Reported outcome of one X measurement and the feed-forward phase derived from it."""

    probe: ProbeId
    x: float
    phi: float = 0.0
    noise_sigma: float = 0.0
    forced: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phi", float(np.mod(self.phi, TWO_PI)))

    def to_dict(self) -> dict:
        return {"probe": self.probe, "x": self.x, "phi": self.phi, "noiseSigma": self.noise_sigma, "forced": self.forced}


@dataclass(frozen=True)
class MeasurementDensity:
    """Born density of the X outcome on a uniform grid."""

    grid: np.ndarray
    values: np.ndarray
    step: float

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.step)

    @property
    def mean(self) -> float:
        return float(np.sum(self.grid * self.values) * self.step / self.mass)

    def cdf(self) -> np.ndarray:
        cumulative = cumulative_trapezoid(self.values, self.grid, initial=0.0)
        return cumulative / cumulative[-1]


def _probe_means(state: HybridState, col: int) -> np.ndarray:
    return 2.0 * state.moduli[:, col] * np.cos(state.phases[:, col])


def probe_means(state: HybridState, probe: ProbeId) -> np.ndarray:
    """Noise-free mean 2 Re α of the X outcome, one per branch."""
    return _probe_means(state, state.probe_column(probe))


def _probe_amplitudes(state: HybridState, col: int) -> np.ndarray:
    return state.moduli[:, col] * np.exp(1j * state.phases[:, col])


def _spectator_gram(state: HybridState, col: int) -> np.ndarray:
    """δ(L_i, L_j) Π_{k ≠ col} ⟨α_ik|α_jk⟩: interference left once ``col`` is read out."""
    same_label = np.all(state.labels[:, None, :] == state.labels[None, :, :], axis=2)
    others = [k for k in range(len(state.probes)) if k != col]
    if not others:
        return same_label.astype(np.complex128)
    mod, ph = state.moduli[:, others], state.phases[:, others]
    log_ov = log_coherent_overlap(mod[:, None, :], ph[:, None, :], mod[None, :, :], ph[None, :, :])
    return same_label * np.exp(np.sum(log_ov, axis=2))


def outcome_grid(
    state: HybridState, probe: ProbeId, step: float = DEFAULT_GRID_STEP, span: float = DEFAULT_GRID_SPAN
) -> np.ndarray:
    """Uniform grid covering every branch mean by ``span`` standard deviations."""
    means = _probe_means(state, state.probe_column(probe))
    lo, hi = float(np.min(means)) - span, float(np.max(means)) + span
    count = int(np.ceil((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def density_values(state: HybridState, probe: ProbeId, grid: np.ndarray) -> np.ndarray:
    """p(x) at the given points."""
    col = state.probe_column(probe)
    kernels = position_kernel(np.asarray(grid)[None, :], _probe_amplitudes(state, col)[:, None])
    weighted = state.weights[:, None] * kernels
    gram = _spectator_gram(state, col)
    values = np.einsum("im,ij,jm->m", weighted.conj(), gram, weighted).real
    return np.maximum(values, 0.0)


def density(
    state: HybridState, probe: ProbeId, step: float = DEFAULT_GRID_STEP, span: float = DEFAULT_GRID_SPAN
) -> MeasurementDensity:
    """Exact Born density of the X outcome of ``probe``."""
    if step <= 0 or step > DEFAULT_GRID_STEP:
        raise InvalidInputError(f"grid step must lie in (0, {DEFAULT_GRID_STEP}], got {step}")
    grid = outcome_grid(state, probe, step, span)
    return MeasurementDensity(grid=grid, values=density_values(state, probe, grid), step=step)


def _labels_distinct(state: HybridState) -> bool:
    return len({row.tobytes() for row in state.labels}) == state.branch_count


def sample_outcomes(
    state: HybridState,
    probe: ProbeId,
    rng: Generator,
    size: int = 1,
    step: float = DEFAULT_GRID_STEP,
    span: float = DEFAULT_GRID_SPAN,
) -> np.ndarray:
    """Noise-free outcomes drawn from ``density(state, probe)``.

    Distinct labels mean no interference: the law is the Gaussian mixture over
    branches and is sampled exactly. Otherwise inverse-CDF on the density grid.
    """
    col = state.probe_column(probe)
    if _labels_distinct(state):
        probs = np.abs(state.weights) ** 2
        probs = probs / probs.sum()
        means = _probe_means(state, col)
        picks = rng.choice(state.branch_count, size=size, p=probs)
        return rng.normal(means[picks], 1.0)
    dens = density(state, probe, step, span)
    return np.interp(rng.random(size), dens.cdf(), dens.grid)


def sample(
    state: HybridState,
    probe: ProbeId,
    rng: Generator,
    noise_sigma: float = 0.0,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Reported X outcome: the Born draw plus N(0, noise_sigma²) detector noise."""
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be non-negative, got {noise_sigma}")
    draws = sample_outcomes(state, probe, rng, size=1 if size is None else size)
    if noise_sigma > 0:
        draws = draws + rng.normal(0.0, noise_sigma, size=draws.shape)
    return float(draws[0]) if size is None else draws


def project(state: HybridState, probe: ProbeId, x: float) -> HybridState:
    """Project ``probe`` onto the quadrature eigenstate |x⟩ and renormalize."""
    col = state.probe_column(probe)
    log_k = log_position_kernel(float(x), _probe_amplitudes(state, col))
    shift = float(np.max(log_k.real))
    weights = state.weights * np.exp(log_k - shift)
    collapsed = drop_probe(state, probe, weights)
    total = norm(collapsed) if collapsed.branch_count else 0.0
    if total <= 0.0 or np.log(total) + 2.0 * shift < MIN_LOG_NORM:
        raise ImpossibleOutcomeError(f"outcome x={x:.6g} has vanishing probability for probe {probe}")
    return normalize(collapsed)


def measure(
    state: HybridState,
    probe: ProbeId,
    rng: Optional[Generator],
    noise_sigma: float = 0.0,
    forced_x: Optional[float] = None,
) -> Tuple[float, float, HybridState]:
    """Sample then project.

    Returns (true outcome, reported outcome, post-measurement state). The state
    collapses at the true outcome; the reported value carries detector noise and
    is what classification and feed-forward see. A forced outcome bypasses the
    random stream and is reported noise-free.
    """
    if forced_x is not None:
        x_true = x_reported = float(forced_x)
    else:
        if rng is None:
            raise InvalidInputError("a random stream is required unless the outcome is forced")
        x_true = float(sample_outcomes(state, probe, rng)[0])
        x_reported = x_true + (float(rng.normal(0.0, noise_sigma)) if noise_sigma > 0 else 0.0)
    post = project(state, probe, x_true)
    logger.debug("homodyne", probe=probe, x=x_reported, branches=post.branch_count)
    return x_true, x_reported, post
