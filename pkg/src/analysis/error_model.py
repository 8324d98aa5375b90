"""
Closed-form herald error probabilities and probe-resource requirements.
"""

from typing import Iterable, List

import numpy as np
from pydantic import BaseModel, ConfigDict
from pydantic.alias_generators import to_camel
from scipy.special import erfc

from src.core.errors import InvalidInputError
from src.core.homodyne import one_minus_cos, peak_midpoint, peak_separation

SQRT2 = np.sqrt(2.0)


class ErrorModel(BaseModel):
    """Analytic quantities derived from (α, θ)."""

    model_config = ConfigDict(frozen=True, alias_generator=to_camel, populate_by_name=True)

    alpha: float
    theta: float
    snr: float
    x0: float
    xd: float
    p_err_detector: float
    p_err_parity: float
    phase_resolution: float


class ResourceEstimate(BaseModel):
    """Probe amplitude needed for a target peak separation at a given θ."""

    model_config = ConfigDict(frozen=True, alias_generator=to_camel, populate_by_name=True)

    theta: float
    target_xd: float
    alpha: float
    photon_number: float
    small_angle_alpha: float
    p_err_parity: float


def _check_theta(theta: float) -> None:
    if not 0.0 < theta <= np.pi / 2:
        raise InvalidInputError(f"theta must lie in (0, π/2], got {theta}")


def misidentification_probability(gap: float) -> float:
    """½ Erfc(gap / 2√2): threshold error between unit-variance Gaussians ``gap`` apart."""
    return float(0.5 * erfc(gap / (2.0 * SQRT2)))


def error_model(alpha: float, theta: float) -> ErrorModel:
    if not alpha > 0.0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    _check_theta(theta)
    snr = 2.0 * alpha * np.sin(theta)
    xd = peak_separation(alpha, theta)
    return ErrorModel(
        alpha=alpha,
        theta=theta,
        snr=snr,
        x0=peak_midpoint(alpha, theta),
        xd=xd,
        p_err_detector=misidentification_probability(snr),
        p_err_parity=misidentification_probability(xd),
        phase_resolution=2.0 * np.pi / (alpha * np.sin(theta)),
    )


def number_resolving_error(alpha: float, theta: float, n: int) -> float:
    """Error telling n from n+1 photons on the momentum quadrature (means 2α sin(nθ))."""
    if n < 0:
        raise InvalidInputError(f"photon number must be non-negative, got {n}")
    _check_theta(theta)
    gap = 2.0 * alpha * abs(np.sin((n + 1) * theta) - np.sin(n * theta))
    return misidentification_probability(gap)


def required_alpha(theta: float, target_xd: float) -> ResourceEstimate:
    """Smallest α with 2α(1 − cos θ) ≥ target_xd, plus its mean photon number α²."""
    _check_theta(theta)
    if not target_xd > 0.0:
        raise InvalidInputError(f"target separation must be positive, got {target_xd}")
    alpha = target_xd / (2.0 * one_minus_cos(theta))
    # nudge up by ulps until the separation really reaches the target
    while peak_separation(alpha, theta) < target_xd:
        alpha = np.nextafter(alpha, np.inf)
    return ResourceEstimate(
        theta=theta,
        target_xd=target_xd,
        alpha=float(alpha),
        photon_number=float(alpha) ** 2,
        small_angle_alpha=target_xd / theta**2,
        p_err_parity=misidentification_probability(peak_separation(alpha, theta)),
    )


def resource_sweep(thetas: Iterable[float], target_xd: float) -> List[ResourceEstimate]:
    return [required_alpha(float(theta), target_xd) for theta in thetas]
