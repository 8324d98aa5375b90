"""
Reproducible Monte Carlo harness.

Trials are split into fixed-size chunks that may run in worker processes.
Every trial draws only from its own counter-derived stream and per-trial
results are stored by index, so the report depends on (experiment, trials,
seed) alone and never on the job count.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, NamedTuple, Optional, Protocol, Tuple, runtime_checkable

import numpy as np
from numpy.random import Generator
from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel
from scipy.stats import norm as normal_dist

from src.core.errors import InvalidInputError, TrialFailure
from src.utils.logging import get_logger
from src.utils.rng import trial_generator, trial_keys

logger = get_logger(__name__)

STATE_CHUNK = 2048
BATCH_CHUNK = 1 << 18


class TrialResult(NamedTuple):
    event: bool
    value: float = math.nan
    category: Optional[str] = None


class BatchResult(NamedTuple):
    events: np.ndarray
    values: Optional[np.ndarray] = None
    categories: Optional[List[str]] = None


@runtime_checkable
class Experiment(Protocol):
    kind: str

    def run_trial(self, index: int, rng: Generator) -> TrialResult: ...

    def run_batch(self, keys: np.ndarray) -> Optional[BatchResult]: ...


class MonteCarloReport(BaseModel):
    """Counts of the experiment's tallied event, with a Wilson 95% interval."""

    model_config = ConfigDict(frozen=True, alias_generator=to_camel, populate_by_name=True)

    trials: int
    successes: int
    point_estimate: float
    wilson95: Tuple[float, float]
    seed: int
    wall_time: float = Field(default=0.0, description="seconds; excluded from reproducibility comparisons")
    engine: str = "state"
    mean_value: Optional[float] = None
    categories: Dict[str, int] = Field(default_factory=dict)
    experiment: Dict[str, Any] = Field(default_factory=dict)

    def deterministic_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude={"wall_time"})

    def three_sigma(self, p: float) -> float:
        """3σ binomial half-width around a reference probability."""
        return 3.0 * binomial_sigma(p, self.trials)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    if trials < 1:
        raise InvalidInputError("wilson interval needs at least one trial")
    z = float(normal_dist.ppf(0.5 + confidence / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, min(center - half, p)), min(1.0, max(center + half, p))


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(p * (1.0 - p) / trials)


def _run_chunk(
    experiment: Experiment, master_seed: int, start: int, stop: int, batch: bool
) -> Tuple[np.ndarray, np.ndarray, List[Optional[str]]]:
    if batch:
        keys = trial_keys(master_seed, np.arange(start, stop, dtype=np.uint64))
        try:
            result = experiment.run_batch(keys)
        except Exception as exc:
            raise TrialFailure(start, exc) from exc
        values = result.values if result.values is not None else np.full(stop - start, math.nan)
        categories = result.categories if result.categories is not None else [None] * (stop - start)
        return np.asarray(result.events, dtype=bool), np.asarray(values, dtype=np.float64), list(categories)

    events = np.zeros(stop - start, dtype=bool)
    values = np.full(stop - start, math.nan)
    categories: List[Optional[str]] = []
    for offset, index in enumerate(range(start, stop)):
        try:
            result = experiment.run_trial(index, trial_generator(master_seed, index))
        except Exception as exc:
            raise TrialFailure(index, exc) from exc
        events[offset] = bool(result.event)
        values[offset] = result.value
        categories.append(result.category)
    return events, values, categories


def _supports_batch(experiment: Experiment) -> bool:
    return getattr(experiment, "batch_capable", False)


def run_trials(
    experiment: Experiment,
    trials: int,
    master_seed: int,
    jobs: int = 1,
    engine: str = "auto",
) -> MonteCarloReport:
    """Run ``trials`` independent trials of ``experiment``.

    engine: ``state`` (full branch simulation per trial), ``batch`` (vectorized
    sampler from the closed-form outcome law) or ``auto`` (batch when the
    experiment offers one).
    """
    trials = int(trials)
    if trials < 1:
        raise InvalidInputError(f"trials must be at least 1, got {trials}")
    if engine not in ("auto", "state", "batch"):
        raise InvalidInputError(f"unknown engine {engine!r}")
    batch = _supports_batch(experiment) if engine == "auto" else engine == "batch"
    if batch and not _supports_batch(experiment):
        raise InvalidInputError(f"experiment {experiment.kind!r} has no batch sampler")

    chunk = BATCH_CHUNK if batch else STATE_CHUNK
    bounds = [(start, min(start + chunk, trials)) for start in range(0, trials, chunk)]
    log = logger.bind(experiment=experiment.kind, trials=trials, seed=master_seed, engine="batch" if batch else "state")
    log.info("monte carlo start", chunks=len(bounds), jobs=jobs)

    started = time.perf_counter()
    if jobs > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_chunk, experiment, master_seed, lo, hi, batch) for lo, hi in bounds]
            parts = [f.result() for f in futures]
    else:
        parts = [_run_chunk(experiment, master_seed, lo, hi, batch) for lo, hi in bounds]
    wall = time.perf_counter() - started

    events = np.concatenate([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    categories = [c for p in parts for c in p[2]]

    successes = int(np.count_nonzero(events))
    finite = values[np.isfinite(values)]
    mean_value = math.fsum(finite.tolist()) / finite.size if finite.size else None
    counts: Dict[str, int] = {}
    for c in categories:
        if c is not None:
            counts[c] = counts.get(c, 0) + 1

    report = MonteCarloReport(
        trials=trials,
        successes=successes,
        point_estimate=successes / trials,
        wilson95=wilson_interval(successes, trials),
        seed=master_seed,
        wall_time=wall,
        engine="batch" if batch else "state",
        mean_value=mean_value,
        categories=dict(sorted(counts.items())),
        experiment=experiment.model_dump(mode="json") if hasattr(experiment, "model_dump") else {"kind": experiment.kind},
    )
    log.info("monte carlo done", successes=successes, estimate=report.point_estimate, wall_time=round(wall, 3))
    return report


__all__ = [
    "BatchResult",
    "Experiment",
    "MonteCarloReport",
    "TrialResult",
    "binomial_sigma",
    "run_trials",
    "wilson_interval",
]
