"""
Counter-based random streams for reproducible Monte Carlo.

Every trial owns a 64-bit key derived from (master seed, trial index) through
the SplitMix64 finalizer. State-level trials seed a PCG64 generator from the
key; vectorized trials read uniforms straight off the counter function, so
neither path depends on how trials are chunked or distributed over workers.
"""

from typing import Union

import numpy as np
from numpy.random import PCG64, Generator
from scipy.special import ndtri

ArrayLike = Union[int, np.ndarray]

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_M53 = 2.0 ** -53


def mix64(z: ArrayLike) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.atleast_1d(np.asarray(z, dtype=np.uint64)).copy()
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _MUL1
        z ^= z >> np.uint64(27)
        z *= _MUL2
        z ^= z >> np.uint64(31)
    return z


def trial_keys(master_seed: int, indices: ArrayLike) -> np.ndarray:
    """Per-trial keys: mix64(master ⊕ mix64(index))."""
    master = np.uint64(int(master_seed) & MASK64)
    return mix64(master ^ mix64(indices))


def trial_generator(master_seed: int, index: int) -> Generator:
    """numpy Generator owned by a single trial."""
    key = int(trial_keys(master_seed, index)[0])
    return Generator(PCG64(key))


def counter_uniforms(keys: np.ndarray, draw: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for draw number ``draw`` of each key."""
    offset = np.uint64(draw + 1)
    with np.errstate(over="ignore"):
        bits = mix64(keys + offset * GOLDEN_GAMMA)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53


def counter_normals(keys: np.ndarray, draw: int) -> np.ndarray:
    """Standard normals for draw number ``draw`` of each key (inverse CDF)."""
    return ndtri(counter_uniforms(keys, draw))
