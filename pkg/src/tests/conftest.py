"""Shared fixtures for the kerrsim test suite."""

import math

import numpy as np
import pytest

from src.core.gates import GateConfig

S = 1.0 / math.sqrt(2.0)
D = (S, S)
A = (S, -S)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale Monte Carlo runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    """Fresh, seeded generator per test."""
    return np.random.default_rng(20050101)


@pytest.fixture
def tol():
    return 1e-10


@pytest.fixture
def gate_cfg():
    """α=100, θ=0.3: X_d ≈ 8.93, herald error ½erfc(X_d/2√2) ≈ 3.98e-6."""
    return GateConfig(alpha=100.0, theta=0.3)


@pytest.fixture
def isolated_env(monkeypatch, tmp_path):
    """Run in an empty directory with no KERRSIM_* variables set."""
    for name in ("KERRSIM_SEED", "KERRSIM_LOG_LEVEL", "KERRSIM_JOBS", "KERRSIM_LOG_JSON"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path
