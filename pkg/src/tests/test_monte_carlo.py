"""Monte Carlo harness: reproducibility, failure reporting and agreement with the analytic laws."""

import math
from typing import ClassVar

import numpy as np
import pytest

from src.analysis import monte_carlo
from src.analysis.error_model import error_model, misidentification_probability
from src.analysis.experiments import (
    BellExperiment,
    CnotExperiment,
    DetectorExperiment,
    ParityErrorExperiment,
    ParityFidelityExperiment,
    herald_mean,
    parse_qubit,
)
from src.analysis.monte_carlo import TrialResult, binomial_sigma, run_trials, wilson_interval
from src.core.errors import InvalidInputError, TrialFailure
from src.core.gates import Basis, BellLabel, Quadrature, parity_probe
from src.core.hybrid_state import new_product_state
from src.utils.rng import counter_normals, counter_uniforms, mix64, trial_keys

SEED = 42


def alpha_for_separation(xd, theta=0.3):
    return xd / (2.0 * (1.0 - math.cos(theta)))


class FailingExperiment:
    kind = "failing"
    batch_capable: ClassVar[bool] = False

    def run_trial(self, index, rng):
        if index == 3:
            raise ValueError("boom")
        return TrialResult(event=False)

    def run_batch(self, keys):
        return None


class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(30, 1000)
        assert lo < 0.03 < hi

    def test_zero_successes(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0
        assert hi == pytest.approx(0.037, abs=1e-3)

    def test_requires_trials(self):
        with pytest.raises(InvalidInputError):
            wilson_interval(0, 0)


class TestStreams:
    def test_mix64_reference_value(self):
        # first SplitMix64 output for seed 0
        assert int(mix64(np.uint64(0x9E3779B97F4A7C15))[0]) == 0xE220A8397B1DCDAF

    def test_keys_depend_on_index_only(self):
        keys = trial_keys(SEED, np.arange(10, dtype=np.uint64))
        assert len(set(keys.tolist())) == 10
        assert np.array_equal(keys[5:], trial_keys(SEED, np.arange(5, 10, dtype=np.uint64)))

    def test_uniforms_open_interval(self):
        u = counter_uniforms(trial_keys(SEED, np.arange(100_000, dtype=np.uint64)), 0)
        assert np.all((u > 0.0) & (u < 1.0))
        assert u.mean() == pytest.approx(0.5, abs=0.01)

    def test_normals_moments(self):
        z = counter_normals(trial_keys(SEED, np.arange(100_000, dtype=np.uint64)), 1)
        assert z.mean() == pytest.approx(0.0, abs=0.02)
        assert z.std() == pytest.approx(1.0, abs=0.02)


class TestRunTrials:
    def test_same_seed_same_report(self):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(2.0), theta=0.3)
        first = run_trials(experiment, 5000, SEED, engine="state")
        second = run_trials(experiment, 5000, SEED, engine="state")
        assert first.deterministic_dict() == second.deterministic_dict()

    def test_job_count_never_changes_numbers(self, monkeypatch):
        monkeypatch.setattr(monte_carlo, "STATE_CHUNK", 100)
        experiment = DetectorExperiment(alpha=2.0, theta=0.5, noise_sigma=0.3)
        serial = run_trials(experiment, 450, SEED, jobs=1, engine="state")
        parallel = run_trials(experiment, 450, SEED, jobs=3, engine="state")
        assert serial.deterministic_dict() == parallel.deterministic_dict()

    def test_chunking_never_changes_batch_numbers(self, monkeypatch):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(2.0), theta=0.3)
        whole = run_trials(experiment, 10_000, SEED, engine="batch")
        monkeypatch.setattr(monte_carlo, "BATCH_CHUNK", 777)
        split = run_trials(experiment, 10_000, SEED, engine="batch")
        assert whole.deterministic_dict() == split.deterministic_dict()

    def test_failure_carries_index(self):
        with pytest.raises(TrialFailure) as info:
            run_trials(FailingExperiment(), 10, SEED)
        assert info.value.trial_index == 3
        assert info.value.to_dict()["cause"]["type"] == "ValueError"

    def test_batch_unavailable(self):
        with pytest.raises(InvalidInputError):
            run_trials(BellExperiment(alpha=100.0, theta=0.3), 10, SEED, engine="batch")

    def test_trial_count_positive(self):
        with pytest.raises(InvalidInputError):
            run_trials(ParityErrorExperiment(alpha=100.0, theta=0.3), 0, SEED)

    def test_scientific_trial_count(self):
        report = run_trials(ParityErrorExperiment(alpha=100.0, theta=0.3), 1e3, SEED)
        assert report.trials == 1000

    def test_report_aliases(self):
        report = run_trials(ParityErrorExperiment(alpha=100.0, theta=0.3), 100, SEED)
        dumped = report.deterministic_dict()
        assert {"pointEstimate", "wilson95", "meanValue", "categories"} <= dumped.keys()
        assert "wallTime" not in dumped


class TestAgainstAnalytic:
    @pytest.mark.parametrize("basis", list(Basis))
    def test_state_engine_parity_error(self, basis):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(2.0), theta=0.3, basis=basis)
        report = run_trials(experiment, 3000, SEED, engine="state")
        expected = misidentification_probability(2.0)
        assert abs(report.point_estimate - expected) <= 4 * binomial_sigma(expected, report.trials)
        assert set(report.categories) <= {"even", "odd"}

    def test_state_and_batch_detector_agree(self):
        experiment = DetectorExperiment(alpha=1.0 / math.sin(0.5), theta=0.5, quadrature=Quadrature.P)
        expected = misidentification_probability(2.0)
        state = run_trials(experiment, 3000, SEED, engine="state")
        batch = run_trials(experiment, 200_000, SEED, engine="batch")
        assert abs(state.point_estimate - expected) <= 4 * binomial_sigma(expected, state.trials)
        assert abs(batch.point_estimate - expected) <= 4 * binomial_sigma(expected, batch.trials)

    def test_noise_broadens_error(self):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(4.0), theta=0.3, noise_sigma=1.0)
        report = run_trials(experiment, 200_000, SEED, engine="batch")
        expected = misidentification_probability(4.0 / math.sqrt(2.0))
        assert abs(report.point_estimate - expected) <= 4 * binomial_sigma(expected, report.trials)

    def test_detector_snr_six_within_wilson(self):
        experiment = DetectorExperiment(alpha=3.0 / math.sin(0.3), theta=0.3, quadrature=Quadrature.P)
        report = run_trials(experiment, 100_000, SEED)
        lo, hi = report.wilson95
        assert report.engine == "batch"
        assert lo <= misidentification_probability(6.0) <= hi

    def test_parity_fidelity_values(self):
        report = run_trials(ParityFidelityExperiment(alpha=100.0, theta=0.3), 200, SEED)
        assert report.mean_value >= 1 - 1e-4
        assert sum(report.categories.values()) == 200

    def test_cnot_fidelity_values(self):
        report = run_trials(CnotExperiment(alpha=100.0, theta=0.3, control="D", target="H"), 50, SEED)
        assert report.mean_value >= 0.999
        assert report.successes == 0



class TestBatchFollowsGates:
    @pytest.mark.parametrize("basis", list(Basis))
    def test_parity_means_come_from_gate_state(self, basis):
        experiment = ParityErrorExperiment(alpha=100.0, theta=0.3, basis=basis)
        even, odd = 200.0, 200.0 * math.cos(0.3)
        assert np.allclose(experiment.batch_means, [even, odd, odd, even], rtol=0, atol=1e-9)

    def test_detector_means_come_from_gate_state(self):
        experiment = DetectorExperiment(alpha=10.0, theta=0.3, quadrature=Quadrature.P)
        absent, present = experiment.batch_means
        assert absent == pytest.approx(0.0, abs=1e-9)
        assert present == pytest.approx(20.0 * math.sin(0.3), abs=1e-9)

    def test_superposed_input_has_no_single_mean(self, gate_cfg):
        s = 1.0 / math.sqrt(2.0)
        state, probe = parity_probe(new_product_state([(s, s), (s, s)]), 0, 1, Basis.RECTILINEAR, gate_cfg)
        with pytest.raises(InvalidInputError):
            herald_mean(state, probe)

    @pytest.mark.parametrize("basis", list(Basis))
    def test_state_and_batch_parity_agree(self, basis):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(2.0), theta=0.3, basis=basis)
        state = run_trials(experiment, 3000, SEED, engine="state")
        batch = run_trials(experiment, 200_000, SEED, engine="batch")
        p = misidentification_probability(2.0)
        spread = math.hypot(binomial_sigma(p, state.trials), binomial_sigma(p, batch.trials))
        assert abs(state.point_estimate - batch.point_estimate) <= 4 * spread

@pytest.mark.slow
class TestAcceptanceScale:
    @pytest.mark.parametrize("xd", [2.0, 4.0, 8.0, 12.0])
    def test_parity_error_law(self, xd):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(xd), theta=0.3)
        report = run_trials(experiment, 1_000_000, SEED)
        expected = misidentification_probability(xd)
        assert abs(report.point_estimate - expected) <= report.three_sigma(expected)

    def test_parallel_state_engine_matches_batch(self):
        experiment = ParityErrorExperiment(alpha=alpha_for_separation(2.0), theta=0.3)
        state = run_trials(experiment, 100_000, SEED, jobs=4, engine="state")
        batch = run_trials(experiment, 1_000_000, SEED, engine="batch")
        p = misidentification_probability(2.0)
        spread = math.hypot(binomial_sigma(p, state.trials), binomial_sigma(p, batch.trials))
        assert abs(state.point_estimate - batch.point_estimate) <= 3 * spread
        assert abs(state.point_estimate - p) <= state.three_sigma(p)

    def test_reference_parity_rate(self):
        report = run_trials(ParityErrorExperiment(alpha=100.0, theta=0.3), 1_000_000, SEED)
        lo, hi = report.wilson95
        assert lo <= misidentification_probability(error_model(100.0, 0.3).xd) <= hi
        assert report.point_estimate == pytest.approx(3.98e-6, abs=report.three_sigma(3.98e-6))

    def test_parity_conditional_fidelity(self):
        report = run_trials(ParityFidelityExperiment(alpha=100.0, theta=0.3), 10_000, SEED, jobs=2)
        assert report.mean_value >= 1 - 1e-4

    @pytest.mark.parametrize("label", list(BellLabel))
    def test_bell_confusion_diagonal(self, label):
        report = run_trials(BellExperiment(alpha=100.0, theta=0.3, input=label), 20_000, SEED, jobs=2)
        assert report.categories.get(label.value, 0) / report.trials >= 1 - 1e-4
        assert report.mean_value >= 1 - 1e-4


def test_parse_qubit_forms():
    assert parse_qubit("d") == parse_qubit("D")
    a, b = parse_qubit("3, 4j")
    assert (a, b) == (pytest.approx(0.6), pytest.approx(0.8j))
    with pytest.raises(InvalidInputError):
        parse_qubit("bogus")
