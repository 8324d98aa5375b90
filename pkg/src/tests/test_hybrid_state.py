"""Unit tests for the branch representation."""

import math

import numpy as np
import pytest

from src.core.errors import ImpossibleOutcomeError, InvalidInputError, NumericalError
from src.core.hybrid_state import (
    HADAMARD,
    MAX_ALPHA,
    PAULI_X,
    PolLabel,
    Unitary2,
    allocate_probe,
    append_qubit,
    apply_1q,
    check_normalized,
    conditional_kerr,
    from_label_amplitudes,
    inner,
    log_coherent_overlap,
    new_product_state,
    norm,
    remove_qubit,
    replace_weights,
    rotate_probe,
)
from src.tests.conftest import D


class TestConstruction:
    def test_product_state_branches(self, tol):
        state = new_product_state([D, "H", None])
        assert state.register_size == 3
        assert state.branch_count == 2
        assert {b.label for b in state.branches} == {
            (PolLabel.H, PolLabel.H, PolLabel.VAC),
            (PolLabel.V, PolLabel.H, PolLabel.VAC),
        }
        assert norm(state) == pytest.approx(1.0, abs=tol)

    def test_unnormalized_pair_rejected(self):
        with pytest.raises(InvalidInputError):
            new_product_state([(1.0, 1.0)])

    def test_from_label_amplitudes_normalizes(self, tol):
        state = from_label_amplitudes({"HH": 3.0, "VV": 4.0j})
        amps = state.label_amplitudes()
        assert amps[(PolLabel.H, PolLabel.H)] == pytest.approx(0.6, abs=tol)
        assert amps[(PolLabel.V, PolLabel.V)] == pytest.approx(0.8j, abs=tol)

    def test_alpha_limit(self):
        with pytest.raises(InvalidInputError):
            allocate_probe(new_product_state(["H"]), 2 * MAX_ALPHA)

    def test_non_unitary_rejected(self):
        with pytest.raises(InvalidInputError):
            Unitary2(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestKerr:
    def test_kicks_only_the_trigger_branch(self, tol):
        state, probe = allocate_probe(new_product_state([D]), 1.0)
        state = conditional_kerr(state, 0, PolLabel.H, probe, 0.3)
        amps = {b.label[0]: b.probe_amps[probe] for b in state.branches}
        assert amps[PolLabel.H] == pytest.approx(np.exp(0.3j), abs=tol)
        assert amps[PolLabel.V] == pytest.approx(1.0, abs=tol)
        assert norm(state) == pytest.approx(1.0, abs=tol)

    def test_opposite_kicks_cancel_exactly(self):
        state, probe = allocate_probe(new_product_state(["H"]), 1e5)
        kicked = conditional_kerr(conditional_kerr(state, 0, PolLabel.H, probe, 0.3), 0, PolLabel.H, probe, -0.3)
        assert kicked.phases[0, 0] == 0.0

    def test_vacuum_trigger_rejected(self):
        state, probe = allocate_probe(new_product_state(["H"]), 1.0)
        with pytest.raises(InvalidInputError):
            conditional_kerr(state, 0, PolLabel.VAC, probe, 0.3)

    def test_vacuum_branch_untouched(self):
        state, probe = allocate_probe(new_product_state([None]), 2.0)
        kicked = conditional_kerr(state, 0, PolLabel.H, probe, 0.3)
        assert kicked.phases[0, 0] == 0.0

    def test_rotate_probe(self, tol):
        state, probe = allocate_probe(new_product_state([D]), 3.0)
        rotated = rotate_probe(state, probe, -math.pi / 2)
        assert np.allclose(rotated.amplitudes[:, 0], -3.0j)
        assert norm(rotated) == pytest.approx(1.0, abs=tol)


class TestOverlaps:
    def test_coherent_overlap_modulus(self, tol):
        a, p = allocate_probe(new_product_state(["H"]), 1.0)
        b, q = allocate_probe(new_product_state(["H"]), 1.5)
        assert p == q
        assert abs(inner(a, b)) ** 2 == pytest.approx(math.exp(-0.25), abs=tol)

    def test_large_amplitude_small_phase(self):
        # |⟨α|αe^{iδ}⟩|² = exp(−4α² sin²(δ/2)) → log modulus −½ at α=1e6, δ=1e-6
        log_ov = log_coherent_overlap(np.array(1e6), np.array(0.0), np.array(1e6), np.array(1e-6))
        assert log_ov.real == pytest.approx(-0.5, rel=1e-9)

    def test_cat_norm(self):
        """|−1⟩ + |1⟩ on one label has squared norm 2 + 2e⁻²."""
        state, probe = allocate_probe(new_product_state([D]), 1.0)
        state = conditional_kerr(state, 0, PolLabel.H, probe, math.pi)
        h_only = remove_qubit(apply_1q(state, 0, HADAMARD), 0, PolLabel.H)
        cat = replace_weights(h_only, np.ones(h_only.branch_count))
        assert cat.branch_count == 2
        assert norm(cat) == pytest.approx(2.0 + 2.0 * math.exp(-2.0), rel=1e-12)
        assert norm(cat) == pytest.approx(2.2707, abs=1e-4)


class TestSingleQubitOps:
    def test_hadamard_twice_is_identity(self, tol):
        state = new_product_state(["H"])
        twice = apply_1q(apply_1q(state, 0, HADAMARD), 0, HADAMARD)
        assert twice.branch_count == 1
        assert twice.label_amplitudes()[(PolLabel.H,)] == pytest.approx(1.0, abs=tol)

    @pytest.mark.parametrize("alpha, kick, branches", [(1e5, 1e-16, 1), (1.0, 1e-11, 4)])
    def test_merge_tolerance_scales_with_amplitude(self, alpha, kick, branches):
        state, probe = allocate_probe(new_product_state([D]), alpha)
        state = conditional_kerr(state, 0, PolLabel.H, probe, kick)
        assert apply_1q(state, 0, HADAMARD).branch_count == branches

    def test_vacuum_passes_through(self):
        state = apply_1q(new_product_state([None]), 0, PAULI_X)
        assert state.labels[0, 0] == PolLabel.VAC

    def test_bad_qubit_index(self):
        with pytest.raises(InvalidInputError):
            apply_1q(new_product_state(["H"]), 3, PAULI_X)


class TestRegister:
    def test_append_and_remove(self, tol):
        state, ancilla = append_qubit(new_product_state(["V"]), D)
        assert ancilla == 1
        assert state.branch_count == 2
        back = remove_qubit(state, ancilla, PolLabel.V)
        assert back.register_size == 1
        assert back.label_amplitudes()[(PolLabel.V,)] == pytest.approx(1.0, abs=tol)

    def test_remove_missing_label(self):
        with pytest.raises(ImpossibleOutcomeError):
            remove_qubit(new_product_state(["H"]), 0, PolLabel.V)

    def test_drift_detected(self):
        state = new_product_state([D])
        with pytest.raises(NumericalError):
            check_normalized(replace_weights(state, 2.0 * state.weights))
