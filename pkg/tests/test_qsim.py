"""Tests for the statevector simulator."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchain.errors import QSimError
from qchain.qsim import (
    HADAMARD,
    PAULI_X,
    StateVector,
    apply_cnot,
    apply_diffusion,
    apply_gate,
    apply_hadamard_all,
    apply_predicate_phase_oracle,
    bitstring,
    dump_distribution,
    grover_plan,
    grover_search,
    grover_state,
    grover_success_probability,
    measure_all,
    new_zero_state,
    optimal_iterations,
    prepare_ghz,
    sample_indices,
)

# =============================================================================
# State construction
# =============================================================================


def test_zero_state_is_normalised():
    state = new_zero_state(4)
    assert state.size == 16
    assert state.amplitudes[0] == 1
    assert state.norm() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [0, 25, -1])
def test_qubit_count_out_of_range(n):
    with pytest.raises(QSimError):
        new_zero_state(n)


def test_from_amplitudes_rejects_bad_input():
    with pytest.raises(QSimError, match="normalised"):
        StateVector.from_amplitudes([1.0, 1.0])
    with pytest.raises(QSimError, match="power of two"):
        StateVector.from_amplitudes([1.0, 0.0, 0.0])


def test_bitstring_prints_qubit_zero_first():
    assert bitstring(5, 3) == "101"
    assert bitstring(1, 4) == "0001"


# =============================================================================
# Gates
# =============================================================================


def test_hadamard_on_qubit_zero_touches_msb():
    state = apply_gate(new_zero_state(2), HADAMARD, 0)
    expected = np.zeros(4)
    expected[[0, 2]] = 1 / math.sqrt(2)
    np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)


def test_pauli_x_flips_one_qubit():
    state = apply_gate(new_zero_state(3), PAULI_X, 0)
    assert state.amplitudes[4] == pytest.approx(1.0)
    state = apply_gate(new_zero_state(3), PAULI_X, 2)
    assert state.amplitudes[1] == pytest.approx(1.0)


def test_hadamard_all_is_uniform_and_self_inverse():
    state = apply_hadamard_all(new_zero_state(5))
    np.testing.assert_allclose(state.probabilities(), np.full(32, 1 / 32), atol=1e-12)
    apply_hadamard_all(state)
    np.testing.assert_allclose(state.amplitudes, new_zero_state(5).amplitudes, atol=1e-12)


def test_hadamard_all_matches_per_qubit_gates():
    a = StateVector.basis_state(3, 6)
    b = a.copy()
    apply_hadamard_all(a)
    for q in range(3):
        apply_gate(b, HADAMARD, q)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)


def test_cnot_truth_table():
    # |10> -> |11> with control 0
    state = apply_cnot(StateVector.basis_state(2, 2), 0, 1)
    assert state.amplitudes[3] == pytest.approx(1.0)
    # |01> -> |11> with control 1
    state = apply_cnot(StateVector.basis_state(2, 1), 1, 0)
    assert state.amplitudes[3] == pytest.approx(1.0)
    # control clear: unchanged
    state = apply_cnot(StateVector.basis_state(2, 1), 0, 1)
    assert state.amplitudes[1] == pytest.approx(1.0)


def test_cnot_rejects_same_qubit():
    with pytest.raises(QSimError):
        apply_cnot(new_zero_state(2), 1, 1)


def test_phase_oracle_negates_marked():
    state = apply_hadamard_all(new_zero_state(2))
    apply_predicate_phase_oracle(state, lambda i: i == 3)
    assert state.amplitudes[3].real == pytest.approx(-0.5)
    assert state.amplitudes[0].real == pytest.approx(0.5)


def test_phase_oracle_twice_is_identity():
    state = apply_gate(apply_hadamard_all(new_zero_state(3)), PAULI_X, 1)
    before = state.amplitudes.copy()
    for _ in range(2):
        apply_predicate_phase_oracle(state, lambda i: i % 3 == 0)
    np.testing.assert_allclose(state.amplitudes, before, atol=1e-12)


def test_empty_oracle_changes_nothing():
    state = apply_hadamard_all(StateVector.basis_state(3, 5))
    before = state.amplitudes.copy()
    apply_predicate_phase_oracle(state, lambda i: False)
    np.testing.assert_array_equal(state.amplitudes, before)


def test_diffusion_fixes_uniform_state():
    state = apply_hadamard_all(new_zero_state(4))
    apply_diffusion(state)
    np.testing.assert_allclose(state.amplitudes, np.full(16, 0.25), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 6),
    ops=st.lists(
        st.tuples(st.sampled_from(["h", "x", "cnot", "diff", "oracle"]), st.integers(0, 5), st.integers(0, 5)),
        max_size=12,
    ),
)
def test_gates_preserve_norm(n, ops):
    state = apply_hadamard_all(new_zero_state(n))
    for op, a, b in ops:
        a, b = a % n, b % n
        if op == "h":
            apply_gate(state, HADAMARD, a)
        elif op == "x":
            apply_gate(state, PAULI_X, a)
        elif op == "cnot" and a != b:
            apply_cnot(state, a, b)
        elif op == "diff":
            apply_diffusion(state)
        elif op == "oracle":
            apply_predicate_phase_oracle(state, lambda i, bit=a: (i >> bit) & 1 == 1)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)


# =============================================================================
# Grover
# =============================================================================


class TestGroverIterations:
    def test_four_states_one_marked(self):
        assert optimal_iterations(4, 1) == 1
        assert grover_success_probability(4, 1, 1) == pytest.approx(1.0, abs=1e-12)

    def test_eight_states_one_marked(self):
        assert optimal_iterations(8, 1) == 2
        assert grover_success_probability(8, 1, 2) == pytest.approx(0.9453125, abs=1e-12)

    def test_all_marked_needs_no_iterations(self):
        assert optimal_iterations(16, 16) == 0

    def test_plan(self):
        plan = grover_plan(1024, 1)
        assert (plan.n, plan.marked, plan.iterations) == (10, 1, 25)
        assert plan.search_space == 1024
        with pytest.raises(QSimError):
            grover_plan(6, 1)

    def test_invalid_counts(self):
        with pytest.raises(QSimError):
            optimal_iterations(8, 0)
        with pytest.raises(QSimError):
            optimal_iterations(8, 9)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 20), data=st.data())
    def test_optimal_k_bounds(self, n, data):
        """The chosen k never exceeds ceil(pi/4 sqrt(N/M)) and keeps P >= 1 - M/N."""
        N = 2**n
        M = data.draw(st.integers(1, N))
        k = optimal_iterations(N, M)
        assert k <= math.ceil(math.pi / 4 * math.sqrt(N / M))
        assert grover_success_probability(N, M, k) >= 1 - M / N - 1e-9


class TestGroverState:
    def test_simulated_mass_matches_closed_form(self):
        state, mask = grover_state(3, lambda i: i == 5, 2)
        assert mask.sum() == 1
        assert float(state.probabilities()[5]) == pytest.approx(0.9453125, abs=1e-12)

    @pytest.mark.parametrize(("n", "marked"), [(4, [3]), (6, [1, 9, 40]), (8, list(range(0, 256, 16)))])
    def test_simulation_agrees_with_formula(self, n, marked):
        N, M = 2**n, len(marked)
        k = optimal_iterations(N, M)
        mask = np.zeros(N, dtype=bool)
        mask[marked] = True
        state, _ = grover_state(n, mask, k)
        assert float(state.probabilities()[mask].sum()) == pytest.approx(
            grover_success_probability(N, M, k), abs=1e-12
        )

    def test_nothing_marked(self):
        with pytest.raises(QSimError, match="marks no"):
            grover_state(3, lambda i: False, 1)

    def test_negative_iterations(self):
        with pytest.raises(QSimError):
            grover_state(3, lambda i: i == 1, -1)

    def test_search_finds_marked_index(self):
        rng = np.random.default_rng(3)
        hits = sum(grover_search(3, lambda i: i == 5, 2, rng)[0] == 5 for _ in range(1000))
        # P = 0.9453; 1000 shots put the count within 5 sigma of 945
        assert 910 <= hits <= 980

    def test_search_reports_exact_mass(self, rng):
        _, mass = grover_search(2, lambda i: i == 0, 1, rng)
        assert mass == pytest.approx(1.0, abs=1e-12)


# =============================================================================
# GHZ and measurement
# =============================================================================


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_ghz_has_two_equal_peaks(n):
    probs = prepare_ghz(n).probabilities()
    assert probs[0] == pytest.approx(0.5, abs=1e-12)
    assert probs[-1] == pytest.approx(0.5, abs=1e-12)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_ghz_measurement_is_all_equal(rng):
    state = prepare_ghz(6)
    outcomes = {measure_all(state, rng) for _ in range(200)}
    assert outcomes <= {"000000", "111111"}
    assert len(outcomes) == 2


def test_ghz_peaks_are_balanced(rng):
    samples = sample_indices(prepare_ghz(5), 10_000, rng)
    assert set(np.unique(samples)) <= {0, 31}
    assert abs(np.mean(samples == 0) - 0.5) < 0.02
    assert abs(np.mean(samples == 31) - 0.5) < 0.02


def test_measuring_a_basis_state_is_deterministic(rng):
    assert measure_all(StateVector.basis_state(3, 5), rng) == "101"
    assert measure_all(StateVector.basis_state(4, 1), rng) == "0001"


def test_sampling_follows_born_rule(rng):
    state = StateVector.from_amplitudes([math.sqrt(0.2), 0, 0, math.sqrt(0.8)])
    samples = sample_indices(state, 10_000, rng)
    assert set(np.unique(samples)) <= {0, 3}
    assert abs(np.mean(samples == 3) - 0.8) < 0.02


def test_sampling_is_reproducible():
    state = apply_hadamard_all(new_zero_state(4))
    a = sample_indices(state, 50, np.random.default_rng(9))
    b = sample_indices(state, 50, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_dump_distribution(tmp_path):
    path = dump_distribution(prepare_ghz(2), tmp_path / "ghz.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "probability"]
    assert len(rows) == 5
    assert float(rows[1][1]) == pytest.approx(0.5)
