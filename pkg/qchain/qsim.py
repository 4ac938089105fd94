"""Exact statevector simulation for small qubit registers.

Basis index convention: qubit 0 is the most significant bit, and bitstrings
print qubit 0 first, so ``|101>`` is index 5.

Gate functions mutate the state in place and return it for chaining.  A
StateVector must stay on one thread at a time.
"""
from __future__ import annotations

import csv
import logging
import math
from collections.abc import Callable
from pathlib import Path

import numpy as np

from .config import ITERATION_TOLERANCE, MAX_QUBITS, NORM_TOLERANCE
from .errors import QSimError
from .models import GroverPlan

_LOG = logging.getLogger(__name__)

Marking = Callable[[int], bool] | np.ndarray

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


# =============================================================================
# State
# =============================================================================


def _check_qubits(n: int) -> None:
    if not isinstance(n, int) or not 1 <= n <= MAX_QUBITS:
        raise QSimError(f"qubit count must be in 1..{MAX_QUBITS}, got {n!r}")


class StateVector:
    """n-qubit pure state as a complex128 array of length 2^n."""

    __slots__ = ("n", "amplitudes")

    def __init__(self, n: int, amplitudes: np.ndarray) -> None:
        _check_qubits(n)
        if amplitudes.shape != (2**n,):
            raise QSimError(f"expected {2**n} amplitudes, got shape {amplitudes.shape}")
        self.n = n
        self.amplitudes = amplitudes.astype(np.complex128, copy=False)

    @classmethod
    def from_amplitudes(cls, amplitudes: np.ndarray | list[complex]) -> StateVector:
        amps = np.asarray(amplitudes, dtype=np.complex128)
        size = amps.shape[0] if amps.ndim == 1 else 0
        n = size.bit_length() - 1
        if size < 2 or size != 2**n:
            raise QSimError(f"amplitude count must be a power of two >= 2, got {amps.shape}")
        state = cls(n, amps.copy())
        if abs(state.norm() - 1.0) > NORM_TOLERANCE:
            raise QSimError(f"amplitudes are not normalised (norm {state.norm():.15f})")
        return state

    @classmethod
    def basis_state(cls, n: int, index: int) -> StateVector:
        _check_qubits(n)
        if not 0 <= index < 2**n:
            raise QSimError(f"basis index {index} out of range for {n} qubits")
        amps = np.zeros(2**n, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n, amps)

    @property
    def size(self) -> int:
        return self.amplitudes.shape[0]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.probabilities()))

    def copy(self) -> StateVector:
        return StateVector(self.n, self.amplitudes.copy())

    def __repr__(self) -> str:
        return f"StateVector(n={self.n}, norm={self.norm():.12f})"


def new_zero_state(n: int) -> StateVector:
    return StateVector.basis_state(n, 0)


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


# =============================================================================
# Gates
# =============================================================================


def apply_hadamard_all(state: StateVector) -> StateVector:
    """H on every qubit via an in-place fast Walsh-Hadamard transform."""
    a = state.amplitudes
    half = 1
    while half < state.size:
        view = a.reshape(-1, 2, half)
        top = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = top - view[:, 1, :]
        half *= 2
    a /= math.sqrt(state.size)
    return state


def apply_gate(state: StateVector, matrix: np.ndarray, qubit: int) -> StateVector:
    """Apply a single-qubit unitary to ``qubit``."""
    if not 0 <= qubit < state.n:
        raise QSimError(f"qubit {qubit} out of range for {state.n} qubits")
    tensor = state.amplitudes.reshape((2,) * state.n)
    moved = np.tensordot(matrix, tensor, axes=([1], [qubit]))
    state.amplitudes[:] = np.moveaxis(moved, 0, qubit).reshape(-1)
    return state


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    if control == target:
        raise QSimError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < state.n:
            raise QSimError(f"qubit {q} out of range for {state.n} qubits")
    tensor = state.amplitudes.reshape((2,) * state.n)
    ones = [slice(None)] * state.n
    ones[control] = 1
    sub = tensor[tuple(ones)]
    # target axis index shifts down by one once control is sliced away
    axis = target - 1 if target > control else target
    sub[:] = np.flip(sub, axis=axis).copy()
    return state


def marked_mask(n: int, marking: Marking) -> np.ndarray:
    """Boolean mask of length 2^n from a predicate or a precomputed mask."""
    size = 2**n
    if isinstance(marking, np.ndarray):
        mask = marking.astype(bool, copy=False)
        if mask.shape != (size,):
            raise QSimError(f"marking mask must have length {size}, got shape {mask.shape}")
        return mask
    return np.fromiter((bool(marking(i)) for i in range(size)), dtype=bool, count=size)


def apply_predicate_phase_oracle(state: StateVector, marking: Marking) -> StateVector:
    """Multiply every marked basis amplitude by -1."""
    mask = marked_mask(state.n, marking)
    state.amplitudes[mask] *= -1
    return state


def apply_diffusion(state: StateVector) -> StateVector:
    """Inversion about the mean: 2|s><s| - I."""
    a = state.amplitudes
    mean = a.mean()
    a *= -1
    a += 2 * mean
    return state


# =============================================================================
# Grover
# =============================================================================


def _theta(N: int, M: int) -> float:
    if not 1 <= M <= N:
        raise QSimError(f"need 1 <= M <= N, got N={N}, M={M}")
    return math.asin(math.sqrt(M / N))


def optimal_iterations(N: int, M: int) -> int:
    """k = round(pi/(4 theta) - 1/2), floored at 0, with halves rounding up."""
    raw = math.pi / (4 * _theta(N, M)) - 0.5
    return max(0, math.floor(raw + 0.5 + ITERATION_TOLERANCE))


def grover_success_probability(N: int, M: int, k: int) -> float:
    theta = _theta(N, M)
    return math.sin((2 * k + 1) * theta) ** 2


def grover_plan(N: int, M: int) -> GroverPlan:
    n = N.bit_length() - 1
    if N != 2**n:
        raise QSimError(f"search space must be a power of two, got {N}")
    return GroverPlan(n=n, marked=M, iterations=optimal_iterations(N, M), theta=_theta(N, M))


def marked_mass(state: StateVector, mask: np.ndarray) -> float:
    return float(np.sum(state.probabilities()[mask]))


def grover_state(n: int, marking: Marking, k: int) -> tuple[StateVector, np.ndarray]:
    """Run H^n then ``k`` oracle+diffusion rounds; returns (state, mask)."""
    if k < 0:
        raise QSimError(f"iteration count must be >= 0, got {k}")
    state = apply_hadamard_all(new_zero_state(n))
    mask = marked_mask(n, marking)
    if not mask.any():
        raise QSimError("marking function marks no basis state")
    for _ in range(k):
        state.amplitudes[mask] *= -1
        apply_diffusion(state)
    return state, mask


def grover_search(
    n: int,
    marking: Marking,
    k: int,
    rng: np.random.Generator,
) -> tuple[int, float]:
    """Sample one basis index after ``k`` Grover rounds.

    Returns ``(index, marked_mass)`` where the mass is the exact probability
    summed over marked indices.
    """
    state, mask = grover_state(n, marking, k)
    mass = marked_mass(state, mask)
    index = int(sample_indices(state, 1, rng)[0])
    _LOG.debug("Grover n=%d k=%d marked_mass=%.12f sampled=%d", n, k, mass, index)
    return index, mass


# =============================================================================
# GHZ and measurement
# =============================================================================


def prepare_ghz(n: int) -> StateVector:
    """(|0...0> + |1...1>)/sqrt(2) from H on qubit 0 and a CNOT chain."""
    state = new_zero_state(n)
    apply_gate(state, HADAMARD, 0)
    for q in range(n - 1):
        apply_cnot(state, q, q + 1)
    return state


def sample_indices(state: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Born-rule samples of basis indices."""
    probs = state.probabilities()
    probs = probs / probs.sum()
    return rng.choice(state.size, size=shots, p=probs)


def measure_all(state: StateVector, rng: np.random.Generator) -> str:
    """Computational-basis measurement of every qubit, qubit 0 first."""
    return bitstring(int(sample_indices(state, 1, rng)[0]), state.n)


def dump_distribution(state: StateVector, path: Path | str) -> Path:
    """Write ``index,probability`` rows for debugging."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "probability"])
        for i, p in enumerate(state.probabilities()):
            writer.writerow([i, repr(float(p))])
    return path
