"""Brute-force reference on the full ``2^(N+1)``-dimensional space.

The amplitude index encodes ``qubit_1 ... qubit_N pointer`` with the pointer
as bit 0 and qubit ``j`` as bit ``N - j + 1``. The measurement Hamiltonian is
applied matrix-free by summing every coupling term from the schedule, and
time stepping is plain RK4, so nothing here relies on the segment
factorization used by the collision engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import (
    InvalidParameterError,
    PointerDensity,
    ResourceError,
    SimParams,
    coupling_at,
    segment_boundaries,
    state_for_case,
)
from .propagator import IntegratorConfig, Method, apply_generator_step

MAX_DENSE_QUBITS = 16
MATERIALIZE_CAP = 8
DEFAULT_UNIFORM_SAMPLES = 64


def _check_cap(n: int):
    if n > MAX_DENSE_QUBITS:
        raise ResourceError(f"dense oracle is capped at N <= {MAX_DENSE_QUBITS}, got N={n}")


@dataclass(frozen=True, eq=False)
class JointState:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        if self.amplitudes.shape != (2 ** (self.n_qubits + 1),):
            raise InvalidParameterError("amplitude vector length does not match 2^(N+1)")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class DenseRun:
    final: JointState
    times: np.ndarray
    rhos: np.ndarray  # (len(times), 2, 2)
    norms: np.ndarray

    @property
    def pointer_samples(self) -> list[tuple[float, PointerDensity]]:
        return [(float(t), PointerDensity(r)) for t, r in zip(self.times, self.rhos)]


def qubit_bits(n: int) -> np.ndarray:
    """Array ``q[j-1, idx]`` holding the bit of qubit ``j`` in amplitude ``idx``."""
    idx = np.arange(2 ** (n + 1))
    return np.stack([(idx >> (n - j + 1)) & 1 for j in range(1, n + 1)])


def product_state(qubit: np.ndarray, n: int, pointer: np.ndarray) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for _ in range(n):
        v = np.kron(v, qubit)
    return np.kron(v, pointer)


def initial_state(params: SimParams) -> JointState:
    _check_cap(params.n_qubits)
    q = state_for_case(params.epsilon, params.case_label).vector
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    return JointState(product_state(q, params.n_qubits, plus), params.n_qubits)


class _HamiltonianApplier:
    def __init__(self, params: SimParams, segment_order: tuple[int, ...] | None = None):
        _check_cap(params.n_qubits)
        self.params = params
        n = params.n_qubits
        idx = np.arange(2 ** (n + 1))
        self.flip = idx ^ 1
        pointer = idx & 1
        # match[j-1, idx]: the qubit coupled in window j has the same bit as the pointer
        bits = qubit_bits(n)
        if segment_order is not None:
            if sorted(segment_order) != list(range(1, n + 1)):
                raise InvalidParameterError("segment_order must be a permutation of 1..N")
            bits = bits[np.asarray(segment_order) - 1]
        self.match = (bits == pointer).astype(float)

    def hamiltonian(self, t: float, v: np.ndarray, active: int | None = None) -> np.ndarray:
        p = self.params
        s = t / p.t_final
        if active is not None:
            diag = (s * p.h * 2.0 / p.epsilon) * self.match[active - 1]
        else:
            couplings = np.array([coupling_at(j, t, p) for j in range(1, p.n_qubits + 1)])
            diag = s * (2.0 / p.epsilon) * (couplings @ self.match)
        return diag * v - p.gamma * (1.0 - s) * v[self.flip]

    def __call__(self, t, v, active=None):
        return -1j * self.hamiltonian(t, v, active)


def apply_hm(t: float, state: JointState, params: SimParams, active: int | None = None) -> np.ndarray:
    """Return ``-i H_M(t) |state>`` without building the matrix.

    ``active`` pins which segment is coupled (used at window endpoints where
    the step-function schedule is discontinuous); by default the schedule
    decides.
    """
    if state.n_qubits != params.n_qubits:
        raise InvalidParameterError("state and params disagree on N")
    return _applier(params)(t, state.amplitudes, active)


@lru_cache(maxsize=8)
def _applier(params: SimParams, segment_order: tuple[int, ...] | None = None) -> _HamiltonianApplier:
    return _HamiltonianApplier(params, segment_order)


def pointer_reduced(state: JointState) -> PointerDensity:
    return PointerDensity(_pointer_matrix(state.amplitudes))


def _pointer_matrix(amps: np.ndarray) -> np.ndarray:
    a = amps.reshape(-1, 2)
    return a.T @ a.conj()


def system_reduced(state: JointState) -> np.ndarray:
    """Reduced N-qubit density matrix (trace over the pointer); N <= 8 only."""
    if state.n_qubits > MATERIALIZE_CAP:
        raise ResourceError(f"system density materialization capped at N <= {MATERIALIZE_CAP}")
    a = state.amplitudes.reshape(-1, 2)
    return a @ a.conj().T


def _reference_collective(params: SimParams) -> np.ndarray:
    q = state_for_case(params.epsilon, params.case_label).vector
    return product_state(q, params.n_qubits, np.ones(1))


def fidelity_before_after(state_at_T: JointState, params: SimParams) -> float:
    """``<X|mu|X>`` for the collective input ``X`` of this case, by projection."""
    ref = _reference_collective(params)
    a = state_at_T.amplitudes.reshape(-1, 2)
    proj = ref.conj() @ a
    return float(np.sum(np.abs(proj) ** 2))


def fidelity_materialized(state_at_T: JointState, params: SimParams) -> float:
    ref = _reference_collective(params)
    mu = system_reduced(state_at_T)
    return float(np.real(ref.conj() @ mu @ ref))


def default_sample_times(params: SimParams) -> np.ndarray:
    uniform = np.linspace(0.0, params.t_final, DEFAULT_UNIFORM_SAMPLES + 1)
    return np.unique(np.concatenate([segment_boundaries(params), uniform]))


def evolve_full(params: SimParams, sample_times=None, config: IntegratorConfig | None = None,
                segment_order=None) -> DenseRun:
    """Integrate the full Schrodinger equation from the product initial state.

    Integration pieces never straddle a segment boundary. The step length
    matches the collision engine grid (``params.substeps`` per window)
    unless ``config`` overrides the per-window substep count.
    ``segment_order[j-1]`` names the qubit coupled during window ``j``
    (identity by default).
    """
    _check_cap(params.n_qubits)
    T, n = params.t_final, params.n_qubits
    if sample_times is None:
        sample_times = default_sample_times(params)
    sample_times = np.unique(np.asarray(sample_times, dtype=float))
    if sample_times.size and (sample_times[0] < 0 or sample_times[-1] > T):
        raise InvalidParameterError("sample times must lie in [0, T]")
    per_window = config.substeps if config is not None else params.substeps
    tol = config.unitarity_tol if config is not None else 1e-9

    applier = _applier(params, None if segment_order is None else tuple(segment_order))
    bounds = segment_boundaries(params)
    knots = np.unique(np.concatenate([bounds, sample_times]))
    want = set(sample_times.tolist())
    v = initial_state(params).amplitudes
    times, rhos, norms = [], [], []

    def record(t, x):
        times.append(t)
        rhos.append(_pointer_matrix(x))
        norms.append(np.linalg.norm(x))

    if 0.0 in want:
        record(0.0, v)
    seg_len = T / n
    for a, b in zip(knots[:-1], knots[1:]):
        j = min(n, int(np.searchsorted(bounds, a, side="right")))
        steps = max(1, math.ceil(per_window * (b - a) / seg_len - 1e-9))
        cfg = IntegratorConfig(Method.RK4, steps, tol)
        v = apply_generator_step(v, lambda t, x, j=j: applier(t, x, j), a, b, cfg)
        if b in want:
            record(b, v)
    return DenseRun(JointState(v, n), np.array(times), np.array(rhos), np.array(norms))


def qubit_populations(state: JointState) -> np.ndarray:
    """Population of ``|1>`` for each qubit ``j = 1..N``."""
    probs = np.abs(state.amplitudes) ** 2
    return qubit_bits(state.n_qubits) @ probs

