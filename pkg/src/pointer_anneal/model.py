"""Shared domain types: run parameters, single-qubit states, pointer density
matrices and the step-function coupling schedule.

Conventions used throughout the package:

* every two-dimensional space uses the basis order ``(|0>, |1>)``;
* the global tensor order is ``qubit_1 x ... x qubit_N x pointer``, so in a
  dense amplitude vector the pointer is the least-significant bit and
  qubit ``j`` sits at bit ``N - j + 1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

#: Minimum number of midpoint substeps over the whole interval ``[0, T]``.
TOTAL_SUBSTEP_FLOOR = 65536
#: Minimum number of midpoint substeps inside a single coupling window.
MIN_SUBSTEPS_PER_SEGMENT = 4


class InvalidParameterError(ValueError):
    """A parameter lies outside its documented domain."""


class ConvergenceError(RuntimeError):
    """Numerical integration drifted beyond its configured tolerance."""


class ResourceError(RuntimeError):
    """A request exceeds a hard resource cap (e.g. dense state size)."""


class Case(enum.Enum):
    PHI = "phi"
    PSI = "psi"


class StateKind(enum.Enum):
    PHI_BASE = "phi"
    PSI_BASE = "psi"


def default_substeps(n_qubits: int) -> int:
    return max(MIN_SUBSTEPS_PER_SEGMENT, math.ceil(TOTAL_SUBSTEP_FLOOR / n_qubits))


@dataclass(frozen=True)
class SimParams:
    """Full configuration of one measurement run.

    ``substeps_per_segment`` of ``None`` selects :func:`default_substeps`.
    """

    epsilon: float
    n_qubits: int
    h: float = 0.5
    gamma: float = 0.5
    t_final: float = 10.0
    substeps_per_segment: int | None = None
    case_label: Case = Case.PHI

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise InvalidParameterError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise InvalidParameterError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        if not self.h > 0:
            raise InvalidParameterError(f"h must be positive, got {self.h!r}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma!r}")
        if not self.t_final > 0:
            raise InvalidParameterError(f"t_final must be positive, got {self.t_final!r}")
        if self.substeps_per_segment is not None and self.substeps_per_segment < 1:
            raise InvalidParameterError("substeps_per_segment must be >= 1")
        if not isinstance(self.case_label, Case):
            object.__setattr__(self, "case_label", Case(self.case_label))
        object.__setattr__(self, "n_qubits", int(self.n_qubits))

    @property
    def substeps(self) -> int:
        if self.substeps_per_segment is None:
            return default_substeps(self.n_qubits)
        return self.substeps_per_segment

    @property
    def segment_length(self) -> float:
        return self.t_final / self.n_qubits

    @property
    def coupling_scale(self) -> float:
        """Prefactor ``2h/epsilon`` of the qubit-pointer interaction."""
        return 2.0 * self.h / self.epsilon

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "n_qubits": self.n_qubits,
            "h": self.h,
            "gamma": self.gamma,
            "t_final": self.t_final,
            "substeps_per_segment": self.substeps_per_segment,
            "case_label": self.case_label.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        d = dict(d)
        d["case_label"] = Case(d.get("case_label", "phi"))
        return cls(**d)


@dataclass(frozen=True)
class QubitPureState:
    amp0: complex
    amp1: complex

    def __post_init__(self):
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParameterError(f"qubit state not normalized (norm^2 = {norm!r})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def probabilities(self) -> tuple[float, float]:
        return abs(self.amp0) ** 2, abs(self.amp1) ** 2

    @classmethod
    def from_vector(cls, v) -> "QubitPureState":
        return cls(complex(v[0]), complex(v[1]))


@dataclass(frozen=True, eq=False)
class PointerDensity:
    """2x2 density matrix of the pointer, basis ``(|0>_K, |1>_K)``."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise InvalidParameterError(f"pointer density must be 2x2, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise InvalidParameterError("pointer density is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise InvalidParameterError(f"pointer density trace is {np.trace(m)!r}")
        if np.linalg.eigvalsh(m)[0] < -1e-10:
            raise InvalidParameterError("pointer density has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def p0(self) -> float:
        return float(self.m[0, 0].real)

    @property
    def p1(self) -> float:
        return float(self.m[1, 1].real)

    @property
    def coherence(self) -> complex:
        return complex(self.m[0, 1])

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.m @ self.m)))

    def __repr__(self):
        return f"PointerDensity(p0={self.p0:.6g}, p1={self.p1:.6g}, rho01={self.coherence:.6g})"


def make_state(epsilon: float, kind: StateKind) -> QubitPureState:
    """Return the single-qubit state of the collective family.

    ``PHI_BASE`` is biased towards ``|0>`` with amplitudes
    ``(sqrt((1+eps)/2), sqrt((1-eps)/2))``; ``PSI_BASE`` swaps them.
    """
    if not (0.0 < epsilon <= 1.0):
        raise InvalidParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    big = math.sqrt((1.0 + epsilon) / 2.0)
    small = math.sqrt((1.0 - epsilon) / 2.0)
    if StateKind(kind) is StateKind.PHI_BASE:
        return QubitPureState(big, small)
    return QubitPureState(small, big)


def state_for_case(epsilon: float, case: Case) -> QubitPureState:
    kind = StateKind.PHI_BASE if case is Case.PHI else StateKind.PSI_BASE
    return make_state(epsilon, kind)


def overlap_collective(epsilon: float, n: int) -> float:
    """Overlap of the two N-fold product states, ``(1 - eps^2)^(N/2)``."""
    if not (0.0 < epsilon <= 1.0):
        raise InvalidParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n!r}")
    return (1.0 - epsilon * epsilon) ** (n / 2.0)


def scaling_lambda(epsilon: float, n: int) -> float:
    return n * epsilon * epsilon


def segment_window(j: int, params: SimParams) -> tuple[float, float]:
    """Half-open window ``[T(j-1)/N, Tj/N)`` of segment ``j`` (1-based)."""
    if not (1 <= j <= params.n_qubits):
        raise InvalidParameterError(f"segment index {j} outside 1..{params.n_qubits}")
    n, T = params.n_qubits, params.t_final
    return T * (j - 1) / n, T * j / n


def coupling_at(j: int, t: float, params: SimParams) -> float:
    """Coupling ``h_j(t)`` between qubit ``j`` and the pointer."""
    start, end = segment_window(j, params)
    return params.h if start <= t < end else 0.0


def active_segment(t: float, params: SimParams) -> int | None:
    """Index of the segment whose window contains ``t``, or ``None`` at/after T."""
    if t < 0 or t >= params.t_final:
        return None
    j = int(t * params.n_qubits // params.t_final) + 1
    # floating-point guard at window edges
    while j > 1 and t < segment_window(j, params)[0]:
        j -= 1
    while j < params.n_qubits and t >= segment_window(j, params)[1]:
        j += 1
    return j


def segment_boundaries(params: SimParams) -> np.ndarray:
    n = params.n_qubits
    return params.t_final * np.arange(n + 1) / n
