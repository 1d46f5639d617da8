"""Two-level annealing: the closed-form instantaneous ground state, the
effective pointer Hamiltonians seen by each collective state, and the
adiabatic matrix element.

Pauli-like operators use the annealing sign convention
``sz' = |1><1| - |0><0|`` and ``sx = |0><1| + |1><0|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Case, ConvergenceError, InvalidParameterError, QubitPureState, SimParams
from .propagator import IntegratorConfig, Method, propagate

SZ = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TwoLevelHamiltonian:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=complex)
        if m.shape != (2, 2) or np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise InvalidParameterError("two-level Hamiltonian must be a Hermitian 2x2 matrix")
        object.__setattr__(self, "m", m)


@dataclass(frozen=True, eq=False)
class EigenPair:
    ground_energy: float
    excited_energy: float
    ground_vec: np.ndarray
    excited_vec: np.ndarray
    gap: float
    degenerate: bool = False


@dataclass(frozen=True)
class AdiabaticValue:
    metric: float
    gap: float
    degenerate: bool


def _check_t(t: float, params: SimParams):
    if not (0.0 <= t <= params.t_final):
        raise InvalidParameterError(f"t={t!r} outside [0, {params.t_final}]")


def f_of_t(t: float, params: SimParams, h: float | None = None) -> float:
    """``-h t + sqrt((h t)^2 + gamma^2 (t - T)^2)``; ``h`` may override the field sign."""
    h = params.h if h is None else h
    g, T = params.gamma, params.t_final
    return -h * t + math.sqrt((h * t) ** 2 + (g * (t - T)) ** 2)


def closed_form_phi_t(t: float, params: SimParams, h: float | None = None) -> QubitPureState:
    """Instantaneous ground state of ``(t/T) h sz' - gamma (1 - t/T) sx``.

    The sign on the ``|1>`` amplitude follows the published form; only the
    probabilities are physically meaningful. At ``t = T`` the removable 0/0
    is replaced by its limit (``|0>`` for ``h > 0``, ``|1>`` for ``h < 0``).
    Pass ``h=-params.h`` to obtain the curve matching the Phi-case pointer.
    """
    _check_t(t, params)
    h = params.h if h is None else h
    g, T = params.gamma, params.t_final
    f = f_of_t(t, params, h)
    b = g * (t - T)
    den = math.sqrt(b * b + f * f)
    if den == 0.0 or t == T:
        return QubitPureState(1.0, 0.0) if h > 0 else QubitPureState(0.0, -1.0)
    return QubitPureState(-b / den, -f / den)


def _field_sign(case: Case) -> float:
    return -1.0 if Case(case) is Case.PHI else 1.0


def effective_hamiltonian(case: Case, t: float, params: SimParams) -> TwoLevelHamiltonian:
    _check_t(t, params)
    s = t / params.t_final
    m = _field_sign(case) * s * params.h * SZ - params.gamma * (1.0 - s) * SX
    return TwoLevelHamiltonian(m)


def effective_derivative(case: Case, params: SimParams) -> np.ndarray:
    """Analytic ``dH/dt`` of the effective Hamiltonian (time independent)."""
    T = params.t_final
    return _field_sign(case) * (params.h / T) * SZ + (params.gamma / T) * SX


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = 0 if abs(v[0]) > 1e-14 else 1
    return v * (abs(v[k]) / v[k])


def eigensystem(hm: TwoLevelHamiltonian) -> EigenPair:
    """Exact 2x2 eigendecomposition with the first nonzero component real positive."""
    m = hm.m
    mean = 0.5 * (m[0, 0] + m[1, 1]).real
    dz = 0.5 * (m[1, 1] - m[0, 0]).real
    off = m[0, 1]
    radius = math.hypot(dz, abs(off))
    if radius < DEGENERACY_TOL:
        e = np.eye(2, dtype=complex)
        return EigenPair(mean, mean, e[0], e[1], 0.0, degenerate=True)
    # ground vector of [[-dz, off], [conj(off), dz]] (shifted by mean)
    if dz >= 0:
        g = np.array([radius + dz, -np.conj(off)], dtype=complex)
    else:
        g = np.array([off, dz - radius], dtype=complex)
    g = _fix_phase(g / np.linalg.norm(g))
    e = _fix_phase(np.array([-np.conj(g[1]), np.conj(g[0])]))
    return EigenPair(mean - radius, mean + radius, g, e, 2.0 * radius)


def adiabatic_value(case: Case, t: float, params: SimParams) -> AdiabaticValue:
    pair = eigensystem(effective_hamiltonian(case, t, params))
    dh = effective_derivative(case, params)
    metric = abs(np.vdot(pair.excited_vec, dh @ pair.ground_vec))
    return AdiabaticValue(float(metric), pair.gap, pair.degenerate)


def adiabatic_metric(case: Case, t: float, params: SimParams) -> float:
    """``|<E1(t)| dH/dt |G(t)>|`` for the effective pointer Hamiltonian."""
    return adiabatic_value(case, t, params).metric


def integrate_effective(case: Case, params: SimParams, samples: int,
                        substeps: int = 65536) -> tuple[np.ndarray, list[QubitPureState]]:
    """Evolve ``(|0>+|1>)/sqrt(2)`` under the effective Hamiltonian.

    Returns the uniform sample grid (``samples`` points including both ends)
    and the state at each grid point. ``substeps`` is the total number of
    midpoint-exponential steps over ``[0, T]``.
    """
    if samples < 2:
        raise InvalidParameterError("samples must be >= 2")
    T = params.t_final
    sign = _field_sign(case)

    def gen(t):
        s = np.asarray(t)[..., None, None] / T
        return sign * s * params.h * SZ - params.gamma * (1.0 - s) * SX

    ts = np.linspace(0.0, T, samples)
    per = max(1, math.ceil(substeps / (samples - 1)))
    us = propagate(gen, ts[:-1], ts[1:], IntegratorConfig(Method.MIDPOINT_EXPONENTIAL, per))
    v = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    out = [QubitPureState.from_vector(v)]
    for u in us:
        v = u @ v
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-9:
            raise ConvergenceError(f"effective evolution lost normalization ({nrm!r})")
        v = v / nrm
        out.append(QubitPureState.from_vector(v))
    return ts, out


def effective_p1(params: SimParams, times: np.ndarray, case: Case = Case.PHI,
                 substeps: int = 65536) -> np.ndarray:
    """Population of ``|1>`` of the effective solution at arbitrary sorted times."""
    times = np.asarray(times, dtype=float)
    T = params.t_final
    sign = _field_sign(case)

    def gen(t):
        s = np.asarray(t)[..., None, None] / T
        return sign * s * params.h * SZ - params.gamma * (1.0 - s) * SX

    grid = np.unique(np.concatenate([[0.0], times]))
    v = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    p = {0.0: 0.5}
    for a, b in zip(grid[:-1], grid[1:]):
        per = max(1, math.ceil(substeps * (b - a) / T))
        v = propagate(gen, a, b, IntegratorConfig(Method.MIDPOINT_EXPONENTIAL, per)) @ v
        p[b] = float(abs(v[1]) ** 2)
    return np.array([p[t] for t in times])
