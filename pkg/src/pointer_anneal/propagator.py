"""Fixed-grid time-ordered propagation for small Hermitian generators.

Generators are callables ``t -> H`` that broadcast over arrays of times:
given ``t`` of shape ``S`` they return an array of shape ``S + (d, d)``.
A generator returning a single constant ``(d, d)`` matrix is broadcast
automatically.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .model import ConvergenceError, InvalidParameterError

logger = logging.getLogger(__name__)

#: Norm / unitarity drift above which a silent renormalization is logged.
RENORM_THRESHOLD = 1e-12


class Method(enum.Enum):
    MIDPOINT_EXPONENTIAL = "midpoint"
    RK4 = "rk4"


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.MIDPOINT_EXPONENTIAL
    substeps: int = 4
    unitarity_tol: float = 1e-10

    def __post_init__(self):
        if self.substeps < 1:
            raise InvalidParameterError(f"substeps must be >= 1, got {self.substeps}")
        if not isinstance(self.method, Method):
            object.__setattr__(self, "method", Method(self.method))


def expm_hermitian(hs: np.ndarray, dt) -> np.ndarray:
    """``exp(-i H dt)`` for a (stack of) Hermitian matrices via ``eigh``."""
    w, v = np.linalg.eigh(hs)
    phase = np.exp(-1j * w * np.asarray(dt)[..., None])
    return (v * phase[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def unitarity_defect(u: np.ndarray) -> float:
    d = u.shape[-1]
    gram = np.conj(np.swapaxes(u, -1, -2)) @ u
    return float(np.max(np.abs(gram - np.eye(d))))


def _eval(generator, t: np.ndarray) -> np.ndarray:
    hs = np.asarray(generator(t), dtype=complex)
    if hs.shape[: t.ndim] != t.shape:
        hs = np.broadcast_to(hs, t.shape + hs.shape[-2:])
    return hs


def _chain(steps: np.ndarray) -> np.ndarray:
    """Time-ordered product over axis -3: ``steps[..., -1, :, :] @ ... @ steps[..., 0, :, :]``."""
    u = steps[..., 0, :, :]
    for s in range(1, steps.shape[-3]):
        u = steps[..., s, :, :] @ u
    return u


def _nearest_unitary(u: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def propagate(generator, t0, t1, config: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Approximate the time-ordered exponential of ``-i int_{t0}^{t1} H dt``.

    ``t0`` and ``t1`` may be scalars or equal-shape arrays, in which case one
    propagator per window is returned (shape ``t0.shape + (d, d)``). The
    generator must be smooth on every window; split at discontinuities.
    """
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    if np.any(t1 <= t0):
        raise InvalidParameterError("propagate requires t0 < t1")
    n = config.substeps
    dt = (t1 - t0) / n
    k = np.arange(n)

    if config.method is Method.MIDPOINT_EXPONENTIAL:
        tm = t0[..., None] + (k + 0.5) * dt[..., None]
        steps = expm_hermitian(_eval(generator, tm), dt[..., None])
        u = _chain(steps)
    else:
        u = _rk4_unitary(generator, t0, dt, n)

    defect = unitarity_defect(u)
    if defect > config.unitarity_tol:
        raise ConvergenceError(
            f"propagator unitarity defect {defect:.3e} exceeds tolerance {config.unitarity_tol:.1e}"
        )
    if config.method is Method.RK4 and defect > RENORM_THRESHOLD:
        logger.debug("projecting RK4 propagator onto unitaries (defect %.3e)", defect)
        u = _nearest_unitary(u)
    return u


def _rk4_unitary(generator, t0, dt, n):
    h0 = _eval(generator, t0)
    d = h0.shape[-1]
    u = np.broadcast_to(np.eye(d, dtype=complex), t0.shape + (d, d)).copy()
    for s in range(n):
        t = t0 + s * dt
        c = -1j * dt[..., None, None]
        ha = _eval(generator, t)
        hm = _eval(generator, t + 0.5 * dt)
        hb = _eval(generator, t + dt)
        k1 = c * (ha @ u)
        k2 = c * (hm @ (u + 0.5 * k1))
        k3 = c * (hm @ (u + 0.5 * k2))
        k4 = c * (hb @ (u + k3))
        u = u + (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return u


def apply_generator_step(state, generator_apply, t0: float, t1: float,
                         config: IntegratorConfig = IntegratorConfig(method=Method.RK4)) -> np.ndarray:
    """Advance a state vector from ``t0`` to ``t1`` matrix-free.

    ``generator_apply(t, v)`` must return ``-i H(t) v``. Only RK4 is
    available in matrix-free form. Norm drift above ``RENORM_THRESHOLD`` is
    renormalized (and logged); drift above ``config.unitarity_tol`` raises.
    """
    if config.method is not Method.RK4:
        raise InvalidParameterError("matrix-free stepping supports RK4 only")
    if not t1 > t0:
        raise InvalidParameterError("apply_generator_step requires t0 < t1")
    v = np.array(state, dtype=complex)
    norm_in = np.linalg.norm(v)
    n = config.substeps
    dt = (t1 - t0) / n
    for s in range(n):
        t = t0 + s * dt
        k1 = generator_apply(t, v)
        k2 = generator_apply(t + 0.5 * dt, v + 0.5 * dt * k1)
        k3 = generator_apply(t + 0.5 * dt, v + 0.5 * dt * k2)
        k4 = generator_apply(t + dt, v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = abs(np.linalg.norm(v) - norm_in)
    if drift > config.unitarity_tol:
        raise ConvergenceError(f"norm drift {drift:.3e} exceeds tolerance {config.unitarity_tol:.1e}")
    if drift > RENORM_THRESHOLD:
        logger.debug("renormalizing state after norm drift %.3e", drift)
        v *= norm_in / np.linalg.norm(v)
    return v
