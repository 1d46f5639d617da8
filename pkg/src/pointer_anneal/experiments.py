"""Experiment harness: pointer time series, threshold-N searches,
fidelity-vs-N tables, scaling fits and adiabatic reports."""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import collision, dense
from .model import Case, InvalidParameterError, SimParams
from .two_level import adiabatic_value

WORKERS_ENV = "POINTER_ANNEAL_WORKERS"

TRAJECTORY_COLUMNS = ("t", "p0", "p1", "re01", "im01")
SWEEP_COLUMNS = ("epsilon", "n", "final_p1", "final_p0", "fidelity")
THRESHOLD_COLUMNS = ("epsilon", "n_min", "value_at_n_min")
FIDELITY_COLUMNS = ("epsilon", "n", "fidelity")
ADIABATIC_COLUMNS = ("t", "metric", "gap")


class Quantity(enum.Enum):
    SUCCESS_P1 = "p1"
    FIDELITY = "fidelity"


class Grid(enum.Enum):
    POWERS_OF_TWO = "pow2"
    INTEGER_BISECTION = "bisect"


@dataclass(frozen=True)
class ThresholdQuery:
    epsilon: float
    target: float = 0.9
    quantity: Quantity = Quantity.SUCCESS_P1
    n_grid: Grid = Grid.POWERS_OF_TWO
    n_cap: int = 1 << 18

    def __post_init__(self):
        if not (0.0 < self.target < 1.0):
            raise InvalidParameterError(f"target must lie in (0, 1), got {self.target!r}")
        if self.n_cap < 1:
            raise InvalidParameterError("n_cap must be >= 1")
        object.__setattr__(self, "quantity", Quantity(self.quantity))
        object.__setattr__(self, "n_grid", Grid(self.n_grid))


@dataclass(frozen=True)
class ThresholdResult:
    epsilon: float
    n_min: int | None
    value: float | None
    probes: dict[int, float] = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.n_min is not None

    def neighbors(self) -> dict[int, float]:
        """Probe values at the grid points adjacent to ``n_min``."""
        if self.n_min is None:
            return {}
        keys = sorted(self.probes)
        i = keys.index(self.n_min)
        return {k: self.probes[k] for k in keys[max(0, i - 1): i + 2]}


@dataclass(frozen=True)
class ScalingFit:
    points: tuple[tuple[float, int], ...]
    lambda_hat: float
    residual: float


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InvalidParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _pool_map(fn, items, workers: int | None = None):
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _rows_from(times, rhos) -> list[dict]:
    return [
        {"t": float(t), "p0": float(r[0, 0].real), "p1": float(r[1, 1].real),
         "re01": float(r[0, 1].real), "im01": float(r[0, 1].imag)}
        for t, r in zip(times, rhos)
    ]


def simulate(params: SimParams, samples: int = 64, engine: str = "collision") -> tuple[list[dict], dict]:
    """Pointer trajectory on ``samples + 1`` uniform times plus final summary scalars."""
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    grid = params.t_final * np.arange(samples + 1) / samples
    if engine == "collision":
        res = collision.run(params, sample_times=grid)
        summary = {"final_p1": res.final_p1, "final_p0": res.final_p0, "fidelity": res.fidelity}
    elif engine == "dense":
        res = dense.evolve_full(params, sample_times=grid)
        final = res.rhos[-1]
        summary = {"final_p1": float(final[1, 1].real), "final_p0": float(final[0, 0].real),
                   "fidelity": dense.fidelity_before_after(res.final, params)}
    else:
        raise InvalidParameterError(f"unknown engine {engine!r}")
    return _rows_from(res.times, res.rhos), summary


def time_series(params: SimParams, samples: int = 64, engine: str = "collision") -> list[dict]:
    """Rows of ``(t, p0, p1, re01, im01)``, first row at ``t = 0``."""
    return simulate(params, samples, engine)[0]


def measure(params: SimParams, quantity: Quantity) -> float:
    res = collision.run(params, sample_stride=params.n_qubits)
    return res.final_p1 if Quantity(quantity) is Quantity.SUCCESS_P1 else res.fidelity


def min_n(query: ThresholdQuery, params_base: SimParams) -> ThresholdResult:
    """Smallest grid N whose final quantity reaches ``query.target``.

    N doubles from 1 until the target is met or ``n_cap`` is passed. On the
    integer grid the bracket found by doubling is then bisected. Every probe
    value is kept so non-monotonic behaviour shows up in the output.
    """
    probes: dict[int, float] = {}

    def value(n: int) -> float:
        if n not in probes:
            p = replace(params_base, epsilon=query.epsilon, n_qubits=n, case_label=Case.PHI)
            probes[n] = measure(p, query.quantity)
        return probes[n]

    n = 1
    while n <= query.n_cap and value(n) < query.target:
        n *= 2
    if n > query.n_cap:
        return ThresholdResult(query.epsilon, None, None, probes)
    if query.n_grid is Grid.INTEGER_BISECTION and n > 1:
        lo, hi = n // 2, n  # value(lo) < target <= value(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if value(mid) >= query.target:
                hi = mid
            else:
                lo = mid
        n = hi
    return ThresholdResult(query.epsilon, n, probes[n], probes)


def _min_n_task(args):
    return min_n(*args)


def threshold_sweep(epsilons, params_base: SimParams, target: float = 0.9,
                    quantity: Quantity = Quantity.SUCCESS_P1, grid: Grid = Grid.POWERS_OF_TWO,
                    n_cap: int = 1 << 18, workers: int | None = None) -> list[ThresholdResult]:
    queries = [ThresholdQuery(e, target, quantity, grid, n_cap) for e in sorted(epsilons, reverse=True)]
    return _pool_map(_min_n_task, [(q, params_base) for q in queries], workers)


def fidelity_vs_n(epsilon: float, n_list, params_base: SimParams, workers: int | None = None) -> list[dict]:
    rows = sweep([epsilon], n_list, params_base, workers)
    return [{"epsilon": r["epsilon"], "n": r["n"], "fidelity": r["fidelity"]} for r in rows]


def _sweep_task(p: SimParams) -> dict:
    res = collision.run(p, sample_stride=p.n_qubits)
    return {"epsilon": p.epsilon, "n": p.n_qubits, "final_p1": res.final_p1,
            "final_p0": res.final_p0, "fidelity": res.fidelity}


def sweep(epsilons, n_list, params_base: SimParams, workers: int | None = None) -> list[dict]:
    """Final pointer populations and fidelity on an (epsilon, N) grid, sorted by (epsilon, N)."""
    plist = [replace(params_base, epsilon=e, n_qubits=int(n))
             for e in sorted(set(epsilons)) for n in sorted(set(n_list))]
    return _pool_map(_sweep_task, plist, workers)


def fit_lambda(points) -> ScalingFit:
    """Least-squares fit of ``n_min = lambda / eps^2`` in log space."""
    pts = tuple((float(e), int(n)) for e, n in points)
    if not pts:
        raise InvalidParameterError("fit_lambda needs at least one point")
    logs = np.array([math.log(n) + 2.0 * math.log(e) for e, n in pts])
    log_lam = float(logs.mean())
    residual = float(np.sqrt(np.mean((logs - log_lam) ** 2)))
    return ScalingFit(pts, math.exp(log_lam), residual)


def adiabatic_report(params: SimParams, samples: int = 100) -> list[dict]:
    """Adiabatic matrix element and gap of the effective Phi-case Hamiltonian on a uniform grid."""
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    rows = []
    for t in params.t_final * np.arange(samples + 1) / samples:
        v = adiabatic_value(Case.PHI, float(t), params)
        rows.append({"t": float(t), "metric": v.metric, "gap": v.gap})
    return rows
