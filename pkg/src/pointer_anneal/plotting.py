"""Figure rendering for CLI reports. Figures are written to files only."""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _figure(width=5.0, height=3.4):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectory(rows, path, title=None, reference=None):
    """Pointer diagonals vs time; ``reference`` is an optional ``(t, p1)`` pair of arrays."""
    fig, ax = _figure()
    t = [r["t"] for r in rows]
    ax.plot(t, [r["p1"] for r in rows], color="tab:blue", label=r"$\langle 1|\rho|1\rangle$")
    ax.plot(t, [r["p0"] for r in rows], color="tab:red", label=r"$\langle 0|\rho|0\rangle$")
    if reference is not None:
        ax.plot(*reference, color="k", ls=":", label="effective two-level")
    ax.set_xlabel("t")
    ax.set_ylabel("population")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    _save(fig, path)


def plot_thresholds(results, lambda_hat, path, ylabel="minimum N"):
    fig, ax = _figure()
    pts = [(r.epsilon, r.n_min) for r in results if r.n_min is not None]
    if pts:
        eps, n = zip(*pts)
        ax.loglog(eps, n, "o", color="tab:blue", label="search")
    grid = np.geomspace(min(r.epsilon for r in results), max(r.epsilon for r in results), 50)
    ax.loglog(grid, lambda_hat / grid**2, color="k", label=rf"$N = {lambda_hat:.3g}/\epsilon^2$")
    ax.set_xlabel(r"$\epsilon$")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best")
    _save(fig, path)


def plot_sweep(rows, path, column="fidelity"):
    fig, ax = _figure()
    by_eps = defaultdict(list)
    for r in rows:
        by_eps[r["epsilon"]].append((r["n"], r[column]))
    for eps in sorted(by_eps, reverse=True):
        n, v = zip(*sorted(by_eps[eps]))
        ax.semilogx(n, v, "o-", ms=3, label=rf"$\epsilon={eps:g}$")
    ax.set_xlabel("N")
    ax.set_ylabel(column)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best")
    _save(fig, path)


def plot_adiabatic(rows, path):
    fig, ax = _figure()
    t = [r["t"] for r in rows]
    ax.plot(t, [r["metric"] for r in rows], color="tab:blue", label="adiabatic metric")
    ax2 = ax.twinx()
    ax2.plot(t, [r["gap"] for r in rows], color="tab:gray", ls="--", label="gap")
    ax.set_xlabel("t")
    ax.set_ylabel("metric")
    ax2.set_ylabel("gap")
    _save(fig, path)
