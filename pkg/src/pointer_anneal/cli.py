"""Command-line front end.

Exit codes: 0 success, 1 verification tolerance breached, 2 invalid
parameters, 3 numerical convergence failure, 4 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, collision, dense, experiments
from .model import (
    Case,
    ConvergenceError,
    InvalidParameterError,
    ResourceError,
    SimParams,
    segment_boundaries,
)

log = logging.getLogger("pointer_anneal")

EXIT_OK, EXIT_TOL, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_RESOURCE = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InvalidParameterError(message)


def _float_list(s: str) -> list[float]:
    try:
        return [float(eval_fraction(x)) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def eval_fraction(x: str) -> float:
    """Parse ``0.25`` or ``1/4``."""
    x = x.strip()
    if "/" in x:
        num, den = x.split("/", 1)
        return float(num) / float(den)
    return float(x)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def write_csv(rows, columns, path=None):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    finally:
        if path:
            fh.close()


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def write_manifest(path: Path, *, command, params, integrator, started, outputs, summary, seed=None, extra=None):
    manifest = {
        "command": command,
        "params": params,
        "engine_version": __version__,
        "integrator": integrator,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
        "summary": summary,
        "seed": seed,
    }
    if extra:
        manifest.update(extra)
    missing = [p for p in outputs if not Path(p).exists()]
    if missing:
        raise RuntimeError(f"manifest lists missing outputs: {missing}")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def _integrator_echo(params: SimParams, engine="collision") -> dict:
    if engine == "dense":
        return {"method": "rk4", "substeps_per_segment": params.substeps}
    return {"method": "midpoint", "substeps_per_segment": params.substeps}


def _add_physics(p, epsilon_required=True):
    if epsilon_required:
        p.add_argument("--epsilon", type=eval_fraction, required=True)
        p.add_argument("--n", type=int, required=True, help="number of qubits / segments")
    p.add_argument("--h", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--t-final", type=float, default=10.0)
    p.add_argument("--substeps", type=int, default=None, help="midpoint substeps per segment")


def _params(args, epsilon=None, n=None, case="phi") -> SimParams:
    return SimParams(
        epsilon=args.epsilon if epsilon is None else epsilon,
        n_qubits=args.n if n is None else n,
        h=args.h,
        gamma=args.gamma,
        t_final=args.t_final,
        substeps_per_segment=args.substeps,
        case_label=Case(case),
    )


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pointer-anneal", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one measurement simulation")
    _add_physics(s)
    s.add_argument("--case", choices=["phi", "psi"], default="phi")
    s.add_argument("--engine", choices=["collision", "dense"], default="collision")
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--out", type=Path, default=None)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--figure", type=Path, default=None)

    v = sub.add_parser("verify", help="compare the collision engine with the dense oracle")
    _add_physics(v)
    v.add_argument("--case", choices=["phi", "psi"], default="phi")
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--seed", type=int, default=0, help="seed for the random Hermiticity probe")
    v.add_argument("--out", type=Path, default=None, help="write a JSON report here")

    t = sub.add_parser("threshold", help="minimum N reaching a target, per epsilon")
    _add_physics(t, epsilon_required=False)
    t.add_argument("--epsilon-list", type=_float_list, required=True)
    t.add_argument("--target", type=float, default=0.9)
    t.add_argument("--quantity", choices=["p1", "fidelity"], default="p1")
    t.add_argument("--grid", choices=["pow2", "bisect"], default="pow2")
    t.add_argument("--n-cap", type=int, default=1 << 18)
    t.add_argument("--workers", type=int, default=None)
    t.add_argument("--out", type=Path, default=None)
    t.add_argument("--figure", type=Path, default=None)

    w = sub.add_parser("sweep", help="final populations and fidelity over an (epsilon, N) grid")
    _add_physics(w, epsilon_required=False)
    w.add_argument("--epsilon-list", type=_float_list, required=True)
    w.add_argument("--n-list", type=_int_list, required=True)
    w.add_argument("--workers", type=int, default=None)
    w.add_argument("--out", type=Path, default=None)
    w.add_argument("--figure", type=Path, default=None)

    f = sub.add_parser("fit", help="fit n_min = lambda / epsilon^2")
    f.add_argument("--input", type=Path, required=True, help="CSV with epsilon,n_min columns")

    a = sub.add_parser("adiabatic", help="adiabatic metric and gap of the effective Hamiltonian")
    _add_physics(a, epsilon_required=False)
    a.add_argument("--samples", type=int, default=100)
    a.add_argument("--out", type=Path, default=None)
    a.add_argument("--figure", type=Path, default=None)
    return ap


def cmd_simulate(args) -> int:
    started = _now()
    params = _params(args, case=args.case)
    rows, summary = experiments.simulate(params, args.samples, args.engine)
    out = args.out or Path(f"trajectory.{args.format}")
    if args.format == "csv":
        write_csv(rows, experiments.TRAJECTORY_COLUMNS, out)
    else:
        out.write_text(json.dumps({"columns": list(experiments.TRAJECTORY_COLUMNS),
                                   "rows": [[r[c] for c in experiments.TRAJECTORY_COLUMNS] for r in rows]}))
    outputs = [out]
    if args.figure:
        from .plotting import plot_trajectory

        title = rf"$\epsilon={params.epsilon:g}$, N={params.n_qubits}, case {params.case_label.value}"
        plot_trajectory(rows, args.figure, title=title)
        outputs.append(args.figure)
    write_manifest(manifest_path(out), command="simulate", params=params.as_dict(),
                   integrator=_integrator_echo(params, args.engine), started=started,
                   outputs=outputs, summary=summary, extra={"engine": args.engine, "samples": args.samples})
    print(f"final_p1={summary['final_p1']!r} fidelity={summary['fidelity']!r}")
    return EXIT_OK


def _hermiticity_probe(params: SimParams, seed: int, pairs: int = 20) -> float:
    rng = np.random.default_rng(seed)
    dim = 2 ** (params.n_qubits + 1)
    worst = 0.0
    for _ in range(pairs):
        t = float(rng.uniform(0, params.t_final))
        x = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        y = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        hx = 1j * dense.apply_hm(t, dense.JointState(x, params.n_qubits), params)
        hy = 1j * dense.apply_hm(t, dense.JointState(y, params.n_qubits), params)
        worst = max(worst, abs(np.vdot(y, hx) - np.conj(np.vdot(x, hy))))
    return worst


def cmd_verify(args) -> int:
    started = _now()
    params = _params(args, case=args.case)
    if params.n_qubits > dense.MAX_DENSE_QUBITS:
        raise ResourceError(f"verify needs N <= {dense.MAX_DENSE_QUBITS}")
    bounds = segment_boundaries(params)
    eng = collision.run(params)
    ora = dense.evolve_full(params, sample_times=bounds)
    pointer_gap = float(np.max(np.abs(eng.rhos - ora.rhos)))
    f_dense = dense.fidelity_before_after(ora.final, params)
    fid_gap = abs(eng.fidelity - f_dense)
    herm = _hermiticity_probe(params, args.seed)
    discrepancy = max(pointer_gap, fid_gap)
    ok = discrepancy < args.tol
    print(f"max_pointer_discrepancy={pointer_gap:.3e} fidelity_collision={eng.fidelity!r} "
          f"fidelity_dense={f_dense!r} fidelity_discrepancy={fid_gap:.3e} hermiticity_defect={herm:.3e}")
    print(f"{'PASS' if ok else 'FAIL'}: discrepancy {discrepancy:.3e} vs tol {args.tol:.1e}")
    if args.out:
        summary = {"final_p1": eng.final_p1, "final_p0": eng.final_p0, "fidelity": eng.fidelity,
                   "max_pointer_discrepancy": pointer_gap, "fidelity_discrepancy": fid_gap,
                   "hermiticity_defect": herm, "pass": ok}
        args.out.write_text(json.dumps(summary, indent=2))
        write_manifest(manifest_path(args.out), command="verify", params=params.as_dict(),
                       integrator=_integrator_echo(params), started=started, outputs=[args.out],
                       summary=summary, seed=args.seed)
    return EXIT_OK if ok else EXIT_TOL


def _base_params(args) -> SimParams:
    return SimParams(epsilon=1.0, n_qubits=1, h=args.h, gamma=args.gamma,
                     t_final=args.t_final, substeps_per_segment=args.substeps)


def cmd_threshold(args) -> int:
    started = _now()
    base = _base_params(args)
    quantity = experiments.Quantity(args.quantity)
    results = experiments.threshold_sweep(args.epsilon_list, base, args.target, quantity,
                                          experiments.Grid(args.grid), args.n_cap, args.workers)
    rows = [{"epsilon": r.epsilon, "n_min": r.n_min, "value_at_n_min": r.value} for r in results]
    write_csv(rows, experiments.THRESHOLD_COLUMNS, args.out)
    found = [(r.epsilon, r.n_min) for r in results if r.found]
    fit = experiments.fit_lambda(found) if found else None
    if fit:
        print(f"lambda_hat={fit.lambda_hat!r} residual={fit.residual!r}")
    else:
        print("lambda_hat= residual=")
    for r in results:
        if not r.found:
            log.warning("epsilon=%g: target not reached up to N=%d", r.epsilon, args.n_cap)
    if args.out:
        outputs = [args.out]
        if args.figure and fit:
            from .plotting import plot_thresholds

            plot_thresholds(results, fit.lambda_hat, args.figure, ylabel=f"minimum N ({args.quantity})")
            outputs.append(args.figure)
        write_manifest(manifest_path(args.out), command="threshold", params=base.as_dict(),
                       integrator=_integrator_echo(base), started=started, outputs=outputs,
                       summary={"lambda_hat": fit.lambda_hat if fit else None,
                                "residual": fit.residual if fit else None},
                       extra={"target": args.target, "quantity": args.quantity, "grid": args.grid,
                              "n_cap": args.n_cap,
                              "probes": {str(r.epsilon): {str(k): v for k, v in sorted(r.probes.items())}
                                         for r in results}})
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = _now()
    base = _base_params(args)
    rows = experiments.sweep(args.epsilon_list, args.n_list, base, args.workers)
    write_csv(rows, experiments.SWEEP_COLUMNS, args.out)
    if args.out:
        outputs = [args.out]
        if args.figure:
            from .plotting import plot_sweep

            plot_sweep(rows, args.figure)
            outputs.append(args.figure)
        write_manifest(manifest_path(args.out), command="sweep", params=base.as_dict(),
                       integrator=_integrator_echo(base), started=started, outputs=outputs,
                       summary={"rows": len(rows)})
    return EXIT_OK


def read_threshold_csv(path: Path) -> list[tuple[float, int]]:
    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            n = (row.get("n_min") or row.get("n") or "").strip()
            if not n:
                continue
            points.append((float(row["epsilon"]), int(float(n))))
    return points


def cmd_fit(args) -> int:
    if not args.input.exists():
        raise InvalidParameterError(f"input file {args.input} not found")
    fit = experiments.fit_lambda(read_threshold_csv(args.input))
    print(f"lambda_hat={fit.lambda_hat!r} residual={fit.residual!r} points={len(fit.points)}")
    return EXIT_OK


def cmd_adiabatic(args) -> int:
    started = _now()
    base = _base_params(args)
    rows = experiments.adiabatic_report(base, args.samples)
    write_csv(rows, experiments.ADIABATIC_COLUMNS, args.out)
    if args.out:
        outputs = [args.out]
        if args.figure:
            from .plotting import plot_adiabatic

            plot_adiabatic(rows, args.figure)
            outputs.append(args.figure)
        write_manifest(manifest_path(args.out), command="adiabatic", params=base.as_dict(),
                       integrator={"method": "analytic"}, started=started, outputs=outputs,
                       summary={"max_metric": max(r["metric"] for r in rows),
                                "min_gap": min(r["gap"] for r in rows)})
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "adiabatic": cmd_adiabatic,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResourceError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
