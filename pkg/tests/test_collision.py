import math
from dataclasses import replace

import numpy as np
import pytest

from helpers import random_density

from pointer_anneal import collision, dense
from pointer_anneal.collision import (
    SegmentPropagator,
    collide,
    run,
    run_case_psi_via_symmetry,
    segment_propagator,
    transfer,
)
from pointer_anneal.model import (
    Case,
    InvalidParameterError,
    PointerDensity,
    QubitPureState,
    SimParams,
    StateKind,
    make_state,
    segment_boundaries,
)

IDENTITY = SegmentPropagator(np.eye(4, dtype=complex), 1)


def test_segment_propagator_structure():
    p = SimParams(epsilon=0.25, n_qubits=8)
    for j in (1, 4, 8):
        sp = segment_propagator(j, p)
        assert sp.segment_index == j
        assert sp.offblock <= 1e-12
        np.testing.assert_allclose(sp.u.conj().T @ sp.u, np.eye(4), atol=1e-10)
        for b in sp.blocks:
            np.testing.assert_allclose(b.conj().T @ b, np.eye(2), atol=1e-10)
    with pytest.raises(InvalidParameterError):
        segment_propagator(9, p)


@pytest.mark.parametrize("case", list(Case))
def test_single_segment_matches_dense(case):
    p = SimParams(epsilon=0.5, n_qubits=1, case_label=case)
    u = segment_propagator(1, p).u
    ora = dense.evolve_full(p, sample_times=[])
    np.testing.assert_allclose(u @ dense.initial_state(p).amplitudes, ora.final.amplitudes, atol=1e-9)


def test_zero_driver_limit_phase():
    p = SimParams(epsilon=0.5, n_qubits=5, gamma=1e-15)
    for j in (1, 3, 5):
        a, b = p.t_final * (j - 1) / 5, p.t_final * j / 5
        theta = p.coupling_scale * (b * b - a * a) / (2 * p.t_final)
        _, b1 = segment_propagator(j, p).blocks
        np.testing.assert_allclose(b1, np.diag([1.0, np.exp(-1j * theta)]), atol=1e-9)


def test_collide_identity_and_eigen_branch(rng):
    rho = PointerDensity(random_density(rng))
    q = make_state(0.3, StateKind.PHI_BASE)
    np.testing.assert_allclose(collide(IDENTITY, q, rho).m, rho.m, atol=1e-15)

    pure = np.outer([0.6, 0.8j], np.conj([0.6, 0.8j]))
    sp = segment_propagator(2, SimParams(epsilon=1.0, n_qubits=4))
    out = collide(sp, make_state(1.0, StateKind.PHI_BASE), PointerDensity(pure))
    b0 = sp.blocks[0]
    np.testing.assert_allclose(out.m, b0 @ pure @ b0.conj().T, atol=1e-12)
    assert out.purity == pytest.approx(1.0, abs=1e-12)


def test_collide_matches_full_partial_trace(rng):
    p = SimParams(epsilon=0.4, n_qubits=3)
    for j in (1, 2, 3):
        sp = segment_propagator(j, p)
        q = make_state(p.epsilon, StateKind.PSI_BASE)
        rho = random_density(rng)
        joint = sp.u @ np.kron(np.outer(q.vector, q.vector.conj()), rho) @ sp.u.conj().T
        expect = np.einsum("qkql->kl", joint.reshape(2, 2, 2, 2))
        np.testing.assert_allclose(collide(sp, q, PointerDensity(rho)).m, expect, atol=1e-12)


def test_collide_is_cptp_on_random_inputs(rng):
    for _ in range(100):
        p = SimParams(epsilon=float(rng.uniform(0.05, 1.0)), n_qubits=int(rng.integers(1, 32)))
        sp = segment_propagator(int(rng.integers(1, p.n_qubits + 1)), p)
        out = collide(sp, make_state(p.epsilon, StateKind.PHI_BASE), PointerDensity(random_density(rng)))
        assert np.trace(out.m).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(out.m)[0] >= -1e-12


def test_transfer_examples(rng):
    sp = segment_propagator(3, SimParams(epsilon=1.0, n_qubits=4))
    m = transfer(sp, make_state(1.0, StateKind.PHI_BASE))
    np.testing.assert_array_equal(m.m, sp.blocks[0])
    assert m.norm == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(transfer(IDENTITY, make_state(0.3, StateKind.PHI_BASE)).m, np.eye(2))
    for _ in range(50):
        p = SimParams(epsilon=float(rng.uniform(0.05, 1.0)), n_qubits=16)
        j = int(rng.integers(1, 17))
        sp = segment_propagator(j, p)
        q = make_state(p.epsilon, StateKind.PHI_BASE)
        a0, a1 = q.probabilities
        m = transfer(sp, q)
        np.testing.assert_allclose(m.m, a0 * sp.blocks[0] + a1 * sp.blocks[1], atol=1e-12)
        assert m.norm <= 1 + 1e-10


def test_run_matches_dense_small():
    p = SimParams(epsilon=0.5, n_qubits=4)
    eng = run(p)
    ora = dense.evolve_full(p, sample_times=segment_boundaries(p))
    assert eng.final_p1 == pytest.approx(float(ora.rhos[-1][1, 1].real), abs=1e-8)
    assert eng.final_p0 == pytest.approx(float(ora.rhos[-1][0, 0].real), abs=1e-8)
    assert eng.fidelity == pytest.approx(dense.fidelity_before_after(ora.final, p), abs=1e-8)


def test_run_equals_repeated_collide_and_transfer():
    p = SimParams(epsilon=0.3, n_qubits=16)
    q = make_state(p.epsilon, StateKind.PHI_BASE)
    rho = PointerDensity(np.full((2, 2), 0.5))
    v = np.array([1, 1], complex) / math.sqrt(2)
    for j in range(1, 17):
        sp = segment_propagator(j, p)
        rho = collide(sp, q, rho)
        v = transfer(sp, q).m @ v
    res = run(p)
    np.testing.assert_allclose(res.final_rho, rho.m, atol=1e-13)
    assert res.fidelity == pytest.approx(float(np.vdot(v, v).real), abs=1e-13)


def test_eigen_branch_run():
    res = run(SimParams(epsilon=1.0, n_qubits=64))
    assert res.fidelity == pytest.approx(1.0, abs=1e-9)
    assert res.final_p1 > 0.99


def test_quarter_epsilon_reaches_target():
    assert run(SimParams(epsilon=0.25, n_qubits=256), sample_stride=256).final_p1 >= 0.9


def test_result_contract():
    res = run(SimParams(epsilon=0.5, n_qubits=32), sample_stride=4)
    assert res.final_p0 + res.final_p1 == pytest.approx(1.0, abs=1e-9)
    assert 0.0 <= res.fidelity <= 1.0 + 1e-9
    np.testing.assert_allclose(res.times, 10.0 * np.arange(0, 33, 4) / 32)
    for _, rho in res.pointer_samples:
        assert np.linalg.eigvalsh(rho.m)[0] >= -1e-10
    assert res.diagnostics["max_offblock"] <= 1e-12
    assert res.diagnostics["max_unitarity_defect"] <= 1e-10


def test_stride_always_records_final():
    res = run(SimParams(epsilon=0.5, n_qubits=10), sample_stride=4)
    np.testing.assert_allclose(res.times, [0.0, 4.0, 8.0, 10.0])


def test_interior_samples_match_dense():
    p = SimParams(epsilon=0.5, n_qubits=2, substeps_per_segment=8192)
    ts = [0.0, 1.3, 5.0, 6.25, 9.99, 10.0]
    eng = run(p, sample_times=ts)
    ora = dense.evolve_full(p, sample_times=ts)
    np.testing.assert_allclose(eng.times, ts)
    np.testing.assert_allclose(eng.rhos, ora.rhos, atol=1e-9)


def test_batching_does_not_change_results(monkeypatch):
    p = SimParams(epsilon=0.25, n_qubits=50, substeps_per_segment=8)
    ref = run(p)
    monkeypatch.setattr(collision, "BATCH_SUBSTEPS", 24)
    chunked = run(p)
    np.testing.assert_allclose(chunked.rhos, ref.rhos, atol=1e-14)
    assert chunked.fidelity == pytest.approx(ref.fidelity, abs=1e-14)


def test_runs_are_bit_identical():
    p = SimParams(epsilon=0.25, n_qubits=300)
    a, b = run(p), run(p)
    assert a.final_p1 == b.final_p1 and a.fidelity == b.fidelity
    np.testing.assert_array_equal(a.rhos, b.rhos)


@pytest.mark.parametrize("eps,n", [(0.5, 8), (0.25, 64), (1 / 16, 200)])
def test_psi_symmetry(eps, n):
    phi = run(SimParams(epsilon=eps, n_qubits=n))
    mapped = run_case_psi_via_symmetry(phi)
    direct = run(SimParams(epsilon=eps, n_qubits=n, case_label=Case.PSI))
    assert mapped.final_p0 == pytest.approx(phi.final_p1, abs=1e-10)
    assert mapped.fidelity == pytest.approx(phi.fidelity, abs=1e-10)
    np.testing.assert_allclose(mapped.rhos, direct.rhos, atol=1e-9)
    assert direct.fidelity == pytest.approx(phi.fidelity, abs=1e-9)
    assert mapped.params == replace(phi.params, case_label=Case.PSI)
    with pytest.raises(InvalidParameterError):
        run_case_psi_via_symmetry(direct)


def test_run_rejects_bad_inputs():
    with pytest.raises(InvalidParameterError):
        run(SimParams(epsilon=0.5, n_qubits=4), sample_stride=0)
    with pytest.raises(InvalidParameterError):
        run(SimParams(epsilon=0.5, n_qubits=4), sample_times=[11.0])
    with pytest.raises(InvalidParameterError):
        QubitPureState(2.0, 0.0)
