import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from openfrag.dynamics import (
    Circuit,
    LindbladCircuitSpec,
    TraceDriftError,
    circuit_residual,
    coupling_schedule,
    evolve_density,
    evolve_operator,
    liouvillian_gate,
    liouvillian_residual,
    stationary_operator,
    stationary_state_classical,
    stationary_state_quantum,
    verify_steady_structure,
)
from openfrag.fragmentation import enumerate_pf_krylov, krylov_decompose_numerical
from openfrag.hilbert import embed_local
from openfrag.models import SX, SZ, initial_density, pure_density, tl_projector, tl_terms, two_degenerate

CHANNELS = ["dephasing", "structure_preserving", "spin_flip"]


def random_density(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def lindblad_oracle(h, jumps, J, gamma, rho):
    # dense Lindblad generator acting on a density matrix, written out directly
    out = -1j * J * (h @ rho - rho @ h)
    for l, w in jumps:
        out += gamma * w * (l @ rho @ l.conj().T - 0.5 * (l.conj().T @ l @ rho + rho @ l.conj().T @ l))
    return out


@pytest.mark.parametrize("channel", CHANNELS)
def test_gate_is_cptp(channel):
    spec = LindbladCircuitSpec(4, channel, gamma=0.7)
    for bond in (1, 2):
        for J in (0.8, 1.0, 1.2):
            g = liouvillian_gate(spec.bond_hamiltonian(), spec.bond_jumps(bond), J, spec.gamma)
            assert g.is_cptp()
            assert g.trace_preservation_error() <= 1e-12


def test_gate_matches_dense_lindblad_exponential():
    rng = np.random.default_rng(0)
    spec = LindbladCircuitSpec(2, "dephasing", gamma=0.4, weighting="gate")
    h, jumps = spec.bond_hamiltonian(), spec.bond_jumps(1)
    rho = random_density(9, rng)
    # matrix of the oracle generator in the row-major matrix-unit basis
    basis = np.eye(81).reshape(81, 9, 9)
    gen = np.stack([lindblad_oracle(h, jumps, 1.1, 0.4, b).reshape(-1) for b in basis], axis=1)
    expected = (expm(gen) @ rho.reshape(-1)).reshape(9, 9)
    gate = liouvillian_gate(h, jumps, 1.1, 0.4)
    assert np.abs(gate.apply(rho) - expected).max() <= 1e-12


def test_unitary_limit():
    spec = LindbladCircuitSpec(2, "dephasing", gamma=0.0)
    rho = random_density(9, np.random.default_rng(1))
    u = expm(-1j * 0.9 * tl_projector())
    g = liouvillian_gate(tl_projector(), spec.bond_jumps(1), 0.9, 0.0)
    assert np.abs(g.apply(rho) - u @ rho @ u.conj().T).max() <= 1e-12


def test_pure_dephasing_coherence_factor():
    gamma = 0.35
    jumps = [(np.kron(SZ, np.eye(3)), 1.0)]
    g = liouvillian_gate(np.zeros((9, 9)), jumps, 0.0, gamma)
    x = np.zeros((9, 9))
    x[1, 7] = 1.0  # |+0><-0|
    y = g.apply(x)
    assert np.isclose(y[1, 7], np.exp(-2 * gamma))
    x = np.zeros((9, 9))
    x[1, 4] = 1.0  # |+0><00|
    assert np.isclose(g.apply(x)[1, 4], np.exp(-gamma / 2))


def test_spec_validation():
    with pytest.raises(ValueError):
        LindbladCircuitSpec(4, "dephasing", gamma=-0.1)
    with pytest.raises(ValueError):
        LindbladCircuitSpec(3)
    with pytest.raises(ValueError):
        LindbladCircuitSpec(4, "amplitude_damping")
    with pytest.raises(ValueError):
        LindbladCircuitSpec(4, bond_term="heisenberg")


def test_site_weights():
    spec = LindbladCircuitSpec(6)
    assert [spec.site_weight(s) for s in range(1, 7)] == [1, 0.5, 0.5, 0.5, 0.5, 1]
    # every site collects total weight one from the gates touching it
    totals = np.zeros(6)
    for j in range(1, 6):
        for k, (_, w) in enumerate(spec.bond_jumps(j)):
            totals[j - 1 + k] += w
    assert np.allclose(totals, 1)
    assert LindbladCircuitSpec(6, weighting="gate").site_weight(3) == 1


def test_coupling_schedule_reproducible():
    spec = LindbladCircuitSpec(6, rng_seed=11)
    a, b = coupling_schedule(spec), coupling_schedule(spec)
    assert a.shape == (100, 5) and np.array_equal(a, b)
    assert a.min() >= 0.8 and a.max() <= 1.2


def test_circuit_applies_gates_like_dense_embedding():
    spec = LindbladCircuitSpec(4, "structure_preserving", gamma=0.5, n_steps=1)
    rng = np.random.default_rng(2)
    rho = random_density(81, rng)
    J = np.array([0.9, 1.05, 1.15])
    out = Circuit(spec).step(rho, J)
    # dense oracle: integrate the full 81-dim Lindblad equation gate by gate, odd bonds first
    x = rho
    for bond in (1, 3, 2):
        e = embed_local(tl_projector(), bond, 4)
        x = _dense_step(e, [(e, 1.0)], J[bond - 1], 0.5, x)
    assert np.abs(out - x).max() <= 1e-10


def _dense_step(h, jumps, J, gamma, rho, substeps=400):
    # RK4 integration of the dense Lindblad equation over unit time
    dt = 1.0 / substeps
    for _ in range(substeps):
        k1 = lindblad_oracle(h, jumps, J, gamma, rho)
        k2 = lindblad_oracle(h, jumps, J, gamma, rho + 0.5 * dt * k1)
        k3 = lindblad_oracle(h, jumps, J, gamma, rho + 0.5 * dt * k2)
        k4 = lindblad_oracle(h, jumps, J, gamma, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


@pytest.mark.parametrize("channel", CHANNELS)
def test_identity_is_fixed(channel):
    spec = LindbladCircuitSpec(4, channel, gamma=0.8)
    eye = np.eye(81) / 81
    J = coupling_schedule(spec)[0]
    assert circuit_residual(eye, spec, J) <= 1e-12
    assert liouvillian_residual(eye, spec) <= 1e-12


def test_pf_sector_weights_conserved_under_dephasing():
    spec = LindbladCircuitSpec(4, "dephasing", gamma=0.6, n_steps=30, rng_seed=4)
    dec, _ = enumerate_pf_krylov(4)
    rho0 = random_density(81, np.random.default_rng(3))
    obs = {f"w{s.class_id}": (lambda r, s=s: s.trace_with(r)) for s in dec.subspaces()}
    traj = evolve_density(rho0, spec, observables=obs)
    for name, values in traj.observables.items():
        assert np.abs(values - values[0]).max() <= 1e-10


def test_tl_overlaps_conserved_under_structure_preserving():
    spec = LindbladCircuitSpec(4, "structure_preserving", gamma=0.6, n_steps=20, rng_seed=5)
    dec = krylov_decompose_numerical(tl_terms(4), 4, rng=0)
    rho0 = random_density(81, np.random.default_rng(4))
    final = evolve_density(rho0, spec).final
    for cls in dec.classes:
        assert np.abs(cls.overlap_matrix(final) - cls.overlap_matrix(rho0)).max() <= 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(CHANNELS))
def test_purity_never_increases(seed, channel):
    spec = LindbladCircuitSpec(2, channel, gamma=0.5, n_steps=15, rng_seed=seed % 1000)
    rho0 = random_density(9, np.random.default_rng(seed))
    traj = evolve_density(rho0, spec, observables={"purity": lambda r: np.trace(r @ r).real})
    p = traj.observables["purity"]
    assert np.all(np.diff(p) <= 1e-12)
    assert traj.max_trace_drift <= 1e-10


def test_heisenberg_and_schrodinger_agree():
    spec = LindbladCircuitSpec(4, "dephasing", gamma=0.5, n_steps=8, rng_seed=6)
    rho0 = pure_density(two_degenerate())
    op = embed_local(SZ, 2, 4) + embed_local(np.kron(SX, SX), 3, 4)
    traj = evolve_density(rho0, spec, observables={"o": lambda r: np.trace(op @ r)})
    heis = evolve_operator(op, spec, steps=[0, 3, 8])
    for t, o_t in heis.items():
        assert abs(np.trace(o_t @ rho0) - traj.observables["o"][t]) <= 1e-10


def test_evolve_operator_rejects_non_hermitian():
    spec = LindbladCircuitSpec(2)
    with pytest.raises(ValueError):
        evolve_operator(np.triu(np.ones((9, 9))), spec)


def test_classical_stationary_all_plus():
    dec, _ = enumerate_pf_krylov(4)
    rho0 = initial_density("all_plus", 4)
    ss = stationary_state_classical(rho0, dec)
    empty = next(s for s in dec.subspaces() if s.label == "")
    assert np.allclose(ss.rho, empty.projector() / 15)
    assert np.isclose(ss.total_weight(), 1.0)
    spec = LindbladCircuitSpec(4, "dephasing", gamma=0.3)
    assert liouvillian_residual(ss.rho, spec) <= 1e-8
    assert circuit_residual(ss.rho, spec, coupling_schedule(spec)[0]) <= 1e-8


def test_quantum_stationary_is_fixed_point():
    dec = krylov_decompose_numerical(tl_terms(4), 4, rng=1)
    spec = LindbladCircuitSpec(4, "structure_preserving", gamma=0.3)
    for rho0 in (initial_density("all_plus", 4), pure_density(two_degenerate())):
        ss = stationary_state_quantum(rho0, dec)
        assert np.isclose(np.trace(ss.rho), 1.0)
        assert np.linalg.eigvalsh(ss.rho).min() >= -1e-10
        assert liouvillian_residual(ss.rho, spec) <= 1e-8
        assert circuit_residual(ss.rho, spec, coupling_schedule(spec)[0]) <= 1e-8


def test_stationary_operator_is_a_projection():
    dec = krylov_decompose_numerical(tl_terms(4), 4, rng=2)
    op = embed_local(SZ, 1, 4)
    once = stationary_operator(op, dec)
    twice = stationary_operator(once, dec)
    assert np.abs(once - twice).max() <= 1e-10
    with pytest.raises(ValueError):
        stationary_operator(op, dec, mode="classical")


def test_quantum_stationary_rejects_partial_weight():
    dec, _ = enumerate_pf_krylov(2)
    partial = krylov_decompose_numerical(tl_terms(2), 2, rng=0, support=dec.classes[-1].copies[0].dense_basis())
    with pytest.raises(ValueError):
        stationary_state_quantum(np.eye(9) / 9, partial)


def test_dephasing_converges_to_classical_state():
    spec = LindbladCircuitSpec(2, "dephasing", gamma=1.0, n_steps=400, rng_seed=7)
    rho0 = random_density(9, np.random.default_rng(8))
    traj = evolve_density(rho0, spec, stop_on_convergence=True)
    assert traj.converged_at is not None
    dec, _ = enumerate_pf_krylov(2)
    expected = stationary_state_classical(rho0, dec).rho
    assert np.abs(traj.final - expected).max() <= 1e-7


def test_steady_structure_dephasing_two_sites():
    dec, _ = enumerate_pf_krylov(2)
    spec = LindbladCircuitSpec(2, "dephasing", gamma=0.5)
    report = verify_steady_structure(dec, spec, J=[1.0])
    assert report.ok
    diag = [b for b in report.blocks if b.row == b.col]
    assert len(diag) == 7 and all(b.kernel_dim == 1 for b in diag)
    assert all(b.kernel_dim == 0 for b in report.blocks if b.row != b.col)


def test_steady_structure_structure_preserving_two_sites():
    dec = krylov_decompose_numerical(tl_terms(2), 2, rng=3)
    spec = LindbladCircuitSpec(2, "structure_preserving", gamma=0.5)
    report = verify_steady_structure(dec, spec, J=[1.0])
    assert report.ok
    big = next(c for c in dec.classes if c.d == 8)
    rows = {(big.class_id, a) for a in range(8)}
    inside = [b for b in report.blocks if b.row in rows and b.col in rows]
    assert len(inside) == 64 and all(b.kernel_dim == 1 for b in inside)


def test_steady_structure_limits():
    dec, _ = enumerate_pf_krylov(6)
    with pytest.raises(ValueError):
        verify_steady_structure(dec, LindbladCircuitSpec(6))


def test_trace_drift_raises():
    spec = LindbladCircuitSpec(2, n_steps=2)
    with pytest.raises(TraceDriftError):
        evolve_density(1.1 * np.eye(9) / 9, spec, validate=False)
    with pytest.raises(ValueError):
        evolve_density(np.eye(81) / 81, spec)
