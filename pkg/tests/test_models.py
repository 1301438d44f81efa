import numpy as np
import pytest

from openfrag.models import (
    SX,
    SZ,
    CouplingSample,
    LocalTerm,
    basis_state,
    dimer_state,
    embed_local,
    initial_density,
    jump_operators,
    pair_sum,
    pf_hamiltonian,
    sample_couplings,
    tl_projector,
    tl_terms,
    two_degenerate,
)


def test_tl_projector_examples():
    e = tl_projector()
    d = dimer_state()
    assert np.allclose(e @ d, d)
    assert np.allclose(e @ basis_state("+0"), 0)
    expected = np.zeros(9)
    expected[[0, 4, 8]] = 1 / 3
    assert np.allclose(e @ basis_state("++"), expected)


def test_tl_projector_idempotent_and_pair_sum():
    e = tl_projector()
    assert np.abs(e @ e - e).max() <= 1e-12
    explicit = np.zeros((9, 9))
    for a in range(3):
        for b in range(3):
            explicit[4 * a, 4 * b] = 1
    assert np.abs(pair_sum() - explicit).max() <= 1e-12
    assert np.allclose(explicit, 3 * e)


def test_pf_hamiltonian_zero():
    assert pf_hamiltonian({}, {}, 4) == []
    terms = pf_hamiltonian({(1, "+", "0"): 0.0}, None, 2)
    assert np.count_nonzero(terms[0].matrix) == 0


def test_pf_hamiltonian_uniform_block():
    g = {(1, a, b): 1.0 for a in "+0-" for b in "+0-" if "+0-".index(a) <= "+0-".index(b)}
    (term,) = pf_hamiltonian(g, None, 2)
    m = term.matrix
    assert np.array_equal(m[np.ix_([0, 4, 8], [0, 4, 8])], np.ones((3, 3)))
    assert np.count_nonzero(m) == 9


def test_pf_hamiltonian_tl_special_case():
    J = [0.9, 1.1, 1.05]
    g = {(j, a, b): J[j - 1] for j in (1, 2, 3) for a in "+0-" for b in "+0-" if "+0-".index(a) <= "+0-".index(b)}
    terms = pf_hamiltonian(g, {}, 4)
    h = sum(t.embed(4) for t in terms)
    h_tl = sum(3 * J[t.site - 1] * t.embed(4) for t in tl_terms(4))
    assert np.allclose(h, h_tl)


def test_pf_hamiltonian_terms_hermitian_and_fields():
    rng = np.random.default_rng(0)
    g = {(1, "+", "-"): rng.normal(), (1, "0", "0"): rng.normal(), (2, "-", "0"): rng.normal()}
    l = {(1, "+"): 0.3, (3, "-"): -0.2}
    for t in pf_hamiltonian(g, l, 4):
        assert np.abs(t.matrix - t.matrix.conj().T).max() <= 1e-12


def test_pf_hamiltonian_errors():
    with pytest.raises(ValueError):
        pf_hamiltonian({(1, "+", "0"): 1j}, None, 2)
    with pytest.raises(ValueError):
        pf_hamiltonian({(1, "+", "0"): 1.0}, None, 3)
    with pytest.raises(ValueError):
        pf_hamiltonian({(1, "+", "0"): 1.0, (1, "0", "+"): 2.0}, None, 2)
    with pytest.raises(ValueError):
        pf_hamiltonian({(5, "+", "0"): 1.0}, None, 4)


def test_jump_operators():
    deph = jump_operators("dephasing", 2)
    assert len(deph) == 2
    assert np.allclose(deph[0].embed(2), np.kron(SZ, np.eye(3)))
    assert np.allclose(deph[1].embed(2), np.kron(np.eye(3), SZ))
    sp = jump_operators("structure_preserving", 4)
    assert [(t.site, t.width) for t in sp] == [(1, 2), (2, 2), (3, 2)]
    flip = jump_operators("spin_flip", 3)
    assert len(flip) == 3
    assert np.allclose(SX @ np.array([0, 1, 0]), np.array([1, 0, 1]) / np.sqrt(2))
    assert jump_operators("none", 2) == []
    with pytest.raises(ValueError):
        jump_operators("amplitude_damping", 2)
    with pytest.raises(ValueError):
        jump_operators("dephasing", 1)


def test_all_terms_hermitian():
    for ch in ("dephasing", "structure_preserving", "spin_flip"):
        for t in jump_operators(ch, 4):
            assert np.abs(t.matrix - t.matrix.conj().T).max() <= 1e-12


def test_dephasing_breaks_tl_commutant():
    e = embed_local(tl_projector(), 1, 2)
    sz = embed_local(SZ, 1, 2)
    assert np.abs(sz @ e - e @ sz).max() > 0.1
    assert np.abs(e @ e - e @ e).max() == 0


def test_local_term_validation():
    with pytest.raises(ValueError):
        LocalTerm(1, 1, np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
    with pytest.raises(ValueError):
        LocalTerm(1, 2, np.eye(3))


def test_sample_couplings():
    a = sample_couplings(np.random.default_rng(42), 6)
    b = sample_couplings(np.random.default_rng(42), 6)
    assert np.array_equal(a.J, b.J)
    assert a.J.shape == (5,)
    big = sample_couplings(np.random.default_rng(1), 10_001)
    assert abs(big.J.mean() - 1.0) < 0.01
    assert big.J.min() >= 0.8 and big.J.max() <= 1.2
    with pytest.raises(ValueError):
        CouplingSample(J=np.array([1.3]), rng_seed=0, time_step=0)


def test_initial_states():
    psi = two_degenerate()
    assert np.isclose(np.linalg.norm(psi), 1)
    rho = initial_density("all_plus", 4)
    assert rho[0, 0] == 1 and np.trace(rho) == 1
    assert np.allclose(initial_density("infinite_temperature", 2), np.eye(9) / 9)
    assert initial_density("+-0+", 4)[basis_state("+-0+").argmax()].sum() == 1
    with pytest.raises(ValueError):
        initial_density("thermal", 4)
