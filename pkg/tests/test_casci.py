import numpy as np
import pytest

from casq.casci import (
    DavidsonNotConverged,
    dense_hamiltonian,
    dense_solve,
    hamiltonian_diagonal,
    hamiltonian_element,
    sigma,
    solve_davidson,
)
from casq.detspace import Determinant, enumerate_cas
from casq.ingest import DavidsonOptions, IntegralSet

from _oracles import fock_block, fock_hamiltonian
from conftest import make_random_integrals


def element_matrix(space, ints):
    dets = list(space.dets)
    n = len(dets)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            H[i, j] = hamiltonian_element(dets[i], dets[j], ints)
    return H


@pytest.mark.parametrize("n_elec,n_orb,ms2,seed", [
    (2, 3, 0, 1), (3, 3, 1, 2), (2, 4, 2, 3), (4, 3, 0, 4), (3, 4, 1, 5),
])
def test_slater_condon_against_fock_oracle(n_elec, n_orb, ms2, seed):
    ints = make_random_integrals(n_orb, seed)
    space = enumerate_cas(n_elec, n_orb, ms2)
    ref = fock_block(fock_hamiltonian(ints.h, ints.g2, ints.core_energy), space)
    got = element_matrix(space, ints)
    assert np.max(np.abs(got - ref)) < 1e-12


def test_element_one_electron_diagonal():
    # single electron in orbital p: h[p,p] + core, no two-electron part
    ints = make_random_integrals(3, 11)
    space = enumerate_cas(1, 3, 1)
    for det in space.dets:
        (p,) = det.alpha_list()
        val = hamiltonian_element(det, det, ints)
        assert val == pytest.approx(ints.h[p, p] + ints.core_energy, abs=1e-14)


def test_element_doubly_mixed_example():
    # <a=10,b=10|H|a=01,b=01> = (12|12) in a 2-orbital model
    n = 2
    g2 = np.zeros((n, n, n, n))
    from casq.ingest import set_chem
    set_chem(g2, 0, 1, 0, 1, 0.37)
    ints = IntegralSet(h=np.zeros((n, n)), g2=g2)
    d1 = Determinant(alpha=0b01, beta=0b01, n_orb=2)
    d2 = Determinant(alpha=0b10, beta=0b10, n_orb=2)
    assert hamiltonian_element(d2, d1, ints) == pytest.approx(0.37)


def test_element_degree_three_is_zero():
    ints = make_random_integrals(4, 12)
    d1 = Determinant(alpha=0b0011, beta=0b0001, n_orb=4)
    d2 = Determinant(alpha=0b1100, beta=0b0010, n_orb=4)  # 2 alpha + 1 beta moves
    assert hamiltonian_element(d1, d2, ints) == 0.0
    assert hamiltonian_element(d2, d1, ints) == 0.0


@pytest.mark.parametrize("n_elec,n_orb,ms2,seed", [
    (4, 5, 0, 21), (5, 5, 1, 22), (3, 5, 3, 23), (6, 4, 0, 24),
])
def test_dense_hamiltonian_matches_element_matrix(n_elec, n_orb, ms2, seed):
    ints = make_random_integrals(n_orb, seed)
    space = enumerate_cas(n_elec, n_orb, ms2)
    ref = element_matrix(space, ints)
    got = dense_hamiltonian(space, ints)
    assert np.max(np.abs(got - ref)) < 1e-12
    # and the vectorized diagonal agrees
    assert np.max(np.abs(hamiltonian_diagonal(space, ints).ravel()
                         - np.diag(ref))) < 1e-12


def test_dense_cap_enforced():
    ints = make_random_integrals(5, 1)
    space = enumerate_cas(5, 5, 1)
    with pytest.raises(ValueError, match="cap"):
        dense_hamiltonian(space, ints, cap=10)


def test_sigma_equals_dense_columns():
    ints = make_random_integrals(5, 31)
    space = enumerate_cas(4, 5, 0)
    H = dense_hamiltonian(space, ints)
    for k in [0, 1, 17, space.size - 1]:
        e = np.zeros(space.size)
        e[k] = 1.0
        assert np.max(np.abs(sigma(space, ints, e) - H[:, k])) < 1e-12


def test_sigma_batched_matches_unbatched():
    ints = make_random_integrals(5, 32)
    space = enumerate_cas(4, 5, 0)
    rng = np.random.default_rng(5)
    v = rng.standard_normal(space.size)
    full = sigma(space, ints, v)
    tiny = sigma(space, ints, v, max_memory_gb=1e-6)  # forces batch = 1
    assert np.max(np.abs(full - tiny)) < 1e-12


def test_sigma_core_only():
    n = 4
    ints = IntegralSet(h=np.zeros((n, n)), g2=np.zeros((n,) * 4),
                       core_energy=-2.25)
    space = enumerate_cas(3, 4, 1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(space.size)
    assert np.allclose(sigma(space, ints, v), -2.25 * v, atol=1e-14)


def test_sigma_linearity():
    ints = make_random_integrals(5, 33)
    space = enumerate_cas(5, 5, 1)
    rng = np.random.default_rng(1)
    v, w = rng.standard_normal((2, space.size))
    lhs = sigma(space, ints, 0.3 * v + 1.7 * w)
    rhs = 0.3 * sigma(space, ints, v) + 1.7 * sigma(space, ints, w)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_sigma_dimension_mismatch():
    ints = make_random_integrals(4, 34)
    space = enumerate_cas(3, 4, 1)
    with pytest.raises(ValueError, match="length"):
        sigma(space, ints, np.zeros(space.size + 1))


def test_davidson_matches_dense_energies_and_vectors():
    ints = make_random_integrals(6, 41)
    space = enumerate_cas(6, 6, 0)  # 400 determinants
    n_roots = 8
    dav = solve_davidson(space, ints, n_roots,
                         DavidsonOptions(tol=1e-9))
    ref = dense_solve(space, ints, n_roots)
    for a, b in zip(dav, ref):
        assert abs(a.energy - b.energy) < 1e-9
    # eigenvector overlap per nondegenerate root
    for k in range(n_roots):
        gap_ok = (k == 0 or ref[k].energy - ref[k - 1].energy > 1e-6) and \
                 (k == n_roots - 1 or ref[k + 1].energy - ref[k].energy > 1e-6)
        if gap_ok:
            ov = abs(dav[k].coeffs @ ref[k].coeffs)
            assert ov >= 1.0 - 1e-8


def test_davidson_full_space_roots():
    ints = make_random_integrals(5, 42)
    space = enumerate_cas(2, 5, 0)  # C(5,1)^2 = 25 determinants
    n = space.size
    dav = solve_davidson(space, ints, n)
    H = dense_hamiltonian(space, ints)
    w = np.linalg.eigvalsh(H)
    assert np.allclose([s.energy for s in dav], w, atol=1e-9)


def test_davidson_ten_det_full_spectrum():
    ints = make_random_integrals(5, 43)
    space = enumerate_cas(1, 5, 1)
    # 5 determinants only: full spectrum through the guess path
    dav = solve_davidson(space, ints, space.size)
    w = np.linalg.eigvalsh(dense_hamiltonian(space, ints))
    assert np.allclose([s.energy for s in dav], w, atol=1e-11)


def test_davidson_root_bounds():
    ints = make_random_integrals(4, 44)
    space = enumerate_cas(2, 4, 0)
    with pytest.raises(ValueError):
        solve_davidson(space, ints, space.size + 1)
    with pytest.raises(ValueError):
        dense_solve(space, ints, 0)


def test_davidson_nonconvergence_diagnostics():
    ints = make_random_integrals(6, 45)
    space = enumerate_cas(6, 6, 0)
    with pytest.raises(DavidsonNotConverged) as exc:
        solve_davidson(space, ints, 4,
                       DavidsonOptions(tol=1e-12, max_iter=2))
    result = exc.value.result
    assert result.residual_norms.shape == (4,)
    assert not result.converged


def test_variational_monotonicity_under_orbital_growth():
    # appending a decoupled orbital cannot raise the ground energy
    ints5 = make_random_integrals(5, 46)
    space5 = enumerate_cas(4, 5, 0)
    e5 = dense_solve(space5, ints5, 1)[0].energy
    h6 = np.zeros((6, 6))
    h6[:5, :5] = ints5.h
    h6[5, 5] = 50.0  # high-lying empty orbital, uncoupled
    g6 = np.zeros((6,) * 4)
    g6[:5, :5, :5, :5] = ints5.g2
    ints6 = IntegralSet(h=h6, g2=g6, core_energy=ints5.core_energy)
    e6 = dense_solve(enumerate_cas(4, 6, 0), ints6, 1)[0].energy
    assert e6 <= e5 + 1e-12
