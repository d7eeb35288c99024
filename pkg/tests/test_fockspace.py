from math import comb

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ceeat.fockspace import (
    HO,
    SPIN,
    HamiltonianSpec,
    SparseOperator,
    StateVector,
    build_hamiltonian,
    collective_op,
    emission_operator,
    enumerate_sector,
    evolve_step,
    expectation_emission,
    number_op,
    sector_size,
    spin_jz,
)


@pytest.mark.parametrize("N", range(1, 9))
def test_spin_sector_sizes_are_binomial(N):
    for n in range(N + 1):
        s = enumerate_sector(SPIN, N, n)
        assert s.size == comb(N, n)
        assert len(set(s.configs)) == s.size
        assert all(sum(c) == n and max(c, default=0) <= 1 for c in s.configs)


@pytest.mark.parametrize("N,n", [(1, 3), (2, 2), (3, 2), (4, 3)])
def test_ho_sector_size_is_stars_and_bars(N, n):
    assert enumerate_sector(HO, N, n).size == comb(n + N - 1, N - 1)
    assert sector_size(HO, N, n) == comb(n + N - 1, N - 1)


def test_ho_two_site_order():
    s = enumerate_sector(HO, 2, 2)
    assert s.configs == ((2, 0), (1, 1), (0, 2))


def test_bad_sector_arguments():
    with pytest.raises(ValueError):
        enumerate_sector(SPIN, 3, 4)
    with pytest.raises(ValueError):
        enumerate_sector(HO, 2, 5, per_site_cutoff=2)
    with pytest.raises(ValueError):
        enumerate_sector("fermion", 2, 1)


def test_lowering_vacuum_rejected():
    with pytest.raises(ValueError):
        collective_op(enumerate_sector(SPIN, 3, 0), "J_minus")


def test_raising_full_spin_sector_rejected():
    with pytest.raises(ValueError):
        collective_op(enumerate_sector(SPIN, 3, 3), "J_plus")


@pytest.mark.parametrize("N", range(1, 7))
def test_spin_ladder_pair_are_adjoint(N):
    for n in range(1, N + 1):
        s = enumerate_sector(SPIN, N, n)
        lo = collective_op(s, "J_minus")
        hi = collective_op(lo.codomain, "J_plus")
        assert np.allclose(lo.toarray().conj().T, hi.toarray(), atol=1e-14)


@pytest.mark.parametrize("N", range(1, 7))
def test_spin_commutator_is_twice_jz(N):
    for n in range(1, N):
        s = enumerate_sector(SPIN, N, n)
        jm, jp = collective_op(s, "J_minus"), collective_op(s, "J_plus")
        up_down = collective_op(jm.codomain, "J_plus") @ jm
        down_up = collective_op(jp.codomain, "J_minus") @ jp
        comm = (up_down - down_up).toarray()
        assert np.allclose(comm, 2 * spin_jz(s).toarray(), atol=1e-12)


@pytest.mark.parametrize("N,n", [(2, 1), (3, 2), (4, 2)])
def test_ho_mode_commutators(N, n):
    # cutoff n + 2 keeps c_k^dag c_k' unclipped on sector n
    s = enumerate_sector(HO, N, n, per_site_cutoff=n + 2)
    for k in range(1, N + 1):
        for kp in range(1, N + 1):
            a = collective_op(s, "c_k", k)
            b = collective_op(s, "c_k_dagger", kp)
            ab = collective_op(b.codomain, "c_k", k) @ b
            ba = collective_op(a.codomain, "c_k_dagger", kp) @ a
            expected = np.eye(s.size) if k == kp else np.zeros((s.size, s.size))
            assert np.allclose((ab - ba).toarray(), expected, atol=1e-12)


def test_a_lower_is_sqrt_n_times_bright_mode():
    s = enumerate_sector(HO, 3, 2, per_site_cutoff=2)
    a = collective_op(s, "A_lower").toarray()
    c = collective_op(s, "c_k", 3).toarray()
    assert np.allclose(a, np.sqrt(3) * c)


def test_number_operator_is_constant():
    s = enumerate_sector(HO, 3, 2)
    assert np.allclose(number_op(s).toarray(), 2 * np.eye(s.size))


def test_emission_operator_is_hermitian():
    for kind in (SPIN, HO):
        assert emission_operator(enumerate_sector(kind, 3, 2)).is_hermitian()


def test_hamiltonian_is_hermitian_and_rejects_size_mismatch():
    s = enumerate_sector(HO, 3, 2)
    spec = HamiltonianSpec(np.array([0.1, -0.3, 0.7]), 0.4 * (np.ones((3, 3)) - np.eye(3)), 2.0)
    assert build_hamiltonian(s, spec).is_hermitian()
    with pytest.raises(ValueError):
        build_hamiltonian(enumerate_sector(HO, 4, 2), spec)


def test_single_excitation_rabi_oscillation():
    # two sites, one excitation: population transfer cos^2(Vt)
    s = enumerate_sector(SPIN, 2, 1)
    V = 0.7
    H = build_hamiltonian(s, HamiltonianSpec.all_to_all(2, V))
    psi = StateVector.basis(s, (1, 0))
    for _ in range(10):
        psi = evolve_step(psi, H, 0.05)
    t = 0.5
    assert abs(psi.amplitudes[s.index((1, 0))]) ** 2 == pytest.approx(np.cos(V * t) ** 2, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=4, max_size=4),
    st.floats(0, 3),
    st.floats(1e-3, 2.0),
)
def test_evolution_preserves_norm(detunings, coupling, dt):
    s = enumerate_sector(SPIN, 4, 2)
    H = build_hamiltonian(s, HamiltonianSpec.all_to_all(4, coupling, np.array(detunings)))
    rng = np.random.default_rng(0)
    amps = rng.normal(size=s.size) + 1j * rng.normal(size=s.size)
    psi = StateVector(s, amps / np.linalg.norm(amps))
    out = evolve_step(psi, H, dt)
    assert out.norm == pytest.approx(1.0, abs=1e-12)


def test_unnormalized_state_rejected():
    s = enumerate_sector(SPIN, 2, 1)
    with pytest.raises(ValueError):
        StateVector(s, np.array([1.0, 1.0], dtype=complex))


def test_json_roundtrip():
    s = enumerate_sector(HO, 2, 2)
    psi = StateVector(s, np.array([0.6, 0.0, 0.8j]))
    back = StateVector.from_json(psi.to_json())
    assert back.sector == s
    assert np.array_equal(back.amplitudes, psi.amplitudes)


def test_sparse_operator_from_entries_roundtrip():
    s = enumerate_sector(SPIN, 3, 1)
    op = collective_op(s, "J_plus")
    again = SparseOperator.from_entries(op.domain, op.codomain, op.entries())
    assert np.allclose(again.toarray(), op.toarray())
    assert isinstance(op.matrix, sp.csr_matrix)


def test_emission_expectation_of_localized_excitation_is_one():
    for kind in (SPIN, HO):
        s = enumerate_sector(kind, 4, 1)
        assert expectation_emission(StateVector.basis(s, (0, 1, 0, 0))) == pytest.approx(1.0)
