import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian, seeds
from qpurify.core import maximally_mixed, purity
from qpurify.errors import DimensionCapExceeded, InvalidProbabilities, ParamOutOfRange
from qpurify.models import (
    PAULI_X,
    PAULI_Z,
    SpinChainParams,
    amplitude_damping,
    haar_unitary,
    hermitian_expm,
    random_unitary_channel,
    rank_one_channel,
    site_operator,
    spin_chain_channel,
    spin_chain_hamiltonian,
    unitary_channel,
)
from qpurify.rates import qubit_rate_closed_form
from qpurify.trajectory import sample_trajectory


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_spin_chain_complete(n):
    ch = spin_chain_channel(n_qubits=n)
    assert ch.dim == 2**n
    assert ch.completeness_residual() <= 1e-9
    assert ch.outcomes == (0, 1)


def test_single_site_ignores_coupling():
    a = spin_chain_hamiltonian(SpinChainParams(n_qubits=1, J=0.1))
    b = spin_chain_hamiltonian(SpinChainParams(n_qubits=1, J=7.0))
    np.testing.assert_allclose(a, b)
    np.testing.assert_allclose(a, -PAULI_X - PAULI_Z)


def test_hamiltonian_two_sites():
    h = spin_chain_hamiltonian(SpinChainParams(n_qubits=2, J=0.5, Bx=0.0, Bz=0.0))
    np.testing.assert_allclose(h, -0.5 * np.kron(PAULI_Z, PAULI_Z))


def test_site_ordering_leftmost_most_significant():
    np.testing.assert_allclose(site_operator(PAULI_Z, 0, 2), np.kron(PAULI_Z, np.eye(2)))


def test_measurement_acts_on_last_site():
    ch = spin_chain_channel(n_qubits=2, Bx=0.0, Bz=0.0, J=0.0)
    # U = I, so V_0 = P_0 on the last site
    np.testing.assert_allclose(ch.operators[0], np.kron(np.eye(2), np.diag([1, 0])), atol=1e-12)


def test_qubit_cap():
    with pytest.raises(DimensionCapExceeded):
        spin_chain_channel(n_qubits=7)
    assert spin_chain_channel(n_qubits=1, max_qubits=1).dim == 2


def test_bad_params():
    with pytest.raises(ParamOutOfRange):
        SpinChainParams(tau=0.0)
    with pytest.raises(ParamOutOfRange):
        amplitude_damping(1.5)


class TestExpm:
    def test_zero(self):
        np.testing.assert_allclose(hermitian_expm(np.zeros((3, 3)), 1.0), np.eye(3))

    def test_pauli_z_half_turn(self):
        np.testing.assert_allclose(hermitian_expm(PAULI_Z, np.pi), -np.eye(2), atol=1e-14)

    @given(seeds, st.integers(2, 16))
    def test_unitary(self, seed, d):
        u = hermitian_expm(random_hermitian(d, np.random.default_rng(seed)), 0.7)
        assert np.linalg.norm(u.conj().T @ u - np.eye(d)) <= 1e-8


class TestAmplitudeDamping:
    def test_zero_damping_is_identity_branch(self):
        ch = amplitude_damping(0.0)
        np.testing.assert_allclose(ch.operators[0], np.eye(2))
        np.testing.assert_allclose(ch.operators[1], 0.0)

    def test_full_damping_pure_after_one_step(self):
        ch = amplitude_damping(1.0)
        for seed in range(5):
            s = sample_trajectory(ch, maximally_mixed(2), 2, seed)
            assert purity(s.states[1]) == pytest.approx(1.0)

    def test_closed_form_rate(self):
        assert qubit_rate_closed_form(amplitude_damping(0.75), 1) == pytest.approx(np.log(2))


class TestRandomUnitary:
    def test_single_unitary(self):
        u = haar_unitary(3, 1)
        ch = random_unitary_channel([1.0], [u])
        np.testing.assert_allclose(ch.operators[0], u)

    def test_probability_validation(self):
        with pytest.raises(InvalidProbabilities):
            random_unitary_channel([0.7, 0.7], d=2, seed=0)
        with pytest.raises(InvalidProbabilities):
            random_unitary_channel([0.5, 0.5], [np.eye(2)])

    def test_purity_conserved(self):
        ch = random_unitary_channel([0.5, 0.5], d=2, seed=4)
        rho0 = np.diag([0.8, 0.2])
        s = sample_trajectory(ch, rho0, 200, 11)
        assert np.ptp(s.purities) <= 1e-12

    def test_seeded_draws_reproducible(self):
        a = random_unitary_channel([0.5, 0.5], d=3, seed=9)
        b = random_unitary_channel([0.5, 0.5], d=3, seed=9)
        np.testing.assert_array_equal(a.operators, b.operators)


class TestRankOne:
    @given(seeds, st.integers(2, 5))
    def test_pure_after_one_step(self, seed, d):
        ch = rank_one_channel(d, seed)
        assert ch.completeness_residual() <= 1e-12
        s = sample_trajectory(ch, maximally_mixed(d), 1, seed)
        assert purity(s.states[1]) == pytest.approx(1.0, abs=1e-12)

    def test_needs_d_two(self):
        with pytest.raises(ParamOutOfRange):
            rank_one_channel(1)


def test_unitary_channel_rejects_non_unitary():
    with pytest.raises(ValueError):
        unitary_channel(np.diag([1.0, 0.5]))
