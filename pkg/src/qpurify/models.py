"""Channel builders: the measured Ising chain and a few reference channels."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .core import KrausChannel, dagger, hermitian_eig, validate_density
from .errors import (
    DimensionCapExceeded,
    InvalidProbabilities,
    NotUnitary,
    ParamOutOfRange,
)

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "SpinChainParams",
    "site_operator",
    "spin_chain_hamiltonian",
    "spin_chain_unitary",
    "spin_chain_channel",
    "hermitian_expm",
    "amplitude_damping",
    "unitary_channel",
    "random_unitary_channel",
    "rank_one_channel",
    "random_channel",
    "haar_unitary",
    "random_density",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

MAX_QUBITS = 6


@dataclass(frozen=True)
class SpinChainParams:
    n_qubits: int = 4
    J: float = 1.0
    tau: float = 1.0
    Bx: float = 1.0
    Bz: float = 1.0

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ParamOutOfRange(f"n_qubits must be a positive integer, got {self.n_qubits}")
        if not self.tau > 0:
            raise ParamOutOfRange(f"tau must be positive, got {self.tau}")


def site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based, leftmost = most significant)."""
    factors = [np.eye(2, dtype=complex)] * n_qubits
    factors[site] = np.asarray(op, dtype=complex)
    return reduce(np.kron, factors)


def spin_chain_hamiltonian(params: SpinChainParams) -> np.ndarray:
    """H = -J sum sz_j sz_{j+1} - Bx sum sx_j - Bz sum sz_j on an open chain."""
    n = params.n_qubits
    sz = [site_operator(PAULI_Z, j, n) for j in range(n)]
    sx = [site_operator(PAULI_X, j, n) for j in range(n)]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for j in range(n - 1):
        h -= params.J * sz[j] @ sz[j + 1]
    for j in range(n):
        h -= params.Bx * sx[j] + params.Bz * sz[j]
    return h


def hermitian_expm(h, tau: float) -> np.ndarray:
    """exp(-i tau H) through the eigendecomposition of Hermitian ``H``."""
    w, v = hermitian_eig(h)
    u = (v * np.exp(-1j * tau * w)) @ dagger(v)
    res = np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0]))
    if res > 1e-8:
        raise NotUnitary(f"exponential lost unitarity (residual {res:.3e})")
    return u


def spin_chain_unitary(params: SpinChainParams) -> np.ndarray:
    return hermitian_expm(spin_chain_hamiltonian(params), params.tau)


def spin_chain_channel(params: SpinChainParams | None = None, *,
                       max_qubits: int = MAX_QUBITS, **kwargs) -> KrausChannel:
    """Evolve for ``tau`` under the Ising chain, then measure sigma_z on the last site.

    Kraus operators are ``P_0 U`` and ``P_1 U`` with outcomes ``0`` and ``1``.
    """
    if params is None:
        params = SpinChainParams(**kwargs)
    elif kwargs:
        raise TypeError("pass either a SpinChainParams or keyword parameters, not both")
    if params.n_qubits > max_qubits:
        raise DimensionCapExceeded(
            f"n_qubits={params.n_qubits} exceeds the cap {max_qubits}; raise max_qubits to override")
    n = params.n_qubits
    u = spin_chain_unitary(params)
    p0 = site_operator(np.diag([1.0, 0.0]), n - 1, n)
    p1 = site_operator(np.diag([0.0, 1.0]), n - 1, n)
    return KrausChannel(np.stack([p0 @ u, p1 @ u]), (0, 1))


def amplitude_damping(a: float) -> KrausChannel:
    if not 0.0 <= a <= 1.0:
        raise ParamOutOfRange(f"damping parameter must lie in [0, 1], got {a}")
    v0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - a)]], dtype=complex)
    v1 = np.array([[0.0, np.sqrt(a)], [0.0, 0.0]], dtype=complex)
    return KrausChannel(np.stack([v0, v1]))


def haar_unitary(d: int, rng=None) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    rng = np.random.default_rng(rng)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def unitary_channel(u) -> KrausChannel:
    return KrausChannel(np.asarray(u, dtype=complex)[None])


def random_unitary_channel(probs, unitaries=None, seed=None, d: int | None = None) -> KrausChannel:
    """Mixture of unitaries: V_i = sqrt(q_i) U_i.

    Missing unitaries are drawn Haar-randomly from ``seed`` (``d`` required).
    Every subspace of such a channel is dark.
    """
    q = np.asarray(probs, dtype=float)
    if q.ndim != 1 or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
        raise InvalidProbabilities(f"probabilities must be nonnegative and sum to 1, got {q}")
    if unitaries is None:
        if d is None:
            raise ValueError("d is required when unitaries are drawn at random")
        rng = np.random.default_rng(seed)
        unitaries = [haar_unitary(d, rng) for _ in q]
    us = np.asarray(unitaries, dtype=complex)
    if us.shape[0] != q.size:
        raise InvalidProbabilities(f"{q.size} probabilities for {us.shape[0]} unitaries")
    eye = np.eye(us.shape[1])
    for u in us:
        if np.linalg.norm(dagger(u) @ u - eye) > 1e-8:
            raise NotUnitary("mixture component is not unitary")
    return KrausChannel(np.sqrt(q)[:, None, None] * us)


def rank_one_channel(d: int, seed=None) -> KrausChannel:
    """V_i = |phi_i><chi_i| with {chi_i} orthonormal and phi_i random unit vectors."""
    if d < 2:
        raise ParamOutOfRange("rank-one channel needs d >= 2")
    rng = np.random.default_rng(seed)
    chi = haar_unitary(d, rng)
    phi = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    phi /= np.linalg.norm(phi, axis=0)
    ops = np.stack([np.outer(phi[:, i], chi[:, i].conj()) for i in range(d)])
    return KrausChannel(ops)


def random_channel(d: int, k: int, seed=None) -> KrausChannel:
    """Generic channel from a Haar-random isometry C^d -> C^k (x) C^d."""
    rng = np.random.default_rng(seed)
    w = haar_unitary(k * d, rng)[:, :d]
    return KrausChannel(w.reshape(k, d, d))


def random_density(d: int, rng=None, rank: int | None = None):
    """Random density matrix W W^dag / tr, W Ginibre of shape (d, rank)."""
    rng = np.random.default_rng(rng)
    r = d if rank is None else rank
    w = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = w @ dagger(w)
    return validate_density(rho / np.trace(rho).real)

