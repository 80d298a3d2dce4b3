"""Validated quantum-state types and the dense linear algebra they rely on.

States and channels are plain numpy arrays wrapped in frozen dataclasses.
Wrapped arrays are made read-only so that validated objects can be shared
between workers without copying.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .errors import (
    CompletenessViolation,
    DimensionMismatch,
    EnumerationTooLarge,
    NotHermitian,
    NotOrthonormal,
    NotProjector,
    NotPSD,
    NotSquare,
    NumericalInconsistency,
    TraceNotOne,
    UnknownOutcomeLabel,
)

__all__ = [
    "Tolerances",
    "TOL",
    "set_tolerances",
    "as_square_matrix",
    "DensityMatrix",
    "KrausChannel",
    "Projector",
    "SpectralDecomposition",
    "validate_density",
    "maximally_mixed",
    "pure_state",
    "purity",
    "lyapunov",
    "fidelity",
    "hermitian_eig",
    "psd_sqrt",
    "word_operator",
    "word_effects",
    "word_operators",
    "dagger",
]


@dataclass
class Tolerances:
    hermitian: float = 1e-10
    psd: float = 1e-10
    trace: float = 1e-10
    completeness: float = 1e-9
    projector: float = 1e-9
    eig_hermitian: float = 1e-8
    radicand: float = 1e-12
    enumeration_cap: int = 10**6
    dead_word: float = 1e-14


TOL = Tolerances()


def set_tolerances(**changes) -> Tolerances:
    """Update the shared tolerances in place; returns a copy of the previous settings."""
    previous = replace(TOL)
    for name, value in changes.items():
        if not hasattr(TOL, name):
            raise AttributeError(f"unknown tolerance {name!r}")
        setattr(TOL, name, value)
    return previous


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def as_square_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotSquare(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


def _hermitian_residual(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - dagger(a)))


class SpectralDecomposition(NamedTuple):
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ dagger(self.basis)


def hermitian_eig(h, tol: float | None = None) -> SpectralDecomposition:
    h = as_square_matrix(h)
    tol = TOL.eig_hermitian if tol is None else tol
    res = _hermitian_residual(h)
    if res > tol:
        raise NotHermitian(f"matrix is not Hermitian (residual {res:.3e})")
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return SpectralDecomposition(w, v)


def psd_sqrt(m, clamp: float | None = None) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in ``[-clamp, 0)`` are treated as zero; anything more negative
    raises :class:`NotPSD`.
    """
    if isinstance(m, DensityMatrix):
        m = m.matrix
    clamp = TOL.psd if clamp is None else clamp
    w, v = hermitian_eig(m)
    if w[0] < -clamp:
        raise NotPSD(f"matrix is not PSD (min eigenvalue {w[0]:.3e})", w[0])
    s = np.sqrt(np.clip(w, 0.0, None))
    return (v * s) @ dagger(v)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density matrix. Build with :func:`validate_density`."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def validate_density(m) -> DensityMatrix:
    if isinstance(m, DensityMatrix):
        return m
    a = as_square_matrix(m)
    res = _hermitian_residual(a)
    if res > TOL.hermitian:
        raise NotHermitian(f"state is not Hermitian (residual {res:.3e})")
    a = 0.5 * (a + dagger(a))
    tr = np.trace(a).real
    if abs(tr - 1.0) > TOL.trace:
        raise TraceNotOne(f"trace is {tr!r}, expected 1")
    wmin = np.linalg.eigvalsh(a)[0]
    if wmin < -TOL.psd:
        raise NotPSD(f"state is not PSD (min eigenvalue {wmin:.3e})", wmin)
    return DensityMatrix(_readonly(a))


def maximally_mixed(d: int) -> DensityMatrix:
    return validate_density(np.eye(d) / d)


def pure_state(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return validate_density(np.outer(psi, psi.conj()))


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def purity(rho) -> float:
    """tr(rho^2), computed as the squared Frobenius norm."""
    a = _matrix(rho)
    return float(np.sum(np.abs(a) ** 2))


def lyapunov(rho) -> float:
    """sqrt(1 - tr rho^2): zero exactly on pure states."""
    radicand = 1.0 - purity(rho)
    if radicand < 0.0:
        if radicand < -TOL.radicand:
            raise NumericalInconsistency(f"purity exceeds 1 by {-radicand:.3e}")
        return 0.0
    return float(np.sqrt(radicand))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"state shapes differ: {a.shape} vs {b.shape}")
    s = psd_sqrt(a)
    inner = s @ b @ s
    w = np.linalg.eigvalsh(0.5 * (inner + dagger(inner)))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


@dataclass(frozen=True)
class KrausChannel:
    """Finite family of Kraus operators satisfying the completeness relation.

    ``operators`` has shape ``(k, d, d)``; ``outcomes`` holds one hashable
    label per operator (defaults to ``0..k-1``).
    """

    operators: np.ndarray
    outcomes: tuple = field(default=())

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] < 1 or ops.shape[1] != ops.shape[2]:
            raise NotSquare(f"expected a (k, d, d) stack of Kraus operators, got {ops.shape}")
        outcomes = tuple(self.outcomes) if len(self.outcomes) else tuple(range(ops.shape[0]))
        if len(outcomes) != ops.shape[0]:
            raise DimensionMismatch(f"{len(outcomes)} labels for {ops.shape[0]} Kraus operators")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("outcome labels must be distinct")
        object.__setattr__(self, "operators", _readonly(ops))
        object.__setattr__(self, "outcomes", outcomes)
        res = self.completeness_residual()
        if res > TOL.completeness:
            raise CompletenessViolation(f"sum V_i^dag V_i deviates from identity by {res:.3e}")

    @classmethod
    def from_operators(cls, ops: Sequence, outcomes: Sequence[Hashable] = ()) -> "KrausChannel":
        return cls(np.stack([as_square_matrix(v) for v in ops]), tuple(outcomes))

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.operators.shape[0]

    @property
    def effects(self) -> np.ndarray:
        """One-step effects V_i^dag V_i, shape (k, d, d)."""
        return dagger(self.operators) @ self.operators

    def completeness_residual(self) -> float:
        return float(np.linalg.norm(self.effects.sum(axis=0) - np.eye(self.dim)))

    def index(self, label) -> int:
        try:
            return self.outcomes.index(label)
        except ValueError:
            raise UnknownOutcomeLabel(f"unknown outcome label {label!r}") from None

    def indices(self, word: Sequence) -> list[int]:
        return [self.index(label) for label in word]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector with its rank."""

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        p = as_square_matrix(self.matrix)
        tol = TOL.projector
        if _hermitian_residual(p) > tol:
            raise NotHermitian("projector is not Hermitian")
        idem = float(np.linalg.norm(p @ p - p))
        if idem > tol:
            raise NotProjector(f"matrix is not idempotent (residual {idem:.3e})")
        if abs(np.trace(p).real - self.rank) > tol:
            raise NotProjector(f"trace {np.trace(p).real:.6f} does not match rank {self.rank}")
        object.__setattr__(self, "matrix", _readonly(p))

    @classmethod
    def from_matrix(cls, p) -> "Projector":
        p = as_square_matrix(p)
        return cls(p, int(round(np.trace(p).real)))

    @classmethod
    def from_frame(cls, q) -> "Projector":
        """Projector onto the column span of ``q`` (columns need not be orthonormal)."""
        q = np.asarray(q, dtype=complex)
        if q.ndim == 1:
            q = q[:, None]
        u, s, _ = np.linalg.svd(q, full_matrices=False)
        r = int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0
        u = u[:, :r]
        return cls(u @ dagger(u), r)

    @classmethod
    def onto_range(cls, m, rel_tol: float = 1e-9) -> "Projector":
        """Projector onto range(m) for a Hermitian PSD matrix."""
        w, v = hermitian_eig(m)
        keep = w > rel_tol * max(w[-1], 0.0) if w[-1] > 0 else np.zeros_like(w, bool)
        u = v[:, keep]
        return cls(u @ dagger(u), int(keep.sum()))

    def frame(self) -> np.ndarray:
        """Orthonormal columns spanning the range."""
        w, v = np.linalg.eigh(self.matrix)
        return v[:, w > 0.5]


def pure_basis_check(basis: np.ndarray, tol: float = 1e-8) -> None:
    g = dagger(basis) @ basis
    res = float(np.max(np.abs(g - np.eye(g.shape[0])))) if g.size else 0.0
    if res > tol:
        raise NotOrthonormal(f"columns are not orthonormal (residual {res:.3e})")


def word_operator(ch: KrausChannel, word: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(V_I, M_I)`` for a record ``I = (i_1, ..., i_p)``.

    ``i_1`` is applied first, so ``V_I = V_{i_p} ... V_{i_1}`` and
    ``M_I = V_I^dag V_I``. Reversing the word gives the other product
    convention; the set of ``M_I`` over all words of a given length is the
    same under both.
    """
    v = np.eye(ch.dim, dtype=complex)
    for i in ch.indices(word):
        v = ch.operators[i] @ v
    return v, dagger(v) @ v


def word_effects(ch: KrausChannel, p: int, cap: int | None = None):
    """All words of length ``p`` (as index tuples, lexicographic) and their ``M_I``.

    Returns ``(words, effects)`` with ``words`` of shape ``(k**p, p)`` and
    ``effects`` of shape ``(k**p, d, d)``.
    """
    cap = TOL.enumeration_cap if cap is None else cap
    k = ch.n_outcomes
    if p < 0:
        raise ValueError("word length must be non-negative")
    if k**p > cap:
        raise EnumerationTooLarge(f"{k}^{p} words exceeds the enumeration cap {cap}")
    words = np.array(list(itertools.product(range(k), repeat=p)), dtype=int).reshape(k**p, p)
    v = ch.operators
    m = np.eye(ch.dim, dtype=complex)[None]
    # M_{(i, J)} = V_i^dag M_J V_i: prepend letters from the last one backwards.
    for _ in range(p):
        m = (dagger(v)[:, None] @ m[None] @ v[:, None]).reshape(-1, ch.dim, ch.dim)
    return words, m


def word_operators(ch: KrausChannel, p: int, cap: int | None = None) -> np.ndarray:
    """All ``V_I`` for words of length ``p`` in lexicographic order, shape ``(k**p, d, d)``."""
    cap = TOL.enumeration_cap if cap is None else cap
    k = ch.n_outcomes
    if k**p > cap:
        raise EnumerationTooLarge(f"{k}^{p} words exceeds the enumeration cap {cap}")
    v = np.eye(ch.dim, dtype=complex)[None]
    for _ in range(p):
        v = (v[:, None] @ ch.operators[None]).reshape(-1, ch.dim, ch.dim)
    return v
