import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import dims, random_hermitian, seeds
from qpurify.core import (
    TOL,
    KrausChannel,
    Projector,
    fidelity,
    hermitian_eig,
    lyapunov,
    maximally_mixed,
    psd_sqrt,
    pure_basis_check,
    pure_state,
    purity,
    set_tolerances,
    validate_density,
    word_effects,
    word_operator,
)
from qpurify.errors import (
    CompletenessViolation,
    DimensionMismatch,
    EnumerationTooLarge,
    NotHermitian,
    NotOrthonormal,
    NotProjector,
    NotPSD,
    NotSquare,
    TraceNotOne,
    UnknownOutcomeLabel,
)
from qpurify.models import amplitude_damping, random_channel, random_density


class TestValidateDensity:
    def test_maximally_mixed(self):
        rho = validate_density(np.eye(2) / 2)
        assert purity(rho) == pytest.approx(0.5)

    def test_pure(self):
        rho = validate_density([[1, 0], [0, 0]])
        assert purity(rho) == pytest.approx(1.0)

    def test_bad_trace(self):
        with pytest.raises(TraceNotOne):
            validate_density([[1, 0], [0, 0.5]])

    def test_not_hermitian(self):
        with pytest.raises(NotHermitian):
            validate_density([[0.5, 0.3], [0.0, 0.5]])

    def test_not_psd_reports_eigenvalue(self):
        with pytest.raises(NotPSD) as info:
            validate_density([[1.5, 0], [0, -0.5]])
        assert info.value.min_eigenvalue == pytest.approx(-0.5)

    def test_not_square(self):
        with pytest.raises(NotSquare):
            validate_density(np.ones((2, 3)) / 2)

    def test_matrix_is_read_only(self):
        rho = maximally_mixed(3)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0


class TestFunctionals:
    def test_purity_values(self):
        assert purity(maximally_mixed(2)) == pytest.approx(0.5)
        assert purity(np.diag([0.75, 0.25])) == pytest.approx(0.625)

    @given(seeds, dims)
    def test_rank_one_projector_has_unit_purity(self, seed, d):
        psi = np.random.default_rng(seed).standard_normal(d) + 0j
        assert purity(pure_state(psi)) == pytest.approx(1.0)
        assert lyapunov(pure_state(psi)) == pytest.approx(0.0, abs=1e-7)

    def test_lyapunov_values(self):
        assert lyapunov(maximally_mixed(2)) == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert lyapunov(maximally_mixed(16)) == pytest.approx(math.sqrt(15 / 16), abs=1e-12)

    def test_fidelity_special_cases(self):
        rho = np.diag([0.3, 0.7])
        assert fidelity(rho, rho) == pytest.approx(1.0)
        assert fidelity(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(0.0)
        assert fidelity(np.diag([1.0, 0]), np.diag([0.2, 0.8])) == pytest.approx(0.2)

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fidelity(maximally_mixed(2), maximally_mixed(3))

    @given(seeds, dims)
    def test_fidelity_symmetric_and_bounded(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b = random_density(d, rng), random_density(d, rng)
        f = fidelity(a, b)
        assert 0.0 <= f <= 1.0
        assert f == pytest.approx(fidelity(b, a), abs=1e-8)
        assert f >= np.trace(a.matrix @ b.matrix).real - 1e-9


class TestSpectral:
    def test_diagonal(self):
        w, v = hermitian_eig(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(w, [1, 2])
        np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]])

    def test_pauli_x(self):
        w, _ = hermitian_eig([[0, 1], [1, 0]])
        np.testing.assert_allclose(w, [-1, 1])

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            hermitian_eig([[0, 1], [0, 0]])

    @given(seeds, st.integers(2, 8))
    def test_reconstruction(self, seed, d):
        h = random_hermitian(d, np.random.default_rng(seed))
        assert np.linalg.norm(hermitian_eig(h).reconstruct() - h) <= 1e-8

    def test_psd_sqrt_examples(self):
        np.testing.assert_allclose(psd_sqrt(np.diag([4, 1]) / 5), np.diag([2, 1]) / np.sqrt(5),
                                   atol=1e-14)
        pi = np.array([[0.5, 0.5], [0.5, 0.5]])
        np.testing.assert_allclose(psd_sqrt(pi), pi, atol=1e-12)

    @given(seeds, dims)
    def test_psd_sqrt_squares_back(self, seed, d):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        m = a @ a.conj().T
        s = psd_sqrt(m)
        assert np.linalg.norm(s @ s - m) <= 1e-8 * max(1.0, np.linalg.norm(m))

    def test_psd_sqrt_rejects_negative(self):
        with pytest.raises(NotPSD):
            psd_sqrt(np.diag([1.0, -0.1]))


class TestKrausChannel:
    def test_completeness_enforced(self):
        with pytest.raises(CompletenessViolation):
            KrausChannel(np.stack([np.eye(2), np.eye(2)]))

    def test_labels(self):
        ch = KrausChannel(amplitude_damping(0.5).operators, ("up", "down"))
        assert ch.index("down") == 1
        assert ch.indices(["down", "up"]) == [1, 0]
        with pytest.raises(UnknownOutcomeLabel):
            ch.index("sideways")
        with pytest.raises(KeyError):
            ch.index("sideways")

    def test_label_count_mismatch(self):
        with pytest.raises(DimensionMismatch):
            KrausChannel(np.eye(2)[None], ("a", "b"))

    @given(seeds, dims, st.integers(1, 4))
    def test_random_channel_complete(self, seed, d, k):
        assert random_channel(d, k, seed).completeness_residual() <= 1e-12


class TestWords:
    def test_empty_and_single(self):
        ch = amplitude_damping(0.75)
        v, m = word_operator(ch, ())
        np.testing.assert_allclose(v, np.eye(2))
        np.testing.assert_allclose(m, np.eye(2))
        v, m = word_operator(ch, (1,))
        np.testing.assert_allclose(v, ch.operators[1])
        np.testing.assert_allclose(m, ch.effects[1])

    def test_order_convention(self):
        ch = amplitude_damping(0.75)
        v, m = word_operator(ch, (0, 1))
        np.testing.assert_allclose(v, ch.operators[1] @ ch.operators[0])
        assert np.linalg.eigvalsh(m).min() >= -1e-15

    @given(seeds, dims, st.integers(1, 3), st.integers(1, 3))
    def test_effects_sum_to_identity(self, seed, d, k, p):
        ch = random_channel(d, k, seed)
        words, eff = word_effects(ch, p)
        assert words.shape == (k**p, p)
        np.testing.assert_allclose(eff.sum(axis=0), np.eye(d), atol=1e-10)
        i = len(words) // 2
        np.testing.assert_allclose(eff[i], word_operator(ch, tuple(words[i]))[1], atol=1e-12)

    def test_cap(self):
        with pytest.raises(EnumerationTooLarge):
            word_effects(amplitude_damping(0.5), 5, cap=16)


class TestProjector:
    def test_from_frame_and_range(self):
        pi = Projector.from_frame(np.array([[1, 1], [0, 1], [0, 0]], dtype=complex))
        assert pi.rank == 2
        np.testing.assert_allclose(pi.matrix, np.diag([1, 1, 0]), atol=1e-12)
        assert Projector.onto_range(np.diag([0.3, 0, 2.0])).rank == 2

    def test_rejects_non_idempotent(self):
        with pytest.raises(NotProjector):
            Projector(np.diag([1.0, 0.5]), 1)

    def test_orthonormal_check(self):
        pure_basis_check(np.eye(3))
        with pytest.raises(NotOrthonormal):
            pure_basis_check(np.array([[1, 1], [0, 1]], dtype=complex))


def test_set_tolerances_roundtrip():
    old = set_tolerances(enumeration_cap=7)
    try:
        assert TOL.enumeration_cap == 7
    finally:
        set_tolerances(**vars(old))
    assert TOL.enumeration_cap == old.enumeration_cap
