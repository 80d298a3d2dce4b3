"""Exact expectations over measurement records.

Expectations are computed by enumerating every record of the requested length,
depth first in blocks, pruning prefixes whose probability is below
``TOL.dead_word`` for every state in the batch. Block sums are accumulated in
lexicographic prefix order, so results do not depend on block size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import TOL, KrausChannel, dagger, hermitian_eig, lyapunov, validate_density
from .errors import EnumerationTooLarge, NumericalInconsistency, StateTooPure, ViolationFound
from .trajectory import ensemble

__all__ = [
    "ExpectationReport",
    "SupermartingaleReport",
    "MonteCarloReport",
    "iter_record_blocks",
    "conditional_states",
    "exact_expected_lyapunov",
    "expected_lyapunov_batch",
    "expected_lyapunov_report",
    "lambda_of_state",
    "supermartingale_check",
    "monte_carlo_vs_exact",
    "record_table",
    "stability_constant",
    "stability_bound",
]

log = logging.getLogger(__name__)

BLOCK = 4096


def _check_cap(ch: KrausChannel, p: int, cap: int | None) -> int:
    cap = TOL.enumeration_cap if cap is None else cap
    if ch.n_outcomes**p > cap:
        raise EnumerationTooLarge(
            f"{ch.n_outcomes}^{p} records exceeds the enumeration cap {cap}")
    return cap


def iter_record_blocks(ch: KrausChannel, rhos: np.ndarray, p: int,
                       block: int = BLOCK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(words, X)`` blocks covering every live record of length ``p``.

    ``rhos`` has shape ``(S, d, d)``; ``X`` has shape ``(S, B, d, d)`` and holds
    the unnormalized conditional states ``V_I rho V_I^dag``; ``words`` is the
    ``(B, p)`` array of outcome indices.
    """
    x = np.asarray(rhos, dtype=complex)[:, None]
    words = np.zeros((1, 0), dtype=int)
    yield from _expand(ch.operators, words, x, p, block)


def _expand(ops, words, x, depth, block):
    if depth == 0:
        yield words, x
        return
    k = ops.shape[0]
    s, b, d, _ = x.shape
    y = ops[None, None] @ x[:, :, None] @ dagger(ops)[None, None]
    y = y.reshape(s, b * k, d, d)
    w = np.concatenate([np.repeat(words, k, axis=0),
                        np.tile(np.arange(k), b)[:, None]], axis=1)
    alive = np.max(np.trace(y, axis1=2, axis2=3).real, axis=0) > TOL.dead_word
    y, w = y[:, alive], w[alive]
    if y.shape[1] == 0:
        return
    if y.shape[1] > block:
        for i in range(0, y.shape[1], block):
            yield from _expand(ops, w[i:i + block], y[:, i:i + block], depth - 1, block)
    else:
        yield from _expand(ops, w, y, depth - 1, block)


def _stack(states) -> np.ndarray:
    return np.stack([validate_density(r).matrix for r in states])


def _lyapunov_terms(x: np.ndarray) -> np.ndarray:
    """sqrt((tr X)^2 - tr X^2) elementwise over a stack of PSD matrices."""
    tr = np.trace(x, axis1=-2, axis2=-1).real
    tr2 = np.sum(np.abs(x) ** 2, axis=(-2, -1))
    rad = tr**2 - tr2
    if rad.size and rad.min() < 0:
        if rad.min() < -TOL.radicand:
            raise NumericalInconsistency(f"negative radicand {rad.min():.3e}")
        log.debug("clamped %d radicands (min %.3e)", int(np.sum(rad < 0)), rad.min())
    return np.sqrt(np.clip(rad, 0.0, None))


def expected_lyapunov_batch(ch: KrausChannel, states, p: int, cap: int | None = None) -> np.ndarray:
    """E[V(rho_p) | rho_0 = rho] for every state of a batch."""
    _check_cap(ch, p, cap)
    rhos = _stack(states) if not isinstance(states, np.ndarray) else states
    total = np.zeros(rhos.shape[0])
    for _, x in iter_record_blocks(ch, rhos, p):
        total += _lyapunov_terms(x).sum(axis=1)
    return total


def exact_expected_lyapunov(ch: KrausChannel, rho, p: int, cap: int | None = None) -> float:
    if p == 0:
        return lyapunov(rho)
    return float(expected_lyapunov_batch(ch, validate_density(rho).matrix[None], p, cap)[0])


@dataclass(frozen=True)
class ExpectationReport:
    p: int
    value: float
    words_enumerated: int

    def to_text(self) -> str:
        return f"p={self.p}\nvalue={self.value!r}\nwords_enumerated={self.words_enumerated}\n"


def expected_lyapunov_report(ch: KrausChannel, rho, p: int, cap: int | None = None) -> ExpectationReport:
    return ExpectationReport(p, exact_expected_lyapunov(ch, rho, p, cap), ch.n_outcomes**p)


def conditional_states(ch: KrausChannel, rho, p: int, cap: int | None = None):
    """Live records of length ``p`` with their probabilities and normalized states."""
    _check_cap(ch, p, cap)
    words, probs, states = [], [], []
    for w, x in iter_record_blocks(ch, validate_density(rho).matrix[None], p):
        tr = np.trace(x[0], axis1=1, axis2=2).real
        words.append(w)
        probs.append(tr)
        states.append(x[0] / tr[:, None, None])
    return np.concatenate(words), np.concatenate(probs), np.concatenate(states)


def record_table(ch: KrausChannel, rho, p: int, cap: int | None = None):
    """Rows ``(word, probability, contribution)`` for auditing small ``p``."""
    _check_cap(ch, p, cap)
    rows = []
    for w, x in iter_record_blocks(ch, validate_density(rho).matrix[None], p):
        tr = np.trace(x[0], axis1=1, axis2=2).real
        contrib = _lyapunov_terms(x[0])
        for word, pr, c in zip(w, tr, contrib):
            rows.append((tuple(ch.outcomes[i] for i in word), float(pr), float(c)))
    return rows


def lambda_of_state(ch: KrausChannel, rho, p: int, cap: int | None = None) -> float:
    """Contraction factor E[V(rho_p) | rho_0 = rho] / V(rho) for a mixed state."""
    v = lyapunov(rho)
    if v <= 1e-9:
        raise StateTooPure(f"V(rho) = {v:.3e} is too small for a ratio")
    return exact_expected_lyapunov(ch, rho, p, cap) / v


@dataclass(frozen=True)
class SupermartingaleReport:
    n_states: int
    p_list: tuple
    worst_margin: float
    worst_state_index: int
    worst_p: int
    passed: bool

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.__dict__.items())


def supermartingale_check(ch: KrausChannel, states: Sequence, p_list: Sequence[int],
                          tol: float = 1e-10, raise_on_violation: bool = True) -> SupermartingaleReport:
    """Check E[V(rho_p) | rho] <= V(rho) + tol for every state and length.

    The margin is ``E - V``; the worst (largest) margin is reported. A
    positive margin beyond ``tol`` raises :class:`ViolationFound`.
    """
    rhos = _stack(states)
    pur = np.sum(np.abs(rhos) ** 2, axis=(1, 2))
    v = np.sqrt(np.clip(1.0 - pur, 0.0, None))
    worst = (-np.inf, -1, -1)
    for p in p_list:
        margin = expected_lyapunov_batch(ch, rhos, p) - v
        i = int(np.argmax(margin))
        if margin[i] > worst[0]:
            worst = (float(margin[i]), i, int(p))
    report = SupermartingaleReport(len(rhos), tuple(p_list), worst[0], worst[1], worst[2],
                                   worst[0] <= tol)
    if not report.passed and raise_on_violation:
        raise ViolationFound(
            f"E[V] exceeds V by {worst[0]:.3e} at p={worst[2]}",
            state=rhos[worst[1]], p=worst[2], margin=worst[0])
    return report


@dataclass(frozen=True)
class MonteCarloReport:
    n: int
    m: int
    exact: float
    mc_mean: float
    standard_error: float
    passed: bool

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.__dict__.items())


def monte_carlo_vs_exact(ch: KrausChannel, rho0, n: int, m: int, seed: int,
                         z: float = 3.0, threads: int | None = None,
                         atol: float = 1e-7) -> MonteCarloReport:
    """Compare the sampled mean of V(rho_n) with the enumerated expectation.

    Passes when the gap is within ``z`` standard errors plus ``atol``. The
    absolute floor exists because V is a square root: a numerically pure
    state has purity 1 - O(1e-16) and so V of order 1e-8.
    """
    exact = exact_expected_lyapunov(ch, rho0, n)
    ens = ensemble(ch, rho0, n, m, seed, threads=threads)
    mean, se = float(ens.mean_lyapunov[n]), float(ens.se_lyapunov[n])
    diff = abs(mean - exact)
    passed = diff <= z * se + atol
    return MonteCarloReport(n, m, exact, mean, se, bool(passed))


def stability_constant(rho0, rho_hat0) -> float:
    """C = ||rho_hat0^{-1/2} rho0 rho_hat0^{-1/2}||_inf * V(rho_hat0).

    The inverse square root is taken on the support of ``rho_hat0``; the norm
    is the largest singular value.
    """
    rho = validate_density(rho0).matrix
    hat = validate_density(rho_hat0)
    vals, vecs = hermitian_eig(hat.matrix)
    keep = vals > TOL.psd
    inv_sqrt = (vecs[:, keep] / np.sqrt(vals[keep])) @ dagger(vecs[:, keep])
    norm = float(np.linalg.norm(inv_sqrt @ rho @ inv_sqrt, ord=2))
    return norm * lyapunov(hat)


def stability_bound(c: float, gamma: float, p: int, n_max: int) -> np.ndarray:
    """C exp(-gamma floor(n/p)) for n = 0..n_max, with exp(-inf * 0) read as 1."""
    blocks = np.arange(n_max + 1) // p
    with np.errstate(invalid="ignore"):
        out = c * np.exp(-gamma * blocks)
    out[blocks == 0] = c
    return out
