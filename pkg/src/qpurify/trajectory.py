"""Sampling of quantum trajectories and of estimated (filter) trajectories.

All sampling goes through one batched engine: a batch of independent
trajectories, each owning a random stream, is advanced step by step. Each
step consumes exactly one uniform draw per trajectory and picks the outcome by
inverse CDF over the ordered outcome list. A single trajectory is a batch of
one, so ensemble member ``i`` is bit-identical to
``sample_trajectory(..., seed=derive_seed(base_seed, i))``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    TOL,
    DensityMatrix,
    KrausChannel,
    Projector,
    dagger,
    lyapunov,
    validate_density,
    word_operator,
)
from .errors import (
    AllOutcomesZeroProbability,
    FilterDegenerate,
    NormalizationDrift,
    NotPSD,
    NumericalInconsistency,
    SupportViolation,
    TraceNotOne,
)

__all__ = [
    "MeasurementRecord",
    "TrajectorySample",
    "PairedSample",
    "TrajectoryEnsemble",
    "derive_seed",
    "step",
    "sample_trajectory",
    "record_probability",
    "paired_filter_trajectory",
    "check_support",
    "ensemble",
    "default_threads",
]

PROB_DRIFT = 1e-8
FILTER_FLOOR = 1e-14
CHUNK = 256


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: tuple

    def __len__(self) -> int:
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)


@dataclass(frozen=True)
class TrajectorySample:
    record: MeasurementRecord
    states: tuple
    seed: int

    @property
    def purities(self) -> np.ndarray:
        return np.array([np.sum(np.abs(s.matrix) ** 2) for s in self.states])

    @property
    def lyapunov_values(self) -> np.ndarray:
        return np.array([lyapunov(s) for s in self.states])


@dataclass(frozen=True)
class PairedSample:
    record: MeasurementRecord
    true_states: tuple
    filter_states: tuple
    fidelities: np.ndarray
    seed: int


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Per-step means and standard errors over ``m`` trajectories of ``n`` steps.

    Arrays have length ``n + 1`` (step 0 included). Fidelity statistics are
    NaN when no filter state was given. ``samples`` holds the per-trajectory
    values, keyed by quantity, each of shape ``(m, n + 1)``.
    """

    m: int
    n: int
    base_seed: int
    mean_lyapunov: np.ndarray
    se_lyapunov: np.ndarray
    mean_purity: np.ndarray
    se_purity: np.ndarray
    mean_one_minus_fidelity: np.ndarray
    se_one_minus_fidelity: np.ndarray
    samples: dict = field(default_factory=dict, repr=False)

    def normalized_lyapunov(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and standard error of V(rho_n)/V(rho_0)."""
        v0 = self.mean_lyapunov[0]
        if v0 <= 0:
            raise ValueError("initial state is pure; normalized Lyapunov undefined")
        return self.mean_lyapunov / v0, self.se_lyapunov / v0


def derive_seed(base_seed: int, index: int) -> int:
    """64-bit seed of ensemble member ``index``; independent of scheduling."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def default_threads() -> int:
    env = os.environ.get("QPURIFY_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _as_matrix(rho) -> np.ndarray:
    return validate_density(rho).matrix


def _outcome_probabilities(effects: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    # tr(M_i rho) for each batch member and outcome
    p = np.einsum("iab,mba->mi", effects, rhos).real
    total = p.sum(axis=1)
    if np.any(np.abs(total - 1.0) > PROB_DRIFT):
        worst = float(np.max(np.abs(total - 1.0)))
        raise NormalizationDrift(f"outcome probabilities sum off by {worst:.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum(axis=1)
    if np.any(total <= 0):
        raise AllOutcomesZeroProbability("every outcome has zero probability")
    return p / total[:, None]


def _pick(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    idx = np.sum(cdf <= u[:, None], axis=1)
    # u above a rounded-down final cdf value: fall back to the last live outcome
    over = idx >= p.shape[1]
    if np.any(over):
        last_live = p.shape[1] - 1 - np.argmax((p > 0)[:, ::-1], axis=1)
        idx = np.where(over, last_live, idx)
    return idx


def _update(ops: np.ndarray, idx: np.ndarray, rhos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = ops[idx]
    x = v @ rhos @ dagger(v)
    x = 0.5 * (x + dagger(x))
    norm = np.trace(x, axis1=1, axis2=2).real
    return x, norm


def _check_states(rhos: np.ndarray) -> None:
    tr = np.trace(rhos, axis1=1, axis2=2).real
    if np.any(np.abs(tr - 1.0) > TOL.trace):
        raise TraceNotOne(f"updated state trace drifted by {np.max(np.abs(tr - 1)):.3e}")
    wmin = np.linalg.eigvalsh(rhos)[:, 0]
    if np.any(wmin < -TOL.psd):
        raise NotPSD(f"updated state lost positivity (min eigenvalue {wmin.min():.3e})", wmin.min())


def _purity(rhos: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(rhos) ** 2, axis=(1, 2))


def _lyapunov(pur: np.ndarray) -> np.ndarray:
    rad = 1.0 - pur
    if np.any(rad < -TOL.radicand):
        raise NumericalInconsistency(f"purity exceeds 1 by {-rad.min():.3e}")
    return np.sqrt(np.clip(rad, 0.0, None))


def _fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    s = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ dagger(v)
    inner = s @ b @ s
    ev = np.linalg.eigvalsh(0.5 * (inner + dagger(inner)))
    f = np.sum(np.sqrt(np.clip(ev, 0.0, None)), axis=1) ** 2
    return np.clip(f, 0.0, 1.0)


def _simulate(ch: KrausChannel, rho0: np.ndarray, n: int, seeds: Sequence[int],
              rho_hat0: np.ndarray | None = None, keep_states: bool = False) -> dict:
    m = len(seeds)
    d = ch.dim
    ops = ch.operators
    effects = ch.effects
    u = np.stack([np.random.default_rng(s).random(n) for s in seeds]) if n else np.zeros((m, 0))
    rhos = np.broadcast_to(rho0, (m, d, d)).copy()
    hats = None if rho_hat0 is None else np.broadcast_to(rho_hat0, (m, d, d)).copy()

    outcomes = np.zeros((m, n), dtype=int)
    purity = np.empty((m, n + 1))
    fid = np.full((m, n + 1), np.nan)
    states = [rhos.copy()] if keep_states else None
    hat_states = [hats.copy()] if keep_states and hats is not None else None

    purity[:, 0] = _purity(rhos)
    if hats is not None:
        fid[:, 0] = _fidelity(rhos, hats)
    for k in range(n):
        p = _outcome_probabilities(effects, rhos)
        idx = _pick(p, u[:, k])
        outcomes[:, k] = idx
        x, norm = _update(ops, idx, rhos)
        rhos = x / norm[:, None, None]
        _check_states(rhos)
        purity[:, k + 1] = _purity(rhos)
        if hats is not None:
            y, q = _update(ops, idx, hats)
            if np.any(q < FILTER_FLOOR):
                raise FilterDegenerate(
                    f"filter normalization {q.min():.3e} fell below {FILTER_FLOOR:g}")
            hats = y / q[:, None, None]
            fid[:, k + 1] = _fidelity(rhos, hats)
        if keep_states:
            states.append(rhos.copy())
            if hat_states is not None:
                hat_states.append(hats.copy())
    out = {"outcomes": outcomes, "purity": purity, "lyapunov": _lyapunov(purity),
           "fidelity": fid}
    if keep_states:
        out["states"] = np.stack(states, axis=1)
        if hat_states is not None:
            out["filter_states"] = np.stack(hat_states, axis=1)
    return out


def _wrap_states(stack: np.ndarray) -> tuple:
    # already validated inside the engine
    out = []
    for a in stack:
        a = a.copy()
        a.flags.writeable = False
        out.append(DensityMatrix(a))
    return tuple(out)


def step(ch: KrausChannel, rho, u: float):
    """One measurement step driven by the uniform draw ``u`` in [0, 1).

    Returns ``(label, new_state)``.
    """
    rhos = _as_matrix(rho)[None]
    p = _outcome_probabilities(ch.effects, rhos)
    idx = _pick(p, np.array([float(u)]))
    x, norm = _update(ch.operators, idx, rhos)
    new = x / norm[:, None, None]
    _check_states(new)
    return ch.outcomes[idx[0]], validate_density(new[0])


def sample_trajectory(ch: KrausChannel, rho0, n: int, seed: int) -> TrajectorySample:
    if n < 0:
        raise ValueError("n must be non-negative")
    out = _simulate(ch, _as_matrix(rho0), n, [seed], keep_states=True)
    rec = MeasurementRecord(tuple(ch.outcomes[i] for i in out["outcomes"][0]))
    return TrajectorySample(rec, _wrap_states(out["states"][0]), int(seed))


def record_probability(ch: KrausChannel, rho0, word: Sequence) -> float:
    """Probability tr(V_I rho0 V_I^dag) of observing ``word`` from ``rho0``."""
    v, _ = word_operator(ch, tuple(word))
    rho = _as_matrix(rho0)
    return float(np.clip(np.trace(v @ rho @ dagger(v)).real, 0.0, 1.0))


def check_support(rho0, rho_hat0, tol: float = 1e-9) -> None:
    """Raise :class:`SupportViolation` unless supp(rho0) lies in supp(rho_hat0)."""
    a, b = _as_matrix(rho0), _as_matrix(rho_hat0)
    proj = Projector.onto_range(b).matrix
    comp = np.eye(a.shape[0]) - proj
    leak = float(np.linalg.norm(comp @ a @ comp))
    if leak > tol:
        raise SupportViolation(
            f"true state leaks {leak:.3e} outside the support of the filter state")


def paired_filter_trajectory(ch: KrausChannel, rho0, rho_hat0, n: int, seed: int) -> PairedSample:
    """True trajectory from ``rho0`` and the filter started at ``rho_hat0``.

    The record is sampled from the law of the true state; both states are
    updated with the same outcomes.
    """
    check_support(rho0, rho_hat0)
    out = _simulate(ch, _as_matrix(rho0), n, [seed], rho_hat0=_as_matrix(rho_hat0),
                    keep_states=True)
    rec = MeasurementRecord(tuple(ch.outcomes[i] for i in out["outcomes"][0]))
    return PairedSample(rec, _wrap_states(out["states"][0]),
                        _wrap_states(out["filter_states"][0]), out["fidelity"][0].copy(),
                        int(seed))


def _mean_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # correctly rounded column sums: the mean of identical values is that value
    mean = np.array([math.fsum(col) for col in x.T]) / x.shape[0]
    if x.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def ensemble(ch: KrausChannel, rho0, n: int, m: int, base_seed: int, rho_hat0=None,
             threads: int | None = None, keep_samples: bool = False) -> TrajectoryEnsemble:
    """Run ``m`` trajectories (optionally paired with a filter) and aggregate.

    Members are processed in fixed-size chunks; ``threads`` only changes how
    chunks are scheduled, never the result.
    """
    if m < 1:
        raise ValueError("ensemble size must be at least 1")
    if n < 0:
        raise ValueError("n must be non-negative")
    rho = _as_matrix(rho0)
    hat = None
    if rho_hat0 is not None:
        check_support(rho0, rho_hat0)
        hat = _as_matrix(rho_hat0)
    seeds = [derive_seed(base_seed, i) for i in range(m)]
    chunks = [seeds[i:i + CHUNK] for i in range(0, m, CHUNK)]
    threads = default_threads() if threads is None else max(1, int(threads))

    def run(chunk):
        return _simulate(ch, rho, n, chunk, rho_hat0=hat)

    if threads == 1 or len(chunks) == 1:
        results = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    lyap = np.concatenate([r["lyapunov"] for r in results])
    pur = np.concatenate([r["purity"] for r in results])
    omf = 1.0 - np.concatenate([r["fidelity"] for r in results])
    ml, sl = _mean_se(lyap)
    mp, sp = _mean_se(pur)
    mf, sf = _mean_se(omf)
    samples = {}
    if keep_samples:
        samples = {"lyapunov": lyap, "purity": pur, "one_minus_fidelity": omf,
                   "outcomes": np.concatenate([r["outcomes"] for r in results])}
    return TrajectoryEnsemble(m, n, int(base_seed), ml, sl, mp, sp, mf, sf, samples)
