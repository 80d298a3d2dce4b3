"""Dark subspaces: moment spaces, darkness tests and a heuristic search.

A projector ``pi`` of rank ``r >= 2`` is dark when ``pi M_I pi`` is
proportional to ``pi`` for every record ``I``. The moment spaces
``E_p = span{M_I : |I| = p}`` are nested and stabilize after at most ``d^2``
steps, which bounds the record length that needs to be checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import TOL, KrausChannel, Projector, dagger, word_effects
from .errors import EnumerationTooLarge, RankTooSmall

__all__ = [
    "MomentSpaceReport",
    "DarknessVerdict",
    "PurificationVerdict",
    "moment_spaces",
    "darkness_residuals",
    "is_dark",
    "search_frames",
    "dark_search",
    "purification_verdict",
]

SPAN_RTOL = 1e-9
DARK_TOL = 1e-8
CANDIDATE_TOL = 1e-6


@dataclass(frozen=True)
class MomentSpaceReport:
    dims: tuple
    p_bar_span: int | None
    cap: int

    @property
    def stabilized(self) -> bool:
        return self.p_bar_span is not None

    def rows(self):
        for p, dim in enumerate(self.dims, start=1):
            yield p, dim


def _span_basis(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the rows of ``vectors``."""
    if vectors.shape[0] == 0:
        return vectors
    _, s, vh = np.linalg.svd(vectors, full_matrices=False)
    if s[0] == 0:
        return vh[:0]
    return vh[s > SPAN_RTOL * s[0]]


def moment_spaces(ch: KrausChannel, p_max: int | None = None) -> MomentSpaceReport:
    """Dimensions of E_1, E_2, ... until two consecutive ones agree or ``p_max``.

    ``E_{p+1}`` is generated as ``span{V_i^dag X V_i : X in E_p}``.
    """
    d = ch.dim
    p_max = d * d if p_max is None else p_max
    ops = ch.operators
    basis = _span_basis(ch.effects.reshape(ch.n_outcomes, -1))
    dims = [basis.shape[0]]
    p_bar = None
    for p in range(1, p_max + 1):
        xs = basis.reshape(-1, d, d)
        gens = (dagger(ops)[:, None] @ xs[None] @ ops[:, None]).reshape(-1, d * d)
        basis = _span_basis(gens)
        dims.append(basis.shape[0])
        if dims[-1] == dims[-2]:
            p_bar = p
            break
    return MomentSpaceReport(tuple(dims), p_bar, d * d)


@dataclass(frozen=True)
class DarknessVerdict:
    projector: Projector
    max_residual: float
    worst_word: tuple
    is_dark: bool
    tolerance: float
    p_max: int

    def to_text(self) -> str:
        return (f"rank={self.projector.rank}\np_max={self.p_max}\n"
                f"max_residual={self.max_residual!r}\nworst_word={list(self.worst_word)}\n"
                f"is_dark={self.is_dark}\ntolerance={self.tolerance!r}\n")


def _compressed_residuals(effects: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """||pi M pi - tr(pi M)/r pi||_F for each effect, via the r x r compression."""
    r = frame.shape[1]
    c = dagger(frame)[None] @ effects @ frame[None]
    tr = np.trace(c, axis1=1, axis2=2)
    dev = c - (tr / r)[:, None, None] * np.eye(r)[None]
    return np.linalg.norm(dev, axis=(1, 2))


def darkness_residuals(ch: KrausChannel, pi: Projector, p: int, cap: int | None = None):
    """Words of length ``p`` and their darkness residuals for projector ``pi``."""
    words, effects = word_effects(ch, p, cap)
    return words, _compressed_residuals(effects, pi.frame())


def is_dark(ch: KrausChannel, pi: Projector, p_max: int | None = None,
            tol: float = DARK_TOL, cap: int | None = None) -> DarknessVerdict:
    """Test ``pi M_I pi ∝ pi`` for all records with ``1 <= |I| <= p_max``.

    ``p_max`` defaults to the moment-space stabilization index.
    """
    if pi.rank < 2:
        raise RankTooSmall(f"darkness needs rank >= 2, got {pi.rank}")
    if p_max is None:
        rep = moment_spaces(ch)
        p_max = rep.p_bar_span if rep.p_bar_span is not None else ch.dim**2
    cap = TOL.enumeration_cap if cap is None else cap
    total = sum(ch.n_outcomes**p for p in range(1, p_max + 1))
    if total > cap:
        raise EnumerationTooLarge(f"{total} records up to length {p_max} exceeds cap {cap}")
    worst, worst_word = -1.0, ()
    for p in range(1, p_max + 1):
        words, res = darkness_residuals(ch, pi, p, cap)
        i = int(np.argmax(res))
        if res[i] > worst:
            worst, worst_word = float(res[i]), tuple(ch.outcomes[j] for j in words[i])
    return DarknessVerdict(pi, worst, worst_word, worst <= tol, tol, p_max)


def _frame_objective(effects: np.ndarray, r: int, d: int):
    """Sum of squared residuals over effects, as a function of an unconstrained frame X.

    With pi = X (X^dag X)^{-1} X^dag the objective is
    sum_I tr(pi M pi M) - tr(pi M)^2 / r.
    """

    def fun(x):
        xm = (x[: d * r] + 1j * x[d * r:]).reshape(d, r)
        a_inv = np.linalg.inv(dagger(xm) @ xm)
        pi = xm @ a_inv @ dagger(xm)
        pm = pi[None] @ effects
        tr = np.trace(pm, axis1=1, axis2=2).real
        f = float(np.sum(np.einsum("nab,nba->n", pm, pm).real - tr**2 / r))
        g = 2 * np.sum(effects @ pm - (tr / r)[:, None, None] * effects, axis=0)
        grad = 2 * (np.eye(d) - pi) @ g @ xm @ a_inv
        return f, np.concatenate([grad.real.ravel(), grad.imag.ravel()])

    return fun


def search_frames(effects: np.ndarray, r: int, restarts: int = 8, rng=None,
                  maxiter: int = 3000):
    """Local minimization of the darkness residual from random rank-``r`` frames.

    Returns ``[(frame, max_residual), ...]`` sorted by residual, with
    orthonormal ``d x r`` frames.
    """
    rng = np.random.default_rng(rng)
    d = effects.shape[1]
    fun = _frame_objective(effects, r, d)
    out = []
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * d * r)
        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 0.0, "gtol": 1e-16})
        xm = (res.x[: d * r] + 1j * res.x[d * r:]).reshape(d, r)
        q, _ = np.linalg.qr(xm)
        out.append((q, float(np.max(_compressed_residuals(effects, q)))))
    out.sort(key=lambda t: t[1])
    return out


def dark_search(ch: KrausChannel, r: int, p_max: int = 1, restarts: int = 8,
                seed: int = 0, cap: int | None = None) -> DarknessVerdict:
    """Heuristic search for a rank-``r`` dark subspace over records up to ``p_max``.

    A best residual at or below 1e-6 marks a candidate; it is never a proof
    that a dark subspace exists, and failure is never a proof that none does.
    """
    d = ch.dim
    if not 2 <= r <= d:
        raise RankTooSmall(f"rank must lie in [2, {d}], got {r}")
    effects = np.concatenate([word_effects(ch, p, cap)[1] for p in range(1, p_max + 1)])
    found = search_frames(effects, r, restarts, np.random.default_rng(seed))
    frame, _ = found[0]
    pi = Projector(frame @ dagger(frame), r)
    return is_dark(ch, pi, p_max, tol=CANDIDATE_TOL, cap=cap)


@dataclass(frozen=True)
class PurificationVerdict:
    verdict: str
    p_bar_span: int | None
    p_bar: int | None
    gammas: tuple
    dims: tuple
    dark_candidate: DarknessVerdict | None = None

    def to_text(self) -> str:
        lines = [f"verdict={self.verdict}", f"p_bar_span={self.p_bar_span}",
                 f"p_bar_operational={self.p_bar}",
                 "gamma_hat=" + ",".join(repr(g) for g in self.gammas),
                 "dims_Ep=" + ",".join(str(x) for x in self.dims)]
        if self.dark_candidate is not None:
            lines.append(f"dark_candidate_residual={self.dark_candidate.max_residual!r}")
        return "\n".join(lines) + "\n"


def purification_verdict(ch: KrausChannel, threshold: float = 0.01, restarts: int = 32,
                         seed: int = 0, budget: int = 2000, p_limit: int | None = None,
                         dark_restarts: int = 8, threads: int = 1) -> PurificationVerdict:
    """Classify a channel as PURIFYING, DARK-CANDIDATE or INCONCLUSIVE.

    Rates are computed for ``p = 1 .. p_bar_span``. Since
    ``lambda_{p+1} <= lambda_p lambda_1 <= lambda_p``, the rates are
    non-decreasing in ``p`` and the scan stops at the first ``p`` whose
    estimated rate exceeds ``threshold``; that ``p`` is the operational
    ``p_bar``.
    """
    from .rates import optimize_rate

    rep = moment_spaces(ch)
    p_span = rep.p_bar_span if rep.p_bar_span is not None else ch.dim**2
    p_stop = p_span if p_limit is None else min(p_span, p_limit)
    gammas = []
    for p in range(1, p_stop + 1):
        est = optimize_rate(ch, p, restarts=restarts, seed=seed, budget=budget, threads=threads)
        gammas.append(est.gamma_hat)
        if est.gamma_hat > threshold:
            return PurificationVerdict("PURIFYING", rep.p_bar_span, p, tuple(gammas), rep.dims)
    dark = None
    if ch.dim >= 2:
        dark = dark_search(ch, 2, p_max=p_stop, restarts=dark_restarts, seed=seed)
        if dark.max_residual <= CANDIDATE_TOL:
            return PurificationVerdict("DARK-CANDIDATE", rep.p_bar_span, None, tuple(gammas),
                                       rep.dims, dark)
    return PurificationVerdict("INCONCLUSIVE", rep.p_bar_span, None, tuple(gammas), rep.dims, dark)

