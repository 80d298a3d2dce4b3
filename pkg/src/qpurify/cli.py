"""Command-line experiment driver.

Usage::

    qpurify {simulate,rates,darkspace,stability,sweep} --config run.json [--seed N]
            [--out DIR] [--threads N] [--cap-words N]

The config is a JSON document; command-line flags override its fields. See the
README for the schema. Exit status: 0 on success, 2 for configuration errors,
3 when a numerical invariant is violated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .analysis import stability_bound, stability_constant
from .core import TOL, maximally_mixed, pure_state
from .darkspace import moment_spaces, purification_verdict
from .errors import NonPositiveSeries, NumericalInvariantError, SupportViolation
from .models import (
    SpinChainParams,
    amplitude_damping,
    random_unitary_channel,
    rank_one_channel,
    spin_chain_channel,
)
from .rates import DEFAULT_BUDGET, DEFAULT_RESTARTS, empirical_rate, optimize_rate
from .trajectory import default_threads, ensemble

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_channel", "main"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SPIN_PARAMS = ("n_qubits", "J", "tau", "Bx", "Bz")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    model: dict
    initial_state: object = "maximally_mixed"
    filter_state: object = None
    steps: int = 40
    samples: int = 300
    seed: int = 0
    p_list: list = field(default_factory=lambda: [1])
    restarts: int = DEFAULT_RESTARTS
    budget: int = DEFAULT_BUDGET
    threshold: float = 0.01
    per_sample: bool = False
    sweep: dict | None = None
    out: str = "results"
    threads: int | None = None
    cap_words: int | None = None
    base_dir: Path = field(default=Path("."), repr=False)

    def digest(self) -> str:
        """SHA-256 of the canonical config; output location and threads excluded."""
        keys = ("model", "initial_state", "filter_state", "steps", "samples", "seed", "p_list",
                "restarts", "budget", "threshold", "per_sample", "sweep", "cap_words")
        doc = {k: getattr(self, k) for k in keys}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def meta(self) -> dict:
        return {"config_sha256": self.digest(), "seed": self.seed}


def _int(doc, key, minimum):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config (or start empty) and apply non-None ``overrides``."""
    doc: dict = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        base = path.parent
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    known = set(ExperimentConfig.__dataclass_fields__) - {"base_dir"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "model" not in doc or not isinstance(doc["model"], dict) or "type" not in doc["model"]:
        raise ConfigError("config needs a model block with a type")
    cfg = ExperimentConfig(**doc, base_dir=base)
    d = vars(cfg)
    _int(d, "steps", 0)
    _int(d, "samples", 1)
    _int(d, "seed", 0)
    _int(d, "restarts", 1)
    _int(d, "budget", 1)
    if cfg.cap_words is not None:
        _int(d, "cap_words", 1)
    if cfg.threads is not None:
        _int(d, "threads", 1)
    if not isinstance(cfg.p_list, list) or not cfg.p_list or not all(
            isinstance(p, int) and not isinstance(p, bool) and p >= 1 for p in cfg.p_list):
        raise ConfigError(f"p_list must be a nonempty list of positive integers, got {cfg.p_list!r}")
    return cfg


def _resolve(cfg: ExperimentConfig, name: str) -> Path:
    p = Path(name)
    p = p if p.is_absolute() else cfg.base_dir / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {p}")
    return p


def build_channel(cfg: ExperimentConfig, model: dict | None = None):
    m = dict(cfg.model if model is None else model)
    kind = m.pop("type")
    try:
        if kind == "spin_chain":
            cap = m.pop("max_qubits", 6)
            return spin_chain_channel(SpinChainParams(**m), max_qubits=cap)
        if kind == "amplitude_damping":
            return amplitude_damping(float(m["a"]))
        if kind == "random_unitary":
            return random_unitary_channel(m["probs"], seed=m.get("seed"), d=m["d"])
        if kind == "rank_one":
            return rank_one_channel(int(m["d"]), seed=m.get("seed"))
        if kind == "file":
            return io.load_channel(_resolve(cfg, m["path"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad parameters for model {kind!r}: {exc}") from None
    raise ConfigError(f"unknown model type {kind!r}")


def build_state(cfg: ExperimentConfig, spec, d: int):
    if spec == "maximally_mixed":
        return maximally_mixed(d)
    if isinstance(spec, dict) and "pure" in spec:
        idx = spec["pure"]
        if not isinstance(idx, int) or not 0 <= idx < d:
            raise ConfigError(f"pure basis index must lie in [0, {d}), got {idx!r}")
        e = np.zeros(d, dtype=complex)
        e[idx] = 1.0
        return pure_state(e)
    if isinstance(spec, dict) and "file" in spec:
        rho = io.load_state(_resolve(cfg, spec["file"]))
        if rho.dim != d:
            raise ConfigError(f"state file has dimension {rho.dim}, channel has {d}")
        return rho
    raise ConfigError(f"unrecognized state spec {spec!r}")


def _threads(cfg: ExperimentConfig) -> int:
    return cfg.threads if cfg.threads is not None else default_threads()


def _out(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _rate(cfg, ch, p):
    return optimize_rate(ch, p, restarts=cfg.restarts, seed=cfg.seed, budget=cfg.budget,
                         threads=_threads(cfg), cap=cfg.cap_words)


def cmd_simulate(cfg: ExperimentConfig) -> list[Path]:
    """Ensemble statistics; lyapunov columns normalized by V(rho_0)."""
    ch = build_channel(cfg)
    rho0 = build_state(cfg, cfg.initial_state, ch.dim)
    hat = None if cfg.filter_state is None else build_state(cfg, cfg.filter_state, ch.dim)
    ens = ensemble(ch, rho0, cfg.steps, cfg.samples, cfg.seed, rho_hat0=hat,
                   threads=_threads(cfg), keep_samples=cfg.per_sample)
    v0 = ens.mean_lyapunov[0]
    scale = v0 if v0 > 0 else 1.0
    out = _out(cfg)
    files = [out / "ensemble.csv"]
    io.write_csv(files[0], io.ENSEMBLE_COLUMNS, io.ensemble_rows(ens, scale), cfg.meta())
    if cfg.per_sample:
        vals = ens.samples["lyapunov"] / scale
        rows = ((i, n, vals[i, n]) for i in range(ens.m) for n in range(ens.n + 1))
        files.append(out / "samples.csv")
        io.write_csv(files[1], io.SAMPLE_COLUMNS, rows, cfg.meta())
    return files


def cmd_rates(cfg: ExperimentConfig) -> list[Path]:
    ch = build_channel(cfg)
    est = [_rate(cfg, ch, p) for p in cfg.p_list]
    rows = [(e.p, e.lambda_hat, e.gamma_hat, e.restarts, e.best_restart_index, e.objective_evals)
            for e in est]
    bounds = []
    for e in est:
        for n, b in enumerate(stability_bound(1.0, e.gamma_hat, e.p, cfg.steps)):
            bounds.append((n, e.p, b))
    out = _out(cfg)
    io.write_csv(out / "rates.csv", io.RATES_COLUMNS, rows, cfg.meta())
    io.write_csv(out / "bounds.csv", io.BOUND_COLUMNS, bounds, cfg.meta())
    return [out / "rates.csv", out / "bounds.csv"]


def cmd_darkspace(cfg: ExperimentConfig) -> list[Path]:
    ch = build_channel(cfg)
    rep = moment_spaces(ch)
    verdict = purification_verdict(ch, threshold=cfg.threshold, restarts=cfg.restarts,
                                   seed=cfg.seed, budget=cfg.budget, threads=_threads(cfg))
    out = _out(cfg)
    io.write_csv(out / "moments.csv", io.MOMENT_COLUMNS, rep.rows(), cfg.meta())
    fields = {"verdict": verdict.verdict, "p_bar_span": verdict.p_bar_span,
              "p_bar_operational": verdict.p_bar,
              "gamma_hat": ",".join(io.format_value(g) for g in verdict.gammas),
              "dims_Ep": ",".join(str(x) for x in verdict.dims)}
    if verdict.dark_candidate is not None:
        fields["dark_candidate_residual"] = verdict.dark_candidate.max_residual
    io.write_report(out / "darkspace.txt", fields, cfg.meta())
    return [out / "moments.csv", out / "darkspace.txt"]


def cmd_stability(cfg: ExperimentConfig) -> list[Path]:
    """Filter error against C exp(-gamma_p floor(n/p)) with p the first entry of p_list."""
    if cfg.filter_state is None:
        raise ConfigError("stability needs a filter_state")
    ch = build_channel(cfg)
    rho0 = build_state(cfg, cfg.initial_state, ch.dim)
    hat = build_state(cfg, cfg.filter_state, ch.dim)
    try:
        ens = ensemble(ch, rho0, cfg.steps, cfg.samples, cfg.seed, rho_hat0=hat,
                       threads=_threads(cfg))
    except SupportViolation as exc:
        raise ConfigError(str(exc)) from None
    p = cfg.p_list[0]
    est = _rate(cfg, ch, p)
    c = stability_constant(rho0, hat)
    bound = stability_bound(c, est.gamma_hat, p, cfg.steps)
    mean, se = ens.mean_one_minus_fidelity, ens.se_one_minus_fidelity
    ok = mean <= bound + 3 * se + 1e-12
    rows = [(n, mean[n], se[n], bound[n], bool(ok[n])) for n in range(cfg.steps + 1)]
    out = _out(cfg)
    io.write_csv(out / "stability.csv", io.STABILITY_COLUMNS, rows, cfg.meta())
    io.write_report(out / "stability.txt",
                    {"p": p, "gamma_hat": est.gamma_hat, "C": c, "passed": bool(ok.all())},
                    cfg.meta())
    return [out / "stability.csv", out / "stability.txt"]


def cmd_sweep(cfg: ExperimentConfig) -> list[Path]:
    """Grid of spin-chain rates: gamma_hat_p and the empirical decay rate.

    Normalized columns are gamma_hat_p / (p tau) and gamma_emp / tau.
    """
    sw = cfg.sweep
    if not isinstance(sw, dict):
        raise ConfigError("sweep needs a sweep block")
    if cfg.model.get("type") != "spin_chain":
        raise ConfigError("sweep is defined for the spin_chain model")
    try:
        k1, k2 = sw["param1"], sw["param2"]
        v1, v2 = list(sw["values1"]), list(sw["values2"])
    except KeyError as exc:
        raise ConfigError(f"sweep block is missing {exc}") from None
    for k in (k1, k2):
        if k not in SPIN_PARAMS or k == "n_qubits":
            raise ConfigError(f"cannot sweep {k!r}; choose from J, tau, Bx, Bz")
    if len(v1) * len(v2) > sw.get("max_points", 400):
        raise ConfigError("sweep grid exceeds max_points")
    p = int(sw.get("p", cfg.p_list[0]))
    window = tuple(sw["fit_window"]) if "fit_window" in sw else None
    rows = []
    for a in v1:
        for b in v2:
            model = dict(cfg.model, **{k1: a, k2: b})
            ch = build_channel(cfg, model)
            tau = float(model.get("tau", 1.0))
            g = _rate(cfg, ch, p).gamma_hat
            g_emp = math.nan
            if cfg.steps >= 1:
                ens = ensemble(ch, maximally_mixed(ch.dim), cfg.steps, cfg.samples, cfg.seed,
                               threads=_threads(cfg))
                try:
                    g_emp = empirical_rate(ens.normalized_lyapunov()[0], window).rate
                except NonPositiveSeries:
                    log.warning("series hits zero at %s=%s %s=%s; gamma_emp left NaN", k1, a, k2, b)
            rows.append((a, b, g, p, g / (p * tau), g_emp, g_emp / tau))
    out = _out(cfg)
    io.write_csv(out / "heatmap.csv", io.HEATMAP_COLUMNS, rows, cfg.meta())
    return [out / "heatmap.csv"]


COMMANDS = {"simulate": cmd_simulate, "rates": cmd_rates, "darkspace": cmd_darkspace,
            "stability": cmd_stability, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpurify", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, help="worker threads (default: QPURIFY_THREADS or CPU count)")
    ap.add_argument("--cap-words", type=int, dest="cap_words", help="record enumeration cap")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    saved = None
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out,
                                        "threads": args.threads, "cap_words": args.cap_words})
        if cfg.cap_words is not None:
            saved = TOL.enumeration_cap
            TOL.enumeration_cap = cfg.cap_words
        for f in COMMANDS[args.command](cfg):
            print(f)
    except NumericalInvariantError as exc:
        print(f"qpurify: numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"qpurify: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if saved is not None:
            TOL.enumeration_cap = saved
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
