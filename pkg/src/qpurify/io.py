"""File formats: channel/state JSON documents and CSV artifacts.

Channel file::

    {"dim": 2,
     "outcomes": ["0", "1"],
     "kraus": [[[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]], ...]}

``kraus`` holds one ``dim x dim`` matrix per outcome, row-major, each entry a
``[re, im]`` pair. State files use ``{"dim": d, "matrix": [...]}`` with the
same entry encoding.

Every CSV starts with one comment line ``# key=value ...`` (config hash and
seed) followed by the column header. Floats are written with ``repr`` so the
bytes are reproducible.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import KrausChannel, validate_density

__all__ = [
    "ENSEMBLE_COLUMNS",
    "SAMPLE_COLUMNS",
    "RATES_COLUMNS",
    "BOUND_COLUMNS",
    "HEATMAP_COLUMNS",
    "MOMENT_COLUMNS",
    "STABILITY_COLUMNS",
    "AUDIT_COLUMNS",
    "channel_to_dict",
    "channel_from_dict",
    "load_channel",
    "save_channel",
    "load_state",
    "save_state",
    "atomic_write_text",
    "format_value",
    "csv_text",
    "write_csv",
    "write_report",
    "ensemble_rows",
]

ENSEMBLE_COLUMNS = ("step", "mean_lyapunov", "se_lyapunov", "mean_purity", "se_purity",
                    "mean_one_minus_fidelity", "se_one_minus_fidelity")
SAMPLE_COLUMNS = ("sample_id", "step", "value")
RATES_COLUMNS = ("p", "lambda_hat", "gamma_hat", "restarts", "best_restart_index",
                 "objective_evals")
BOUND_COLUMNS = ("step", "p", "bound")
HEATMAP_COLUMNS = ("param1", "param2", "gamma_hat", "p", "gamma_hat_normalized",
                   "gamma_emp", "gamma_emp_normalized")
MOMENT_COLUMNS = ("word_length", "dim_Ep")
STABILITY_COLUMNS = ("step", "mean_one_minus_fidelity", "se_one_minus_fidelity", "bound",
                     "within_bound")
AUDIT_COLUMNS = ("word", "probability", "contribution")


def _encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(data, dim: int) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.shape != (dim, dim, 2):
        raise ValueError(f"expected a {dim}x{dim} matrix of [re, im] pairs, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def channel_to_dict(ch: KrausChannel) -> dict:
    return {"dim": ch.dim, "outcomes": [str(o) for o in ch.outcomes],
            "kraus": [_encode_matrix(v) for v in ch.operators]}


def channel_from_dict(doc: dict) -> KrausChannel:
    """Parse a channel document; completeness is enforced by :class:`KrausChannel`."""
    try:
        dim = int(doc["dim"])
        outcomes = [str(o) for o in doc["outcomes"]]
        kraus = doc["kraus"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"channel document is missing field {exc}") from None
    if len(kraus) != len(outcomes):
        raise ValueError(f"{len(outcomes)} outcomes but {len(kraus)} Kraus matrices")
    ops = np.stack([_decode_matrix(k, dim) for k in kraus])
    return KrausChannel(ops, tuple(outcomes))


def load_channel(path) -> KrausChannel:
    with open(path) as fh:
        return channel_from_dict(json.load(fh))


def save_channel(ch: KrausChannel, path) -> None:
    atomic_write_text(path, json.dumps(channel_to_dict(ch), indent=1) + "\n")


def load_state(path):
    with open(path) as fh:
        doc = json.load(fh)
    return validate_density(_decode_matrix(doc["matrix"], int(doc["dim"])))


def save_state(rho, path) -> None:
    m = validate_density(rho).matrix
    atomic_write_text(path, json.dumps({"dim": m.shape[0], "matrix": _encode_matrix(m)}) + "\n")


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _meta_line(meta: dict | None) -> str:
    if not meta:
        return ""
    return "# " + " ".join(f"{k}={format_value(v)}" for k, v in meta.items()) + "\n"


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    lines = [_meta_line(meta), ",".join(columns) + "\n"]
    lines += [",".join(format_value(x) for x in row) + "\n" for row in rows]
    return "".join(lines)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> None:
    atomic_write_text(path, csv_text(columns, rows, meta))


def write_report(path, fields: dict, meta: dict | None = None) -> None:
    """``key=value`` lines, preceded by the same comment line as the CSVs."""
    body = "".join(f"{k}={format_value(v)}\n" for k, v in fields.items())
    atomic_write_text(path, _meta_line(meta) + body)


def ensemble_rows(ens, scale: float = 1.0):
    """Rows of the ensemble CSV; lyapunov columns divided by ``scale``."""
    for n in range(ens.n + 1):
        yield (n, ens.mean_lyapunov[n] / scale, ens.se_lyapunov[n] / scale,
               ens.mean_purity[n], ens.se_purity[n],
               ens.mean_one_minus_fidelity[n], ens.se_one_minus_fidelity[n])
