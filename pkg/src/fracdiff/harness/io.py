"""Output files: trajectory/convergence/profile CSVs and JSON records."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

__all__ = [
    "CSV_SCHEMA_VERSION",
    "TRAJECTORY_COLUMNS",
    "fmt",
    "write_csv",
    "write_trajectory_csv",
    "write_profile_csv",
    "write_json",
    "read_csv",
]

CSV_SCHEMA_VERSION = 1
TRAJECTORY_COLUMNS = ("n", "t", "lq_norm", "log_lq_norm", "a_n", "b_n", "lower", "rayleigh", "flags")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, kind: str, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write(f"# fracdiff {kind} csv schema v{CSV_SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return header, [l.split(",") for l in lines[1:]]


def write_trajectory_csv(path, traj, audit=None) -> Path:
    """One row per state; audit columns are empty when no audit is available."""
    N = traj.n_states
    times = traj.times
    log_lq = traj.log_lq_norms
    ray = traj.rayleighs
    flags = [[] for _ in range(N)]
    for n, reason in traj.flags:
        if n < N:
            flags[n].append(reason)
    if audit is not None:
        for n in range(N):
            flags[n].extend(r for r in audit.flags[n] if r not in flags[n])

    def col(name, n):
        if audit is None:
            return None
        v = getattr(audit, name)[n]
        return None if np.isnan(v) else v

    rows = []
    for n in range(N):
        with np.errstate(under="ignore"):
            lq = float(np.exp(log_lq[n]))
        rows.append(
            (n, times[n], lq, log_lq[n], col("a_n", n), col("b_n", n), col("lower", n), ray[n], ";".join(flags[n]))
        )
    return write_csv(path, "trajectory", TRAJECTORY_COLUMNS, rows)


def write_profile_csv(path, field) -> Path:
    x = field.grid.nodes
    return write_csv(path, "profile", ("x_i", "f_i"), zip(x, field.values))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, record: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(record), indent=2, sort_keys=True) + "\n")
    return path
