"""CSV readers and writers for measurement logs, fixes and filter histories.

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back reproduces the in-memory values bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .ekf import FilterHistory
from .measurement import LosMeasurement

MEASUREMENT_COLUMNS = ["epoch_s", "beacon_id", "theta_rad", "phi_rad", "true_delta_t_s"]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _writer(handle):
    return csv.writer(handle, lineterminator="\n")


def write_measurements(path, measurements, include_truth: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(MEASUREMENT_COLUMNS)
        for m in measurements:
            truth = "" if (not include_truth or m.true_delta_t is None) else fmt(m.true_delta_t)
            w.writerow([fmt(m.epoch), m.beacon_id, fmt(m.theta), fmt(m.phi), truth])


def read_measurements(path) -> list[LosMeasurement]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MEASUREMENT_COLUMNS[:4]) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row in reader:
            truth = row.get("true_delta_t_s") or ""
            out.append(
                LosMeasurement(
                    float(row["epoch_s"]), row["beacon_id"], float(row["theta_rad"]),
                    float(row["phi_rad"]), float(truth) if truth else None,
                )
            )
    return out


def group_snapshots(measurements) -> list[list[LosMeasurement]]:
    """Split a log into snapshot problems.

    Consecutive rows share a problem while the epoch is unchanged and no
    beacon repeats.
    """
    groups = []
    current = []
    for m in measurements:
        if current and (m.epoch != current[0].epoch or any(c.beacon_id == m.beacon_id for c in current)):
            groups.append(current)
            current = []
        current.append(m)
    if current:
        groups.append(current)
    return groups


def state_names(beacon_ids) -> list[str]:
    return ["rx", "ry", "rz", "vx", "vy", "vz"] + [f"dt_{b}" for b in beacon_ids]


def posdet_columns(n: int) -> list[str]:
    return ["trial_id", "rx", "ry", "rz"] + [f"dt_{i + 1}" for i in range(n)] + ["cost", "iterations", "converged"]


def write_posdet_solutions(path, rows, n: int) -> None:
    """``rows`` are (trial_id, PosDetSolution) pairs."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(posdet_columns(n))
        for trial, sol in rows:
            w.writerow(
                [fmt(trial)] + [fmt(v) for v in sol.r] + [fmt(v) for v in sol.delta_t]
                + [fmt(sol.cost), fmt(sol.iterations), fmt(sol.converged)]
            )


def read_posdet_solutions(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    n = len(header) - 7
    data = np.array([[float(v) for v in row] for row in rows]) if rows else np.empty((0, len(header)))
    return {
        "trial_id": data[:, 0].astype(int),
        "r": data[:, 1:4],
        "delta_t": data[:, 4 : 4 + n],
        "cost": data[:, 4 + n],
        "iterations": data[:, 5 + n].astype(int),
        "converged": data[:, 6 + n].astype(bool),
    }


def history_columns(beacon_ids) -> list[str]:
    names = state_names(beacon_ids)
    return (
        ["t_s"] + [f"est_{n}" for n in names] + [f"sigma3_{n}" for n in names]
        + [f"err_{n}" for n in names] + ["phase"]
    )


def write_history(path, history: FilterHistory) -> None:
    sig3 = history.sigma3()
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(history_columns(history.beacon_ids))
        for i, t in enumerate(history.t):
            w.writerow(
                [fmt(t)] + [fmt(v) for v in history.x[i]] + [fmt(v) for v in sig3[i]]
                + [fmt(v) for v in history.error[i]] + [history.phase[i]]
            )


def read_history(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    dim = (len(header) - 2) // 3
    beacon_ids = [h[len("est_dt_"):] for h in header[7 : 1 + dim]]
    values = np.array([[float(v) for v in row[:-1]] for row in rows])
    return {
        "beacon_ids": beacon_ids,
        "t": values[:, 0],
        "x": values[:, 1 : 1 + dim],
        "sigma3": values[:, 1 + dim : 1 + 2 * dim],
        "error": values[:, 1 + 2 * dim : 1 + 3 * dim],
        "phase": [row[-1] for row in rows],
    }


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(format_summary(summary))


def format_summary(summary: dict) -> str:
    lines = []
    for key, value in summary.items():
        if isinstance(value, float) or isinstance(value, np.floating):
            value = fmt(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
