"""Scenario execution: truth, measurement synthesis, estimator runs and summaries.

Every stochastic draw comes from a PCG64 stream keyed by the scenario seed
and a spawn key: ``(trial,)`` for snapshot fixes, ``(run, 0)`` for the
initial-estimate draw and ``(run, 1)`` for measurement noise of filter run
``run``.  Results therefore do not depend on the number of worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ScenarioConfig
from .ekf import FilterHistory, FilterState, run_filter
from .ephemeris import solve_light_time
from .errors import ConfigError
from .measurement import los_from_az_el, synthesize_measurement
from .posdet import PosDetProblem, solve_position
from .truth import TruthTrajectory

log = logging.getLogger(__name__)

MEASUREMENTS_CSV = "measurements.csv"
SOLUTIONS_CSV = "posdet_solutions.csv"
SUMMARY_TXT = "summary.txt"


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def run_truth(config: ScenarioConfig) -> TruthTrajectory:
    return TruthTrajectory(0.0, config.truth0, config.thrust, config.mu)


def history_csv(run: int) -> str:
    return f"filter_history_{run:03d}.csv"


def run_measurements_csv(run: int) -> str:
    return f"measurements_{run:03d}.csv"


def _chunks(items, jobs):
    items = list(items)
    size = max(1, math.ceil(len(items) / max(1, jobs)))
    return [items[i : i + size] for i in range(0, len(items), size)]


def _map(fn, args_list, jobs):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


# --- snapshot position fixes -------------------------------------------------

def synthesize_snapshots(config: ScenarioConfig, trial_ids) -> list:
    truth = run_truth(config)
    t = config.posdet.epoch_s
    sc = truth.state(t)
    out = []
    for trial in trial_ids:
        rng = rng_for(config.seed, trial)
        out.extend(synthesize_measurement(sc, body, t, config.noise, rng, config.c) for body in config.bodies)
    return out


def _snapshot_worker(config, trial_ids):
    return synthesize_snapshots(config, trial_ids)


def _solve_worker(config, groups):
    return [_solve_group(config, g) for g in groups]


def _solve_group(config: ScenarioConfig, group):
    observations = tuple((config.body(m.beacon_id), los_from_az_el(m.theta, m.phi)) for m in group)
    sol = solve_position(PosDetProblem(group[0].epoch, observations, config.c))
    # report delays in catalog order; beacons absent from the group are NaN
    by_id = {m.beacon_id: dt for m, dt in zip(group, sol.delta_t)}
    sol.delta_t = np.array([by_id.get(b.id, math.nan) for b in config.bodies])
    return sol


def solve_snapshots(config: ScenarioConfig, measurements, jobs: int = 1) -> list:
    groups = io.group_snapshots(measurements)
    results = _map(_solve_worker, [(config, c) for c in _chunks(groups, jobs)], jobs)
    sols = [s for chunk in results for s in chunk]
    return list(enumerate(sols))


def posdet_truth(config: ScenarioConfig):
    t = config.posdet.epoch_s
    sc = run_truth(config).state(t)
    delays = np.array([solve_light_time(sc.r, t, b, config.c)[0] for b in config.bodies])
    return sc.r, delays


def summarize_posdet(config: ScenarioConfig, out_dir) -> dict:
    sols = io.read_posdet_solutions(Path(out_dir) / SOLUTIONS_CSV)
    r_true, dt_true = posdet_truth(config)
    err_r = sols["r"] - r_true
    err_dt = sols["delta_t"] - dt_true
    p = config.posdet
    ok_r = np.all(np.abs(err_r) <= p.pos_tol_km, axis=1)
    ok_dt = np.all(np.abs(np.nan_to_num(err_dt, nan=np.inf)) <= p.dt_tol_s, axis=1)
    trials = len(sols["trial_id"])
    summary = {
        "scenario": config.name,
        "mode": "posdet",
        "seed": config.seed,
        "trials": trials,
        "sigma_los_rad": float(config.noise.sigma_los),
        "converged_trials": int(np.sum(sols["converged"])),
        "pos_tol_km": p.pos_tol_km,
        "dt_tol_s": p.dt_tol_s,
    }
    for k, axis in enumerate("xyz"):
        summary[f"pos_err_max_abs_{axis}_km"] = float(np.max(np.abs(err_r[:, k])))
        summary[f"pos_err_std_{axis}_km"] = float(np.std(err_r[:, k]))
    for k, body in enumerate(config.bodies):
        summary[f"dt_err_max_abs_{body.id}_s"] = float(np.nanmax(np.abs(err_dt[:, k])))
        summary[f"dt_err_std_{body.id}_s"] = float(np.nanstd(err_dt[:, k]))
    summary["frac_pos_within_tol"] = float(np.mean(ok_r))
    summary["frac_dt_within_tol"] = float(np.mean(ok_dt))
    summary["frac_within_tol"] = float(np.mean(ok_r & ok_dt))
    return summary


def synth_posdet(config: ScenarioConfig, out_dir, trials=None, jobs: int = 1) -> Path:
    trials = trials or config.posdet.trials
    chunks = _chunks(range(trials), jobs)
    results = _map(_snapshot_worker, [(config, c) for c in chunks], jobs)
    path = Path(out_dir) / MEASUREMENTS_CSV
    io.write_measurements(path, [m for chunk in results for m in chunk])
    return path


def run_posdet(config: ScenarioConfig, out_dir, trials=None, jobs: int = 1, measurements_path=None) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if measurements_path is None:
        measurements_path = synth_posdet(config, out_dir, trials, jobs)
    measurements = io.read_measurements(measurements_path)
    rows = solve_snapshots(config, measurements, jobs)
    io.write_posdet_solutions(out_dir / SOLUTIONS_CSV, rows, len(config.bodies))
    summary = summarize_posdet(config, out_dir)
    io.write_summary(out_dir / SUMMARY_TXT, summary)
    log.info("posdet: %d fixes written to %s", len(rows), out_dir)
    return summary


# --- filter campaigns --------------------------------------------------------

def synthesize_stream(config: ScenarioConfig, run: int, truth: TruthTrajectory | None = None) -> list:
    truth = truth or run_truth(config)
    rng = rng_for(config.seed, run, 1)
    return [
        synthesize_measurement(truth.state(t), config.body(b), t, config.noise, rng, config.c)
        for t, b in config.schedule().measurement_plan()
    ]


def initial_estimate(config: ScenarioConfig, run: int, truth: TruthTrajectory) -> FilterState:
    """Truth plus an N(0, sigma) draw; delays from a light-time solve at the estimate."""
    settings = config.filter_settings()
    s0 = truth.state(0.0)
    r, v = s0.r.copy(), s0.v.copy()
    if config.ekf.initial_error == "sampled":
        rng = rng_for(config.seed, run, 0)
        r = r + rng.normal(0.0, settings.sigma_r, 3)
        v = v + rng.normal(0.0, settings.sigma_v, 3)
    delays = [solve_light_time(r, 0.0, b, config.c)[0] for b in config.bodies]
    x0 = np.concatenate([r, v, delays])
    return FilterState(x0, settings.initial_covariance(len(config.bodies)), 0.0)


def run_filter_scenario(config: ScenarioConfig, run: int = 0, measurements=None):
    """One filter run; returns ``(history, measurements)``."""
    truth = run_truth(config)
    if measurements is None:
        measurements = synthesize_stream(config, run, truth)
    settings = config.filter_settings()
    history = run_filter(
        initial_estimate(config, run, truth),
        config.bodies,
        config.thrust,
        settings,
        config.schedule(),
        measurements,
        truth=lambda t: truth.augmented(t, config.bodies, config.c),
        coast_step=config.ekf.coast_step_s,
        history_interval=config.ekf.history_interval_s,
        mu=config.mu,
        c=config.c,
    )
    return history, measurements


def _ekf_worker(config, run, out_dir):
    history, measurements = run_filter_scenario(config, run)
    io.write_measurements(Path(out_dir) / run_measurements_csv(run), measurements)
    io.write_history(Path(out_dir) / history_csv(run), history)
    return run


def convergence_index(sigma3: np.ndarray, pos_bound: float, vel_bound: float):
    """First index from which all position/velocity 3-sigma bounds stay below the limits."""
    ok = (np.max(sigma3[:, :3], axis=1) < pos_bound) & (np.max(sigma3[:, 3:6], axis=1) < vel_bound)
    if not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    return 0 if len(bad) == 0 else int(bad[-1]) + 1


def history_stats(h: dict, pos_bound: float, vel_bound: float) -> dict:
    sig, err = h["sigma3"], h["error"]
    k = convergence_index(sig, pos_bound, vel_bound)
    if k is None:
        tracked = [i for i, ph in enumerate(h["phase"]) if ph.startswith("track")]
        start, basis = (tracked[0] if tracked else 0), "post-first-update"
    else:
        start, basis = k, "post-convergence"
    inside = np.abs(err[start:, :6]) <= sig[start:, :6]
    return {
        "final_t_s": float(h["t"][-1]),
        "final_sigma3_pos_km": float(np.max(sig[-1, :3])),
        "final_sigma3_vel_kms": float(np.max(sig[-1, 3:6])),
        "final_err_pos_km": float(np.max(np.abs(err[-1, :3]))),
        "final_err_vel_kms": float(np.max(np.abs(err[-1, 3:6]))),
        "max_err_pos_km": float(np.max(np.abs(err[:, :3]))),
        "convergence_t_s": "none" if k is None else float(h["t"][k]),
        "envelope_basis": basis,
        "envelope_epochs": int(inside.shape[0]),
        "envelope_inside_epochs": int(np.sum(np.all(inside, axis=1))),
        "envelope_inside_components": int(np.sum(inside)),
    }


def summarize_ekf(config: ScenarioConfig, out_dir, runs=None) -> dict:
    runs = runs or config.ekf.runs
    e = config.ekf
    summary = {
        "scenario": config.name,
        "mode": "ekf",
        "seed": config.seed,
        "runs": runs,
        "pos_bound_km": e.pos_bound_km,
        "vel_bound_kms": e.vel_bound_kms,
    }
    per_run = []
    for run in range(runs):
        stats = history_stats(io.read_history(Path(out_dir) / history_csv(run)), e.pos_bound_km, e.vel_bound_kms)
        per_run.append(stats)
    epochs = sum(s["envelope_epochs"] for s in per_run)
    inside = sum(s["envelope_inside_epochs"] for s in per_run)
    comps = sum(s["envelope_inside_components"] for s in per_run)
    summary["converged_runs"] = sum(s["convergence_t_s"] != "none" for s in per_run)
    summary["max_final_sigma3_pos_km"] = max(s["final_sigma3_pos_km"] for s in per_run)
    summary["max_final_sigma3_vel_kms"] = max(s["final_sigma3_vel_kms"] for s in per_run)
    summary["max_final_err_pos_km"] = max(s["final_err_pos_km"] for s in per_run)
    summary["max_final_err_vel_kms"] = max(s["final_err_vel_kms"] for s in per_run)
    summary["envelope_fraction_epochs"] = inside / epochs if epochs else math.nan
    summary["envelope_fraction_components"] = comps / (6 * epochs) if epochs else math.nan
    for run, s in enumerate(per_run):
        for key, value in s.items():
            summary[f"run{run:03d}.{key}"] = value
    return summary


def synth_ekf(config: ScenarioConfig, out_dir, runs=None) -> list[Path]:
    runs = runs or config.ekf.runs
    truth = run_truth(config)
    paths = []
    for run in range(runs):
        path = Path(out_dir) / run_measurements_csv(run)
        io.write_measurements(path, synthesize_stream(config, run, truth))
        paths.append(path)
    return paths


def run_ekf(config: ScenarioConfig, out_dir, runs=None, jobs: int = 1) -> dict:
    runs = runs or config.ekf.runs
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _map(_ekf_worker, [(config, run, str(out_dir)) for run in range(runs)], jobs)
    summary = summarize_ekf(config, out_dir, runs)
    io.write_summary(out_dir / SUMMARY_TXT, summary)
    log.info("ekf: %d run(s) written to %s", runs, out_dir)
    return summary


# --- entry points -----------------------------------------------------------

def run_scenario(config: ScenarioConfig, mode: str | None = None, out_dir=None, jobs: int = 1,
                 trials: int | None = None, measurements_path=None) -> dict:
    """Run ``config`` in ``mode`` ('posdet' or 'ekf'), write outputs, return the summary."""
    mode = mode or config.mode
    out_dir = Path(out_dir or config.output_dir)
    if mode == "posdet":
        return run_posdet(config, out_dir, trials, jobs, measurements_path)
    if mode == "ekf":
        if config.schedule_options is None:
            raise ConfigError("schedule: required for mode 'ekf'")
        return run_ekf(config, out_dir, trials, jobs)
    raise ConfigError(f"mode: unknown mode {mode!r}")


def synthesize(config: ScenarioConfig, out_dir=None, trials=None, jobs: int = 1) -> list[Path]:
    out_dir = Path(out_dir or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.mode == "posdet":
        return [synth_posdet(config, out_dir, trials, jobs)]
    return synth_ekf(config, out_dir, trials)


def report(config: ScenarioConfig, out_dir=None, trials=None) -> dict:
    """Recompute the summary from existing CSVs and write figure-ready tidy data."""
    out_dir = Path(out_dir or config.output_dir)
    if config.mode == "posdet":
        summary = summarize_posdet(config, out_dir)
        sols = io.read_posdet_solutions(out_dir / SOLUTIONS_CSV)
        r_true, dt_true = posdet_truth(config)
        with open(out_dir / "report_posdet.csv", "w", newline="") as fh:
            fh.write(",".join(["trial_id", "err_rx_km", "err_ry_km", "err_rz_km"]
                              + [f"err_dt_{b.id}_s" for b in config.bodies]) + "\n")
            for i, trial in enumerate(sols["trial_id"]):
                vals = list(sols["r"][i] - r_true) + list(sols["delta_t"][i] - dt_true)
                fh.write(",".join([io.fmt(int(trial))] + [io.fmt(v) for v in vals]) + "\n")
    else:
        runs = trials or config.ekf.runs
        summary = summarize_ekf(config, out_dir, runs)
        with open(out_dir / "report_ekf.csv", "w", newline="") as fh:
            fh.write("run,t_day,component,error,minus_3sigma,plus_3sigma,phase\n")
            for run in range(runs):
                h = io.read_history(out_dir / history_csv(run))
                names = io.state_names(h["beacon_ids"])
                for i, t in enumerate(h["t"]):
                    for j, name in enumerate(names):
                        s = h["sigma3"][i, j]
                        fh.write(f"{run},{io.fmt(t / 86400.0)},{name},{io.fmt(h['error'][i, j])},"
                                 f"{io.fmt(-s)},{io.fmt(s)},{h['phase'][i]}\n")
    return summary


__all__ = [
    "FilterHistory",
    "report",
    "run_filter_scenario",
    "run_scenario",
    "run_truth",
    "summarize_ekf",
    "summarize_posdet",
    "synthesize",
]
