"""Acceptance criteria, one test per criterion.

Each test records a single ``PASS``/``FAIL`` line; the lines are printed in
the pytest terminal summary, or directly when this file is run as a script
(``python tests/test_acceptance.py``).
"""

import filecmp
import math
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opnav.config import load_config  # noqa: E402
from opnav.constants import C_LIGHT, MU_SUN  # noqa: E402
from opnav.ekf import (  # noqa: E402
    ThrustProfile,
    dynamics,
    measurement_jacobian,
    measurement_model,
    state_jacobian,
)
from opnav.ephemeris import body_state, kepler_propagate, solve_light_time  # noqa: E402
from opnav.measurement import NoiseModel  # noqa: E402
from opnav.posdet import PosDetProblem, cost, cost_gradient, solve_position  # noqa: E402
from opnav.scenario import (  # noqa: E402
    posdet_truth,
    run_ekf,
    run_filter_scenario,
    run_scenario,
    run_truth,
    synthesize_snapshots,
)
from opnav import io  # noqa: E402

from oracles import blockwise_relative_error, central_difference  # noqa: E402

RESULTS = []


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def work():
    with tempfile.TemporaryDirectory() as d:
        yield Path(d)


def _fix_errors(config, trials):
    r_true, dt_true = posdet_truth(config)
    meas = synthesize_snapshots(config, range(trials))
    err_r, err_dt, conv = [], [], []
    for group in io.group_snapshots(meas):
        obs = tuple((config.body(m.beacon_id), _los(m)) for m in group)
        sol = solve_position(PosDetProblem(group[0].epoch, obs, config.c))
        err_r.append(sol.r - r_true)
        err_dt.append(sol.delta_t - dt_true)
        conv.append(sol.converged)
    return np.array(err_r), np.array(err_dt), np.array(conv)


def _los(m):
    from opnav.measurement import los_from_az_el

    return los_from_az_el(m.theta, m.phi)


def test_criterion_1_three_object_fix_accuracy():
    cfg = load_config("three-body-fix")
    err_r, err_dt, conv = _fix_errors(cfg, 1000)
    ok_trial = np.all(np.abs(err_r) <= 20000.0, axis=1) & np.all(np.abs(err_dt) <= 0.2, axis=1) & conv
    frac = float(np.mean(ok_trial))
    std = err_r.std(axis=0)
    ok = record(
        1,
        frac >= 0.99,
        f"{frac:.3f} of 1000 noisy fixes within +/-20000 km and +/-0.2 s (need >= 0.99); "
        f"1-sigma position error ({std[0]:.0f}, {std[1]:.0f}, {std[2]:.0f}) km",
    )
    assert ok


def test_criterion_2_noiseless_recovery():
    cfg = load_config("three-body-fix")
    cfg = replace(cfg, noise=NoiseModel(0.0))
    err_r, err_dt, conv = _fix_errors(cfg, 1000)
    max_r = float(np.max(np.abs(err_r)))
    max_dt = float(np.max(np.abs(err_dt)))
    ok = record(
        2,
        bool(np.all(conv) and max_r < 1e-3 and max_dt < 1e-8),
        f"1000 noiseless fixes: max position error {max_r:.2e} km (< 1e-3), max delay error {max_dt:.2e} s (< 1e-8)",
    )
    assert ok


@pytest.fixture(scope="module")
def campaign(work):
    cfg = load_config("beacon-campaign")
    out = work / "campaign"
    summary = run_ekf(cfg, out, runs=20)
    return cfg, out, summary


def test_criterion_3_ekf_convergence_bounds(campaign):
    cfg, out, summary = campaign
    runs = summary["runs"]
    pos = np.array([summary[f"run{k:03d}.final_sigma3_pos_km"] for k in range(runs)])
    vel = np.array([summary[f"run{k:03d}.final_sigma3_vel_kms"] for k in range(runs)])
    converged = summary["converged_runs"]
    basis = {summary[f"run{k:03d}.envelope_basis"] for k in range(runs)}
    frac = summary["envelope_fraction_epochs"]
    bounds_ok = bool(np.all(pos < 1000.0) and np.all(vel < 2e-3))
    envelope_ok = converged == runs and frac >= 0.99
    ok = record(
        3,
        bounds_ok and envelope_ok,
        f"{runs} runs: final 3-sigma position max {pos.max():.0f} km (< 1000), "
        f"velocity max {vel.max() * 1e3:.1f} m/s (< 2); converged runs {converged}/{runs}; "
        f"errors inside 3-sigma on {frac:.3f} of {'/'.join(sorted(basis))} epochs (need >= 0.99)",
    )
    assert ok


def test_criterion_4_schedule_fidelity():
    cfg = load_config("beacon-campaign")
    bounds = cfg.schedule().boundaries()
    want = [7.0, 7.05, 7.06, 7.1]
    got = [b / 86400.0 for b in bounds[1:5]]
    exact = all(b == round(d * 86400.0) for b, d in zip(bounds[1:5], want))
    ok = record(4, exact, f"segment boundaries {['%.4f' % g for g in got]} d, expected {want}")
    assert ok


def test_criterion_5_jacobians():
    sc = load_config("three-body-fix")
    bodies = list(sc.bodies)
    rng = np.random.default_rng(555)
    x_true = np.concatenate([sc.truth0.r, sc.truth0.v, [solve_light_time(sc.truth0.r, 0.0, b)[0] for b in bodies]])
    steps = np.array([100.0] * 3 + [1e-3] * 3 + [1.0] * 3)
    blocks = [slice(0, 3), slice(3, 6)] + [slice(6 + k, 7 + k) for k in range(3)]
    coast = ThrustProfile()
    worst_f = worst_h = worst_g = 0.0
    for _ in range(100):
        x = x_true.copy()
        x[:3] += rng.normal(0, 2e6, 3)
        x[3:6] += rng.normal(0, 1.0, 3)
        x[6:] += rng.normal(0, 20.0, 3)
        t = rng.uniform(0, 8 * 86400.0)
        F = state_jacobian(x, t, coast, bodies)
        N = central_difference(lambda z: dynamics(z, t, coast, bodies), x, steps)
        worst_f = max(worst_f, blockwise_relative_error(F, N, blocks, blocks))
        for k in range(3):
            H = measurement_jacobian(x, t, k, bodies)
            N = central_difference(lambda z: measurement_model(z, t, k, bodies), x, steps)
            worst_h = max(worst_h, blockwise_relative_error(H, N, [slice(0, 1), slice(1, 2)], blocks))
    problem = PosDetProblem(0.0, tuple((b, _unit(solve_light_time(sc.truth0.r, 0.0, b)[1].r - sc.truth0.r)) for b in bodies))
    gsteps = np.array([1.0] * 3 + [1e-3] * 3)
    for _ in range(100):
        z = np.concatenate([sc.truth0.r + rng.normal(0, 1e5, 3), x_true[6:] + rng.normal(0, 2.0, 3)])
        g = cost_gradient(problem, z[:3], z[3:])
        n = central_difference(lambda q: cost(problem, q[:3], q[3:]), z, gsteps)[0]
        worst_g = max(worst_g, float(np.max(np.abs(g - n) / np.maximum(np.abs(g), 1e-12))))
    ok = record(
        5,
        worst_f < 1e-5 and worst_h < 1e-5 and worst_g < 1e-4,
        f"worst relative deviation F {worst_f:.1e} (< 1e-5), H {worst_h:.1e} (< 1e-5), "
        f"gradient {worst_g:.1e} (< 1e-4) over 100 probes each",
    )
    assert ok


def _unit(v):
    return v / np.linalg.norm(v)


def test_criterion_6_physical_invariants(campaign):
    cfg, out, _ = campaign
    worst_e = worst_h = 0.0
    states = [cfg.truth0] + [b.state0 for b in cfg.bodies] + [b.state0 for b in load_config("three-body-fix").bodies]
    for s in states:
        energy0 = s.v @ s.v / 2 - MU_SUN / np.linalg.norm(s.r)
        period = 2 * math.pi * math.sqrt((-MU_SUN / (2 * energy0)) ** 3 / MU_SUN)
        h0 = np.cross(s.r, s.v)
        for frac in np.linspace(-5, 5, 21):
            p = kepler_propagate(s, frac * period)
            e = p.v @ p.v / 2 - MU_SUN / np.linalg.norm(p.r)
            worst_e = max(worst_e, abs(e - energy0) / abs(energy0))
            worst_h = max(worst_h, float(np.linalg.norm(np.cross(p.r, p.v) - h0) / np.linalg.norm(h0)))
    truth = run_truth(cfg)
    worst_lt = 0.0
    for t in np.linspace(0, 7.125 * 86400, 40):
        obs = truth.state(t).r
        for b in cfg.bodies:
            dt, apparent = solve_light_time(obs, t, b)
            worst_lt = max(worst_lt, abs(dt - np.linalg.norm(body_state(b, t - dt).r - obs) / C_LIGHT))
    # every propagate/update step of the 20 campaign runs already passed the
    # filter's own health check; re-check the recorded matrices of one run here
    history, _ = run_filter_scenario(cfg, 0)
    worst_asym = 0.0
    worst_eig = math.inf
    for P in history.P:
        worst_asym = max(worst_asym, float(np.max(np.abs(P - P.T)) / np.max(np.abs(P))))
        worst_eig = min(worst_eig, float(np.min(np.linalg.eigvalsh(P)) / np.trace(P)))
    ok = record(
        6,
        worst_e < 1e-9 and worst_h < 1e-9 and worst_lt < 1e-9 and worst_asym <= 1e-12 and worst_eig > -1e-9,
        f"energy {worst_e:.1e}, momentum {worst_h:.1e} (< 1e-9 over +/-5 periods); light-time residual "
        f"{worst_lt:.1e} s (< 1e-9); covariance asymmetry {worst_asym:.1e} (<= 1e-12), "
        f"min eigenvalue/trace {worst_eig:.1e} (> -1e-9) over {len(history.P)} steps",
    )
    assert ok


def test_criterion_7_determinism(campaign, work):
    cfg, out, _ = campaign
    fix = load_config("three-body-fix")
    a, b = work / "fix_a", work / "fix_b"
    run_scenario(fix, "posdet", a, trials=200)
    run_scenario(fix, "posdet", b, trials=200, jobs=2)
    again = work / "campaign_again"
    run_ekf(cfg, again, runs=2, jobs=2)
    pairs = [(a / n, b / n) for n in ("measurements.csv", "posdet_solutions.csv", "summary.txt")]
    pairs += [(out / n, again / n) for n in ("filter_history_000.csv", "filter_history_001.csv",
                                             "measurements_000.csv", "measurements_001.csv")]
    same = [filecmp.cmp(x, y, shallow=False) for x, y in pairs]
    ok = record(7, all(same), f"{sum(same)}/{len(same)} re-run CSV/summary files byte-identical")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
