"""
Snapshot position fixes from three planets
==========================================

Solve for the spacecraft position and the three light-time delays from one
set of Venus, Earth and Mars directions, then repeat with LOS noise to see
the spread of the fixes.
"""

import numpy as np

from opnav.config import load_config
from opnav.measurement import NoiseModel, los_from_az_el
from opnav.posdet import PosDetProblem, solve_position
from opnav.scenario import posdet_truth, synthesize_snapshots

cfg = load_config("three-body-fix")
r_true, dt_true = posdet_truth(cfg)


def fixes(config, trials):
    out = []
    meas = synthesize_snapshots(config, range(trials))
    for k in range(trials):
        group = meas[3 * k : 3 * k + 3]
        obs = tuple((config.body(m.beacon_id), los_from_az_el(m.theta, m.phi)) for m in group)
        out.append(solve_position(PosDetProblem(0.0, obs)))
    return out


# noiseless directions pin the position down to round-off
sol = fixes(cfg.with_overrides(noise=NoiseModel(0.0)), 1)[0]
print(f"noiseless: {sol.iterations} iterations, |r - r_true| = {np.linalg.norm(sol.r - r_true):.2e} km")
print("delays [s]:", np.round(sol.delta_t, 6), "truth:", np.round(dt_true, 6))

# 5 arcsec (1 sigma per axis) noise
sols = fixes(cfg, 300)
err = np.array([s.r - r_true for s in sols])
derr = np.array([s.delta_t - dt_true for s in sols])
print(f"\n300 noisy fixes, converged {sum(s.converged for s in sols)}")
print("position error std [km]:", np.round(err.std(axis=0)))
print("delay error std [s]:   ", np.round(derr.std(axis=0), 4))
inside = np.all(np.abs(err) <= 20000, axis=1) & np.all(np.abs(derr) <= 0.2, axis=1)
print(f"inside +/-20000 km and +/-0.2 s: {inside.mean():.3f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, axes = plt.subplots(1, 3, figsize=(10, 3), sharey=True)
    for k, ax in enumerate(axes):
        ax.plot(err[:, k], ".", ms=3)
        ax.axhline(20000, color="k", lw=0.8)
        ax.axhline(-20000, color="k", lw=0.8)
        ax.set_title("xyz"[k] + " error [km]")
        ax.set_xlabel("trial")
    fig.tight_layout()
    fig.savefig("position_fix_errors.png", dpi=120)
    print("wrote position_fix_errors.png")
