"""
Tracking Earth and Mars with the EKF
====================================

Run one filter over the seven-day scenario: six days (and change) of pure
coast, then alternating Earth and Mars windows.  The second half repeats the
run with tracking extended over a whole day.
"""

from dataclasses import replace

import numpy as np

from opnav.config import load_config
from opnav.scenario import run_filter_scenario

cfg = load_config("beacon-campaign")
history, measurements = run_filter_scenario(cfg, run=0)
sig = history.sigma3()
err = np.array(history.error)
t_day = np.array(history.t) / 86400.0

print(f"{len(measurements)} measurements, {len(history)} history rows")
print(" day     phase          3s_pos[km]  3s_vel[m/s]  err_pos[km]")
for i in list(range(0, len(history), max(1, len(history) // 15))) + [len(history) - 1]:
    print(f"{t_day[i]:7.4f} {history.phase[i]:14s} {sig[i, :3].max():11.0f} "
          f"{sig[i, 3:6].max() * 1e3:12.1f} {np.abs(err[i, :3]).max():12.0f}")

# a longer campaign keeps shrinking the bounds, velocity most slowly
longer = replace(cfg, schedule_options=replace(cfg.schedule_options, cycles=100, max_duration_s=86400.0))
h2, _ = run_filter_scenario(longer, run=0)
s2 = h2.sigma3()
print(f"\nafter 24 h of tracking: 3s position {s2[-1, :3].max():.0f} km, "
      f"3s velocity {s2[-1, 3:6].max() * 1e3:.1f} m/s")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    track = t_day >= 7.0
    fig, axes = plt.subplots(2, 3, figsize=(11, 5), sharex=True)
    for k in range(6):
        ax = axes[k // 3, k % 3]
        scale = 1.0 if k < 3 else 1e3
        ax.plot(t_day[track], err[track, k] * scale, lw=0.8)
        ax.plot(t_day[track], sig[track, k] * scale, "k", lw=0.6)
        ax.plot(t_day[track], -sig[track, k] * scale, "k", lw=0.6)
        ax.set_title(["x", "y", "z", "vx", "vy", "vz"][k] + (" [km]" if k < 3 else " [m/s]"))
    for ax in axes[1]:
        ax.set_xlabel("day")
    fig.tight_layout()
    fig.savefig("ekf_campaign.png", dpi=120)
    print("wrote ekf_campaign.png")
