"""
Conic propagation and light-time delays
=======================================

Propagate Earth and the spacecraft on their heliocentric conics and look at
how long light from Earth and Mars takes to reach the spacecraft over the
first week of the scenario.
"""

import numpy as np

from opnav.config import load_config
from opnav.constants import ARCSEC, AU_KM, MU_SUN
from opnav.ephemeris import body_state, kepler_propagate, solve_light_time

cfg = load_config("three-body-fix")
sc0 = cfg.truth0

# one full Earth orbit returns to the starting point
earth = cfg.body("Earth")
s = earth.state0
energy = s.v @ s.v / 2 - MU_SUN / np.linalg.norm(s.r)
period = 2 * np.pi * np.sqrt((-MU_SUN / (2 * energy)) ** 3 / MU_SUN)
back = kepler_propagate(s, period)
print(f"Earth period {period / 86400:.2f} d, closure error {np.linalg.norm(back.r - s.r):.2e} km")

# light time from each beacon to the spacecraft, sampled daily
days = np.arange(0, 8)
print("\nday " + "".join(f"{b.id:>12s}" for b in cfg.bodies))
for d in days:
    t = d * 86400.0
    r = kepler_propagate(sc0, t).r
    row = [solve_light_time(r, t, b)[0] for b in cfg.bodies]
    print(f"{d:3d} " + "".join(f"{dt:12.3f}" for dt in row))

# light time moves the apparent beacon by v * dt, far above the noise floor
for b in cfg.bodies:
    dt, apparent = solve_light_time(sc0.r, 0.0, b)
    shift = np.linalg.norm(body_state(b, 0.0).r - apparent.r)
    rng = np.linalg.norm(apparent.r - sc0.r)
    print(f"{b.id:6s} at {rng / AU_KM:.3f} AU: light-time shift {shift:8.0f} km "
          f"= {shift / rng / ARCSEC:.1f} arcsec")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    t = np.linspace(0, 400 * 86400.0, 400)
    sc = np.array([kepler_propagate(sc0, x).r for x in t]) / AU_KM
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(sc[:, 0], sc[:, 1], label="spacecraft")
    for b in cfg.bodies:
        orbit = np.array([body_state(b, x).r for x in t]) / AU_KM
        ax.plot(orbit[:, 0], orbit[:, 1], lw=0.8, label=b.id)
    ax.plot(0, 0, "o", color="orange")
    ax.set_aspect("equal")
    ax.set_xlabel("x [AU]")
    ax.set_ylabel("y [AU]")
    ax.legend()
    fig.savefig("orbits.png", dpi=120)
    print("\nwrote orbits.png")
