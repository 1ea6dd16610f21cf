"""True spacecraft trajectory: conic on coast arcs, integrated through thrust arcs."""

from __future__ import annotations

import bisect

import numpy as np
from scipy.integrate import solve_ivp

from .constants import C_LIGHT, MU_SUN
from .ekf import ThrustProfile
from .ephemeris import StateVector, kepler_propagate, solve_light_time
from .errors import PropagationError

THRUST_RTOL = 1e-12
THRUST_ATOL = 1e-9


def _thrust_ode(mu, accel):
    accel = np.asarray(accel, dtype=float)

    def rhs(_t, y):
        r = y[:3]
        rn = np.linalg.norm(r)
        return np.concatenate([y[3:], -mu * r / rn**3 + accel])

    return rhs


class TruthTrajectory:
    """Queryable true state on a piecewise coast/thrust trajectory.

    The trajectory is anchored at ``(t0, state0)``; coast pieces use the
    exact conic, thrust arcs are integrated with DOP853 and sampled from its
    dense output.  Queries before ``t0`` use the conic from the anchor.
    """

    def __init__(self, t0: float, state0: StateVector, thrust: ThrustProfile | None = None,
                 mu: float = MU_SUN):
        self.t0 = float(t0)
        self.state0 = state0
        self.mu = mu
        self.thrust = thrust or ThrustProfile()
        # pieces: (t_start, t_end, kind, payload)
        self._starts = []
        self._pieces = []
        t = self.t0
        state = state0
        for arc in self.thrust.arcs:
            if arc.t_end <= t:
                continue
            if arc.t_start > t:
                self._add(t, arc.t_start, "coast", state)
                state = kepler_propagate(state, arc.t_start - t, mu)
                t = arc.t_start
            sol = solve_ivp(
                _thrust_ode(mu, arc.accel),
                (t, arc.t_end),
                state.as_array(),
                method="DOP853",
                rtol=THRUST_RTOL,
                atol=THRUST_ATOL,
                dense_output=True,
            )
            if not sol.success:
                raise PropagationError(f"thrust arc integration failed at t={t!r}: {sol.message}")
            self._add(t, arc.t_end, "thrust", sol.sol)
            state = StateVector.from_array(sol.y[:, -1])
            t = arc.t_end
        self._add(t, np.inf, "coast", state)

    def _add(self, t_start, t_end, kind, payload):
        self._starts.append(t_start)
        self._pieces.append((t_start, t_end, kind, payload))

    def state(self, t: float) -> StateVector:
        if t <= self.t0:
            return kepler_propagate(self.state0, t - self.t0, self.mu)
        i = bisect.bisect_right(self._starts, t) - 1
        t_start, _, kind, payload = self._pieces[i]
        if kind == "coast":
            return kepler_propagate(payload, t - t_start, self.mu)
        return StateVector.from_array(payload(t))

    __call__ = state

    def augmented(self, t: float, bodies, c: float = C_LIGHT) -> np.ndarray:
        """True filter state ``[r, v, dt_1..dt_n]`` with light times to ``bodies``."""
        s = self.state(t)
        delays = [solve_light_time(s.r, t, body, c)[0] for body in bodies]
        return np.concatenate([s.r, s.v, delays])
