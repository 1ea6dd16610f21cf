"""Sun-only conic ephemerides and light-time geometry.

Times are plain floats: seconds past the scenario reference epoch on a
uniform (TDB-like) scale.  Positions are km, velocities km/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .constants import C_LIGHT, MU_SUN
from .errors import DegenerateGeometryError, LightTimeError, PropagationError

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50
LIGHT_TIME_TOL = 1e-9
LIGHT_TIME_MAX_ITER = 20


class DegenerateGeometryWarning(UserWarning):
    """Emitted when a geometric quantity is undefined and a fallback is used."""


@dataclass(frozen=True)
class StateVector:
    """Heliocentric position [km] and velocity [km/s]."""

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("state vector components must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_array(cls, values) -> StateVector:
        values = np.asarray(values, dtype=float).reshape(6)
        return cls(values[:3], values[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])


@dataclass(frozen=True)
class Body:
    """A catalogued body on a Sun-centred conic.

    ``epoch0`` is in seconds past the scenario reference epoch.
    """

    id: str
    epoch0: float
    state0: StateVector
    mu_central: float = MU_SUN

    def __post_init__(self):
        if not self.mu_central > 0:
            raise ValueError(f"{self.id}: mu_central must be positive")
        if not np.linalg.norm(self.state0.r) > 0:
            raise ValueError(f"{self.id}: state0 position must be non-zero")


def parse_epoch(text: str) -> datetime:
    """Parse an ISO-8601 calendar epoch (a trailing ``Z`` is accepted)."""
    if text.endswith("Z"):
        text = text[:-1]
    return datetime.fromisoformat(text)


def seconds_between(start: datetime, stop: datetime) -> float:
    return (stop - start).total_seconds()


def _stumpff(z: float) -> tuple[float, float]:
    """Return the Stumpff functions (C(z), S(z))."""
    if abs(z) < 0.1:
        # alternating series; seven terms exhaust double precision for |z| < 0.1
        c = s = 0.0
        term_c = 0.5
        term_s = 1.0 / 6.0
        for k in range(7):
            c += term_c
            s += term_s
            term_c *= -z / ((2 * k + 3) * (2 * k + 4))
            term_s *= -z / ((2 * k + 4) * (2 * k + 5))
        return c, s
    if z > 0:
        sz = math.sqrt(z)
        return (1.0 - math.cos(sz)) / z, (sz - math.sin(sz)) / (sz * z)
    sz = math.sqrt(-z)
    return (math.cosh(sz) - 1.0) / -z, (math.sinh(sz) - sz) / (sz * -z)


def _kepler_rv(r0: np.ndarray, v0: np.ndarray, dt: float, mu: float):
    """Universal-variable propagation of (r0, v0) by dt seconds."""
    x0, y0, z0 = float(r0[0]), float(r0[1]), float(r0[2])
    vx, vy, vz = float(v0[0]), float(v0[1]), float(v0[2])
    rn0 = math.sqrt(x0 * x0 + y0 * y0 + z0 * z0)
    if not rn0 > 0:
        raise PropagationError("initial position has zero norm")
    if not mu > 0:
        raise PropagationError("gravitational parameter must be positive")
    if dt == 0.0:
        return np.array(r0, dtype=float), np.array(v0, dtype=float)

    v2 = vx * vx + vy * vy + vz * vz
    rdotv = x0 * vx + y0 * vy + z0 * vz
    sqmu = math.sqrt(mu)
    alpha = 2.0 / rn0 - v2 / mu  # reciprocal semi-major axis

    t = dt
    if alpha > 1e-15:
        period = 2.0 * math.pi / math.sqrt(mu * alpha**3)
        if abs(t) > period:
            t = math.fmod(t, period)
        chi = sqmu * alpha * t
    elif alpha < -1e-15:
        a = 1.0 / alpha
        sgn = 1.0 if t > 0 else -1.0
        arg = (-2.0 * mu * alpha * t) / (
            rdotv + sgn * math.sqrt(-mu * a) * (1.0 - rn0 * alpha)
        )
        chi = sgn * math.sqrt(-a) * math.log(arg) if arg > 0 else sqmu * t / rn0
    else:
        chi = sqmu * t / rn0

    sig0 = rdotv / sqmu
    one_minus = 1.0 - alpha * rn0
    for iteration in range(1, KEPLER_MAX_ITER + 1):
        chi2 = chi * chi
        z = alpha * chi2
        c, s = _stumpff(z)
        rfun = chi2 * c + sig0 * chi * (1.0 - z * s) + rn0 * (1.0 - z * c)
        fval = sig0 * chi2 * c + one_minus * chi2 * chi * s + rn0 * chi - sqmu * t
        delta = fval / rfun
        chi -= delta
        if abs(delta) <= KEPLER_TOL * max(1.0, abs(chi)):
            break
    else:
        raise PropagationError(
            f"universal anomaly did not converge after {KEPLER_MAX_ITER} iterations "
            f"(dt={dt!r} s, alpha={alpha!r} 1/km, last step={delta!r})"
        )

    chi2 = chi * chi
    z = alpha * chi2
    c, s = _stumpff(z)
    f = 1.0 - chi2 * c / rn0
    g = t - chi2 * chi * s / sqmu
    r = f * np.asarray(r0, dtype=float) + g * np.asarray(v0, dtype=float)
    rn = math.sqrt(float(r @ r))
    fdot = sqmu / (rn * rn0) * chi * (z * s - 1.0)
    gdot = 1.0 - chi2 * c / rn
    v = fdot * np.asarray(r0, dtype=float) + gdot * np.asarray(v0, dtype=float)
    return r, v


def kepler_propagate(state0: StateVector, dt: float, mu: float = MU_SUN) -> StateVector:
    """Propagate a two-body state by ``dt`` seconds.

    Uses the universal-variable formulation, so elliptic, parabolic and
    hyperbolic conics share one code path.  Raises
    :class:`PropagationError` if the anomaly solve fails to converge.
    """
    r, v = _kepler_rv(state0.r, state0.v, float(dt), mu)
    return StateVector(r, v)


def body_state(body: Body, t: float) -> StateVector:
    """Ephemeris state of ``body`` at epoch ``t``."""
    if t == body.epoch0:
        return body.state0
    return kepler_propagate(body.state0, t - body.epoch0, body.mu_central)


def body_rv(body: Body, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Array-returning variant of :func:`body_state` for inner loops."""
    return _kepler_rv(body.state0.r, body.state0.v, t - body.epoch0, body.mu_central)


def solve_light_time(
    observer_r, t_k: float, body: Body, c: float = C_LIGHT
) -> tuple[float, StateVector]:
    """Solve for the light-time delay from ``body`` to an observer at ``t_k``.

    Returns ``(delta_t, apparent_state)`` where ``apparent_state`` is the
    body's ephemeris state at the emission epoch ``t_k - delta_t``.  A
    coincident observer yields ``delta_t = 0`` and a
    :class:`DegenerateGeometryWarning`.
    """
    obs = np.asarray(observer_r, dtype=float).reshape(3)
    r_body, _ = body_rv(body, t_k)
    dt = float(np.linalg.norm(r_body - obs)) / c
    if dt == 0.0:
        warnings.warn(
            f"observer coincides with {body.id} at t={t_k!r}; light time set to zero",
            DegenerateGeometryWarning,
            stacklevel=2,
        )
        return 0.0, body_state(body, t_k)
    for _ in range(LIGHT_TIME_MAX_ITER):
        r_body, _ = body_rv(body, t_k - dt)
        dt_new = float(np.linalg.norm(r_body - obs)) / c
        step = dt_new - dt
        dt = dt_new
        if abs(step) < LIGHT_TIME_TOL:
            break
    else:
        raise LightTimeError(
            f"light time to {body.id} did not converge in {LIGHT_TIME_MAX_ITER} "
            f"iterations (last step {step!r} s)"
        )
    if dt == 0.0:
        raise DegenerateGeometryError(f"observer coincides with {body.id} at emission")
    return dt, body_state(body, t_k - dt)
