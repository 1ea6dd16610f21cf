"""Line-of-sight observations: apparent directions, az/el encoding and noise."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import ARCSEC, C_LIGHT
from .ephemeris import Body, DegenerateGeometryWarning, StateVector, solve_light_time
from .errors import DegenerateGeometryError

_POLE_TOL = 1e-15


@dataclass(frozen=True)
class LosMeasurement:
    """Azimuth/elevation of one beacon at one epoch.

    ``true_delta_t`` carries the truth light time when the measurement was
    synthesized; it is never used by the estimators.
    """

    epoch: float
    beacon_id: str
    theta: float
    phi: float
    true_delta_t: float | None = None


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic angular LOS noise; ``sigma_los`` is the 1-sigma per-axis angle [rad]."""

    sigma_los: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_los >= 0:
            raise ValueError("sigma_los must be non-negative")

    @classmethod
    def from_arcsec(cls, sigma_arcsec: float, seed: int = 0) -> NoiseModel:
        return cls(sigma_arcsec * ARCSEC, seed)


def los_from_apparent(observer_r, apparent_body_r) -> np.ndarray:
    """Unit vector from the observer to the body's apparent position."""
    rho = np.asarray(apparent_body_r, dtype=float) - np.asarray(observer_r, dtype=float)
    d = float(np.linalg.norm(rho))
    if d == 0.0:
        raise DegenerateGeometryError("observer and body positions coincide")
    return rho / d


def az_el_from_los(u) -> tuple[float, float]:
    """Azimuth in (-pi, pi] and elevation in [-pi/2, pi/2] of a unit vector.

    At the poles the azimuth is undefined; 0 is returned with a
    :class:`DegenerateGeometryWarning`.
    """
    ux, uy, uz = (float(c) for c in u)
    phi = math.asin(min(1.0, max(-1.0, uz)))
    if ux * ux + uy * uy <= _POLE_TOL**2:
        warnings.warn("LOS at a pole; azimuth set to zero", DegenerateGeometryWarning, stacklevel=2)
        return 0.0, phi
    theta = math.atan2(uy, ux)
    if theta == -math.pi:
        theta = math.pi
    return theta, phi


def los_from_az_el(theta: float, phi: float) -> np.ndarray:
    cp = math.cos(phi)
    return np.array([cp * math.cos(theta), cp * math.sin(theta), math.sin(phi)])


def _transverse_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # seed axis: the coordinate axis least aligned with u
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(u)))] = 1.0
    e1 = np.cross(u, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return e1, e2


def perturb_los(u, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Rotate ``u`` by a random small angle drawn per transverse axis.

    Two independent N(0, sigma_los) angles are drawn along an orthonormal
    basis of the plane orthogonal to ``u``; the result is ``u`` rotated by
    their combined magnitude toward that direction.  Always draws two
    normals so the generator advances identically for any sigma.
    """
    u = np.asarray(u, dtype=float)
    a, b = rng.normal(0.0, 1.0, size=2) * noise.sigma_los
    if noise.sigma_los == 0.0:
        return u.copy()
    e1, e2 = _transverse_basis(u)
    angle = math.hypot(a, b)
    if angle == 0.0:
        return u.copy()
    direction = (a * e1 + b * e2) / angle
    out = math.cos(angle) * u + math.sin(angle) * direction
    return out / np.linalg.norm(out)


def angular_deviation(u, w) -> tuple[float, float]:
    """Components of the small rotation taking ``u`` to ``w`` in the transverse basis of ``u``."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    e1, e2 = _transverse_basis(u)
    angle = math.atan2(float(np.linalg.norm(np.cross(u, w))), float(u @ w))
    t = w - (u @ w) * u
    tn = float(np.linalg.norm(t))
    if tn == 0.0:
        return 0.0, 0.0
    return angle * float(t @ e1) / tn, angle * float(t @ e2) / tn


def wrap_angle(angle: float) -> float:
    """Wrap an angle difference into (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


def apparent_los(truth_sc: StateVector, body: Body, t: float, c: float = C_LIGHT):
    """Noiseless apparent LOS and light time from the spacecraft to ``body``."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegenerateGeometryWarning)
        try:
            delta_t, apparent = solve_light_time(truth_sc.r, t, body, c)
        except DegenerateGeometryWarning as exc:
            raise DegenerateGeometryError(str(exc)) from None
    return los_from_apparent(truth_sc.r, apparent.r), delta_t


def synthesize_measurement(
    truth_sc: StateVector,
    body: Body,
    t: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    c: float = C_LIGHT,
) -> LosMeasurement:
    """Simulate one noisy az/el observation of ``body`` from the true spacecraft state."""
    u, delta_t = apparent_los(truth_sc, body, t, c)
    theta, phi = az_el_from_los(perturb_los(u, noise, rng))
    return LosMeasurement(float(t), body.id, theta, phi, delta_t)
