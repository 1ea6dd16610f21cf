"""Continuous-discrete EKF on the light-time augmented state.

State layout: ``x = [r (km), v (km/s), dt_1 .. dt_n (s)]`` with one delay per
catalogued beacon, in catalog order.  Between measurements the state and the
covariance Riccati equation ``Pdot = F P + P F^T + Q`` are integrated with a
fixed-step RK4; each measurement (azimuth, elevation of one beacon) is
processed with a standard EKF update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ARCSEC, AU_KM, C_LIGHT, MU_SUN
from .ephemeris import Body, body_rv
from .errors import InnovationError, NumericalHealthError, SingularityError
from .measurement import LosMeasurement, az_el_from_los, wrap_angle

MIN_RADIUS_KM = 0.05 * AU_KM
PSD_TOL = 1e-9


@dataclass(frozen=True)
class ThrustArc:
    t_start: float
    t_end: float
    accel: tuple  # km/s^2

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("thrust arc must have t_end > t_start")
        object.__setattr__(self, "accel", tuple(float(a) for a in self.accel))


@dataclass(frozen=True)
class ThrustProfile:
    """Piecewise-constant low-thrust acceleration; no arcs means pure coast."""

    arcs: tuple = ()

    def __post_init__(self):
        arcs = tuple(sorted(self.arcs, key=lambda a: a.t_start))
        for prev, nxt in zip(arcs, arcs[1:]):
            if nxt.t_start < prev.t_end:
                raise ValueError("thrust arcs overlap")
        object.__setattr__(self, "arcs", arcs)

    def accel(self, t: float) -> np.ndarray:
        for arc in self.arcs:
            if arc.t_start <= t < arc.t_end:
                return np.array(arc.accel)
        return np.zeros(3)

    def boundaries(self) -> list[float]:
        return sorted({b for arc in self.arcs for b in (arc.t_start, arc.t_end)})


@dataclass
class FilterSettings:
    sigma_r: float
    sigma_v: float
    sigma_dt: float
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if min(self.sigma_r, self.sigma_v, self.sigma_dt) <= 0:
            raise ValueError("initial sigmas must be positive")
        if np.any(np.linalg.eigvalsh(self.R) <= 0):
            raise ValueError("R must be positive definite")

    @classmethod
    def nominal(
        cls,
        n_beacons: int,
        sigma_r: float = 1e5,
        sigma_v: float = 1e-1,
        sigma_los_arcsec: float = 5.0,
        q_scale: float = 1e-12,
        q_form: str = "ones",
        c: float = C_LIGHT,
    ) -> FilterSettings:
        """Mission-case settings: sigma_dt = sigma_r / c, Q = q * ones, R = sigma^2 I2."""
        dim = 6 + n_beacons
        if q_form == "ones":
            q = q_scale * np.ones((dim, dim))
        elif q_form == "diagonal":
            q = q_scale * np.eye(dim)
        else:
            raise ValueError(f"unknown q_form {q_form!r}")
        r = (sigma_los_arcsec * ARCSEC) ** 2 * np.eye(2)
        return cls(sigma_r, sigma_v, sigma_r / c, q, r)

    def initial_covariance(self, n_beacons: int) -> np.ndarray:
        diag = [self.sigma_r**2] * 3 + [self.sigma_v**2] * 3 + [self.sigma_dt**2] * n_beacons
        return np.diag(diag)


@dataclass
class FilterState:
    x: np.ndarray
    P: np.ndarray
    t: float

    def copy(self) -> FilterState:
        return FilterState(self.x.copy(), self.P.copy(), self.t)


def _check_radius(r: np.ndarray) -> float:
    rn = math.sqrt(float(r @ r))
    if rn < MIN_RADIUS_KM:
        raise SingularityError(f"|r| = {rn:.6e} km is inside the {MIN_RADIUS_KM:.3e} km guard")
    return rn


def _beacon_geometry(x, t, body: Body, k: int):
    """Emission-time beacon state and the estimated apparent LOS for delay slot k."""
    r = x[:3]
    p, w = body_rv(body, t - x[6 + k])
    rho = p - r
    d = math.sqrt(float(rho @ rho))
    return p, w, rho / d, d


def dynamics(x, t: float, thrust: ThrustProfile, bodies, mu: float = MU_SUN, c: float = C_LIGHT,
             accel=None) -> np.ndarray:
    """State derivative ``[v, a, ddt/dt]``.

    ``accel`` optionally overrides the thrust acceleration (used by the
    integrator to hold one value over a step).
    """
    x = np.asarray(x, dtype=float)
    r, v = x[:3], x[3:6]
    rn = _check_radius(r)
    f_t = thrust.accel(t) if accel is None else accel
    out = np.empty_like(x)
    out[:3] = v
    out[3:6] = -mu * r / rn**3 + f_t
    for k, body in enumerate(bodies):
        _, w, u, _ = _beacon_geometry(x, t, body, k)
        out[6 + k] = float((w - v) @ u) / c
    return out


def _dynamics_and_jacobian(x, t, bodies, mu, c, f_t):
    n = len(bodies)
    r, v = x[:3], x[3:6]
    rn = _check_radius(r)
    f = np.empty(6 + n)
    F = np.zeros((6 + n, 6 + n))
    f[:3] = v
    f[3:6] = -mu * r / rn**3 + f_t
    F[0:3, 3:6] = np.eye(3)
    F[3:6, 0:3] = -mu * (np.eye(3) / rn**3 - 3.0 * np.outer(r, r) / rn**5)
    for k, body in enumerate(bodies):
        p, w, u, d = _beacon_geometry(x, t, body, k)
        rel = w - v
        f[6 + k] = float(rel @ u) / c
        # du/drho = (I - u u^T) / d ; drho/dr = -I ; drho/ddt = -w ; dw/ddt = -a_beacon
        proj = (rel - float(rel @ u) * u) / d  # (I - u u^T) rel / d
        pn = math.sqrt(float(p @ p))
        a_b = -body.mu_central * p / pn**3
        F[6 + k, 0:3] = -proj / c
        F[6 + k, 3:6] = -u / c
        F[6 + k, 6 + k] = -(float(a_b @ u) + float(proj @ w)) / c
    return f, F


def state_jacobian(x, t: float, thrust: ThrustProfile, bodies, mu: float = MU_SUN,
                   c: float = C_LIGHT) -> np.ndarray:
    """Analytic ``F = df/dx`` of :func:`dynamics`."""
    _, F = _dynamics_and_jacobian(np.asarray(x, dtype=float), t, bodies, mu, c, thrust.accel(t))
    return F


def measurement_model(x, t: float, beacon_index: int, bodies) -> np.ndarray:
    """Predicted (azimuth, elevation) of a beacon using the estimated delay."""
    x = np.asarray(x, dtype=float)
    _, _, u, _ = _beacon_geometry(x, t, bodies[beacon_index], beacon_index)
    return np.array(az_el_from_los(u))


def measurement_jacobian(x, t: float, beacon_index: int, bodies) -> np.ndarray:
    """Analytic ``H = dh/dx`` (2 x (6+n)) for one beacon."""
    x = np.asarray(x, dtype=float)
    n = len(bodies)
    _, w, u, d = _beacon_geometry(x, t, bodies[beacon_index], beacon_index)
    ux, uy, uz = u
    rxy2 = ux * ux + uy * uy
    dtheta_du = np.array([-uy, ux, 0.0]) / rxy2
    dphi_du = np.array([0.0, 0.0, 1.0]) / math.sqrt(rxy2)
    M = (np.eye(3) - np.outer(u, u)) / d
    H = np.zeros((2, 6 + n))
    H[0, 0:3] = -dtheta_du @ M
    H[1, 0:3] = -dphi_du @ M
    H[0, 6 + beacon_index] = -float(dtheta_du @ (M @ w))
    H[1, 6 + beacon_index] = -float(dphi_du @ (M @ w))
    return H


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def check_covariance(P: np.ndarray, where: str = "") -> None:
    """Raise :class:`NumericalHealthError` unless P is finite, symmetric and PSD."""
    if not np.all(np.isfinite(P)):
        raise NumericalHealthError(f"non-finite covariance {where}")
    tr = float(np.trace(P))
    asym = float(np.max(np.abs(P - P.T)))
    if asym > 1e-12 * max(float(np.max(np.abs(P))), 1e-300):
        raise NumericalHealthError(f"covariance asymmetric by {asym:.3e} {where}")
    lam_min = float(np.min(np.linalg.eigvalsh(P)))
    if lam_min < -PSD_TOL * tr:
        raise NumericalHealthError(
            f"covariance not PSD (min eigenvalue {lam_min:.3e}, trace {tr:.3e}) {where}"
        )


def _step_grid(t0: float, t1: float, step: float, breaks) -> list[float]:
    cuts = [t0] + [b for b in breaks if t0 < b < t1] + [t1]
    grid = [t0]
    for a, b in zip(cuts, cuts[1:]):
        m = max(1, math.ceil((b - a) / step - 1e-9))
        grid.extend(a + (b - a) * i / m for i in range(1, m))
        grid.append(b)
    return grid


def propagate(fs: FilterState, t_to: float, thrust: ThrustProfile, bodies, Q,
              step: float = 60.0, mu: float = MU_SUN, c: float = C_LIGHT) -> FilterState:
    """Integrate state and covariance from ``fs.t`` to ``t_to`` with RK4.

    Steps never straddle a thrust-arc boundary; the thrust acceleration is
    held at its mid-step value.
    """
    if t_to < fs.t:
        raise ValueError(f"cannot propagate backwards from {fs.t} to {t_to}")
    if t_to == fs.t:
        return fs.copy()
    Q = np.asarray(Q, dtype=float)
    x = fs.x.astype(float).copy()
    P = fs.P.astype(float).copy()
    grid = _step_grid(fs.t, t_to, step, thrust.boundaries())

    def rhs(xs, Ps, ts, f_t):
        f, F = _dynamics_and_jacobian(xs, ts, bodies, mu, c, f_t)
        FP = F @ Ps
        return f, FP + FP.T + Q

    for ta, tb in zip(grid, grid[1:]):
        h = tb - ta
        f_t = thrust.accel(0.5 * (ta + tb))
        k1x, k1p = rhs(x, P, ta, f_t)
        k2x, k2p = rhs(x + 0.5 * h * k1x, P + 0.5 * h * k1p, ta + 0.5 * h, f_t)
        k3x, k3p = rhs(x + 0.5 * h * k2x, P + 0.5 * h * k2p, ta + 0.5 * h, f_t)
        k4x, k4p = rhs(x + h * k3x, P + h * k3p, tb, f_t)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        P = symmetrize(P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
    if not np.all(np.isfinite(x)):
        raise NumericalHealthError(f"non-finite state after propagation to t={t_to!r}")
    check_covariance(P, f"after propagation to t={t_to!r}")
    return FilterState(x, P, float(t_to))


def innovation(y: LosMeasurement, predicted) -> np.ndarray:
    return np.array([wrap_angle(y.theta - predicted[0]), y.phi - predicted[1]])


def kalman_update(x, P, nu, H, R, joseph: bool = False):
    """Linear Kalman correction for innovation ``nu`` with sensitivity ``H``.

    Returns ``(x_plus, P_plus, S)``.  The covariance update is
    ``(I - K H) P`` or, with ``joseph=True``,
    ``(I - K H) P (I - K H)^T + K R K^T``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    PHt = P @ H.T
    S = symmetrize(H @ PHt + R)
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise InnovationError(f"innovation covariance singular (cond {cond:.3e})")
    K = np.linalg.solve(S, PHt.T).T
    x_plus = x + K @ np.atleast_1d(nu)
    IKH = np.eye(len(x)) - K @ H
    P_plus = IKH @ P @ IKH.T + K @ R @ K.T if joseph else IKH @ P
    return x_plus, symmetrize(P_plus), S


def update(fs: FilterState, y: LosMeasurement, R, bodies, joseph: bool = False) -> FilterState:
    """Process one az/el measurement at ``fs.t``.

    The azimuth innovation is wrapped into (-pi, pi].
    """
    if y.epoch != fs.t:
        raise ValueError(f"measurement epoch {y.epoch!r} differs from filter epoch {fs.t!r}")
    ids = [b.id for b in bodies]
    try:
        k = ids.index(y.beacon_id)
    except ValueError:
        raise ValueError(f"beacon {y.beacon_id!r} not in filter catalog {ids}") from None
    h = measurement_model(fs.x, fs.t, k, bodies)
    H = measurement_jacobian(fs.x, fs.t, k, bodies)
    try:
        x, P, _ = kalman_update(fs.x, fs.P, innovation(y, h), H, R, joseph)
    except InnovationError as exc:
        raise InnovationError(f"{exc} at t={fs.t!r}, beacon {y.beacon_id}") from None
    check_covariance(P, f"after update at t={fs.t!r}")
    return FilterState(x, P, fs.t)


@dataclass
class FilterHistory:
    """Time-ordered filter output; ``error`` is estimate minus truth."""

    beacon_ids: list
    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    P: list = field(default_factory=list)
    error: list = field(default_factory=list)
    phase: list = field(default_factory=list)

    def append(self, fs: FilterState, truth, phase: str):
        self.t.append(fs.t)
        self.x.append(fs.x.copy())
        self.P.append(fs.P.copy())
        self.error.append(fs.x - truth if truth is not None else np.full_like(fs.x, np.nan))
        self.phase.append(phase)

    def sigma3(self) -> np.ndarray:
        return 3.0 * np.sqrt(np.array([np.diag(P) for P in self.P]))

    def __len__(self):
        return len(self.t)


def run_filter(
    initial: FilterState,
    bodies,
    thrust: ThrustProfile,
    settings: FilterSettings,
    schedule,
    measurements,
    truth=None,
    coast_step: float = 60.0,
    history_interval: float = 3600.0,
    mu: float = MU_SUN,
    c: float = C_LIGHT,
) -> FilterHistory:
    """Drive the filter along a tracking schedule.

    ``schedule`` is an iterable of segments with ``t_start``, ``t_end``,
    ``kind`` ('coast', 'slew' or 'track') and ``beacon_id``.
    ``measurements`` are :class:`LosMeasurement` objects in time order.
    ``truth(t)`` returns the true augmented state vector, or is None.
    Coast and slew arcs are propagation only, sampled every
    ``history_interval`` seconds.
    """
    meas = sorted(measurements, key=lambda m: m.epoch)
    segments = list(schedule)
    # track windows are closed intervals: the fencepost at t_end is measured
    by_segment = {
        i: [m for m in meas if m.beacon_id == seg.beacon_id and seg.t_start <= m.epoch <= seg.t_end]
        for i, seg in enumerate(segments)
        if seg.kind == "track"
    }

    def tag(seg):
        return f"track:{seg.beacon_id}" if seg.kind == "track" else seg.kind

    def truth_at(t):
        return truth(t) if truth is not None else None

    history = FilterHistory([b.id for b in bodies])
    fs = initial.copy()
    check_covariance(fs.P, "at filter start")
    history.append(fs, truth_at(fs.t), tag(segments[0]) if segments else "coast")
    for seg_index, seg in enumerate(segments):
        label = tag(seg)
        if fs.t < seg.t_start:
            fs = propagate(fs, seg.t_start, thrust, bodies, settings.Q, coast_step, mu, c)
        if seg.kind == "track":
            for y in by_segment[seg_index]:
                if y.epoch > fs.t:
                    fs = propagate(fs, y.epoch, thrust, bodies, settings.Q, coast_step, mu, c)
                fs = update(fs, y, settings.R, bodies)
                history.append(fs, truth_at(fs.t), label)
            if fs.t < seg.t_end:
                fs = propagate(fs, seg.t_end, thrust, bodies, settings.Q, coast_step, mu, c)
                history.append(fs, truth_at(fs.t), label)
        else:
            while fs.t < seg.t_end:
                t_next = min(seg.t_end, fs.t + history_interval)
                fs = propagate(fs, t_next, thrust, bodies, settings.Q, coast_step, mu, c)
                history.append(fs, truth_at(fs.t), label)
    return history
