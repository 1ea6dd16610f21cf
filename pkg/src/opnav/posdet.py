"""Snapshot position fix from LOS directions with light-time delays as unknowns.

For each beacon i the residual is

    eps_i = r - [r_i(t_k - dt_i) - c dt_i rho_hat_i]

and the fix minimizes J = sum |eps_i|^2 over r and dt_1..dt_n with a
damped Gauss-Newton iteration.  Internally the delays are carried as
ranges s_i = c dt_i so every unknown is in km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import AU_KM, C_LIGHT
from .ephemeris import Body, body_rv
from .errors import RankDeficientError, UnderdeterminedError

STEP_TOL_R = 1e-6  # km
STEP_TOL_DT = 1e-9  # s
GRAD_TOL = 1e-8  # km, scaled gradient
MAX_ITER = 50
COND_LIMIT = 1e12  # Jacobian condition treated as singular
DAMPING_COND = 1e6


@dataclass(frozen=True)
class PosDetProblem:
    """Observations of distinct beacons at a common reception epoch ``t_k``."""

    t_k: float
    observations: tuple  # of (Body, unit LOS array)
    c: float = C_LIGHT

    def __post_init__(self):
        obs = tuple((body, np.asarray(u, dtype=float).reshape(3)) for body, u in self.observations)
        ids = [body.id for body, _ in obs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"beacons must be distinct, got {ids}")
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def well_posed(self) -> bool:
        return self.n >= 3


@dataclass
class PosDetSolution:
    r: np.ndarray
    delta_t: np.ndarray
    cost: float
    iterations: int
    converged: bool
    gradient_norm: float = math.nan
    well_posed: bool = True
    cost_history: list = field(default_factory=list, repr=False)


def residual(r, delta_t_i: float, rho_hat_i, beacon_i: Body, t_k: float, c: float = C_LIGHT):
    """Light-time consistent position residual for one beacon [km]."""
    r_b, _ = body_rv(beacon_i, t_k - delta_t_i)
    return np.asarray(r, dtype=float) - (r_b - c * delta_t_i * np.asarray(rho_hat_i, dtype=float))


def _residuals_and_velocities(problem: PosDetProblem, r, delta_t):
    eps = np.empty((problem.n, 3))
    vel = np.empty((problem.n, 3))
    r = np.asarray(r, dtype=float)
    for i, (body, u) in enumerate(problem.observations):
        r_b, v_b = body_rv(body, problem.t_k - delta_t[i])
        eps[i] = r - (r_b - problem.c * delta_t[i] * u)
        vel[i] = v_b
    return eps, vel


def cost(problem: PosDetProblem, r, delta_t) -> float:
    eps, _ = _residuals_and_velocities(problem, r, np.asarray(delta_t, dtype=float))
    return float(np.sum(eps * eps))


def cost_gradient(problem: PosDetProblem, r, delta_t) -> np.ndarray:
    """Analytic gradient [dJ/dr (km), dJ/ddt_i (km^2/s)] of the fix cost."""
    delta_t = np.asarray(delta_t, dtype=float)
    eps, vel = _residuals_and_velocities(problem, r, delta_t)
    grad = np.empty(3 + problem.n)
    grad[:3] = 2.0 * eps.sum(axis=0)
    for i, (_, u) in enumerate(problem.observations):
        grad[3 + i] = 2.0 * float((vel[i] + problem.c * u) @ eps[i])
    return grad


def default_initial_guess(problem: PosDetProblem):
    """Beacon centroid pushed out to 1 AU, with geometric delays from there."""
    positions = np.array([body_rv(body, problem.t_k)[0] for body, _ in problem.observations])
    centroid = positions.mean(axis=0)
    norm = float(np.linalg.norm(centroid))
    r0 = centroid * (AU_KM / norm) if norm > 0 else np.array([AU_KM, 0.0, 0.0])
    dt0 = np.linalg.norm(positions - r0, axis=1) / problem.c
    return r0, dt0


def _jacobian(problem: PosDetProblem, vel):
    """Jacobian of the stacked residual w.r.t. the scaled unknowns (r, c*dt)."""
    n = problem.n
    jac = np.zeros((3 * n, 3 + n))
    for i, (_, u) in enumerate(problem.observations):
        jac[3 * i : 3 * i + 3, :3] = np.eye(3)
        jac[3 * i : 3 * i + 3, 3 + i] = vel[i] / problem.c + u
    return jac


def _solve_sorted(problem: PosDetProblem, r, delta_t) -> PosDetSolution:
    c = problem.c
    z = np.concatenate([np.asarray(r, dtype=float), c * np.asarray(delta_t, dtype=float)])
    eps, vel = _residuals_and_velocities(problem, z[:3], z[3:] / c)
    j_cost = float(np.sum(eps * eps))
    history = [j_cost]
    damping = 0.0
    converged = False
    grad_norm = math.nan
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        jac = _jacobian(problem, vel)
        g = jac.T @ eps.reshape(-1)
        grad_norm = float(np.linalg.norm(2.0 * g))
        if grad_norm < GRAD_TOL:
            converged = True
            break
        sv = np.linalg.svd(jac, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
        if cond > COND_LIMIT:
            raise RankDeficientError(
                f"position-fix Jacobian condition {cond:.3e} exceeds {COND_LIMIT:.0e}; "
                "LOS geometry is degenerate",
                condition=cond,
            )
        normal = jac.T @ jac
        lam = damping if cond < DAMPING_COND else max(damping, 1e-9)
        for _ in range(30):
            step = -np.linalg.solve(normal + lam * np.diag(np.diag(normal)), g)
            z_try = z + step
            eps_try, vel_try = _residuals_and_velocities(problem, z_try[:3], z_try[3:] / c)
            j_try = float(np.sum(eps_try * eps_try))
            if j_try <= j_cost:
                break
            lam = max(1e-6, 10.0 * lam)
        else:
            j_try = math.inf
        small = np.max(np.abs(step[:3])) < STEP_TOL_R and np.max(np.abs(step[3:])) / c < STEP_TOL_DT
        if j_try > j_cost:
            # no descent: either sitting on the round-off floor or stuck
            converged = bool(small)
            break
        z, eps, vel, j_cost = z_try, eps_try, vel_try, j_try
        history.append(j_cost)
        damping = lam / 10.0 if lam > 1e-6 else 0.0
        if small:
            converged = True
            jac = _jacobian(problem, vel)
            grad_norm = float(np.linalg.norm(2.0 * jac.T @ eps.reshape(-1)))
            break
    return PosDetSolution(
        r=z[:3].copy(),
        delta_t=z[3:] / c,
        cost=j_cost,
        iterations=iterations,
        converged=converged,
        gradient_norm=grad_norm,
        well_posed=problem.well_posed,
        cost_history=history,
    )


def solve_position(problem: PosDetProblem, initial_guess=None) -> PosDetSolution:
    """Minimize the fix cost; returns a flagged non-converged solution on iteration cap.

    Observations are processed in beacon-id order so the result does not
    depend on how the caller listed them; ``delta_t`` is returned in the
    caller's order.
    """
    n = problem.n
    if 3 * n < 3 + n:
        raise UnderdeterminedError(
            f"{n} observation(s) give {3 * n} equations for {3 + n} unknowns"
        )
    order = sorted(range(n), key=lambda i: problem.observations[i][0].id)
    ordered = PosDetProblem(problem.t_k, tuple(problem.observations[i] for i in order), problem.c)
    if initial_guess is None:
        r0, dt0 = default_initial_guess(ordered)
    else:
        r0 = np.asarray(initial_guess[0], dtype=float)
        dt0 = np.asarray(initial_guess[1], dtype=float)[order]
    sol = _solve_sorted(ordered, r0, dt0)
    delta_t = np.empty(n)
    delta_t[order] = sol.delta_t
    sol.delta_t = delta_t
    return sol
