"""Independent reference computations used by the tests.

None of these call the code paths they check: orbits are integrated
numerically instead of solved in closed form, roots are bracketed instead of
iterated, derivatives are differenced instead of derived.
"""

import numpy as np
from scipy.integrate import solve_ivp

from opnav.constants import MU_SUN


def integrate_two_body(r0, v0, dt, mu=MU_SUN, accel=None, rtol=1e-13, atol=1e-8):
    accel = np.zeros(3) if accel is None else np.asarray(accel, dtype=float)

    def rhs(_t, y):
        r = y[:3]
        return np.concatenate([y[3:], -mu * r / np.linalg.norm(r) ** 3 + accel])

    y0 = np.concatenate([r0, v0])
    if dt == 0:
        return y0[:3], y0[3:]
    sol = solve_ivp(rhs, (0.0, dt), y0, method="DOP853", rtol=rtol, atol=atol)
    assert sol.success
    return sol.y[:3, -1], sol.y[3:, -1]


def integrate_piecewise(r0, v0, pieces, mu=MU_SUN):
    """pieces: list of (duration, accel) integrated back to back."""
    r, v = np.asarray(r0, float), np.asarray(v0, float)
    for duration, accel in pieces:
        r, v = integrate_two_body(r, v, duration, mu, accel)
    return r, v


def bisect(f, lo, hi, tol=1e-13, max_iter=200):
    flo = f(lo)
    assert flo * f(hi) < 0, "root not bracketed"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def central_difference(fun, x, steps):
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    jac = np.zeros((f0.size, x.size))
    for j, h in enumerate(steps):
        e = np.zeros_like(x)
        e[j] = h
        jac[:, j] = (np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h)
    return jac


def blockwise_relative_error(analytic, numeric, row_blocks, col_blocks):
    """Largest per-block max|A - N| / max|N| over blocks where N is non-zero."""
    worst = 0.0
    for rs in row_blocks:
        for cs in col_blocks:
            a, n = analytic[rs, cs], numeric[rs, cs]
            scale = np.max(np.abs(n))
            if scale == 0.0:
                continue
            worst = max(worst, float(np.max(np.abs(a - n)) / scale))
    return worst
