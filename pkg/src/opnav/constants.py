"""Physical constants and unit helpers (km, s, rad)."""

import math

#: Speed of light in vacuum [km/s].
C_LIGHT = 299792.458

#: Heliocentric gravitational parameter [km^3/s^2] (IAU 2009).
MU_SUN = 1.32712440018e11

#: Astronomical unit [km].
AU_KM = 1.495978707e8

DAY_S = 86400.0

ARCSEC = math.pi / (180.0 * 3600.0)
