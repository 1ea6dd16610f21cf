"""Autonomous deep-space optical navigation from line-of-sight observations.

Submodules: ``ephemeris`` (conic ephemerides, light time), ``measurement``
(LOS synthesis and noise), ``posdet`` (snapshot position fixes), ``ekf``
(light-time augmented extended Kalman filter), ``schedule``/``scenario``
(campaign assembly and execution), ``cli``.
"""

from .constants import ARCSEC, AU_KM, C_LIGHT, DAY_S, MU_SUN
from .ephemeris import Body, StateVector, body_state, kepler_propagate, solve_light_time
from .measurement import LosMeasurement, NoiseModel
from .posdet import PosDetProblem, PosDetSolution, solve_position

__version__ = "0.1.0"

__all__ = [
    "ARCSEC",
    "AU_KM",
    "Body",
    "C_LIGHT",
    "DAY_S",
    "LosMeasurement",
    "MU_SUN",
    "NoiseModel",
    "PosDetProblem",
    "PosDetSolution",
    "StateVector",
    "body_state",
    "kepler_propagate",
    "solve_light_time",
    "solve_position",
]
