"""Scenario configuration documents (TOML).

See ``docs/config.md`` for the schema.  Shipped scenarios live in
``opnav/configs`` and can be loaded by name, e.g. ``load_config("beacon-campaign")``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constants import C_LIGHT, MU_SUN
from .ekf import FilterSettings, ThrustArc, ThrustProfile
from .ephemeris import Body, StateVector, parse_epoch, seconds_between
from .errors import ConfigError, ScheduleError
from .measurement import NoiseModel
from .schedule import TrackingSchedule, build_campaign_schedule, with_leading_coast

MODES = ("posdet", "ekf")


@dataclass(frozen=True)
class PosdetOptions:
    epoch_s: float = 0.0
    trials: int = 1000
    pos_tol_km: float = 20000.0
    dt_tol_s: float = 0.2


@dataclass(frozen=True)
class EkfOptions:
    runs: int = 1
    sigma_r_km: float = 1e5
    sigma_v_kms: float = 1e-1
    sigma_dt_s: float | None = None
    q_scale: float = 1e-12
    q_form: str = "ones"
    measurement_sigma_arcsec: float = 5.0
    coast_step_s: float = 60.0
    history_interval_s: float = 3600.0
    initial_error: str = "sampled"  # or "none"
    pos_bound_km: float = 1000.0
    vel_bound_kms: float = 2e-3


@dataclass(frozen=True)
class ScheduleOptions:
    nav_start_s: float
    beacons: tuple
    windows_s: tuple
    slew_s: float
    rate_hz: float
    cycles: int = 1
    max_duration_s: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    mode: str
    epoch0: datetime
    seed: int
    bodies: tuple
    truth0: StateVector
    thrust: ThrustProfile = field(default_factory=ThrustProfile)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(0.0))
    mu: float = MU_SUN
    c: float = C_LIGHT
    posdet: PosdetOptions = field(default_factory=PosdetOptions)
    ekf: EkfOptions = field(default_factory=EkfOptions)
    schedule_options: ScheduleOptions | None = None
    output_dir: str = "out"
    description: str = ""
    source: str = ""

    def body(self, body_id: str) -> Body:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise ConfigError(f"unknown beacon {body_id!r}; catalog has {[b.id for b in self.bodies]}")

    def schedule(self) -> TrackingSchedule:
        s = self.schedule_options
        if s is None:
            raise ConfigError("scenario has no [schedule] section")
        windows = s.windows_s[0] if len(s.windows_s) == 1 else s.windows_s
        campaign = build_campaign_schedule(
            s.nav_start_s, s.beacons, windows, s.slew_s, s.rate_hz, s.cycles, s.max_duration_s
        )
        return with_leading_coast(0.0, campaign)

    def filter_settings(self) -> FilterSettings:
        e = self.ekf
        settings = FilterSettings.nominal(
            len(self.bodies), e.sigma_r_km, e.sigma_v_kms, e.measurement_sigma_arcsec,
            e.q_scale, e.q_form, self.c,
        )
        if e.sigma_dt_s is not None:
            settings.sigma_dt = e.sigma_dt_s
        return settings

    def with_overrides(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)


class _Reader:
    """Typed access to a nested TOML table with key-path error messages."""

    def __init__(self, table, path=""):
        self.table = table
        self.path = path

    def _key(self, key):
        return f"{self.path}.{key}" if self.path else key

    def section(self, key, required=False):
        value = self.table.get(key)
        if value is None:
            if required:
                raise ConfigError(f"{self._key(key)}: missing required section")
            return None
        if not isinstance(value, dict):
            raise ConfigError(f"{self._key(key)}: expected a table")
        return _Reader(value, self._key(key))

    def get(self, key, kind, default=..., check=None, message=""):
        if key not in self.table:
            if default is ...:
                raise ConfigError(f"{self._key(key)}: missing required key")
            return default
        value = self.table[key]
        try:
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                value = float(value)
                if not math.isfinite(value):
                    raise TypeError
            elif kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
            elif kind is str:
                if not isinstance(value, str):
                    raise TypeError
        except TypeError:
            raise ConfigError(f"{self._key(key)}: expected {kind.__name__}, got {value!r}") from None
        if check is not None and not check(value):
            raise ConfigError(f"{self._key(key)}: {message or 'invalid value'} (got {value!r})")
        return value

    def floats(self, key, length=None, default=...):
        if key not in self.table and default is not ...:
            return default
        value = self.get(key, list)
        if length is not None and len(value) != length:
            raise ConfigError(f"{self._key(key)}: expected {length} numbers, got {len(value)}")
        out = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"{self._key(key)}: non-numeric entry {item!r}")
            out.append(float(item))
        return tuple(out)

    def strings(self, key):
        value = self.get(key, list)
        if not value or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{self._key(key)}: expected a non-empty list of strings")
        return tuple(value)


def _epoch(reader: _Reader, key: str) -> datetime:
    text = reader.get(key, str)
    try:
        return parse_epoch(text)
    except ValueError:
        raise ConfigError(f"{reader._key(key)}: not an ISO-8601 epoch: {text!r}") from None


def parse_config(document: dict, source: str = "") -> ScenarioConfig:
    root = _Reader(document)
    name = root.get("name", str)
    mode = root.get("mode", str, check=lambda m: m in MODES, message=f"must be one of {MODES}")
    epoch0 = _epoch(root, "epoch0")
    seed = root.get("seed", int, check=lambda s: s >= 0, message="must be non-negative")

    consts = root.section("constants")
    mu = consts.get("mu_sun", float, MU_SUN, lambda v: v > 0, "must be positive") if consts else MU_SUN
    c = consts.get("c", float, C_LIGHT, lambda v: v > 0, "must be positive") if consts else C_LIGHT

    bodies_table = root.section("bodies", required=True)
    bodies = []
    for body_id in bodies_table.table:
        b = bodies_table.section(body_id)
        state = b.floats("state0", 6)
        try:
            bodies.append(
                Body(body_id, seconds_between(epoch0, _epoch(b, "epoch0")), StateVector.from_array(state), mu)
            )
        except ValueError as exc:
            raise ConfigError(f"{b.path}: {exc}") from None
    if not bodies:
        raise ConfigError("bodies: catalog is empty")
    ids = [b.id for b in bodies]

    truth = root.section("truth", required=True)
    if "epoch0" in truth.table and _epoch(truth, "epoch0") != epoch0:
        raise ConfigError(f"{truth._key('epoch0')}: truth state must be given at the scenario epoch0")
    try:
        truth0 = StateVector.from_array(truth.floats("state0", 6))
    except ValueError as exc:
        raise ConfigError(f"truth.state0: {exc}") from None
    if not np.linalg.norm(truth0.r) > 0:
        raise ConfigError("truth.state0: position must be non-zero")

    arcs = []
    thrust = root.section("thrust")
    if thrust is not None:
        for k, arc in enumerate(thrust.get("arcs", list, [])):
            a = _Reader(arc, f"thrust.arcs[{k}]")
            try:
                arcs.append(ThrustArc(a.get("t_start_s", float), a.get("t_end_s", float), a.floats("accel_kms2", 3)))
            except ValueError as exc:
                raise ConfigError(f"{a.path}: {exc}") from None
    try:
        thrust_profile = ThrustProfile(tuple(arcs))
    except ValueError as exc:
        raise ConfigError(f"thrust.arcs: {exc}") from None

    noise_sec = root.section("noise")
    sigma = noise_sec.get("sigma_los_arcsec", float, 0.0, lambda v: v >= 0, "must be >= 0") if noise_sec else 0.0
    noise = NoiseModel.from_arcsec(sigma, seed)

    posdet = PosdetOptions()
    p = root.section("posdet")
    if p is not None:
        posdet = PosdetOptions(
            epoch_s=p.get("epoch_s", float, 0.0),
            trials=p.get("trials", int, 1000, lambda v: v >= 1, "must be >= 1"),
            pos_tol_km=p.get("pos_tol_km", float, 20000.0, lambda v: v > 0, "must be positive"),
            dt_tol_s=p.get("dt_tol_s", float, 0.2, lambda v: v > 0, "must be positive"),
        )
    elif mode == "posdet":
        raise ConfigError("posdet: missing required section for mode 'posdet'")

    ekf = EkfOptions()
    e = root.section("ekf")
    if e is not None:
        pos = lambda v: v > 0  # noqa: E731
        ekf = EkfOptions(
            runs=e.get("runs", int, 1, lambda v: v >= 1, "must be >= 1"),
            sigma_r_km=e.get("sigma_r_km", float, 1e5, pos, "must be positive"),
            sigma_v_kms=e.get("sigma_v_kms", float, 1e-1, pos, "must be positive"),
            sigma_dt_s=e.get("sigma_dt_s", float, None, pos, "must be positive"),
            q_scale=e.get("q_scale", float, 1e-12, lambda v: v >= 0, "must be >= 0"),
            q_form=e.get("q_form", str, "ones", lambda v: v in ("ones", "diagonal"), "must be 'ones' or 'diagonal'"),
            measurement_sigma_arcsec=e.get("measurement_sigma_arcsec", float, 5.0, pos, "must be positive"),
            coast_step_s=e.get("coast_step_s", float, 60.0, pos, "must be positive"),
            history_interval_s=e.get("history_interval_s", float, 3600.0, pos, "must be positive"),
            initial_error=e.get("initial_error", str, "sampled", lambda v: v in ("sampled", "none"),
                                "must be 'sampled' or 'none'"),
            pos_bound_km=e.get("pos_bound_km", float, 1000.0, pos, "must be positive"),
            vel_bound_kms=e.get("vel_bound_kms", float, 2e-3, pos, "must be positive"),
        )

    schedule_options = None
    s = root.section("schedule")
    if s is not None:
        beacons = s.strings("beacons")
        for b in beacons:
            if b not in ids:
                raise ConfigError(f"schedule.beacons: unknown beacon {b!r}; catalog has {ids}")
        windows = s.floats("windows_s")
        if len(windows) not in (1, len(beacons)):
            raise ConfigError("schedule.windows_s: give one window or one per beacon")
        schedule_options = ScheduleOptions(
            nav_start_s=s.get("nav_start_s", float, check=lambda v: v >= 0, message="must be >= 0"),
            beacons=beacons,
            windows_s=windows,
            slew_s=s.get("slew_s", float, check=lambda v: v > 0, message="must be positive"),
            rate_hz=s.get("rate_hz", float, check=lambda v: v > 0, message="must be positive"),
            cycles=s.get("cycles", int, 1, lambda v: v >= 1, "must be >= 1"),
            max_duration_s=s.get("max_duration_s", float, None, lambda v: v > 0, "must be positive"),
        )
    elif mode == "ekf":
        raise ConfigError("schedule: missing required section for mode 'ekf'")

    out = root.section("output")
    output_dir = out.get("dir", str, f"out/{name}") if out else f"out/{name}"

    config = ScenarioConfig(
        name=name, mode=mode, epoch0=epoch0, seed=seed, bodies=tuple(bodies), truth0=truth0,
        thrust=thrust_profile, noise=noise, mu=mu, c=c, posdet=posdet, ekf=ekf,
        schedule_options=schedule_options, output_dir=output_dir,
        description=root.get("description", str, ""), source=source,
    )
    if schedule_options is not None:
        try:
            config.schedule()
        except ScheduleError as exc:
            raise ConfigError(f"schedule: {exc}") from None
    return config


def shipped_configs() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("opnav.configs").iterdir() if p.name.endswith(".toml"))


def load_config(path_or_name) -> ScenarioConfig:
    """Load a scenario from a TOML file path or a shipped scenario name."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
        source = str(path)
    elif str(path_or_name) in shipped_configs():
        text = resources.files("opnav.configs").joinpath(f"{path_or_name}.toml").read_text()
        source = f"opnav.configs/{path_or_name}.toml"
    else:
        raise FileNotFoundError(f"no such config file or shipped scenario: {path_or_name}")
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return parse_config(document, source)
