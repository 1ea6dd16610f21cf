"""Tracking schedules: coast, slew and single-beacon track segments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ScheduleError

_EPS = 1e-9


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    kind: str  # "coast" | "slew" | "track"
    beacon_id: str | None = None
    rate: float | None = None  # Hz, track segments only

    def __post_init__(self):
        if self.kind not in ("coast", "slew", "track"):
            raise ScheduleError(f"unknown segment kind {self.kind!r}")
        if not self.t_end >= self.t_start:
            raise ScheduleError(f"segment ends before it starts: {self}")
        if self.kind == "track" and not (self.rate and self.rate > 0 and self.beacon_id):
            raise ScheduleError("track segments need a beacon id and a positive rate")

    @property
    def label(self) -> str:
        return f"track:{self.beacon_id}" if self.kind == "track" else self.kind

    def measurement_epochs(self) -> list[float]:
        """Sample epochs t_start + k / rate, fencepost at t_start included."""
        if self.kind != "track":
            return []
        period = 1.0 / self.rate
        count = math.floor((self.t_end - self.t_start) * self.rate + _EPS) + 1
        return [self.t_start + k * period for k in range(count)]


@dataclass(frozen=True)
class TrackingSchedule:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        for a, b in zip(segs, segs[1:]):
            if b.t_start != a.t_end:
                raise ScheduleError(
                    f"segments must tile time: {a.label} ends at {a.t_end!r}, "
                    f"{b.label} starts at {b.t_start!r}"
                )
        object.__setattr__(self, "segments", segs)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def boundaries(self) -> list[float]:
        return [self.segments[0].t_start] + [s.t_end for s in self.segments]

    def measurement_plan(self) -> list[tuple[float, str]]:
        """All (epoch, beacon_id) pairs to be observed, in time order."""
        return [(t, s.beacon_id) for s in self.segments for t in s.measurement_epochs()]


def build_campaign_schedule(
    t_nav_start: float,
    beacons: Sequence[str],
    window: float | Sequence[float] = 4320.0,
    slew: float = 1200.0,
    rate: float = 0.1,
    cycles: int = 1,
    max_duration: float | None = None,
) -> TrackingSchedule:
    """One-beacon-at-a-time campaign starting at ``t_nav_start``.

    Each cycle tracks ``beacons`` in order; ``window`` is either one duration
    or one per beacon.  A slew (dead time) is inserted whenever consecutive
    windows point at different beacons.  ``max_duration`` truncates the
    campaign, clipping the segment that crosses it.
    """
    beacons = list(beacons)
    if not beacons:
        raise ScheduleError("campaign needs at least one beacon")
    windows = [float(window)] * len(beacons) if isinstance(window, (int, float)) else [float(w) for w in window]
    if len(windows) != len(beacons):
        raise ScheduleError(f"{len(windows)} windows given for {len(beacons)} beacons")
    if min(windows) <= 0 or slew <= 0:
        raise ScheduleError("window and slew durations must be positive")
    if rate <= 0 or cycles < 1:
        raise ScheduleError("rate must be positive and cycles >= 1")

    t_stop = math.inf if max_duration is None else t_nav_start + max_duration
    segments = []
    t = float(t_nav_start)
    previous = None
    for _ in range(cycles):
        for beacon, win in zip(beacons, windows):
            if t >= t_stop:
                break
            if previous is not None and beacon != previous:
                end = min(t + slew, t_stop)
                segments.append(Segment(t, end, "slew"))
                t = end
                if t >= t_stop:
                    break
            end = min(t + win, t_stop)
            if segments and segments[-1].kind == "track" and segments[-1].beacon_id == beacon:
                segments[-1] = Segment(segments[-1].t_start, end, "track", beacon, rate)
            else:
                segments.append(Segment(t, end, "track", beacon, rate))
            t = end
            previous = beacon
    return TrackingSchedule(tuple(segments))


def with_leading_coast(t0: float, campaign: TrackingSchedule) -> TrackingSchedule:
    """Prefix a coast arc from ``t0`` to the campaign start."""
    if campaign.t_start < t0:
        raise ScheduleError("campaign starts before the scenario epoch")
    if campaign.t_start == t0:
        return campaign
    return TrackingSchedule((Segment(t0, campaign.t_start, "coast"),) + campaign.segments)
