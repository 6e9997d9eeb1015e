"""The four hand-specified time representations.

Schemes:

* ``tri_linear``        season-modulated triangular pulse + linear time
* ``fixed_tri_linear``  fixed pulse (start 7h, peak 13h, end 21h) + linear
* ``sine_cosine``       hour and month sine/cosine pairs
* ``sine_sawtooth``     the same sines paired with sawtooth waves

The pulse floor is 0.01 rather than 0 outside the base.  The hour sine is
phased to peak at 12:00 and the month sine to peak in June; the sawtooth
uses (shift, period) = (6, 6) for hours and (12, 12) for months.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .temporal import DEFAULT_LATITUDE, DEFAULT_LONGITUDE, TimePoint, solar_day

PULSE_FLOOR = 0.01

SCHEMES = ("tri_linear", "fixed_tri_linear", "sine_cosine", "sine_sawtooth")

HOUR_SINE_SHIFT = 6.0     # sine peaks at 12:00
HOUR_SINE_PERIOD = 24.0
MONTH_SINE_SHIFT = 3.0    # sine peaks in June
MONTH_SINE_PERIOD = 12.0
HOUR_SAW_SHIFT = 6.0
HOUR_SAW_PERIOD = 6.0
MONTH_SAW_SHIFT = 12.0
MONTH_SAW_PERIOD = 12.0


@dataclass(frozen=True)
class PulseSpec:
    """Triangular pulse endpoints in clock hours."""

    start_hour: float
    peak_hour: float
    end_hour: float
    floor: float = PULSE_FLOOR

    def __post_init__(self):
        if not self.start_hour < self.peak_hour < self.end_hour:
            raise ValueError(
                f"pulse requires start < peak < end, got "
                f"({self.start_hour}, {self.peak_hour}, {self.end_hour})"
            )
        if not 0.0 < self.floor < 1.0:
            raise ValueError(f"pulse floor must be in (0, 1), got {self.floor}")


FIXED_PULSE_SPEC = PulseSpec(start_hour=7.0, peak_hour=13.0, end_hour=21.0)


@dataclass(frozen=True)
class EmbeddingVector:
    """Per-timestamp feature vector of one time representation."""

    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.feature_names):
            raise ValueError("values and feature_names must have equal length")

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.feature_names, self.values)}


def triangular_pulse(point: TimePoint, spec: PulseSpec) -> float:
    """Piecewise-linear pulse: floor outside the base, 1 at the peak."""
    h = point.hour_of_day
    if h <= spec.start_hour or h >= spec.end_hour:
        return spec.floor
    if h <= spec.peak_hour:
        frac = (h - spec.start_hour) / (spec.peak_hour - spec.start_hour)
    else:
        frac = (spec.end_hour - h) / (spec.end_hour - spec.peak_hour)
    return spec.floor + (1.0 - spec.floor) * frac


def season_modulated_pulse(
    point: TimePoint,
    latitude: float = DEFAULT_LATITUDE,
    longitude: float = DEFAULT_LONGITUDE,
) -> float:
    """Pulse whose base tracks the date's sunrise/solar-noon/sunset."""
    day = solar_day(point.date, latitude, longitude, point.utc_offset_hours)
    spec = PulseSpec(day.sunrise_hour, day.solar_noon_hour, day.sunset_hour)
    return triangular_pulse(point, spec)


def linear_feature(point: TimePoint) -> float:
    """The unix-range position; unique per timestamp within the range."""
    if point.unix_norm is None:
        raise ValueError(
            "linear feature requires unix_norm; run normalize_unix first"
        )
    return point.unix_norm


def sawtooth(t: float, shift: float, period: float) -> float:
    """Periodic ramp scaled to [-1, 1], value -1 at each reset point."""
    x = (t - shift) / period
    return 2.0 * (x - math.floor(x)) - 1.0


def sine_cosine_embedding(point: TimePoint) -> EmbeddingVector:
    th = 2.0 * math.pi * (point.hour_of_day - HOUR_SINE_SHIFT) / HOUR_SINE_PERIOD
    tm = 2.0 * math.pi * (point.month - MONTH_SINE_SHIFT) / MONTH_SINE_PERIOD
    return EmbeddingVector(
        values=np.array([math.sin(th), math.cos(th), math.sin(tm), math.cos(tm)]),
        feature_names=("sin_hour", "cos_hour", "sin_month", "cos_month"),
    )


def sine_sawtooth_embedding(point: TimePoint) -> EmbeddingVector:
    th = 2.0 * math.pi * (point.hour_of_day - HOUR_SINE_SHIFT) / HOUR_SINE_PERIOD
    tm = 2.0 * math.pi * (point.month - MONTH_SINE_SHIFT) / MONTH_SINE_PERIOD
    return EmbeddingVector(
        values=np.array(
            [
                math.sin(th),
                sawtooth(point.hour_of_day, HOUR_SAW_SHIFT, HOUR_SAW_PERIOD),
                math.sin(tm),
                sawtooth(point.month, MONTH_SAW_SHIFT, MONTH_SAW_PERIOD),
            ]
        ),
        feature_names=("sin_hour", "saw_hour", "sin_month", "saw_month"),
    )


def embed_point(
    point: TimePoint,
    scheme: str,
    latitude: float = DEFAULT_LATITUDE,
    longitude: float = DEFAULT_LONGITUDE,
) -> EmbeddingVector:
    if scheme == "tri_linear":
        return EmbeddingVector(
            values=np.array(
                [season_modulated_pulse(point, latitude, longitude), linear_feature(point)]
            ),
            feature_names=("tri_pulse", "linear"),
        )
    if scheme == "fixed_tri_linear":
        return EmbeddingVector(
            values=np.array(
                [triangular_pulse(point, FIXED_PULSE_SPEC), linear_feature(point)]
            ),
            feature_names=("tri_pulse", "linear"),
        )
    if scheme == "sine_cosine":
        return sine_cosine_embedding(point)
    if scheme == "sine_sawtooth":
        return sine_sawtooth_embedding(point)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def embed_series(
    points: list[TimePoint],
    scheme: str,
    latitude: float = DEFAULT_LATITUDE,
    longitude: float = DEFAULT_LONGITUDE,
) -> list[EmbeddingVector]:
    """Apply one scheme element-wise over a point list."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not points:
        raise ValueError("embed_series requires a non-empty point list")
    return [embed_point(p, scheme, latitude, longitude) for p in points]


def scheme_feature_names(scheme: str) -> tuple[str, ...]:
    if scheme in ("tri_linear", "fixed_tri_linear"):
        return ("tri_pulse", "linear")
    if scheme == "sine_cosine":
        return ("sin_hour", "cos_hour", "sin_month", "cos_month")
    if scheme == "sine_sawtooth":
        return ("sin_hour", "saw_hour", "sin_month", "saw_month")
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
