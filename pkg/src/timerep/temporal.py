"""Timestamp handling, normalization schemes, and solar geometry.

All calendar fields follow a single fixed UTC offset chosen at ingestion
(default 0, i.e. UTC).  Solar geometry uses the NOAA sunrise-equation
approximation; solar noon is the midpoint of sunrise and sunset.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace

DEFAULT_LATITUDE = 38.0
DEFAULT_LONGITUDE = 23.8
MAX_SUPPORTED_LATITUDE = 66.0


class UnsupportedLatitudeError(ValueError):
    """Latitude outside the range where sunrise/sunset are well defined."""


@dataclass(frozen=True)
class TimePoint:
    """A timestamp with calendar decomposition and normalized coordinates.

    ``unix_norm`` is the position within the dataset's date range (filled by
    :func:`normalize_unix`); ``hour_norm`` is the hour-of-day index divided
    by 24.
    """

    unix_seconds: int
    year: int
    month: int
    day: int
    hour: int
    minute: int
    second: int
    hour_norm: float
    unix_norm: float | None = None
    utc_offset_hours: float = 0.0

    @classmethod
    def from_unix(cls, unix_seconds: int, utc_offset_hours: float = 0.0) -> "TimePoint":
        local = dt.datetime.fromtimestamp(
            unix_seconds + utc_offset_hours * 3600.0, tz=dt.timezone.utc
        )
        return cls(
            unix_seconds=int(unix_seconds),
            year=local.year,
            month=local.month,
            day=local.day,
            hour=local.hour,
            minute=local.minute,
            second=local.second,
            hour_norm=local.hour / 24.0,
            utc_offset_hours=utc_offset_hours,
        )

    @classmethod
    def from_datetime(cls, when: dt.datetime, utc_offset_hours: float = 0.0) -> "TimePoint":
        """Interpret a naive datetime as local clock time at the fixed offset."""
        if when.tzinfo is not None:
            unix = int(when.timestamp())
        else:
            unix = int(
                when.replace(tzinfo=dt.timezone.utc).timestamp()
                - utc_offset_hours * 3600.0
            )
        return cls.from_unix(unix, utc_offset_hours)

    @property
    def date(self) -> dt.date:
        return dt.date(self.year, self.month, self.day)

    @property
    def hour_of_day(self) -> float:
        """Clock hour including sub-hour components."""
        return self.hour + self.minute / 60.0 + self.second / 3600.0

    def to_unix(self) -> int:
        """Round-trip calendar fields back to epoch seconds."""
        local = dt.datetime(
            self.year, self.month, self.day, self.hour, self.minute, self.second,
            tzinfo=dt.timezone.utc,
        )
        return int(local.timestamp() - self.utc_offset_hours * 3600.0)

    def isoformat(self) -> str:
        return (
            f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
            f"T{self.hour:02d}:{self.minute:02d}:{self.second:02d}"
        )


@dataclass(frozen=True)
class SolarDay:
    """Sunrise, solar noon, and sunset as local clock hours for one date."""

    date: dt.date
    sunrise_hour: float
    solar_noon_hour: float
    sunset_hour: float
    latitude: float
    longitude: float


def normalize_unix(
    points: list[TimePoint], range_start: int, range_end: int
) -> list[TimePoint]:
    """Fill ``unix_norm`` as the affine position of each point in the range.

    The range must be non-degenerate and contain every point.
    """
    if range_start >= range_end:
        raise ValueError(f"degenerate range [{range_start}, {range_end}]")
    span = float(range_end - range_start)
    out = []
    for p in points:
        if not (range_start <= p.unix_seconds <= range_end):
            raise ValueError(
                f"point {p.isoformat()} ({p.unix_seconds}) outside "
                f"range [{range_start}, {range_end}]"
            )
        out.append(replace(p, unix_norm=(p.unix_seconds - range_start) / span))
    return out


def hour_index_norm(point: TimePoint) -> float:
    """Hour-of-day index divided by 24 (sub-hour components ignored)."""
    return point.hour / 24.0


def _fractional_year(date: dt.date) -> float:
    doy = date.timetuple().tm_yday
    return 2.0 * math.pi / 365.0 * (doy - 1 + 0.5)  # evaluated at local noon


def solar_day(
    date: dt.date,
    latitude: float = DEFAULT_LATITUDE,
    longitude: float = DEFAULT_LONGITUDE,
    utc_offset_hours: float = 0.0,
) -> SolarDay:
    """NOAA-style sunrise/sunset for a date; noon is their midpoint.

    Hours are local clock hours at the fixed UTC offset used everywhere else.
    Polar-day/night latitudes (|lat| >= 66 deg) are rejected.
    """
    if abs(latitude) >= MAX_SUPPORTED_LATITUDE:
        raise UnsupportedLatitudeError(
            f"latitude {latitude} not supported (|lat| must be < 66 deg)"
        )
    g = _fractional_year(date)
    eqtime = 229.18 * (
        0.000075
        + 0.001868 * math.cos(g)
        - 0.032077 * math.sin(g)
        - 0.014615 * math.cos(2 * g)
        - 0.040849 * math.sin(2 * g)
    )
    decl = (
        0.006918
        - 0.399912 * math.cos(g)
        + 0.070257 * math.sin(g)
        - 0.006758 * math.cos(2 * g)
        + 0.000907 * math.sin(2 * g)
        - 0.002697 * math.cos(3 * g)
        + 0.00148 * math.sin(3 * g)
    )
    lat = math.radians(latitude)
    cos_ha = (
        math.cos(math.radians(90.833)) / (math.cos(lat) * math.cos(decl))
        - math.tan(lat) * math.tan(decl)
    )
    if not -1.0 <= cos_ha <= 1.0:
        raise UnsupportedLatitudeError(
            f"no sunrise/sunset at latitude {latitude} on {date}"
        )
    ha = math.degrees(math.acos(cos_ha))
    sunrise_min = 720.0 - 4.0 * (longitude + ha) - eqtime
    sunset_min = 720.0 - 4.0 * (longitude - ha) - eqtime
    sunrise = sunrise_min / 60.0 + utc_offset_hours
    sunset = sunset_min / 60.0 + utc_offset_hours
    return SolarDay(
        date=date,
        sunrise_hour=sunrise,
        solar_noon_hour=0.5 * (sunrise + sunset),
        sunset_hour=sunset,
        latitude=latitude,
        longitude=longitude,
    )
