"""Dataset ingestion, cleaning, hourly aggregation, labeling, and splits.

The raw schema is one CSV row per sensor reading: an ISO-8601 timestamp,
pyranometer (W/m2), external temperature (degC), and a unitless power value
used only to derive the 5-class labels.  Column names are remappable via
:class:`ColumnSchema` so published datasets with different headers ingest
without code changes.  A synthetic generator produces raw readings with the
same schema from a known daily profile, for desk-scale experiments.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace

import numpy as np

from .temporal import TimePoint, normalize_unix

HOURS_PER_DAY = 24
N_CLASSES = 5

DEFAULT_VALID_RANGES = {
    "pyranometer": (0.0, 1500.0),
    "external_temp": (-30.0, 55.0),
}
DEFAULT_SYNTHETIC_THRESHOLDS = (0.02, 0.25, 0.5, 0.75)
DEFAULT_QUANTILES = (0.5, 0.7, 0.85, 0.95)
MAX_MISSING_HOURS = 12

FIELD_NAMES = ("pyranometer", "external_temp", "power")
FEATURE_NAMES = ("pyranometer", "external_temp")


@dataclass(frozen=True)
class ColumnSchema:
    """Maps the canonical field names onto the file's column headers."""

    timestamp: str = "timestamp"
    pyranometer: str = "pyranometer"
    external_temp: str = "external_temp"
    power: str = "power"
    max_bad_fraction: float = 0.01

    def columns(self) -> dict[str, str]:
        return {
            "timestamp": self.timestamp,
            "pyranometer": self.pyranometer,
            "external_temp": self.external_temp,
            "power": self.power,
        }


@dataclass
class RawReading:
    timestamp: TimePoint
    pyranometer: float | None
    external_temp: float | None
    power: float | None


@dataclass
class SeriesSample:
    """One day: 24 hourly slots of features, observation mask, and labels."""

    date: dt.date
    time_points: list[TimePoint]
    features: np.ndarray  # (24, 2)
    mask: np.ndarray      # (24,) bool
    labels: np.ndarray    # (24,) int

    def __post_init__(self):
        if len(self.time_points) != HOURS_PER_DAY:
            raise ValueError("a sample must carry one time point per hour")


@dataclass
class DatasetSplit:
    train: list[SeriesSample]
    validation: list[SeriesSample]
    test: list[SeriesSample]
    range_start: int
    range_end: int
    thresholds: tuple[float, ...] = ()

    def all_samples(self) -> list[SeriesSample]:
        return self.train + self.validation + self.test


class IngestError(ValueError):
    pass


def _parse_timestamp(text: str, utc_offset_hours: float) -> TimePoint:
    raw = text.strip().replace("Z", "+00:00")
    when = dt.datetime.fromisoformat(raw)
    return TimePoint.from_datetime(when, utc_offset_hours)


def _parse_float(text: str) -> float | None:
    text = text.strip()
    if not text or text.lower() in ("nan", "na", "null", "none"):
        return None
    return float(text)


def ingest_csv(
    path,
    schema: ColumnSchema = ColumnSchema(),
    utc_offset_hours: float = 0.0,
) -> list[RawReading]:
    """Parse raw readings; unparseable rows are counted, not fatal.

    Raises when the header does not carry the configured columns or when the
    fraction of bad rows exceeds the schema's threshold.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in schema.columns().values() if c not in header]
        if missing:
            raise IngestError(f"{path}: header missing columns {missing}")
        readings = []
        bad = 0
        total = 0
        for row in reader:
            total += 1
            try:
                point = _parse_timestamp(row[schema.timestamp], utc_offset_hours)
                readings.append(
                    RawReading(
                        timestamp=point,
                        pyranometer=_parse_float(row[schema.pyranometer] or ""),
                        external_temp=_parse_float(row[schema.external_temp] or ""),
                        power=_parse_float(row[schema.power] or ""),
                    )
                )
            except (ValueError, KeyError, TypeError):
                bad += 1
    if total and bad / total > schema.max_bad_fraction:
        raise IngestError(
            f"{path}: {bad}/{total} unparseable rows exceeds "
            f"threshold {schema.max_bad_fraction:.2%}"
        )
    return readings


def clean(
    readings: list[RawReading],
    valid_ranges: dict[str, tuple[float, float]] | None = None,
) -> list[RawReading]:
    """Turn out-of-range field values into gaps (closed-interval bounds)."""
    ranges = dict(DEFAULT_VALID_RANGES)
    if valid_ranges:
        ranges.update(valid_ranges)
    out = []
    for r in readings:
        kept = {}
        for name in ("pyranometer", "external_temp"):
            value = getattr(r, name)
            lo, hi = ranges[name]
            kept[name] = value if value is not None and lo <= value <= hi else None
        out.append(replace(r, **kept))
    return out


@dataclass
class HourlyRecord:
    date: dt.date
    hour: int
    time_point: TimePoint
    pyranometer: float | None
    external_temp: float | None
    power: float | None


def aggregate_hourly(readings: list[RawReading]) -> list[HourlyRecord]:
    """Arithmetic mean per clock hour and field; empty hours become gaps."""
    offset = readings[0].timestamp.utc_offset_hours if readings else 0.0
    buckets: dict[tuple, dict[str, list[float]]] = {}
    for r in sorted(readings, key=lambda r: r.timestamp.unix_seconds):
        key = (r.timestamp.date, r.timestamp.hour)
        bucket = buckets.setdefault(key, {name: [] for name in FIELD_NAMES})
        for name in FIELD_NAMES:
            value = getattr(r, name)
            if value is not None:
                bucket[name].append(value)
    records = []
    for (date, hour), values in sorted(buckets.items()):
        means = {
            name: (sum(vs) / len(vs) if vs else None)
            for name, vs in values.items()
        }
        point = TimePoint.from_datetime(
            dt.datetime(date.year, date.month, date.day, hour), offset
        )
        records.append(HourlyRecord(date=date, hour=hour, time_point=point, **means))
    return records


def label_power(hourly_power: float, thresholds) -> int:
    """Class id = number of thresholds strictly below the value."""
    thresholds = list(thresholds)
    if sorted(thresholds) != thresholds or len(set(thresholds)) != len(thresholds):
        raise ValueError(f"thresholds must be strictly ascending, got {thresholds}")
    if len(thresholds) != N_CLASSES - 1:
        raise ValueError(f"expected {N_CLASSES - 1} thresholds, got {len(thresholds)}")
    return sum(1 for t in thresholds if t < hourly_power)


def build_samples(
    records: list[HourlyRecord],
    thresholds,
    max_missing_hours: int = MAX_MISSING_HOURS,
) -> list[SeriesSample]:
    """Assemble day samples; a slot is observed only when every field is present.

    Days with more than ``max_missing_hours`` missing slots are dropped.
    """
    by_date: dict[dt.date, dict[int, HourlyRecord]] = {}
    offset = records[0].time_point.utc_offset_hours if records else 0.0
    for rec in records:
        by_date.setdefault(rec.date, {})[rec.hour] = rec
    samples = []
    for date in sorted(by_date):
        hours = by_date[date]
        features = np.zeros((HOURS_PER_DAY, len(FEATURE_NAMES)))
        mask = np.zeros(HOURS_PER_DAY, dtype=bool)
        labels = np.zeros(HOURS_PER_DAY, dtype=np.int64)
        points = []
        for h in range(HOURS_PER_DAY):
            rec = hours.get(h)
            if rec is not None:
                points.append(rec.time_point)
            else:
                points.append(
                    TimePoint.from_datetime(
                        dt.datetime(date.year, date.month, date.day, h), offset
                    )
                )
            if (
                rec is not None
                and rec.pyranometer is not None
                and rec.external_temp is not None
                and rec.power is not None
            ):
                mask[h] = True
                features[h] = (rec.pyranometer, rec.external_temp)
                labels[h] = label_power(rec.power, thresholds)
        if (~mask).sum() > max_missing_hours or not mask.any():
            continue
        samples.append(
            SeriesSample(date=date, time_points=points, features=features,
                         mask=mask, labels=labels)
        )
    return samples


def _normalize_samples(samples: list[SeriesSample], start: int, end: int) -> None:
    for s in samples:
        s.time_points = normalize_unix(s.time_points, start, end)


def split_dataset(
    samples: list[SeriesSample],
    train_fraction: float = 0.7,
    validation_fraction: float = 0.15,
) -> DatasetSplit:
    """Contiguous date-blocked split; unix_norm fixed from the full extent."""
    if not samples:
        raise ValueError("cannot split an empty dataset")
    if train_fraction + validation_fraction >= 1.0:
        raise ValueError("train + validation fractions must leave room for test")
    samples = sorted(samples, key=lambda s: s.date)
    start = samples[0].time_points[0].unix_seconds
    end = samples[-1].time_points[-1].unix_seconds
    if start == end:
        end = start + 3600  # single-sample degenerate extent
    _normalize_samples(samples, start, end)
    n = len(samples)
    n_train = max(1, int(round(n * train_fraction)))
    n_val = int(round(n * validation_fraction))
    n_train = min(n_train, n - 1) if n > 1 else n
    n_val = min(n_val, n - n_train)
    return DatasetSplit(
        train=samples[:n_train],
        validation=samples[n_train : n_train + n_val],
        test=samples[n_train + n_val :],
        range_start=start,
        range_end=end,
    )


def quantile_thresholds(
    records: list[HourlyRecord], quantiles=DEFAULT_QUANTILES
) -> tuple[float, ...]:
    """Power-quantile class boundaries (night hours skew the distribution)."""
    values = np.array([r.power for r in records if r.power is not None])
    if values.size == 0:
        raise ValueError("no power readings to derive thresholds from")
    thresholds = [float(np.quantile(values, q)) for q in quantiles]
    if sorted(set(thresholds)) != thresholds:
        raise ValueError(
            "quantile thresholds are not strictly ascending; "
            "supply explicit thresholds for this dataset"
        )
    return tuple(thresholds)


def pipeline(
    readings: list[RawReading],
    thresholds=None,
    valid_ranges=None,
    train_fraction: float = 0.7,
    validation_fraction: float = 0.15,
    max_missing_hours: int = MAX_MISSING_HOURS,
) -> DatasetSplit:
    """clean -> aggregate -> (derive thresholds) -> label -> split."""
    records = aggregate_hourly(clean(readings, valid_ranges))
    if not records:
        raise ValueError("no hourly records after cleaning/aggregation")
    if thresholds is None:
        dates = sorted({r.date for r in records})
        cut = dates[: max(1, int(round(len(dates) * train_fraction)))]
        train_dates = set(cut)
        thresholds = quantile_thresholds(
            [r for r in records if r.date in train_dates]
        )
    samples = build_samples(records, thresholds, max_missing_hours)
    split = split_dataset(samples, train_fraction, validation_fraction)
    split.thresholds = tuple(float(t) for t in thresholds)
    return split


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    days: int = 60
    profile: str = "triangular"  # "triangular" | "sine"
    noise_sigma: float = 0.05
    seed: int = 0
    start_date: dt.date = dt.date(2023, 3, 1)
    thresholds: tuple[float, ...] = DEFAULT_SYNTHETIC_THRESHOLDS
    start_hour: float = 6.0
    peak_hour: float = 12.0
    end_hour: float = 18.0
    gap_fraction: float = 0.0

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("synthetic dataset needs at least one day")
        if self.profile not in ("triangular", "sine"):
            raise ValueError(f"unknown daylight profile {self.profile!r}")


def daylight_profile(hour: float, cfg: SyntheticConfig) -> float:
    """Noise-free daily shape: 0 at night, 1 at the peak hour."""
    if hour <= cfg.start_hour or hour >= cfg.end_hour:
        return 0.0
    if cfg.profile == "triangular":
        if hour <= cfg.peak_hour:
            return (hour - cfg.start_hour) / (cfg.peak_hour - cfg.start_hour)
        return (cfg.end_hour - hour) / (cfg.end_hour - cfg.peak_hour)
    return max(0.0, math.sin(2.0 * math.pi * (hour - cfg.start_hour) / 24.0))


def seasonal_amplitude(day_index: int, cfg: SyntheticConfig) -> float:
    """Slow trend in [0.55, 0.95] across the generated period."""
    return 0.75 + 0.2 * math.sin(2.0 * math.pi * day_index / max(2 * cfg.days, 90))


def generate_synthetic_readings(cfg: SyntheticConfig) -> list[RawReading]:
    """Hourly raw readings from the chosen profile; deterministic per seed.

    The power column carries the noise-free signal (so labels threshold the
    clean curve); the pyranometer-like feature adds Gaussian noise, floored
    at the physical zero.
    """
    rng = np.random.default_rng(cfg.seed)
    readings = []
    for d in range(cfg.days):
        date = cfg.start_date + dt.timedelta(days=d)
        amp = seasonal_amplitude(d, cfg)
        for h in range(HOURS_PER_DAY):
            signal = amp * daylight_profile(float(h), cfg)
            noisy = signal
            if cfg.noise_sigma > 0.0:
                noisy = max(0.0, signal + cfg.noise_sigma * rng.standard_normal())
            temp = (
                12.0
                + 8.0 * amp
                + 4.0 * math.sin(2.0 * math.pi * (h - 14.0) / 24.0)
            )
            if cfg.noise_sigma > 0.0:
                temp += cfg.noise_sigma * rng.standard_normal()
            point = TimePoint.from_datetime(dt.datetime(date.year, date.month, date.day, h))
            if cfg.gap_fraction > 0.0 and rng.random() < cfg.gap_fraction:
                readings.append(RawReading(point, None, None, None))
            else:
                readings.append(RawReading(point, noisy, temp, signal))
    return readings


def generate_synthetic(cfg: SyntheticConfig) -> DatasetSplit:
    """Synthetic readings pushed through the standard pipeline."""
    return pipeline(generate_synthetic_readings(cfg), thresholds=cfg.thresholds)


# ---------------------------------------------------------------------------
# cache files
# ---------------------------------------------------------------------------

def write_raw_csv(path, readings: list[RawReading], schema: ColumnSchema = ColumnSchema()):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [schema.timestamp, schema.pyranometer, schema.external_temp, schema.power]
        )
        for r in readings:
            writer.writerow(
                [
                    r.timestamp.isoformat(),
                    "" if r.pyranometer is None else repr(float(r.pyranometer)),
                    "" if r.external_temp is None else repr(float(r.external_temp)),
                    "" if r.power is None else repr(float(r.power)),
                ]
            )


def write_split_csv(path, samples: list[SeriesSample]) -> None:
    """Processed cache: one row per (day, hour)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "hour", "mask", "pyranometer", "external_temp", "label"])
        for s in samples:
            for h in range(HOURS_PER_DAY):
                writer.writerow(
                    [
                        s.date.isoformat(),
                        h,
                        int(s.mask[h]),
                        repr(float(s.features[h, 0])),
                        repr(float(s.features[h, 1])),
                        int(s.labels[h]),
                    ]
                )


def feature_stats(samples: list[SeriesSample]) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean/std over observed slots (for input standardization)."""
    rows = np.concatenate([s.features[s.mask] for s in samples if s.mask.any()])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std[std < 1e-9] = 1.0
    return mean, std
