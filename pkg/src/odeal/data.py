"""Observation records, CSV ingestion/export, scaling, splitting, synthesis.

An observation is one timestamped multi-sensor measurement with a per-feature
quality-control flag (Argo convention: flag 1 = good data, anything else is
bad). The instance-level label is 0 only when every feature flag is 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import (
    ConstantFeatureError,
    DimensionMismatchError,
    EmptyDatasetError,
    InvalidFlagError,
    InvalidRateError,
    MalformedRowError,
    MissingColumnError,
    NonFiniteFeatureError,
)

FEATURE_NAMES = (
    "datetime", "latitude", "longitude", "pressure", "temperature", "salinity",
)
FLAG_COLUMNS = tuple(f"flag_{name}" for name in FEATURE_NAMES)
CSV_COLUMNS = FEATURE_NAMES + FLAG_COLUMNS
FEATURE_UNITS = {
    "datetime": "UTC",
    "latitude": "degrees N",
    "longitude": "degrees E",
    "pressure": "dbar",
    "temperature": "degC",
    "salinity": "PSU",
}
GOOD_FLAG = 1
BAD_FLAG = 4


def _check_flag(value) -> int:
    flag = int(value)
    if flag != float(value) or not 1 <= flag <= 9:
        raise InvalidFlagError(value)
    return flag


def derive_instance_label(feature_flags) -> int:
    """Instance label from the six per-feature QC codes: 0 iff all flags are 1."""
    flags = [_check_flag(f) for f in feature_flags]
    if len(flags) != len(FEATURE_NAMES):
        raise InvalidFlagError(feature_flags)
    return 0 if all(f == GOOD_FLAG for f in flags) else 1


@dataclass(frozen=True)
class ObservationRecord:
    """One multi-sensor measurement; timestamp is seconds since the Unix epoch."""

    timestamp: float
    latitude: float
    longitude: float
    pressure: float
    temperature: float
    salinity: float
    flags: tuple[int, int, int, int, int, int]

    def __post_init__(self):
        for name in FEATURE_NAMES:
            value = getattr(self, "timestamp" if name == "datetime" else name)
            if not math.isfinite(value):
                raise NonFiniteFeatureError(name, value)
        object.__setattr__(self, "flags", tuple(_check_flag(f) for f in self.flags))
        if len(self.flags) != len(FEATURE_NAMES):
            raise InvalidFlagError(self.flags)

    @property
    def features(self) -> tuple[float, ...]:
        return (self.timestamp, self.latitude, self.longitude,
                self.pressure, self.temperature, self.salinity)

    @property
    def label(self) -> int:
        return derive_instance_label(self.flags)


@dataclass(frozen=True)
class Dataset:
    """Ordered records plus ground-truth labels (oracle/evaluator-only)."""

    name: str
    records: tuple[ObservationRecord, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        if len(self.records) != len(self.labels):
            raise DimensionMismatchError(
                f"{len(self.records)} records vs {len(self.labels)} labels"
            )
        if any(y not in (0, 1) for y in self.labels):
            raise InvalidFlagError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def error_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(self.labels) / len(self.labels)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        idx = list(indices)
        return Dataset(
            name=name or self.name,
            records=tuple(self.records[i] for i in idx),
            labels=tuple(self.labels[i] for i in idx),
        )


def encode_features(records) -> np.ndarray:
    """Stack records into an (n, 6) float matrix in FEATURE_NAMES order."""
    return np.array([r.features for r in records], dtype=np.float64).reshape(
        len(records), len(FEATURE_NAMES)
    )


# -- CSV ingestion / export ---------------------------------------------------

def _parse_timestamp(text: str, line_number: int) -> float:
    try:
        raw = text.strip()
        if raw.endswith("Z"):
            raw = raw[:-1] + "+00:00"
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise MalformedRowError(line_number, f"bad datetime {text!r}: {exc}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _format_timestamp(epoch_seconds: float) -> str:
    stamp = datetime.fromtimestamp(epoch_seconds, tz=timezone.utc)
    if stamp.microsecond:
        return stamp.strftime("%Y-%m-%dT%H:%M:%S.%f").rstrip("0") + "Z"
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_observations_csv(path, name: str | None = None) -> Dataset:
    """Read the documented 12-column schema; derives instance labels."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: no header") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise MissingColumnError(missing)
        if list(header) != list(CSV_COLUMNS):
            raise MalformedRowError(1, f"header must be exactly {','.join(CSV_COLUMNS)}")
        records: list[ObservationRecord] = []
        labels: list[int] = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise MalformedRowError(
                    line_number, f"expected {len(CSV_COLUMNS)} fields, got {len(row)}"
                )
            timestamp = _parse_timestamp(row[0], line_number)
            try:
                values = [float(v) for v in row[1:6]]
            except ValueError as exc:
                raise MalformedRowError(line_number, str(exc)) from exc
            flags = tuple(_check_flag(_parse_flag(v, line_number)) for v in row[6:12])
            for fname, value in zip(FEATURE_NAMES[1:], values):
                if not math.isfinite(value):
                    raise NonFiniteFeatureError(fname, value)
            records.append(ObservationRecord(timestamp, *values, flags=flags))
            labels.append(derive_instance_label(flags))
    if not records:
        raise EmptyDatasetError(f"{path}: header only, no data rows")
    return Dataset(name=name or str(path), records=tuple(records), labels=tuple(labels))


def _parse_flag(text: str, line_number: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedRowError(line_number, f"bad flag {text!r}") from None


def write_observations_csv(dataset: Dataset, path) -> None:
    """Export in the ingestion schema; float fields use shortest-roundtrip repr."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in dataset.records:
            writer.writerow(
                [_format_timestamp(record.timestamp)]
                + [repr(float(v)) for v in record.features[1:]]
                + [str(f) for f in record.flags]
            )


# -- feature scaling ----------------------------------------------------------

@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature (mean, population std) pairs fitted on a pool."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.mean.shape[0]:
            raise DimensionMismatchError(
                f"expected (n, {self.mean.shape[0]}) rows, got {rows.shape}"
            )
        return (rows - self.mean) / self.std

    def inverse_transform(self, scaled: np.ndarray) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=np.float64)
        if scaled.ndim != 2 or scaled.shape[1] != self.mean.shape[0]:
            raise DimensionMismatchError(
                f"expected (n, {self.mean.shape[0]}) rows, got {scaled.shape}"
            )
        return scaled * self.std + self.mean


@dataclass(frozen=True)
class FeatureMatrix:
    """Z-scored feature rows together with the scaler that produced them."""

    values: np.ndarray
    scaler: FeatureScaler

    def __len__(self) -> int:
        return self.values.shape[0]


def fit_scaler(rows: np.ndarray) -> FeatureScaler:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise DimensionMismatchError("scaler needs at least 2 rows")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population std
    for i, s in enumerate(std):
        if s == 0.0:
            raise ConstantFeatureError(i)
    return FeatureScaler(mean=mean, std=std)


def apply_scaler(scaler: FeatureScaler, rows: np.ndarray) -> FeatureMatrix:
    return FeatureMatrix(values=scaler.transform(rows), scaler=scaler)


def scale_features(dataset: Dataset, scaler: FeatureScaler | None = None) -> FeatureMatrix:
    rows = encode_features(dataset.records)
    if scaler is None:
        scaler = fit_scaler(rows)
    return apply_scaler(scaler, rows)


# -- stratified splitting -----------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.60
    val_frac: float = 0.20
    test_frac: float = 0.20
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise InvalidRateError(f"split fractions sum to {total}, expected 1")
        if min(self.train_frac, self.val_frac, self.test_frac) < 0:
            raise InvalidRateError("split fractions must be non-negative")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.val_frac, self.test_frac)


def largest_remainder_allocation(total: int, fractions) -> list[int]:
    """Integer allocation of `total` across fractions; remainders favor the
    largest fractional parts, ties broken by position."""
    quotas = [total * f for f in fractions]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(counts)
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(quotas[i] - counts[i]), i)
    )
    for i in remainders[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    dataset: Dataset, spec: SplitSpec
) -> tuple[Dataset, Dataset, Dataset]:
    """60/20/20-style split keeping each subset's error rate proportional.

    Positives and negatives are allocated independently by largest remainder,
    shuffled with the spec seed, and each subset keeps ascending record order.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    labels = np.asarray(dataset.labels)
    groups = [np.nonzero(labels == 1)[0], np.nonzero(labels == 0)[0]]
    buckets: list[list[int]] = [[], [], []]
    for group in groups:
        if group.size == 0:
            continue
        shuffled = group[rng.permutation(group.size)]
        counts = largest_remainder_allocation(group.size, spec.fractions)
        offset = 0
        for bucket, count in zip(buckets, counts):
            bucket.extend(shuffled[offset:offset + count].tolist())
            offset += count
    names = ("train", "val", "test")
    return tuple(
        dataset.subset(sorted(bucket), name=f"{dataset.name}/{part}")
        for bucket, part in zip(buckets, names)
    )


# -- synthetic Argo-like data -------------------------------------------------

@dataclass(frozen=True)
class ProfileShape:
    """Shape of the synthetic float profiles and injected error magnitudes."""

    levels_per_profile: int = 100
    max_pressure: float = 2000.0
    cycle_seconds: float = 86400.0
    start_epoch: float = 1553126400.0  # 2019-03-21T00:00:00Z
    start_latitude: float = 35.0
    start_longitude: float = -40.0
    drift_deg_per_profile: float = 0.05
    surface_temperature: float = 20.0
    deep_temperature: float = 2.0
    thermocline_scale: float = 300.0
    seasonal_temp_amplitude: float = 1.5
    surface_salinity: float = 36.4
    deep_salinity: float = 34.9
    halocline_scale: float = 500.0
    temperature_noise: float = 0.05
    salinity_noise: float = 0.01
    pressure_jitter: float = 2.0
    burst_min: int = 3  # a faulty sensor misbehaves over consecutive records
    burst_max: int = 6  # kept below the LOF neighborhood so bursts stay visible
    spike_scale: dict = field(default_factory=lambda: {
        "pressure": (1500.0, 4000.0),
        "temperature": (15.0, 40.0),
        "salinity": (5.0, 15.0),
    })
    offset_scale: dict = field(default_factory=lambda: {
        "pressure": (300.0, 900.0),
        "temperature": (4.0, 10.0),
        "salinity": (1.5, 4.0),
    })


ERROR_KINDS = ("spike", "stuck", "offset")
_ERROR_FEATURES = ("pressure", "temperature", "salinity")
_YEAR_SECONDS = 365.25 * 86400.0


def generate_synthetic_dataset(
    n: int,
    error_rate: float,
    seed: int,
    profile_shape: ProfileShape | None = None,
    name: str | None = None,
) -> Dataset:
    """Argo-like profiles with spike/stuck/offset errors flagged as bad data.

    The number of erroneous records is round(n * error_rate), so the realized
    rate stays within the requested tolerance for any sane (n, error_rate).
    """
    if not 0.0 < error_rate < 1.0:
        raise InvalidRateError(f"error_rate must be in (0, 1), got {error_rate}")
    if n < 100:
        raise InvalidRateError(f"n must be at least 100, got {n}")
    n_errors = int(math.floor(n * error_rate + 0.5))
    if n_errors == 0:
        raise InvalidRateError(
            f"error_rate {error_rate} rounds to zero errors for n={n}"
        )
    shape = profile_shape or ProfileShape()
    rng = np.random.default_rng(seed)

    levels = shape.levels_per_profile
    n_profiles = int(math.ceil(n / levels))
    level_idx = np.arange(n) % levels
    profile_idx = np.arange(n) // levels

    timestamps = shape.start_epoch + np.arange(n) * (shape.cycle_seconds / levels)
    lat_walk = np.cumsum(rng.normal(0.0, shape.drift_deg_per_profile, n_profiles))
    lon_walk = np.cumsum(rng.normal(0.0, shape.drift_deg_per_profile, n_profiles))
    latitude = shape.start_latitude + lat_walk[profile_idx]
    longitude = shape.start_longitude + lon_walk[profile_idx]

    pressure = level_idx * (shape.max_pressure / (levels - 1))
    pressure = pressure + rng.uniform(-shape.pressure_jitter, shape.pressure_jitter, n)
    pressure = np.maximum(pressure, 0.0)

    season = shape.seasonal_temp_amplitude * np.sin(
        2.0 * np.pi * (timestamps - shape.start_epoch) / _YEAR_SECONDS
    )
    temperature = (
        shape.deep_temperature
        + (shape.surface_temperature - shape.deep_temperature + season)
        * np.exp(-pressure / shape.thermocline_scale)
        + rng.normal(0.0, shape.temperature_noise, n)
    )
    salinity = (
        shape.deep_salinity
        + (shape.surface_salinity - shape.deep_salinity)
        * np.exp(-pressure / shape.halocline_scale)
        + rng.normal(0.0, shape.salinity_noise, n)
    )

    columns = {"pressure": pressure, "temperature": temperature, "salinity": salinity}
    flags = np.full((n, len(FEATURE_NAMES)), GOOD_FLAG, dtype=np.int64)

    # Each float has a few persistent failure modes; error bursts recur from
    # them, the way a damaged sensor keeps failing in its own particular way.
    n_modes = int(rng.integers(2, 5))
    modes = []
    for _ in range(n_modes):
        kind = ERROR_KINDS[int(rng.integers(0, len(ERROR_KINDS)))]
        feat = _ERROR_FEATURES[int(rng.integers(0, len(_ERROR_FEATURES)))]
        if kind == "spike" and feat == "pressure":
            sign = 1.0  # overrange glitches; negative pressures clip to 0
        else:
            sign = float(rng.choice((-1.0, 1.0)))
        low, high = (shape.spike_scale if kind == "spike" else shape.offset_scale)[feat]
        # each mode sticks to a narrow magnitude band; per-burst draws keep
        # repeated bursts from piling into one dense (LOF-invisible) band
        width = 0.25 * (high - low)
        center = float(rng.uniform(low + width / 2.0, high - width / 2.0))
        modes.append((kind, feat, sign, center - width / 2.0, center + width / 2.0))

    occupied = np.zeros(n, dtype=bool)
    remaining = n_errors
    while remaining > 0:
        length = min(remaining, int(rng.integers(shape.burst_min, shape.burst_max + 1)))
        start = -1
        for _ in range(200):
            candidate = int(rng.integers(0, n - length + 1))
            if not occupied[candidate:candidate + length].any():
                start = candidate
                break
        if start < 0:  # dense occupancy: fall back to single free records
            free = np.nonzero(~occupied)[0]
            start, length = int(free[0]), 1
        rows = np.arange(start, start + length)
        occupied[rows] = True
        remaining -= length

        kind, feat, sign, band_lo, band_hi = modes[int(rng.integers(0, n_modes))]
        col = columns[feat]
        if kind == "spike":
            col[rows] += sign * rng.uniform(band_lo, band_hi, size=length)
        elif kind == "offset":
            col[rows] += sign * float(rng.uniform(band_lo, band_hi))
        else:  # stuck: the sensor latches at its reading from the burst start
            col[rows] = col[rows[0]]
        if feat == "pressure":
            col[rows] = np.maximum(col[rows], 0.0)
        flags[rows, FEATURE_NAMES.index(feat)] = BAD_FLAG

    records = tuple(
        ObservationRecord(
            timestamp=float(timestamps[i]),
            latitude=float(latitude[i]),
            longitude=float(longitude[i]),
            pressure=float(pressure[i]),
            temperature=float(temperature[i]),
            salinity=float(salinity[i]),
            flags=tuple(int(f) for f in flags[i]),
        )
        for i in range(n)
    )
    labels = tuple(derive_instance_label(r.flags) for r in records)
    return Dataset(
        name=name or f"synthetic-n{n}-e{error_rate}-s{seed}",
        records=records,
        labels=labels,
    )
