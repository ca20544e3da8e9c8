"""CSV ingestion and preprocessing for multivariate sensor time series.

The raw input is a single CSV file with a header row, one column per
sensor and optionally one integer label column.  Preprocessing is a
chain of pure functions over :class:`TimeSeries`: NaN-row removal,
sensor removal, pulse-row removal, block-minimum downsampling and
per-sensor min-max normalization.  ``save_timeseries`` writes the
processed data back out as CSV with a JSON sidecar recording the
normalization parameters and the applied op chain, so a preprocessed
dataset is fully described by two files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

# Rows where any sensor leaves (low, high) are treated as pulse noise in
# headset-style EEG recordings.
EEG_PULSE_LOW = 3000.0
EEG_PULSE_HIGH = 5000.0

# Cells spelled this way (after stripping) parse as missing values.
_NAN_SPELLINGS = {"", "nan"}

SIDECAR_SUFFIX = ".meta"


@dataclass(frozen=True)
class TimeSeries:
    """A T x m block of sensor readings with optional per-row labels.

    ``values`` is float64 with one row per time step and one column per
    sensor.  ``labels`` is an optional int64 vector with one class id
    per row.  Row index is time; there is no timestamp column.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    sensor_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"need at least one row and one sensor, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise ValueError(
                    f"labels length {labels.shape} does not match row count {values.shape[0]}"
                )
            object.__setattr__(self, "labels", labels)
        names = tuple(self.sensor_names)
        if not names:
            names = tuple(f"s{j}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ValueError(f"{len(names)} sensor names for {values.shape[1]} sensors")
        object.__setattr__(self, "sensor_names", names)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.values.shape[1]

    def _replace(self, values: np.ndarray, labels: np.ndarray | None,
                 sensor_names: tuple[str, ...] | None = None) -> "TimeSeries":
        return TimeSeries(values, labels, sensor_names or self.sensor_names)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-sensor minimum and maximum used for min-max scaling."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64)
        hi = np.asarray(self.maximum, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"mismatched param shapes {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("per-sensor minimum exceeds maximum")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.asarray(d["minimum"], dtype=np.float64),
                   np.asarray(d["maximum"], dtype=np.float64))


def _parse_numeric_column(raw: pd.Series, column: str) -> np.ndarray:
    """Parse a string column to float64, reporting the first bad cell."""
    stripped = raw.str.strip()
    parsed = pd.to_numeric(stripped, errors="coerce")
    bad = parsed.isna() & ~stripped.str.lower().isin(_NAN_SPELLINGS)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ValueError(
            f"unparseable value {raw.iloc[row]!r} in column {column!r}, data row {row}"
        )
    return parsed.to_numpy(dtype=np.float64)


def load_csv(path: str | Path, label_column: str | None = None) -> TimeSeries:
    """Load a sensor CSV into a :class:`TimeSeries`.

    The file must have a header row.  All columns except the optional
    label column must parse as real numbers; missing values may be
    spelled ``NaN`` or left empty.  The label column, when named, is
    parsed as integers and split out of the value matrix.

    Args:
        path: CSV file to read.
        label_column: Name of the integer class-id column, if any.

    Returns:
        TimeSeries with values in file row order.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if frame.shape[0] == 0:
        raise ValueError(f"{path} contains no data rows")
    columns = list(frame.columns)
    labels = None
    if label_column is not None:
        if label_column not in columns:
            raise ValueError(f"label column {label_column!r} not found in {columns}")
        raw_labels = _parse_numeric_column(frame[label_column], label_column)
        if np.any(~np.isfinite(raw_labels)) or np.any(raw_labels != np.round(raw_labels)):
            bad = int(np.flatnonzero(~np.isfinite(raw_labels) | (raw_labels != np.round(raw_labels)))[0])
            raise ValueError(
                f"label column {label_column!r} has non-integer value at data row {bad}"
            )
        labels = raw_labels.astype(np.int64)
        columns.remove(label_column)
    if not columns:
        raise ValueError("no sensor columns left after removing the label column")
    values = np.column_stack([_parse_numeric_column(frame[c], c) for c in columns])
    return TimeSeries(values, labels, tuple(columns))


def drop_nan_rows(ts: TimeSeries) -> TimeSeries:
    """Remove every row containing at least one NaN, keeping row order."""
    keep = ~np.isnan(ts.values).any(axis=1)
    if not keep.any():
        raise ValueError("all rows contain NaN values")
    labels = ts.labels[keep] if ts.labels is not None else None
    return ts._replace(ts.values[keep], labels)


def drop_sensor(ts: TimeSeries, name: str) -> TimeSeries:
    """Remove one named sensor column."""
    if name not in ts.sensor_names:
        raise ValueError(f"unknown sensor {name!r}; have {ts.sensor_names}")
    if ts.n_sensors == 1:
        raise ValueError("cannot drop the last remaining sensor")
    j = ts.sensor_names.index(name)
    values = np.delete(ts.values, j, axis=1)
    names = ts.sensor_names[:j] + ts.sensor_names[j + 1:]
    return ts._replace(values, ts.labels, names)


def remove_pulse_rows(ts: TimeSeries, low: float = EEG_PULSE_LOW,
                      high: float = EEG_PULSE_HIGH) -> TimeSeries:
    """Remove rows where any sensor value is below ``low`` or above ``high``.

    Survivor rows keep their original order.  Defaults match headset
    EEG recordings where excursions outside (3000, 5000) are pulse
    noise.
    """
    if not low < high:
        raise ValueError(f"low threshold {low} must be below high threshold {high}")
    bad = (ts.values < low) | (ts.values > high)
    keep = ~bad.any(axis=1)
    if not keep.any():
        raise ValueError("pulse removal would delete every row")
    labels = ts.labels[keep] if ts.labels is not None else None
    return ts._replace(ts.values[keep], labels)


def downsample_block_min(ts: TimeSeries, factor: int) -> TimeSeries:
    """Downsample by taking the elementwise minimum of consecutive blocks.

    The rows are split into consecutive non-overlapping blocks of
    ``factor`` rows (a final partial block is kept).  Each output row is
    the columnwise minimum of its block; the output label is the label
    of the block's first row.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return ts
    starts = np.arange(0, ts.n_steps, factor)
    values = np.minimum.reduceat(ts.values, starts, axis=0)
    labels = ts.labels[starts] if ts.labels is not None else None
    return ts._replace(values, labels)


def normalize_min_max(ts: TimeSeries) -> tuple[TimeSeries, NormalizationParams]:
    """Scale each sensor to [0, 1] by its own (min, max) range.

    Constant sensors map to 0.0.  Returns the per-sensor ranges so the
    same scaling can be applied to new data or inverted later.
    """
    if np.isnan(ts.values).any():
        raise ValueError("normalize_min_max requires NaN-free values; cleanse first")
    scaled, params = minmax_scale(ts.values)
    return ts._replace(scaled, ts.labels), params


def minmax_scale(values: np.ndarray) -> tuple[np.ndarray, NormalizationParams]:
    """Columnwise (v - min) / (max - min); constant columns map to 0."""
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    safe = np.where(span == 0.0, 1.0, span)
    scaled = (values - lo) / safe
    scaled[:, span == 0.0] = 0.0
    return scaled, NormalizationParams(lo, hi)


def apply_minmax(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Apply previously computed min-max scaling to new rows."""
    span = params.maximum - params.minimum
    safe = np.where(span == 0.0, 1.0, span)
    scaled = (values - params.minimum) / safe
    scaled[..., span == 0.0] = 0.0
    return scaled


# ---------------------------------------------------------------------------
# Dataset profiles: canned preprocessing pipelines so one command
# reproduces a documented dataset preparation.
# ---------------------------------------------------------------------------

DATASET_PROFILES = ("eeg", "pamap2", "pulp", "generic")


def apply_profile(ts: TimeSeries, profile: str, *,
                  pulse_low: float = EEG_PULSE_LOW,
                  pulse_high: float = EEG_PULSE_HIGH,
                  drop_sensors: tuple[str, ...] = (),
                  downsample: int = 1,
                  heart_rate_sensor: str = "heart_rate",
                  ) -> tuple[TimeSeries, NormalizationParams, list[dict]]:
    """Run a named preprocessing pipeline over a raw series.

    Profiles:
      * ``eeg``: pulse-row removal with (pulse_low, pulse_high), then
        min-max normalization.
      * ``pamap2``: drop the heart-rate sensor, drop NaN rows,
        block-min downsample by 10 (100 Hz to 10 Hz), then normalize.
      * ``pulp``: min-max normalization only.
      * ``generic``: optional sensor drops, NaN-row drop, optional
        downsampling, then normalize.

    Returns the processed series, its normalization parameters, and the
    op chain as a list of records for the sidecar.
    """
    if profile not in DATASET_PROFILES:
        raise ValueError(f"unknown dataset profile {profile!r}; expected one of {DATASET_PROFILES}")
    ops: list[dict] = []
    if profile == "eeg":
        ts = remove_pulse_rows(ts, pulse_low, pulse_high)
        ops.append({"op": "remove_pulse_rows", "low": pulse_low, "high": pulse_high})
    elif profile == "pamap2":
        ts = drop_sensor(ts, heart_rate_sensor)
        ops.append({"op": "drop_sensor", "name": heart_rate_sensor})
        ts = drop_nan_rows(ts)
        ops.append({"op": "drop_nan_rows"})
        ts = downsample_block_min(ts, 10)
        ops.append({"op": "downsample_block_min", "factor": 10})
    elif profile == "generic":
        for name in drop_sensors:
            ts = drop_sensor(ts, name)
            ops.append({"op": "drop_sensor", "name": name})
        ts = drop_nan_rows(ts)
        ops.append({"op": "drop_nan_rows"})
        if downsample > 1:
            ts = downsample_block_min(ts, downsample)
            ops.append({"op": "downsample_block_min", "factor": downsample})
    ts, params = normalize_min_max(ts)
    ops.append({"op": "normalize_min_max"})
    return ts, params, ops


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def sidecar_path(csv_path: str | Path) -> Path:
    return Path(str(csv_path) + SIDECAR_SUFFIX)


def save_timeseries(ts: TimeSeries, path: str | Path,
                    label_column: str = "label",
                    params: NormalizationParams | None = None,
                    ops: list[dict] | None = None) -> None:
    """Write a series as CSV plus a JSON sidecar.

    The CSV layout matches the ingestion format (sensor columns plus an
    optional label column).  The sidecar records sensor names, the
    normalization parameters and the op chain that produced the file.
    """
    path = Path(path)
    frame = pd.DataFrame(ts.values, columns=list(ts.sensor_names))
    if ts.labels is not None:
        frame[label_column] = ts.labels
    frame.to_csv(path, index=False)
    meta = {
        "sensor_names": list(ts.sensor_names),
        "label_column": label_column if ts.labels is not None else None,
        "n_steps": ts.n_steps,
        "ops": ops or [],
        "normalization": params.to_dict() if params is not None else None,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_sidecar(csv_path: str | Path) -> dict | None:
    """Read the JSON sidecar next to a preprocessed CSV, if present."""
    p = sidecar_path(csv_path)
    if not p.exists():
        return None
    return json.loads(p.read_text())


def load_preprocessed(path: str | Path, label_column: str | None = None,
                      ) -> tuple[TimeSeries, NormalizationParams | None]:
    """Load a preprocessed CSV, using its sidecar for the label column."""
    meta = load_sidecar(path)
    if label_column is None and meta is not None:
        label_column = meta.get("label_column")
    ts = load_csv(path, label_column=label_column)
    params = None
    if meta is not None and meta.get("normalization"):
        params = NormalizationParams.from_dict(meta["normalization"])
    return ts, params
