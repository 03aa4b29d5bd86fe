"""Dataset ingestion, windowing, and synthetic generators.

CSV schemas (documented in the README):
  series  — wide: ``timestamp,<feature>...``; strictly increasing
            timestamps; blank cells forward-filled up to 3 rows.
  sensors — ``id,lat,lon,<feature>...``
  streets — ``node_id,street_id`` (one row per membership)
  citypulse — long: ``timestamp,sensor_id,lat,lon,<measurement>...``;
            converted to a per-timestamp mean series plus sensor nodes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .numerics import NormalizationParams, min_max_normalize_matrix
from .spatial.graph import SensorNode

FFILL_CAP = 3  # longest run of missing values the loader will impute
DEFAULT_SPLITS = (0.8, 0.1, 0.1)


class SchemaError(ValueError):
    """Loader rejection with row/column diagnostics."""


@dataclass
class TimeSeriesDataset:
    id: str
    timestamps: list
    values: np.ndarray  # normalized, rows = time, cols = features
    feature_names: list
    target: str
    norm: NormalizationParams
    split_fractions: tuple = DEFAULT_SPLITS
    sensor_ids: list = field(default_factory=list)
    valid_rows: np.ndarray | None = None  # False where imputation gave up

    def __post_init__(self):
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.target not in self.feature_names:
            raise ValueError(f"target {self.target!r} not among features")
        if self.valid_rows is None:
            self.valid_rows = np.ones(self.values.shape[0], dtype=bool)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def target_index(self) -> int:
        return self.feature_names.index(self.target)

    def target_norm(self) -> NormalizationParams:
        idx = self.target_index
        return NormalizationParams(
            mins=self.norm.mins[idx : idx + 1], maxs=self.norm.maxs[idx : idx + 1]
        )

    def windows(self, window: int):
        """All one-step-ahead windows not touching an invalid row."""
        xs, ys, ends = [], [], []
        tgt = self.target_index
        for end in range(window, self.n_steps):
            if not self.valid_rows[end - window : end + 1].all():
                continue
            xs.append(self.values[end - window : end])
            ys.append(self.values[end, tgt])
            ends.append(end)
        if not xs:
            return np.zeros((0, window, len(self.feature_names))), np.zeros(0), []
        return np.stack(xs), np.array(ys), ends

    def window_splits(self, window: int) -> dict:
        x, y, ends = self.windows(window)
        n = x.shape[0]
        n_train = int(round(self.split_fractions[0] * n))
        n_val = int(round(self.split_fractions[1] * n))
        return {
            "train": (x[:n_train], y[:n_train]),
            "val": (x[n_train : n_train + n_val], y[n_train : n_train + n_val]),
            "test": (x[n_train + n_val :], y[n_train + n_val :]),
            "ends": ends,
        }


def _parse_timestamp(raw: str, line: int):
    text = raw.strip()
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"line {line}: unparseable timestamp {raw!r}") from None


def _forward_fill(columns: np.ndarray, cap: int = FFILL_CAP):
    """Impute short gaps per column; rows in longer gaps stay invalid."""
    filled = columns.copy()
    valid = np.ones(columns.shape[0], dtype=bool)
    for col in range(columns.shape[1]):
        run = 0
        last = np.nan
        for row in range(columns.shape[0]):
            if np.isnan(filled[row, col]):
                run += 1
                if run <= cap and not np.isnan(last):
                    filled[row, col] = last
                else:
                    valid[row] = False
            else:
                run = 0
                last = filled[row, col]
    return filled, valid


def load_series_csv(source, dataset_id: str = "series", target: str | None = None,
                    split_fractions: tuple = DEFAULT_SPLITS) -> TimeSeriesDataset:
    """Wide-format series loader; rejects rather than coerces bad rows."""
    rows, header = _read_csv(source)
    if len(header) < 2:
        raise SchemaError("series CSV needs a timestamp column plus features")
    if header[0] != "timestamp":
        raise SchemaError(f"first column must be 'timestamp', got {header[0]!r}")
    feature_names = header[1:]

    timestamps, parsed, raw = [], [], []
    for line, row in rows:
        if len(row) != len(header):
            raise SchemaError(f"line {line}: expected {len(header)} cells, got {len(row)}")
        ts = _parse_timestamp(row[0], line)
        if parsed and ts == parsed[-1]:
            raise SchemaError(f"line {line}: duplicate timestamp {row[0]!r}")
        if parsed and ts < parsed[-1]:
            raise SchemaError(f"line {line}: timestamps not increasing at {row[0]!r}")
        parsed.append(ts)
        timestamps.append(row[0].strip())
        vals = []
        for col, cell in enumerate(row[1:], start=1):
            cell = cell.strip()
            if cell == "":
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise SchemaError(
                    f"line {line}, column {header[col]!r}: not a number: {cell!r}"
                ) from None
        raw.append(vals)

    if not raw:
        raise SchemaError("series CSV has no data rows")
    matrix, valid = _forward_fill(np.array(raw, dtype=float))
    matrix = np.where(np.isnan(matrix), 0.0, matrix)
    normalized, norm = min_max_normalize_matrix(matrix)
    return TimeSeriesDataset(
        id=dataset_id,
        timestamps=timestamps,
        values=normalized,
        feature_names=feature_names,
        target=target or feature_names[0],
        norm=norm,
        split_fractions=split_fractions,
        valid_rows=valid,
    )


def load_sensors_csv(source) -> list:
    rows, header = _read_csv(source)
    if header[:3] != ["id", "lat", "lon"] or len(header) < 4:
        raise SchemaError("sensors CSV must start with id,lat,lon and carry features")
    nodes = []
    seen = set()
    for line, row in rows:
        if len(row) != len(header):
            raise SchemaError(f"line {line}: expected {len(header)} cells, got {len(row)}")
        nid = row[0].strip()
        if nid in seen:
            raise SchemaError(f"line {line}: duplicate sensor id {nid!r}")
        seen.add(nid)
        try:
            lat, lon = float(row[1]), float(row[2])
            feats = [float(c) for c in row[3:]]
        except ValueError:
            raise SchemaError(f"line {line}: non-numeric cell") from None
        nodes.append(SensorNode(id=nid, latitude=lat, longitude=lon, features=feats))
    if not nodes:
        raise SchemaError("sensors CSV has no data rows")
    return nodes


def load_streets_csv(source) -> dict:
    rows, header = _read_csv(source)
    if header != ["node_id", "street_id"]:
        raise SchemaError("streets CSV must have exactly node_id,street_id")
    table: dict[str, set] = {}
    for line, row in rows:
        if len(row) != 2:
            raise SchemaError(f"line {line}: expected 2 cells, got {len(row)}")
        table.setdefault(row[0].strip(), set()).add(row[1].strip())
    return table


def load_citypulse_csv(source, dataset_id: str = "citypulse",
                       target: str | None = None) -> tuple:
    """Long-format loader: mean series across sensors plus the sensor list."""
    rows, header = _read_csv(source)
    required = ["timestamp", "sensor_id", "lat", "lon"]
    if header[:4] != required or len(header) < 5:
        raise SchemaError(
            "citypulse CSV must start with timestamp,sensor_id,lat,lon"
        )
    measures = header[4:]
    by_time: dict[str, list] = {}
    sensor_rows: dict[str, dict] = {}
    time_order: list[str] = []
    for line, row in rows:
        if len(row) != len(header):
            raise SchemaError(f"line {line}: expected {len(header)} cells, got {len(row)}")
        _parse_timestamp(row[0], line)
        try:
            lat, lon = float(row[2]), float(row[3])
            vals = [float(c) for c in row[4:]]
        except ValueError:
            raise SchemaError(f"line {line}: non-numeric cell") from None
        key = row[0].strip()
        if key not in by_time:
            time_order.append(key)
            by_time[key] = []
        by_time[key].append(vals)
        entry = sensor_rows.setdefault(
            row[1].strip(), {"lat": lat, "lon": lon, "sum": np.zeros(len(measures)), "n": 0}
        )
        entry["sum"] += np.array(vals)
        entry["n"] += 1

    series_rows = [np.mean(by_time[k], axis=0) for k in time_order]
    csv_text = io.StringIO()
    writer = csv.writer(csv_text)
    writer.writerow(["timestamp"] + measures)
    for ts, vals in zip(time_order, series_rows):
        writer.writerow([ts] + [f"{v:.10g}" for v in vals])
    csv_text.seek(0)
    dataset = load_series_csv(csv_text, dataset_id=dataset_id, target=target)

    nodes = [
        SensorNode(
            id=sid,
            latitude=info["lat"],
            longitude=info["lon"],
            features=info["sum"] / info["n"],
        )
        for sid, info in sorted(sensor_rows.items())
    ]
    return dataset, nodes


def _read_csv(source):
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise SchemaError("empty CSV")
    header = [cell.strip() for cell in rows[0][1]]
    return [(line, row) for line, row in rows[1:]], header


# ---------------------------------------------------------------------------
# Synthetic generators.
# ---------------------------------------------------------------------------


@dataclass
class SynthSeriesSpec:
    n_points: int = 2000
    n_features: int = 2
    periods: tuple = (24.0, 8.0)
    amplitudes: tuple = (1.0, 0.3)
    phases: tuple = (0.0, 0.7)
    trend: float = 3e-4
    noise: float = 0.01
    seed: int = 7


def synth_series_closed_form(spec: SynthSeriesSpec) -> np.ndarray:
    """Noise-free generator values (also the reference for tests)."""
    t = np.arange(spec.n_points, dtype=float)
    base = sum(
        a * np.sin(2 * np.pi * t / p + ph)
        for a, p, ph in zip(spec.amplitudes, spec.periods, spec.phases)
    ) + spec.trend * t
    columns = [base]
    for j in range(1, spec.n_features):
        columns.append(
            sum(
                a * np.cos(2 * np.pi * t / p + ph * j)
                for a, p, ph in zip(spec.amplitudes, spec.periods, spec.phases)
            )
            + spec.trend * t / (j + 1)
        )
    return np.stack(columns, axis=1)


def synth_series(spec: SynthSeriesSpec | None = None,
                 dataset_id: str = "synth") -> TimeSeriesDataset:
    spec = spec or SynthSeriesSpec()
    rng = np.random.default_rng(spec.seed)
    raw = synth_series_closed_form(spec)
    raw = raw + rng.normal(0.0, spec.noise, size=raw.shape) if spec.noise else raw
    normalized, norm = min_max_normalize_matrix(raw)
    feature_names = [f"f{j}" for j in range(spec.n_features)]
    return TimeSeriesDataset(
        id=dataset_id,
        timestamps=[str(i) for i in range(spec.n_points)],
        values=normalized,
        feature_names=feature_names,
        target=feature_names[0],
        norm=norm,
    )


@dataclass
class SynthSensorsSpec:
    blobs: int = 3
    per_blob: int = 8
    feature_dim: int = 3
    geo_spread: float = 0.01
    feature_jitter: float = 0.05
    bridge_pairs: tuple = ((0, 1),)  # blob pairs sharing a street
    seed: int = 7


def synth_sensors(spec: SynthSensorsSpec | None = None) -> tuple:
    """Planted sensor blobs; returns (nodes, ground-truth labels)."""
    spec = spec or SynthSensorsSpec()
    rng = np.random.default_rng(spec.seed)
    centers_geo = [
        (56.0 + 0.2 * (b % 3), 10.0 + 0.2 * (b // 3)) for b in range(spec.blobs)
    ]
    profiles = np.eye(spec.blobs, spec.feature_dim) * 0.9 + 0.1
    if spec.feature_dim > spec.blobs:
        profiles = np.hstack(
            [profiles, np.full((spec.blobs, spec.feature_dim - spec.blobs), 0.1)]
        )
    bridges = {tuple(sorted(p)) for p in spec.bridge_pairs}
    nodes, labels = [], []
    for b in range(spec.blobs):
        lat0, lon0 = centers_geo[b]
        for i in range(spec.per_blob):
            streets = {f"street-{b}"}
            for pair in bridges:
                if b in pair and i < 2:  # two gateway nodes per bridged blob
                    streets.add(f"bridge-{pair[0]}-{pair[1]}")
            nodes.append(
                SensorNode(
                    id=f"b{b}n{i}",
                    latitude=lat0 + float(rng.normal(0, spec.geo_spread)),
                    longitude=lon0 + float(rng.normal(0, spec.geo_spread)),
                    features=np.clip(
                        profiles[b, : spec.feature_dim]
                        + rng.normal(0, spec.feature_jitter, spec.feature_dim),
                        0.0,
                        None,
                    ),
                    streets=frozenset(streets),
                )
            )
            labels.append(b)
    return nodes, np.array(labels, dtype=int)
