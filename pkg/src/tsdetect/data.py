"""Dataset ingestion, normalization, window sampling, and the sine benchmark.

CSV format: header row of column names, then one comma-separated row of
floats per timestamp. Optional companions: `<file>.labels.csv` (single 0/1
column, no header) and `<file>.bounds.csv` (integer channel-concatenation
boundaries, one per line).
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np


class DataError(RuntimeError):
    """Malformed or inconsistent dataset files."""


@dataclass
class TimeSeries:
    values: np.ndarray                 # T x D
    column_names: list
    labels: np.ndarray | None = None   # T, 0/1
    bounds: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("values must be a T x D matrix")
        if len(self.column_names) != self.values.shape[1]:
            raise DataError("column_names length must match D")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8)
            if self.labels.shape != (len(self.values),):
                raise DataError(
                    f"labels length {self.labels.shape} != series length "
                    f"{len(self.values)}")
            if not np.isin(self.labels, (0, 1)).all():
                raise DataError("labels must be 0/1")

    def __len__(self):
        return len(self.values)

    @property
    def dim(self):
        return self.values.shape[1]

    def segments(self):
        """Contiguous index ranges [start, stop) that no window may cross."""
        edges = [0] + sorted(self.bounds) + [len(self)]
        return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def labels_path(path):
    return str(path) + ".labels.csv"


def bounds_path(path):
    return str(path) + ".bounds.csv"


def load_series(path):
    """Load a TimeSeries from CSV plus optional label/boundary companions."""
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} columns, "
                                f"got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({e})") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64)
    if np.isnan(values).any():
        raise DataError(f"{path}: NaN cells are rejected")

    labels = None
    if os.path.exists(labels_path(path)):
        labels = _load_single_column(labels_path(path), int)
        if len(labels) != len(values):
            raise DataError(
                f"{labels_path(path)}: label length {len(labels)} != series "
                f"length {len(values)}")
    bounds = []
    if os.path.exists(bounds_path(path)):
        bounds = [int(b) for b in _load_single_column(bounds_path(path), int)]
    return TimeSeries(values, header, labels=labels, bounds=bounds,
                      name=os.path.basename(str(path)))


def _load_single_column(path, cast):
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(cast(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad value {line!r}") from None
    return np.asarray(out)


def save_series(series, path):
    """Write a TimeSeries (and its labels, when present) in the CSV format."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(series.column_names)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])
    if series.labels is not None:
        with open(labels_path(path), "w") as f:
            f.writelines(f"{int(v)}\n" for v in series.labels)
    if series.bounds:
        with open(bounds_path(path), "w") as f:
            f.writelines(f"{int(b)}\n" for b in series.bounds)


STD_FLOOR = 1e-8


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def fit_normalize(train):
    """Per-column mean/std on the training series, std floored at 1e-8."""
    if len(train) < 2:
        raise DataError("need at least 2 timestamps to fit normalization")
    mean = train.values.mean(axis=0)
    std = np.maximum(train.values.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_normalize(series, stats):
    return TimeSeries((series.values - stats.mean) / stats.std,
                      series.column_names, labels=series.labels,
                      bounds=list(series.bounds), name=series.name)


def window_starts(series, n):
    """All starts s such that [s, s+n) stays within one boundary segment."""
    starts = []
    for a, b in series.segments():
        starts.extend(range(a, b - n + 1))
    return starts


def sample_window(series, n, rng):
    """Uniform random contiguous window of n timestamps, respecting bounds."""
    starts = window_starts(series, n)
    if not starts:
        raise DataError(f"series too short for window size {n}")
    start = starts[int(rng.integers(0, len(starts)))]
    return series.values[start:start + n]


@dataclass
class SineConfig:
    period: int = 50
    amplitude: float = 1.0
    noise_std: float = 0.05
    train_len: int = 20000
    test_len: int = 2000
    anomaly_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.period < 4:
            raise ValueError("period must be >= 4")
        if self.train_len < 10 * self.period:
            raise ValueError("train_len must cover at least 10 periods")


TYPICAL_KINDS = ("global", "contextual", "shapelet", "seasonal", "trend")


def _base_wave(config, t, rng):
    clean = config.amplitude * np.sin(2 * np.pi * t / config.period)
    return clean, clean + rng.normal(0.0, config.noise_std, size=len(t))


def _isolated_points(length, count, rng):
    """`count` indices with pairwise distance >= 2 (no adjacent picks)."""
    picks = []
    taken = np.zeros(length, dtype=bool)
    while len(picks) < count:
        i = int(rng.integers(1, length - 1))
        if taken[max(0, i - 1):i + 2].any():
            continue
        taken[i] = True
        picks.append(i)
    return sorted(picks)


def _segments(length, total, seg_len, rng):
    """Disjoint non-adjacent segments of seg_len covering ~`total` points."""
    count = max(1, round(total / seg_len))
    segs = []
    taken = np.zeros(length, dtype=bool)
    attempts = 0
    while len(segs) < count and attempts < 10000:
        attempts += 1
        s = int(rng.integers(0, length - seg_len + 1))
        if taken[max(0, s - 1):s + seg_len + 1].any():
            continue
        taken[s:s + seg_len] = True
        segs.append((s, s + seg_len))
    return sorted(segs)


def generate_sine_dataset(config):
    """Clean training wave plus five test slices, one per typical outlier type.

    Returns (train, {kind: test_slice}) with exact construction labels.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    a = config.amplitude
    sigma = config.noise_std

    t_train = np.arange(config.train_len)
    _, train_vals = _base_wave(config, t_train, rng)
    train = TimeSeries(train_vals[:, None], ["value"], name="sine_train")

    tests = {}
    offset = config.train_len
    n_pts = int(round(config.anomaly_rate * config.test_len))
    for kind in TYPICAL_KINDS:
        t = np.arange(offset, offset + config.test_len)
        offset += config.test_len
        clean, vals = _base_wave(config, t, rng)
        labels = np.zeros(config.test_len, dtype=np.int8)

        if kind == "global":
            for i in _isolated_points(config.test_len, n_pts, rng):
                sign = rng.choice([-1.0, 1.0])
                vals[i] = sign * (3 * a + rng.uniform(0, a))
                labels[i] = 1
        elif kind == "contextual":
            band = a + 3 * sigma
            for i in _isolated_points(config.test_len, n_pts, rng):
                dev = rng.uniform(4 * sigma, 8 * sigma)
                sign = rng.choice([-1.0, 1.0])
                if abs(clean[i] + sign * dev) > band:
                    sign = -sign
                vals[i] = clean[i] + sign * dev
                labels[i] = 1
        elif kind == "shapelet":
            for s, e in _segments(config.test_len, n_pts, config.period // 2, rng):
                square = a * np.sign(np.sin(2 * np.pi * t[s:e] / config.period))
                square[square == 0] = a
                vals[s:e] = square + rng.normal(0, sigma, size=e - s)
                labels[s:e] = 1
        elif kind == "seasonal":
            for s, e in _segments(config.test_len, n_pts, config.period, rng):
                vals[s:e] = a * np.sin(4 * np.pi * t[s:e] / config.period) \
                    + rng.normal(0, sigma, size=e - s)
                labels[s:e] = 1
        elif kind == "trend":
            for s, e in _segments(config.test_len, n_pts, config.period, rng):
                ramp = np.linspace(0, 2 * a, e - s)
                vals[s:e] = vals[s:e] + ramp
                labels[s:e] = 1

        tests[kind] = TimeSeries(vals[:, None], ["value"], labels=labels,
                                 name=f"sine_test_{kind}")
    return train, tests
