"""Time-series containers, CSV I/O, splitting, normalization, windowing.

Conventions: a series is a float64 array of shape (time, channel). Splits
are chronological and never share samples; rolling windows are extracted
per split with stride 1 and always include the final samples of the split.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelMismatch, DegenerateChannel, EmptyDataset, MissingFile,
    NonFiniteValue, ParseError, SegmentTooShort, SeriesTooShort,
)

_TWO_PI = 2.0 * math.pi

# Fixed structure of the synthetic benchmark generator. The predictable
# part is one sinusoid (predictable equally well at every step) plus an
# AR(1) component whose predictability decays with the prediction step;
# the additive measurement noise is unpredictable by construction and its
# standard deviation grows linearly along the time axis with noise_growth.
_SEASON_PERIOD = 16.0
_SEASON_AMP = 0.85
_AR_PHI = 0.9
_AR_VAR = 1.0
_NOISE_BASE = 0.35


@dataclass
class TimeSeriesDataset:
    """A (time, channel) float64 series with channel names.

    timestamps, when present, are opaque strings carried through I/O and
    splitting; they never enter any computation.
    """

    values: np.ndarray
    channel_names: list = None
    timestamps: list = None
    timestamp_name: str = "timestamp"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise EmptyDataset(f"values must be 2-D (time, channel), got ndim={v.ndim}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise EmptyDataset(f"need at least one row and one channel, got {v.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise NonFiniteValue(f"non-finite value at row {bad[0]}, channel {bad[1]}")
        self.values = v
        if self.channel_names is None:
            self.channel_names = [f"ch{i}" for i in range(v.shape[1])]
        if len(self.channel_names) != v.shape[1]:
            raise ChannelMismatch(
                f"{len(self.channel_names)} names for {v.shape[1]} channels")
        if self.timestamps is not None and len(self.timestamps) != v.shape[0]:
            raise ChannelMismatch(
                f"{len(self.timestamps)} timestamps for {v.shape[0]} rows")

    @property
    def length(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]

    def slice(self, start, stop):
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return TimeSeriesDataset(
            self.values[start:stop].copy(), list(self.channel_names), ts,
            self.timestamp_name)


@dataclass
class SplitSpec:
    """Chronological split fractions; must be positive and sum to one."""

    train: float = 0.7
    val: float = 0.1
    test: float = 0.2

    def __post_init__(self):
        for name in ("train", "val", "test"):
            if getattr(self, name) <= 0.0:
                raise SegmentTooShort(f"split fraction {name} must be > 0")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise SegmentTooShort(
                f"split fractions sum to {self.train + self.val + self.test!r}, not 1")


@dataclass
class WindowConfig:
    """Rolling-window sizes: context_len past steps predict pred_len future steps."""

    context_len: int
    pred_len: int

    def __post_init__(self):
        if self.context_len < 1 or self.pred_len < 1:
            raise SeriesTooShort(
                f"window sizes must be >= 1, got ({self.context_len}, {self.pred_len})")


@dataclass
class WindowBatch:
    """contexts: (N, context_len, C); targets: (N, pred_len, C_t)."""

    contexts: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.contexts.ndim != 3 or self.targets.ndim != 3:
            raise SeriesTooShort("window batches must be 3-D")
        if self.contexts.shape[0] != self.targets.shape[0]:
            raise SeriesTooShort(
                f"{self.contexts.shape[0]} contexts vs {self.targets.shape[0]} targets")

    @property
    def count(self):
        return self.contexts.shape[0]


@dataclass
class NormStats:
    """Per-channel z-score statistics fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape:
            raise ChannelMismatch("mean and std must have the same length")
        if np.any(self.std <= 0.0) or not np.all(np.isfinite(self.std)):
            raise DegenerateChannel("every channel std must be finite and > 0")


# --- CSV I/O ---------------------------------------------------------------

def load_csv(path, has_header=True, timestamp_column=None):
    """Read a (time, channel) CSV.

    timestamp_column names (or indexes) a column to keep as opaque
    metadata instead of parsing it as data. Row/column numbers in errors
    are 1-based file coordinates.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # tolerate trailing blank lines
    if not rows:
        raise EmptyDataset(f"{path}: no rows")

    header = None
    data_start = 0
    if has_header:
        header = [c.strip() for c in rows[0]]
        data_start = 1
    ncols = len(rows[data_start]) if len(rows) > data_start else (
        len(header) if header else 0)

    ts_idx = None
    if timestamp_column is not None:
        if isinstance(timestamp_column, int):
            ts_idx = timestamp_column
        else:
            if header is None:
                raise ParseError(path, 1, 1,
                                 "timestamp column by name needs a header")
            try:
                ts_idx = header.index(timestamp_column)
            except ValueError:
                raise ParseError(path, 1, 1,
                                 f"no column named {timestamp_column!r}") from None
        if not (0 <= ts_idx < ncols):
            raise ParseError(path, 1, ts_idx + 1, "timestamp column out of range")

    value_cols = [j for j in range(ncols) if j != ts_idx]
    if not value_cols:
        raise EmptyDataset(f"{path}: no value columns")

    data = []
    timestamps = [] if ts_idx is not None else None
    for i, row in enumerate(rows[data_start:], start=data_start + 1):
        if len(row) != ncols:
            raise ParseError(path, i, len(row) + 1,
                             f"expected {ncols} fields, got {len(row)}")
        if ts_idx is not None:
            timestamps.append(row[ts_idx])
        vals = []
        for j in value_cols:
            try:
                x = float(row[j])
            except ValueError:
                raise ParseError(path, i, j + 1,
                                 f"not a number: {row[j]!r}") from None
            if not math.isfinite(x):
                raise NonFiniteValue(
                    f"{path}: row {i}, column {j + 1}: non-finite value {row[j]!r}")
            vals.append(x)
        data.append(vals)
    if not data:
        raise EmptyDataset(f"{path}: header only, no data rows")

    names = [header[j] for j in value_cols] if header else None
    ts_name = (header[ts_idx] if header and ts_idx is not None else "timestamp")
    return TimeSeriesDataset(np.array(data, dtype=np.float64), names,
                             timestamps, ts_name)


def save_csv(ds, path):
    """Write a dataset in the format load_csv reads.

    Floats are written with repr(), the shortest decimal that round-trips
    bit-for-bit, so save -> load reproduces values exactly.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if ds.timestamps is not None:
            w.writerow([ds.timestamp_name] + list(ds.channel_names))
            for ts, row in zip(ds.timestamps, ds.values):
                w.writerow([ts] + [repr(float(x)) for x in row])
        else:
            w.writerow(list(ds.channel_names))
            for row in ds.values:
                w.writerow([repr(float(x)) for x in row])


# --- splitting / normalization / windowing ---------------------------------

def chronological_split(ds, spec=None):
    """Split 70/10/20 by time (floor for train and val, remainder to test)."""
    spec = spec or SplitSpec()
    n = ds.length
    n_train = int(math.floor(spec.train * n))
    n_val = int(math.floor(spec.val * n))
    n_test = n - n_train - n_val
    if n_train < 1 or n_val < 1 or n_test < 1:
        raise SegmentTooShort(
            f"split of {n} rows gives ({n_train}, {n_val}, {n_test})")
    return (ds.slice(0, n_train),
            ds.slice(n_train, n_train + n_val),
            ds.slice(n_train + n_val, n))


def fit_norm_stats(ds):
    mean = ds.values.mean(axis=0)
    std = ds.values.std(axis=0)
    if np.any(std == 0.0):
        bad = int(np.argwhere(std == 0.0)[0][0])
        raise DegenerateChannel(f"channel {bad} is constant on the fitting split")
    return NormStats(mean, std)


def normalize(ds, stats):
    if stats.mean.shape[0] != ds.channels:
        raise ChannelMismatch(
            f"stats for {stats.mean.shape[0]} channels, dataset has {ds.channels}")
    vals = (ds.values - stats.mean) / stats.std
    return TimeSeriesDataset(vals, list(ds.channel_names),
                             ds.timestamps, ds.timestamp_name)


def denormalize(ds, stats):
    if stats.mean.shape[0] != ds.channels:
        raise ChannelMismatch(
            f"stats for {stats.mean.shape[0]} channels, dataset has {ds.channels}")
    vals = ds.values * stats.std + stats.mean
    return TimeSeriesDataset(vals, list(ds.channel_names),
                             ds.timestamps, ds.timestamp_name)


def resolve_channel(ds, channel):
    """Map a channel name or index to an index."""
    if isinstance(channel, str):
        try:
            return ds.channel_names.index(channel)
        except ValueError:
            raise ChannelMismatch(f"no channel named {channel!r}") from None
    idx = int(channel)
    if not (0 <= idx < ds.channels):
        raise ChannelMismatch(f"channel index {idx} out of range")
    return idx


def extract_windows(ds, wcfg, target_channel=None):
    """All stride-1 rolling windows: L - context_len - pred_len + 1 pairs.

    The last window's target ends at the final sample, so the tail of the
    split is always used. target_channel (index or name) restricts the
    targets to one channel; contexts always keep every channel.
    """
    tc, tp = wcfg.context_len, wcfg.pred_len
    n = ds.length - tc - tp + 1
    if n < 1:
        raise SeriesTooShort(
            f"{ds.length} rows cannot fit context {tc} + horizon {tp}")
    sw = np.lib.stride_tricks.sliding_window_view(ds.values, tc + tp, axis=0)
    # sw: (n_windows, C, tc+tp) -> (n, tc+tp, C)
    sw = np.swapaxes(sw[:n], 1, 2)
    contexts = np.ascontiguousarray(sw[:, :tc, :])
    targets = np.ascontiguousarray(sw[:, tc:, :])
    if target_channel is not None:
        j = resolve_channel(ds, target_channel)
        targets = np.ascontiguousarray(targets[:, :, j:j + 1])
    return WindowBatch(contexts, targets)


@dataclass
class SplitWindows:
    """Rolling windows of the three chronological splits."""

    train: WindowBatch
    val: WindowBatch = None
    test: WindowBatch = None


def prepare_windows(ds, wcfg, split_spec=None, target_channel=None,
                    normalize_data=True):
    """Whole pipeline: split chronologically, z-score with train-split
    statistics, window each split independently (windows never straddle a
    split boundary). Returns (SplitWindows, NormStats or None)."""
    tr, va, te = chronological_split(ds, split_spec)
    stats = None
    if normalize_data:
        stats = fit_norm_stats(tr)
        tr, va, te = (normalize(s, stats) for s in (tr, va, te))
    return SplitWindows(
        train=extract_windows(tr, wcfg, target_channel),
        val=extract_windows(va, wcfg, target_channel),
        test=extract_windows(te, wcfg, target_channel),
    ), stats


# --- synthetic benchmark ---------------------------------------------------

def synth_heteroscedastic(length, channels=1, noise_growth=0.0, seed=0):
    """Sinusoid + AR(1) signal with time-growing additive noise.

    The noise std at row t is _NOISE_BASE * (1 + noise_growth * t/(L-1)),
    so the unpredictable error floor is flat along the series when
    noise_growth = 0 and increases along it otherwise. The AR(1) part makes
    multi-step forecast error grow with the prediction step regardless.
    Deterministic for a given seed.
    """
    if length < 1:
        raise EmptyDataset("length must be >= 1")
    if channels < 1:
        raise EmptyDataset("channels must be >= 1")
    if noise_growth < 0:
        raise EmptyDataset("noise_growth must be >= 0")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    ramp = t / (length - 1) if length > 1 else np.zeros(1)
    ar_sigma = math.sqrt(_AR_VAR * (1.0 - _AR_PHI ** 2))
    values = np.empty((length, channels), dtype=np.float64)
    for c in range(channels):
        phase = rng.uniform(0.0, _TWO_PI)
        season = _SEASON_AMP * np.sin(_TWO_PI * t / _SEASON_PERIOD + phase)
        innov = rng.normal(0.0, ar_sigma, size=length)
        ar = np.empty(length)
        ar[0] = rng.normal(0.0, math.sqrt(_AR_VAR))
        for i in range(1, length):
            ar[i] = _AR_PHI * ar[i - 1] + innov[i]
        noise = rng.normal(0.0, 1.0, size=length) * _NOISE_BASE * (
            1.0 + noise_growth * ramp)
        values[:, c] = season + ar + noise
    return TimeSeriesDataset(values)
