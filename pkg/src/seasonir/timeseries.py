"""Incidence series: ingest, weekly aggregation, smoothing, splitting, interpolation.

Series files are plain CSV with ``time_index,count`` rows. A header line is
optional and ``#`` lines are comments; written files carry one ``#`` line
recording cadence and provenance.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


class Cadence(str, enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"


class Provenance(str, enum.Enum):
    RAW = "raw"
    FILTERED = "filtered"
    SYNTHETIC = "synthetic"


class SeriesError(ValueError):
    """Base class for malformed or inconsistent incidence data."""


class MalformedLine(SeriesError):
    def __init__(self, line: int, text: str):
        super().__init__(f"line {line}: cannot parse {text!r} as 'time_index,count'")
        self.line = line


class NegativeCount(SeriesError):
    def __init__(self, line: int):
        super().__init__(f"line {line}: negative count")
        self.line = line


class DuplicateIndex(SeriesError):
    def __init__(self, line: int, index: int):
        super().__init__(f"line {line}: duplicate time_index {index}")
        self.line = line


class MissingIndex(SeriesError):
    """Raised when the indices are not contiguous (gap != 1)."""


class IncidenceRecord(NamedTuple):
    time_index: int
    count: float


@dataclass(frozen=True)
class IncidenceSeries:
    """Uniformly spaced incidence counts.

    ``index`` holds the integer time indices (days or weeks) and ``counts``
    the nonnegative case counts for each period.
    """

    cadence: Cadence
    index: np.ndarray
    counts: np.ndarray
    provenance: Provenance = Provenance.RAW

    def __post_init__(self):
        index = np.asarray(self.index, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=float)
        if index.ndim != 1 or index.shape != counts.shape:
            raise SeriesError("index and counts must be 1-d arrays of equal length")
        if len(index) < 1:
            raise SeriesError("a series needs at least one record")
        if np.any(np.diff(index) != 1):
            raise MissingIndex("time indices must be contiguous with unit spacing")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise SeriesError("counts must be finite and nonnegative")
        index.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "cadence", Cadence(self.cadence))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def records(self) -> list[IncidenceRecord]:
        return [IncidenceRecord(int(i), float(c)) for i, c in zip(self.index, self.counts)]

    def replace(self, **changes) -> "IncidenceSeries":
        fields = dict(cadence=self.cadence, index=self.index, counts=self.counts,
                      provenance=self.provenance)
        fields.update(changes)
        return IncidenceSeries(**fields)


@dataclass(frozen=True)
class FilterSpec:
    window: int = 13

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"moving-average window must be a positive odd integer, got {self.window}")


def parse_series_lines(lines, cadence=Cadence.DAILY, provenance=Provenance.RAW) -> IncidenceSeries:
    """Parse ``time_index,count`` lines into a sorted series.

    A non-numeric first data line is treated as a header. Line numbers in
    error messages are 1-based and count every physical line.
    """
    rows: dict[int, float] = {}
    header_allowed = True
    meta: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            for part in text.lstrip("#").split():
                if "=" in part:
                    key, value = part.split("=", 1)
                    meta[key.strip()] = value.strip()
            continue
        parts = [p.strip() for p in text.split(",")]
        try:
            if len(parts) != 2:
                raise ValueError
            idx = int(parts[0], 10)
            count = float(parts[1])
            if not np.isfinite(count):
                raise ValueError
        except ValueError:
            if header_allowed and not _looks_numeric(parts[0]):
                header_allowed = False
                continue
            raise MalformedLine(lineno, text) from None
        header_allowed = False
        if count < 0:
            raise NegativeCount(lineno)
        if idx in rows:
            raise DuplicateIndex(lineno, idx)
        rows[idx] = count
    if not rows:
        raise SeriesError("no data records found")
    order = sorted(rows)
    cadence = Cadence(meta.get("cadence", cadence))
    provenance = Provenance(meta.get("provenance", provenance))
    return IncidenceSeries(cadence, np.array(order), np.array([rows[i] for i in order]), provenance)


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def ingest_daily(path: str | os.PathLike) -> IncidenceSeries:
    """Read a daily ``time_index,count`` CSV (UTF-8, LF or CRLF)."""
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_series_lines(fh, Cadence.DAILY, Provenance.RAW)


def read_series(path: str | os.PathLike, cadence=Cadence.WEEKLY) -> IncidenceSeries:
    """Read a series file; a ``#`` metadata header overrides ``cadence``."""
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_series_lines(fh, cadence, Provenance.RAW)


def format_series(series: IncidenceSeries) -> str:
    lines = [f"# cadence={series.cadence.value} provenance={series.provenance.value}",
             "time_index,count"]
    lines += [f"{i},{c!r}" for i, c in zip(series.index.tolist(), series.counts.tolist())]
    return "\n".join(lines) + "\n"


def aggregate_weekly(series: IncidenceSeries) -> IncidenceSeries:
    """Sum days 7k..7k+6 into week k; a trailing partial week is dropped."""
    if series.cadence is not Cadence.DAILY:
        raise SeriesError("aggregate_weekly expects a daily series")
    n_weeks = len(series) // 7
    if n_weeks < 1:
        raise SeriesError("series shorter than 7 days")
    weekly = series.counts[: 7 * n_weeks].reshape(n_weeks, 7).sum(axis=1)
    return IncidenceSeries(Cadence.WEEKLY, np.arange(n_weeks), weekly, series.provenance)


def moving_average(series: IncidenceSeries, spec: FilterSpec = FilterSpec()) -> IncidenceSeries:
    """Centered moving average with symmetric window shrinkage at the ends.

    Point k averages over ``k-r..k+r`` with ``r = min(window//2, k, n-1-k)``,
    so there is no phase delay and the output length equals the input length.
    """
    n = len(series)
    if spec.window > n:
        raise ValueError(f"window {spec.window} exceeds series length {n}")
    x = series.counts
    csum = np.concatenate(([0.0], np.cumsum(x)))
    k = np.arange(n)
    r = np.minimum(spec.window // 2, np.minimum(k, n - 1 - k))
    smoothed = (csum[k + r + 1] - csum[k - r]) / (2 * r + 1)
    return series.replace(counts=smoothed, provenance=Provenance.FILTERED)


def split_train_test(series: IncidenceSeries, n_train: int) -> tuple[IncidenceSeries, IncidenceSeries]:
    n = len(series)
    if not 0 < n_train < n:
        raise ValueError(f"n_train must satisfy 0 < n_train < {n}, got {n_train}")
    train = _slice(series, slice(0, n_train))
    test = _slice(series, slice(n_train, n))
    return train, test


def _slice(series: IncidenceSeries, sl: slice) -> IncidenceSeries:
    return IncidenceSeries(series.cadence, series.index[sl], series.counts[sl], series.provenance)


def interpolate(series: IncidenceSeries, t):
    """Piecewise-linear value at ``t`` periods since the series start."""
    t_arr = np.asarray(t, dtype=float)
    last = float(len(series) - 1)
    if np.any(t_arr < 0) or np.any(t_arr > last) or not np.all(np.isfinite(t_arr)):
        raise ValueError(f"t must lie in [0, {last}]")
    out = np.interp(t_arr, np.arange(len(series), dtype=float), series.counts)
    return float(out) if out.ndim == 0 else out


def concat(a: IncidenceSeries, b: IncidenceSeries) -> IncidenceSeries:
    return IncidenceSeries(a.cadence, np.concatenate([a.index, b.index]),
                           np.concatenate([a.counts, b.counts]), a.provenance)


def write_series(path: str | os.PathLike, series: IncidenceSeries) -> None:
    from .io import atomic_write_text

    atomic_write_text(Path(path), format_series(series))
