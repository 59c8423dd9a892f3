"""Daily shares, z-scores, 9-band classes, influx ratios and aggregates."""
from __future__ import annotations

import bisect
import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import (DegenerateSeries, EmptyWindow, NonFinite, SeriesGap, ZeroBaseline,
                     ZeroTotal)
from .stocks import DailyStock

ZSCORES_HEADER = ["date", "region_code", "value", "share", "z", "band"]
INFLUX_HEADER = ["region_code", "event_date", "value", "baseline_mean", "pct_change"]

# lower edges of bands 2..9
BAND_EDGES = (-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0)
COMPONENTS = ("residents", "non_residents", "unknown", "total_active")
GRAINS = ("annual_daily_mean", "monthly_daily_mean", "monthly_sum")


@dataclass(frozen=True)
class StockSeries:
    region: str
    dates: tuple[date, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values differ in length")
        for a, b in zip(self.dates, self.dates[1:]):
            if b - a != timedelta(days=1):
                raise SeriesGap(f"{self.region}: series not gap-free between {a} and {b}")

    def scaled(self, k) -> "StockSeries":
        return StockSeries(self.region, self.dates, tuple(k * v for v in self.values))


@dataclass(frozen=True)
class ZSeries:
    region: str
    dates: tuple[date, ...]
    values: tuple[float, ...]
    shares: np.ndarray
    zscores: np.ndarray
    bands: np.ndarray


def daily_share(s: StockSeries | Sequence[float]) -> np.ndarray:
    """Each day's fraction of the series total.

    Integer-valued series are summed exactly, so scaling the counts by a
    positive integer leaves every share bit-identical.
    """
    values = s.values if isinstance(s, StockSeries) else s
    arr = np.asarray(values)
    if arr.size == 0:
        raise ZeroTotal("empty series")
    if np.issubdtype(arr.dtype, np.integer):
        total = float(sum(int(v) for v in arr))
    else:
        total = math.fsum(arr.astype(float))
    if total <= 0:
        raise ZeroTotal("series total is zero")
    return arr.astype(float) / total


def zscore_series(shares: Sequence[float]) -> np.ndarray:
    """Standardize with the sample (n-1) standard deviation."""
    p = np.asarray(shares, dtype=float)
    if p.size < 2:
        raise DegenerateSeries("need at least two values")
    mean = math.fsum(p) / p.size
    dev = p - mean
    sd = math.sqrt(math.fsum(dev * dev) / (p.size - 1))
    if sd == 0 or not math.isfinite(sd):
        raise DegenerateSeries("series has zero variance")
    return dev / sd


def band_of(z: float) -> int:
    """Band 1..9; cuts at +-0.5, +-1, +-1.5, +-2, intervals closed on the left."""
    if not math.isfinite(z):
        raise NonFinite(f"z is not finite: {z}")
    return bisect.bisect_right(BAND_EDGES, z) + 1


def bands(zs: Iterable[float]) -> np.ndarray:
    return np.array([band_of(float(z)) for z in zs], dtype=np.int64)


def zseries(s: StockSeries) -> ZSeries:
    p = daily_share(s)
    z = zscore_series(p)
    return ZSeries(s.region, s.dates, s.values, p, z, bands(z))


def influx_ratio(value: float, baseline: Sequence[float]) -> float:
    """Percent change of ``value`` against the mean of ``baseline``."""
    if len(baseline) == 0:
        raise ZeroBaseline("baseline is empty")
    mean = math.fsum(baseline) / len(baseline)
    if mean <= 0:
        raise ZeroBaseline("baseline mean is not positive")
    return 100.0 * (value - mean) / mean


# ---------------------------------------------------------------------------
# stock tables -> series / aggregates


def series_by_region(stocks: Iterable[DailyStock], component: str = "non_residents") -> dict[str, StockSeries]:
    if component not in COMPONENTS:
        raise ValueError(f"unknown component {component!r}")
    rows: dict[str, list[tuple[date, int]]] = defaultdict(list)
    for s in stocks:
        rows[s.region].append((s.date, getattr(s, component)))
    out = {}
    for region in sorted(rows):
        pairs = sorted(rows[region])
        out[region] = StockSeries(region, tuple(d for d, _ in pairs), tuple(v for _, v in pairs))
    return out


@dataclass(frozen=True)
class Aggregate:
    region: str
    month: str | None  # YYYY-MM, None for annual
    value: float
    n_days: int


def aggregate_series(stocks: Iterable[DailyStock], component: str = "residents",
                     grain: str = "annual_daily_mean") -> list[Aggregate]:
    """Per-region (and per-month) means or sums of one stock component."""
    if grain not in GRAINS:
        raise ValueError(f"unknown grain {grain!r}")
    series = series_by_region(stocks, component)
    if not series:
        raise EmptyWindow("no stock rows to aggregate")
    out = []
    for region, s in series.items():
        if not s.dates:
            raise EmptyWindow(f"{region}: empty series")
        if grain == "annual_daily_mean":
            out.append(Aggregate(region, None, math.fsum(s.values) / len(s.values), len(s.values)))
            continue
        months: dict[str, list[float]] = defaultdict(list)
        for d, v in zip(s.dates, s.values):
            months[f"{d.year:04d}-{d.month:02d}"].append(v)
        for month in sorted(months):
            vals = months[month]
            total = math.fsum(vals)
            out.append(Aggregate(region, month,
                                 total if grain == "monthly_sum" else total / len(vals),
                                 len(vals)))
    return out


def write_zscores_csv(zs: Iterable[ZSeries], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ZSCORES_HEADER)
    rows = []
    for z in zs:
        for i, d in enumerate(z.dates):
            rows.append((d, z.region, z.values[i], float(z.shares[i]), float(z.zscores[i]),
                         int(z.bands[i])))
    for d, region, v, p, zz, b in sorted(rows, key=lambda r: (r[0], r[1])):
        w.writerow([d.isoformat(), region, v, repr(p), repr(zz), b])


@dataclass(frozen=True)
class InfluxRow:
    region: str
    event_date: date
    value: float
    baseline_mean: float
    pct_change: float


def influx_report(series: dict[str, StockSeries], event_date: date,
                  baseline_dates: Sequence[date]) -> list[InfluxRow]:
    """Influx ratio per region; regions lacking any needed date are skipped."""
    out = []
    for region, s in sorted(series.items()):
        lookup = dict(zip(s.dates, s.values))
        if event_date not in lookup or any(d not in lookup for d in baseline_dates):
            continue
        base = [lookup[d] for d in baseline_dates]
        try:
            pct = influx_ratio(lookup[event_date], base)
        except ZeroBaseline:
            continue
        out.append(InfluxRow(region, event_date, lookup[event_date],
                             math.fsum(base) / len(base), pct))
    return out


def write_influx_csv(rows: Iterable[InfluxRow], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(INFLUX_HEADER)
    for r in rows:
        w.writerow([r.region, r.event_date.isoformat(), r.value, repr(r.baseline_mean),
                    repr(r.pct_change)])
