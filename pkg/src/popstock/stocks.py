"""Daily resident / non-resident / unknown user counts per region.

A user active in several regions on one day is counted once in each of them,
so regional totals must not be summed into a statewide distinct-user count.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping

import numpy as np

from .errors import MalformedHeader, MismatchedKey, ShardOverlap
from .inference import HomeAssignment, HomeTable
from .ingest import EventTable, ResolvedEvent, day_number, from_day_number, user_shard
from .parallel import ordered_map

STOCKS_HEADER = ["date", "region_code", "residents", "non_residents", "unknown", "total_active"]
NORMALIZED_HEADER = ["date", "region_code", "total_events", "resident_rate",
                     "non_resident_rate", "unknown_rate"]


@dataclass(frozen=True)
class DailyStock:
    date: date
    region: str
    residents: int
    non_residents: int
    unknown: int
    total_active: int

    def __post_init__(self):
        if min(self.residents, self.non_residents, self.unknown, self.total_active) < 0:
            raise ValueError(f"negative count in {self}")
        if self.residents + self.non_residents + self.unknown != self.total_active:
            raise ValueError(f"class counts do not sum to total_active in {self}")

    @property
    def key(self) -> tuple[date, str]:
        return (self.date, self.region)

    def counts(self) -> tuple[int, int, int, int]:
        return (self.residents, self.non_residents, self.unknown, self.total_active)


@dataclass(frozen=True)
class VolumeRecord:
    date: date
    region: str
    total_events: int


@dataclass(frozen=True)
class NormalizedRates:
    """Per-event rates; ``None`` marks an undefined rate (no events)."""

    date: date
    region: str
    total_events: int
    resident_rate: float | None
    non_resident_rate: float | None
    unknown_rate: float | None


def daily_active_users(events: Iterable[ResolvedEvent], day: date, region: str) -> set[str]:
    return {e.user_id for e in events if e.local_date == day and e.region == region}


def compute_daily_stock(actives: Iterable[str], region: str,
                        homes: Mapping[str, HomeAssignment], day: date) -> DailyStock:
    res = non = unk = 0
    actives = set(actives)
    for uid in actives:
        h = homes.get(uid)
        if h is None or h.region is None:
            unk += 1
        elif h.region == region:
            res += 1
        else:
            non += 1
    return DailyStock(day, region, res, non, unk, len(actives))


def merge_partial_stocks(a: DailyStock, b: DailyStock,
                         users_a: set[str] | None = None,
                         users_b: set[str] | None = None) -> DailyStock:
    """Sum two partial stocks computed on disjoint user shards.

    Pass the shards' user sets to have disjointness checked.
    """
    if a.key != b.key:
        raise MismatchedKey(f"cannot merge {a.key} with {b.key}")
    if users_a is not None and users_b is not None and users_a & users_b:
        raise ShardOverlap(f"{len(users_a & users_b)} users appear in both shards")
    return DailyStock(a.date, a.region, a.residents + b.residents,
                      a.non_residents + b.non_residents, a.unknown + b.unknown,
                      a.total_active + b.total_active)


def normalize_by_volume(s: DailyStock, v: VolumeRecord) -> NormalizedRates:
    if (s.date, s.region) != (v.date, v.region):
        raise MismatchedKey(f"stock {s.key} vs volume {(v.date, v.region)}")
    if v.total_events == 0:
        return NormalizedRates(s.date, s.region, 0, None, None, None)
    if v.total_events < s.total_active:
        raise ValueError("total_events below total_active")
    n = v.total_events
    return NormalizedRates(s.date, s.region, n, s.residents / n, s.non_residents / n,
                           s.unknown / n)


# ---------------------------------------------------------------------------
# batch path


@dataclass
class StockTable:
    """Counts for every (day, region): ``counts[d, r] = (res, non, unk)``."""

    days: np.ndarray
    codes: tuple[str, ...]
    counts: np.ndarray
    volume: np.ndarray | None = None

    def rows(self) -> list[DailyStock]:
        out = []
        for i, d in enumerate(self.days):
            day = from_day_number(d)
            for j, code in enumerate(self.codes):
                r, n, u = (int(x) for x in self.counts[i, j])
                out.append(DailyStock(day, code, r, n, u, r + n + u))
        return out

    def volumes(self) -> list[VolumeRecord]:
        if self.volume is None:
            raise ValueError("stock table was computed without volumes")
        return [VolumeRecord(from_day_number(d), code, int(self.volume[i, j]))
                for i, d in enumerate(self.days) for j, code in enumerate(self.codes)]


def _stock_block(user, region, day, home, d0, D, R, U):
    key = ((day.astype(np.int64) - d0) * R + region) * U + user
    key = np.unique(key)
    cell = key // U
    u = key % U
    r = cell % R
    h = home[u]
    cls = np.where(h == r, 0, np.where(h >= 0, 1, 2))
    return np.bincount(cell * 3 + cls, minlength=D * R * 3).reshape(D, R, 3)


def compute_stocks(table: EventTable, homes: HomeTable | np.ndarray, days: Iterable[date],
                   shards: int = 1, threads: int | None = 1,
                   with_volume: bool = False) -> StockTable:
    """Stocks for the given contiguous days and every region in ``table.codes``.

    Events are split into ``shards`` disjoint user shards whose partial
    counts are summed; the result does not depend on ``shards``.
    """
    days = sorted(days)
    if not days:
        raise ValueError("no days requested")
    d0 = day_number(days[0])
    D = day_number(days[-1]) - d0 + 1
    if D != len(days):
        raise ValueError("requested days must be contiguous")
    R, U = len(table.codes), len(table.user_ids)
    home = homes.home_for(table) if isinstance(homes, HomeTable) else np.asarray(homes)
    m = (table.day >= d0) & (table.day < d0 + D)
    user, region, day = table.user[m], table.region[m], table.day[m]
    if shards <= 1:
        parts = [np.ones(len(user), dtype=bool)]
    else:
        shard_of = user_shard(table.user_ids, shards)[user]
        parts = [shard_of == k for k in range(shards)]

    def run(mask):
        return _stock_block(user[mask], region[mask], day[mask], home, d0, D, R, U)

    counts = np.zeros((D, R, 3), dtype=np.int64)
    for part in ordered_map(run, parts, threads):
        counts += part
    volume = None
    if with_volume:
        cell = (day.astype(np.int64) - d0) * R + region
        volume = np.bincount(cell, minlength=D * R).reshape(D, R)
    return StockTable(np.arange(d0, d0 + D), table.codes, counts, volume)


def write_stocks_csv(stocks: Iterable[DailyStock], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STOCKS_HEADER)
    for s in sorted(stocks, key=lambda s: (s.date, s.region)):
        w.writerow([s.date.isoformat(), s.region, s.residents, s.non_residents,
                    s.unknown, s.total_active])


def read_stocks_csv(fh) -> list[DailyStock]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != STOCKS_HEADER:
        raise MalformedHeader(f"stocks header must be {','.join(STOCKS_HEADER)}")
    out = []
    for row in reader:
        if not row:
            continue
        try:
            d, code, *vals = row
            out.append(DailyStock(date.fromisoformat(d), code, *(int(v) for v in vals)))
        except (TypeError, ValueError) as exc:
            raise MalformedHeader(f"stocks line {reader.line_num}: {exc}") from exc
    return out


def _rate(x: float | None) -> str:
    return "" if x is None else repr(x)


def write_normalized_csv(rates: Iterable[NormalizedRates], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(NORMALIZED_HEADER)
    for r in sorted(rates, key=lambda r: (r.date, r.region)):
        w.writerow([r.date.isoformat(), r.region, r.total_events, _rate(r.resident_rate),
                    _rate(r.non_resident_rate), _rate(r.unknown_rate)])
