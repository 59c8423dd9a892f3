"""Per-user region histograms and modal home-region inference."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidWindow, MalformedHeader
from .ingest import EventTable, ResolvedEvent, day_number, user_shard
from .parallel import ordered_map

HOMES_HEADER = ["user_id", "status", "region_code", "mode_count", "total_observations", "reason"]

# above this many (user, region) cells the sparse path is used
DENSE_LIMIT = 20_000_000


@dataclass(frozen=True)
class StudyWindow:
    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidWindow(f"window start {self.start} after end {self.end}")

    @classmethod
    def calendar_year(cls, year: int) -> "StudyWindow":
        return cls(date(year, 1, 1), date(year, 12, 31))

    @classmethod
    def trailing(cls, as_of: date, span: int = 365) -> "StudyWindow":
        """The ``span`` days ending the day before ``as_of``."""
        if span < 1:
            raise InvalidWindow("trailing span must be >= 1")
        end = as_of - timedelta(days=1)
        return cls(end - timedelta(days=span - 1), end)

    @classmethod
    def parse(cls, text: str, as_of: date | None = None) -> "StudyWindow":
        """``START:END`` ISO dates, or ``trailing:N`` together with ``as_of``."""
        head, _, tail = text.partition(":")
        if head == "trailing":
            if as_of is None:
                raise InvalidWindow("trailing window needs an as-of date")
            try:
                span = int(tail or 365)
            except ValueError as exc:
                raise InvalidWindow(f"bad trailing span {tail!r}") from exc
            return cls.trailing(as_of, span)
        try:
            return cls(date.fromisoformat(head), date.fromisoformat(tail))
        except ValueError as exc:
            raise InvalidWindow(f"bad window {text!r}") from exc

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def contains(self, d: date) -> bool:
        return self.start <= d <= self.end

    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(self.n_days)]


class UnknownReason(str, Enum):
    INSUFFICIENT_HISTORY = "InsufficientHistory"
    TIED_MODE = "TiedMode"


@dataclass(frozen=True)
class UserLocationHistogram:
    user_id: str
    window: StudyWindow
    counts: Mapping[str, int] = field(default_factory=dict)
    total: int = 0


@dataclass(frozen=True)
class HomeAssignment:
    user_id: str
    region: str | None
    reason: UnknownReason | None
    mode_count: int
    total_observations: int

    @property
    def is_resident(self) -> bool:
        return self.region is not None

    @property
    def status(self) -> str:
        return "resident" if self.is_resident else "unknown"


def collapse_observations(events: Sequence[ResolvedEvent], n_days: int = 1,
                          window: StudyWindow | None = None) -> list[str]:
    """Region observations for one user's events.

    With ``n_days > 1`` a region is counted at most once per n-day bucket,
    buckets being aligned on ``window.start``.
    """
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    if n_days == 1:
        return [e.region for e in events]
    if window is None:
        raise ValueError("n_days > 1 needs a window to align buckets")
    seen: dict[tuple[str, int], None] = {}
    for e in events:
        seen.setdefault((e.region, (e.local_date - window.start).days // n_days), None)
    return [region for region, _ in seen]


def build_histogram(observations: Iterable[str], user_id: str,
                    window: StudyWindow) -> UserLocationHistogram:
    counts = Counter(observations)
    return UserLocationHistogram(user_id, window, dict(counts), sum(counts.values()))


def merge_histograms(a: UserLocationHistogram, b: UserLocationHistogram) -> UserLocationHistogram:
    if a.user_id != b.user_id or a.window != b.window:
        raise ValueError("histograms belong to different users or windows")
    counts = Counter(a.counts)
    counts.update(b.counts)
    return UserLocationHistogram(a.user_id, a.window, dict(counts), a.total + b.total)


def infer_home(h: UserLocationHistogram) -> HomeAssignment:
    mode_count = max(h.counts.values(), default=0)
    if h.total < 2:
        return HomeAssignment(h.user_id, None, UnknownReason.INSUFFICIENT_HISTORY,
                              mode_count, h.total)
    top = [r for r, c in h.counts.items() if c == mode_count]
    if len(top) > 1:
        return HomeAssignment(h.user_id, None, UnknownReason.TIED_MODE, mode_count, h.total)
    return HomeAssignment(h.user_id, top[0], None, mode_count, h.total)


# ---------------------------------------------------------------------------
# batch path

RESIDENT, INSUFFICIENT, TIED = 0, 1, 2
_REASONS = {INSUFFICIENT: UnknownReason.INSUFFICIENT_HISTORY, TIED: UnknownReason.TIED_MODE}


@dataclass
class HomeTable:
    """Home verdicts for every user of an EventTable, as columns.

    ``home`` indexes ``codes`` and is -1 for unknown users.
    """

    user_ids: np.ndarray
    codes: tuple[str, ...]
    home: np.ndarray
    reason: np.ndarray
    mode_count: np.ndarray
    total: np.ndarray

    def __len__(self) -> int:
        return len(self.user_ids)

    def assignments(self) -> dict[str, HomeAssignment]:
        out = {}
        for i, uid in enumerate(self.user_ids):
            uid = str(uid)
            h = int(self.home[i])
            out[uid] = HomeAssignment(uid, self.codes[h] if h >= 0 else None,
                                      _REASONS.get(int(self.reason[i])),
                                      int(self.mode_count[i]), int(self.total[i]))
        return out

    @classmethod
    def from_assignments(cls, homes: Iterable[HomeAssignment]) -> "HomeTable":
        homes = sorted(homes, key=lambda h: h.user_id)
        codes = tuple(sorted({h.region for h in homes if h.region is not None}))
        lookup = {c: i for i, c in enumerate(codes)}
        inv = {v: k for k, v in _REASONS.items()}
        return cls(
            np.array([h.user_id for h in homes], dtype=str),
            codes,
            np.array([lookup[h.region] if h.region is not None else -1 for h in homes], np.int64),
            np.array([RESIDENT if h.region is not None else inv[h.reason] for h in homes], np.int8),
            np.array([h.mode_count for h in homes], np.int64),
            np.array([h.total_observations for h in homes], np.int64),
        )

    def home_for(self, table: EventTable) -> np.ndarray:
        """Home per user of ``table`` as positions in ``table.codes``.

        -1 marks unknown (including users absent here); ``len(table.codes)``
        marks a resident home outside the table's vocabulary.
        """
        lookup = {c: i for i, c in enumerate(table.codes)}
        remap = np.array([lookup.get(c, len(table.codes)) for c in self.codes] + [-1],
                         dtype=np.int64)
        out = np.full(len(table.user_ids), -1, dtype=np.int64)
        if len(self.user_ids) == 0 or len(table.user_ids) == 0:
            return out
        pos = np.searchsorted(self.user_ids, table.user_ids)
        pos_c = np.minimum(pos, len(self.user_ids) - 1)
        found = self.user_ids[pos_c] == table.user_ids
        out[found] = remap[self.home[pos_c[found]]]
        return out


def _infer_block(user: np.ndarray, region: np.ndarray, n_users: int, n_regions: int):
    """Mode statistics for users 0..n_users-1 given per-observation columns."""
    ur = user.astype(np.int64) * n_regions + region
    if n_users * n_regions <= DENSE_LIMIT:
        counts = np.bincount(ur, minlength=n_users * n_regions).reshape(n_users, n_regions)
        total = counts.sum(axis=1)
        mx = counts.max(axis=1) if n_regions else np.zeros(n_users, np.int64)
        arg = counts.argmax(axis=1) if n_regions else np.zeros(n_users, np.int64)
        nmax = (counts == mx[:, None]).sum(axis=1)
    elif len(ur) == 0:
        total = mx = nmax = arg = np.zeros(n_users, np.int64)
    else:
        keys, c = np.unique(ur, return_counts=True)
        owner = keys // n_regions
        starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
        who = owner[starts]
        gmax = np.maximum.reduceat(c, starts)
        group = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(c)]))
        is_max = c == gmax[group]
        idx_max = np.flatnonzero(is_max)
        g = group[idx_max]
        first_max = idx_max[np.r_[True, g[1:] != g[:-1]]]
        total = np.zeros(n_users, np.int64)
        mx = np.zeros(n_users, np.int64)
        nmax = np.zeros(n_users, np.int64)
        arg = np.zeros(n_users, np.int64)
        total[who] = np.add.reduceat(c, starts)
        mx[who] = gmax
        nmax[who] = np.add.reduceat(is_max.astype(np.int64), starts)
        arg[who] = keys[first_max] % n_regions
    resident = (total >= 2) & (nmax == 1)
    home = np.where(resident, arg, -1)
    reason = np.where(resident, RESIDENT, np.where(total < 2, INSUFFICIENT, TIED)).astype(np.int8)
    return home, reason, mx.astype(np.int64), total.astype(np.int64)


def _observations(table: EventTable, window: StudyWindow, n_days: int):
    s, e = day_number(window.start), day_number(window.end)
    m = (table.day >= s) & (table.day <= e)
    user, region, day = table.user[m], table.region[m], table.day[m]
    if n_days > 1:
        n_buckets = (e - s) // n_days + 1
        R = len(table.codes)
        key = ((user.astype(np.int64) * R + region) * n_buckets + (day - s) // n_days)
        key = np.unique(key)
        ur = key // n_buckets
        user, region = ur // R, ur % R
    return user, region


def infer_homes(table: EventTable, window: StudyWindow, n_days: int = 1,
                shards: int = 1, threads: int | None = 1) -> HomeTable:
    """Infer a home for every user in ``table``, optionally sharded by user."""
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    U, R = len(table.user_ids), len(table.codes)
    home = np.full(U, -1, np.int64)
    reason = np.full(U, INSUFFICIENT, np.int8)
    mode_count = np.zeros(U, np.int64)
    total = np.zeros(U, np.int64)
    user, region = _observations(table, window, n_days)
    if shards <= 1:
        parts = [(np.arange(U), user, region)]
    else:
        shard_of = user_shard(table.user_ids, shards)
        obs_shard = shard_of[user]
        parts = []
        for k in range(shards):
            members = np.flatnonzero(shard_of == k)
            local = np.full(U, -1, np.int64)
            local[members] = np.arange(len(members))
            m = obs_shard == k
            parts.append((members, local[user[m]], region[m]))

    def run(part):
        members, u, r = part
        return members, _infer_block(u, r, len(members), R)

    for members, (h, rs, mc, t) in ordered_map(run, parts, threads):
        home[members], reason[members] = h, rs
        mode_count[members], total[members] = mc, t
    return HomeTable(table.user_ids, table.codes, home, reason, mode_count, total)


def write_homes_csv(homes: HomeTable, fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HOMES_HEADER)
    order = np.argsort(homes.user_ids, kind="stable")
    for i in order:
        h = int(homes.home[i])
        resident = h >= 0
        w.writerow([homes.user_ids[i], "resident" if resident else "unknown",
                    homes.codes[h] if resident else "", int(homes.mode_count[i]),
                    int(homes.total[i]),
                    "" if resident else _REASONS[int(homes.reason[i])].value])


def read_homes_csv(fh) -> HomeTable:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != HOMES_HEADER:
        raise MalformedHeader(f"homes header must be {','.join(HOMES_HEADER)}")
    homes = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(HOMES_HEADER):
            raise MalformedHeader(f"homes line {reader.line_num}: expected 6 fields")
        uid, status, code, mc, tot, why = row
        try:
            if status == "resident":
                homes.append(HomeAssignment(uid, code, None, int(mc), int(tot)))
            elif status == "unknown":
                homes.append(HomeAssignment(uid, None, UnknownReason(why), int(mc), int(tot)))
            else:
                raise ValueError(status)
        except ValueError as exc:
            raise MalformedHeader(f"homes line {reader.line_num}: {exc}") from exc
    return HomeTable.from_assignments(homes)
