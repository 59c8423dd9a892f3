"""Deterministic synthetic worlds with known homes, plus a naive classifier.

Generation model, per local day:

* every user emits Poisson(``events_per_user_per_day``) events;
* among the users of each home region who are active that day, a fraction
  ``1 - home_share`` (rounded) takes a day trip and emits all of that day's
  events in one non-home region, every other active user stays home. So each
  event lies in the home region with probability ``home_share``;
* travellers are spread evenly over the non-home regions with a random
  rotation, which keeps each destination uniform per user but makes the daily
  visitor count nearly constant;
* a special event ``(date, region, m)`` adds ``round((m - 1) * E[visitors])``
  extra visitors drawn from other regions' users, one event each.

Random streams are keyed by ``(seed, day)`` so each day can be generated
independently and in any order.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Sequence

import numpy as np

from .errors import InvalidConfig
from .inference import StudyWindow
from .ingest import EVENT_HEADER, EventTable, ResolvedEvent, day_number, from_day_number
from .regions import RegionSet, contains, grid_regions
from .stocks import DailyStock

TRUTH_HEADER = ["user_id", "region_code"]
_POINT_STREAM = 0xFFFFFFFF


@dataclass(frozen=True)
class SpecialEvent:
    date: date
    region: str
    visitor_multiplier: float


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    regions: RegionSet
    n_users: int
    window: StudyWindow
    home_share: float = 0.8
    events_per_user_per_day: float = 1.0
    special_events: tuple[SpecialEvent, ...] = ()

    def validate(self) -> None:
        if not 0 < self.home_share <= 1:
            raise InvalidConfig(f"home_share must be in (0, 1], got {self.home_share}")
        if self.events_per_user_per_day < 0:
            raise InvalidConfig("events_per_user_per_day must be >= 0")
        if self.n_users < 0:
            raise InvalidConfig("n_users must be >= 0")
        if len(self.regions) < 1:
            raise InvalidConfig("need at least one region")
        if len(self.regions) < 2 and self.home_share < 1:
            raise InvalidConfig("travel needs at least two regions")
        codes = set(self.regions.codes)
        for ev in self.special_events:
            if ev.visitor_multiplier < 1:
                raise InvalidConfig(f"visitor_multiplier must be >= 1, got {ev.visitor_multiplier}")
            if ev.region not in codes:
                raise InvalidConfig(f"special event region {ev.region!r} not in region set")
            if not self.window.contains(ev.date):
                raise InvalidConfig(f"special event date {ev.date} outside window")


def grid_config(seed: int, n_regions: int = 9, n_users: int = 300, days: int = 30,
                start: date = date(2017, 1, 1), **kw) -> SynthConfig:
    """Config over square grid regions coded 99001, 99002, ..."""
    codes = [f"{99000 + i + 1:05d}" for i in range(n_regions)]
    ncols = math.ceil(math.sqrt(n_regions))
    window = StudyWindow(start, start + timedelta(days=days - 1))
    return SynthConfig(seed, grid_regions(codes, ncols), n_users, window, **kw)


def user_label(i: int, width: int) -> str:
    return f"u{i:0{width}d}"


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


@dataclass
class SynthWorld:
    config: SynthConfig
    table: EventTable
    seconds: np.ndarray  # second of day (UTC) per event
    home: np.ndarray  # home region position per user

    @property
    def truth(self) -> dict[str, str]:
        codes = self.table.codes
        return {str(u): codes[h] for u, h in zip(self.table.user_ids, self.home)}

    @property
    def events(self) -> list[ResolvedEvent]:
        t = self.table
        out = []
        for u, r, d, s in zip(t.user, t.region, t.day, self.seconds):
            dd = from_day_number(d)
            ts = datetime(dd.year, dd.month, dd.day, tzinfo=timezone.utc) + timedelta(seconds=int(s))
            out.append(ResolvedEvent(str(t.user_ids[u]), t.codes[r], dd, ts))
        return out

    def __iter__(self):
        yield self.events
        yield self.truth

    def epoch_seconds(self) -> np.ndarray:
        return self.table.day.astype(np.int64) * 86400 + self.seconds

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """A point inside its region for every event (deterministic)."""
        rng = _rng(self.config.seed, _POINT_STREAM)
        lon = np.empty(len(self.table))
        lat = np.empty(len(self.table))
        regions = self.config.regions
        order = np.argsort(self.table.region, kind="stable")
        bounds = np.searchsorted(self.table.region[order], np.arange(len(regions) + 1))
        for pos, region in enumerate(regions):
            idx = order[bounds[pos]:bounds[pos + 1]]
            x, y = _sample_inside(region, len(idx), rng)
            lon[idx], lat[idx] = x, y
        return lon, lat

    def write_events_csv(self, fh: io.TextIOBase) -> None:
        lon, lat = self.coordinates()
        secs = self.epoch_seconds()
        t = self.table
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
        for i in range(len(t)):
            ts = (epoch + timedelta(seconds=int(secs[i]))).strftime("%Y-%m-%dT%H:%M:%SZ")
            w.writerow([f"e{i}", t.user_ids[t.user[i]], ts, repr(float(lon[i])),
                        repr(float(lat[i])), ""])

    def write_truth_csv(self, fh: io.TextIOBase) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for uid, code in sorted(self.truth.items()):
            w.writerow([uid, code])


def _sample_inside(region, k: int, rng: np.random.Generator):
    """Uniform points strictly inside the region's bbox that the region contains."""
    x0, y0, x1, y1 = region.bbox
    edges = region.edges()
    xs, ys = [], []
    need = k
    eps_x, eps_y = (x1 - x0) * 1e-6, (y1 - y0) * 1e-6
    while need > 0:
        m = max(16, int(need * 1.3))
        x = rng.uniform(x0 + eps_x, x1 - eps_x, m)
        y = rng.uniform(y0 + eps_y, y1 - eps_y, m)
        ok = contains(edges, x, y)
        xs.append(x[ok][:need])
        ys.append(y[ok][:need])
        need -= len(xs[-1])
    return np.concatenate(xs) if xs else np.empty(0), np.concatenate(ys) if ys else np.empty(0)


def expected_visitors(cfg: SynthConfig, region_pos: int) -> float:
    """Expected natural visitors per day to one region under the model."""
    R = len(cfg.regions)
    if R < 2:
        return 0.0
    p_active = 1 - math.exp(-cfg.events_per_user_per_day)
    n_home = np.bincount(np.arange(cfg.n_users) % R, minlength=R)
    others = n_home.sum() - n_home[region_pos]
    return (1 - cfg.home_share) * p_active * others / (R - 1)


def generate_world(cfg: SynthConfig) -> SynthWorld:
    cfg.validate()
    R, U = len(cfg.regions), cfg.n_users
    codes = cfg.regions.codes
    width = max(6, len(str(max(U - 1, 0))))
    user_ids = np.array([user_label(i, width) for i in range(U)], dtype=str)
    home = np.arange(U) % R
    specials: dict[int, list[tuple[int, int, SpecialEvent]]] = {}
    for k, ev in enumerate(cfg.special_events):
        specials.setdefault(day_number(ev.date), []).append((k, codes.index(ev.region), ev))
    lam = cfg.events_per_user_per_day
    users, regions, days, secs = [], [], [], []
    first = day_number(cfg.window.start)
    for t in range(cfg.window.n_days):
        dn = first + t
        rng = _rng(cfg.seed, t)
        n = rng.poisson(lam, U)
        where = home.copy()
        active = np.flatnonzero(n > 0)
        if R > 1 and cfg.home_share < 1 and len(active):
            key = rng.random(len(active))
            order = np.lexsort((key, home[active]))
            ranked = active[order]
            h = home[ranked]
            group_start = np.searchsorted(h, h, side="left")
            rank = np.arange(len(ranked)) - group_start
            sizes = np.bincount(h, minlength=R)
            n_travel = np.floor((1 - cfg.home_share) * sizes + 0.5).astype(np.int64)
            offset = rng.integers(0, R - 1, R)
            trav = rank < n_travel[h]
            step = 1 + (rank[trav] + offset[h[trav]]) % (R - 1)
            where[ranked[trav]] = (h[trav] + step) % R
        mark = len(users)
        u = np.repeat(np.arange(U), n)
        users.append(u)
        regions.append(where[u])
        for k, pos, ev in specials.get(dn, []):
            srng = _rng(cfg.seed, t, k + 1)
            extra = int(math.floor((ev.visitor_multiplier - 1) * expected_visitors(cfg, pos) + 0.5))
            present = np.zeros(U, dtype=bool)
            present[u[where[u] == pos]] = True
            pool = np.flatnonzero((home != pos) & ~present)
            chosen = np.sort(srng.choice(pool, size=min(extra, len(pool)), replace=False))
            users.append(chosen)
            regions.append(np.full(len(chosen), pos))
        total = sum(len(a) for a in users[mark:])
        days.append(np.full(total, dn, dtype=np.int32))
        secs.append(rng.integers(0, 86400, total))
    user = np.concatenate(users) if users else np.empty(0, np.int64)
    region = np.concatenate(regions) if regions else np.empty(0, np.int64)
    day = np.concatenate(days) if days else np.empty(0, np.int32)
    sec = np.concatenate(secs) if secs else np.empty(0, np.int64)
    order = np.lexsort((sec, user, day))
    table = EventTable(user_ids, codes, user[order].astype(np.int32),
                       region[order].astype(np.int32), day[order])
    return SynthWorld(cfg, table, sec[order].astype(np.int64), home)


# ---------------------------------------------------------------------------
# naive reference classifier


class NaiveClassifier:
    """Direct re-implementation of the stock rules with plain loops.

    Used as an oracle: no arrays, no sharding, no shared code with the
    batch pipeline. Home regions are recounted per user from the raw events.
    """

    def __init__(self, events: Sequence[ResolvedEvent], window: StudyWindow):
        self.events = list(events)
        self.window = window
        self.by_user: dict[str, list[str]] = {}
        for e in self.events:
            if window.start <= e.local_date <= window.end:
                self.by_user.setdefault(e.user_id, []).append(e.region)
        self._homes: dict[str, str | None] = {}

    def home(self, user_id: str) -> str | None:
        if user_id not in self._homes:
            counts: dict[str, int] = {}
            for region in self.by_user.get(user_id, []):
                counts[region] = counts.get(region, 0) + 1
            total = sum(counts.values())
            best, n_best, ties = None, 0, 0
            for region, c in counts.items():
                if c > n_best:
                    best, n_best, ties = region, c, 1
                elif c == n_best:
                    ties += 1
            self._homes[user_id] = best if total >= 2 and ties == 1 else None
        return self._homes[user_id]

    def classify(self, region: str, day: date) -> DailyStock:
        actives = []
        for e in self.events:
            if e.local_date == day and e.region == region and e.user_id not in actives:
                actives.append(e.user_id)
        res = non = unk = 0
        for uid in actives:
            h = self.home(uid)
            if h is None:
                unk += 1
            elif h == region:
                res += 1
            else:
                non += 1
        return DailyStock(day, region, res, non, unk, len(actives))


def oracle_classify(events: Sequence[ResolvedEvent], window: StudyWindow, region: str,
                    day: date) -> DailyStock:
    return NaiveClassifier(events, window).classify(region, day)


def read_truth_csv(fh) -> dict[str, str]:
    reader = csv.reader(fh)
    next(reader, None)
    return {row[0]: row[1] for row in reader if row}
