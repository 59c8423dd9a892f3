"""Geotagged event records: parsing, place registry and region resolution."""
from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DuplicatePlace, MalformedHeader
from .parallel import default_threads, ordered_map
from .regions import RegionSet, locate_point

EVENT_HEADER = ["event_id", "user_id", "timestamp_utc", "lon", "lat", "place_id"]
PLACE_HEADER = ["place_id", "region_code", "precision"]
EPOCH = date(1970, 1, 1)
_TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class Point:
    lon: float
    lat: float


@dataclass(frozen=True)
class PlaceRef:
    place_id: str


@dataclass(frozen=True)
class GeoEvent:
    event_id: str
    user_id: str
    timestamp: datetime
    geotag: Point | PlaceRef


class RecordErrorKind(str, Enum):
    MISSING_FIELD = "MissingField"
    BAD_TIMESTAMP = "BadTimestamp"
    BAD_COORDINATE = "BadCoordinate"
    BOTH_GEOTAGS = "BothGeotagsPresent"
    NO_GEOTAG = "NoGeotag"


@dataclass(frozen=True)
class RecordError:
    line: int
    kind: RecordErrorKind
    detail: str = ""


class Precision(str, Enum):
    POINT = "point"
    CITY = "city"
    COUNTY = "county"
    STATE = "state"
    COUNTRY = "country"

    @property
    def county_resolvable(self) -> bool:
        return self in (Precision.POINT, Precision.CITY, Precision.COUNTY)


@dataclass(frozen=True)
class PlaceEntry:
    region: str
    precision: Precision


class PlaceRegistry(dict):
    """Mapping place_id -> PlaceEntry."""

    def region_codes(self) -> set[str]:
        """Codes reachable through county-resolvable entries."""
        return {e.region for e in self.values() if e.precision.county_resolvable}


@dataclass(frozen=True)
class ResolvedEvent:
    user_id: str
    region: str
    local_date: date
    timestamp: datetime


class UnresolvableReason(str, Enum):
    NO_CONTAINING_REGION = "NoContainingRegion"
    UNKNOWN_PLACE = "UnknownPlace"
    COARSE_PLACE = "CoarsePlace"


@dataclass(frozen=True)
class Unresolvable:
    event_id: str
    reason: UnresolvableReason


def _text_stream(stream) -> io.TextIOBase:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, _TS_FORMAT).replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(_TS_FORMAT)


def _parse_row(row: list[str], line: int) -> GeoEvent | RecordError:
    if len(row) != len(EVENT_HEADER):
        return RecordError(line, RecordErrorKind.MISSING_FIELD,
                           f"expected {len(EVENT_HEADER)} fields, got {len(row)}")
    event_id, user_id, ts, lon, lat, place = (v.strip() for v in row)
    for name, value in (("event_id", event_id), ("user_id", user_id), ("timestamp_utc", ts)):
        if not value:
            return RecordError(line, RecordErrorKind.MISSING_FIELD, name)
    try:
        when = parse_timestamp(ts)
    except ValueError:
        return RecordError(line, RecordErrorKind.BAD_TIMESTAMP, ts)
    has_point = bool(lon or lat)
    if has_point and not (lon and lat):
        return RecordError(line, RecordErrorKind.MISSING_FIELD, "lon/lat pair incomplete")
    if has_point and place:
        return RecordError(line, RecordErrorKind.BOTH_GEOTAGS)
    if place:
        return GeoEvent(event_id, user_id, when, PlaceRef(place))
    if not has_point:
        return RecordError(line, RecordErrorKind.NO_GEOTAG)
    try:
        x, y = float(lon), float(lat)
    except ValueError:
        return RecordError(line, RecordErrorKind.BAD_COORDINATE, f"{lon},{lat}")
    if not (-180 <= x <= 180 and -90 <= y <= 90):
        return RecordError(line, RecordErrorKind.BAD_COORDINATE, f"{lon},{lat}")
    return GeoEvent(event_id, user_id, when, Point(x, y))


def parse_events(stream, format: str = "dsv") -> Iterator[GeoEvent | RecordError]:
    """Yield one GeoEvent or RecordError per data line.

    Line numbers are physical: the header is line 1. Only a bad header
    raises; record-level problems never stop the stream.
    """
    if format != "dsv":
        raise ValueError(f"unsupported events format {format!r}")
    reader = csv.reader(_text_stream(stream))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != EVENT_HEADER:
        raise MalformedHeader(f"events header must be {','.join(EVENT_HEADER)}")
    for row in reader:
        yield _parse_row(row, reader.line_num)


def load_places(stream) -> PlaceRegistry:
    reader = csv.reader(_text_stream(stream))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != PLACE_HEADER:
        raise MalformedHeader(f"places header must be {','.join(PLACE_HEADER)}")
    reg = PlaceRegistry()
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise MalformedHeader(f"places line {reader.line_num}: expected 3 fields")
        pid, code, prec = (v.strip() for v in row)
        if pid in reg:
            raise DuplicatePlace(f"duplicate place_id {pid!r}")
        try:
            reg[pid] = PlaceEntry(code, Precision(prec))
        except ValueError as exc:
            raise MalformedHeader(f"places line {reader.line_num}: bad precision {prec!r}") from exc
    return reg


def local_date(ts: datetime, utc_offset_minutes: int) -> date:
    return (ts.astimezone(timezone.utc) + timedelta(minutes=utc_offset_minutes)).date()


def resolve_event(e: GeoEvent, regions: RegionSet, registry: PlaceRegistry,
                  utc_offset_minutes: int = 0) -> ResolvedEvent | Unresolvable:
    if isinstance(e.geotag, Point):
        code = locate_point(regions, e.geotag.lon, e.geotag.lat)
        if code is None:
            return Unresolvable(e.event_id, UnresolvableReason.NO_CONTAINING_REGION)
    else:
        entry = registry.get(e.geotag.place_id)
        if entry is None:
            return Unresolvable(e.event_id, UnresolvableReason.UNKNOWN_PLACE)
        if not entry.precision.county_resolvable:
            return Unresolvable(e.event_id, UnresolvableReason.COARSE_PLACE)
        code = entry.region
    return ResolvedEvent(e.user_id, code, local_date(e.timestamp, utc_offset_minutes), e.timestamp)


# ---------------------------------------------------------------------------
# columnar representation used by the batch pipeline


def day_number(d: date) -> int:
    return (d - EPOCH).days


def from_day_number(n: int) -> date:
    return EPOCH + timedelta(days=int(n))


def user_shard(user_ids: Sequence[str], k: int) -> np.ndarray:
    """Stable shard id per user (crc32 of the UTF-8 id, mod k)."""
    return np.fromiter((zlib.crc32(u.encode("utf-8")) % k for u in user_ids),
                       dtype=np.int64, count=len(user_ids))


@dataclass
class EventTable:
    """Resolved events as parallel integer columns.

    ``user`` indexes ``user_ids`` (sorted), ``region`` indexes ``codes``
    (sorted), ``day`` is the local date as days since 1970-01-01.
    """

    user_ids: np.ndarray
    codes: tuple[str, ...]
    user: np.ndarray
    region: np.ndarray
    day: np.ndarray

    def __len__(self) -> int:
        return len(self.user)

    @classmethod
    def from_arrays(cls, user_labels, region_codes, days, codes: Iterable[str] = ()):
        """Build from per-event labels; ``codes`` seeds the region vocabulary."""
        user_labels = np.asarray(user_labels, dtype=object).astype(str)
        region_codes = np.asarray(region_codes, dtype=object).astype(str)
        vocab = tuple(sorted(set(codes) | set(np.unique(region_codes).tolist())))
        if len(user_labels):
            user_ids, user = np.unique(user_labels, return_inverse=True)
        else:
            user_ids, user = np.empty(0, dtype=str), np.empty(0, dtype=np.int64)
        lookup = {c: i for i, c in enumerate(vocab)}
        region = np.fromiter((lookup[c] for c in region_codes), dtype=np.int32,
                             count=len(region_codes))
        return cls(user_ids, vocab, user.astype(np.int32), region,
                   np.asarray(days, dtype=np.int32))

    @classmethod
    def from_resolved(cls, events: Iterable[ResolvedEvent], codes: Iterable[str] = ()):
        events = list(events)
        return cls.from_arrays([e.user_id for e in events], [e.region for e in events],
                               [day_number(e.local_date) for e in events], codes)

    def to_resolved(self) -> list[ResolvedEvent]:
        """Events back as records; timestamps are local midnight in UTC terms."""
        out = []
        for u, r, d in zip(self.user, self.region, self.day):
            dd = from_day_number(d)
            out.append(ResolvedEvent(str(self.user_ids[u]), self.codes[r], dd,
                                     datetime(dd.year, dd.month, dd.day, tzinfo=timezone.utc)))
        return out

    def subset(self, mask: np.ndarray) -> "EventTable":
        return EventTable(self.user_ids, self.codes, self.user[mask],
                          self.region[mask], self.day[mask])


@dataclass
class ResolveSummary:
    n_records: int = 0
    n_resolved: int = 0
    n_record_errors: int = 0
    unresolvable: dict | None = None

    def as_line(self) -> str:
        parts = [f"records={self.n_records}", f"resolved={self.n_resolved}",
                 f"record_errors={self.n_record_errors}"]
        for k, v in sorted((self.unresolvable or {}).items()):
            parts.append(f"{k}={v}")
        return " ".join(parts)


def resolve_columns(lon: np.ndarray, lat: np.ndarray, epoch_seconds: np.ndarray,
                    regions: RegionSet, utc_offset_minutes: int = 0, threads: int | None = 1):
    """Vectorized point resolution: region positions (-1 if none) and local days.

    With ``threads > 1`` the points are split into contiguous chunks that are
    located concurrently; the result does not depend on the chunking.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    n = threads or default_threads()
    if n > 1 and lon.size >= 2 * n:
        bounds = np.linspace(0, lon.size, n + 1).astype(np.int64)
        parts = ordered_map(lambda i: regions.locate_many(lon[bounds[i]:bounds[i + 1]],
                                                          lat[bounds[i]:bounds[i + 1]]),
                            range(n), n)
        pos = np.concatenate(parts)
    else:
        pos = regions.locate_many(lon, lat)
    days = np.floor_divide(np.asarray(epoch_seconds, dtype=np.int64)
                           + 60 * int(utc_offset_minutes), 86400)
    return pos, days.astype(np.int32)


def resolve_batch(records: Iterable[GeoEvent | RecordError], regions: RegionSet,
                  registry: PlaceRegistry, utc_offset_minutes: int = 0,
                  threads: int | None = 1):
    """Resolve a parsed stream into an EventTable plus a count summary.

    Point geotags are located in one vectorized pass; place references go
    through the registry. Equivalent to calling ``resolve_event`` per record.
    """
    summary = ResolveSummary(unresolvable={r.value: 0 for r in UnresolvableReason})
    p_users, p_lon, p_lat, p_secs = [], [], [], []
    r_users, r_codes, r_days = [], [], []
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    for rec in records:
        summary.n_records += 1
        if isinstance(rec, RecordError):
            summary.n_record_errors += 1
            continue
        secs = int((rec.timestamp - epoch).total_seconds())
        if isinstance(rec.geotag, Point):
            p_users.append(rec.user_id)
            p_lon.append(rec.geotag.lon)
            p_lat.append(rec.geotag.lat)
            p_secs.append(secs)
            continue
        entry = registry.get(rec.geotag.place_id)
        if entry is None:
            summary.unresolvable[UnresolvableReason.UNKNOWN_PLACE.value] += 1
        elif not entry.precision.county_resolvable:
            summary.unresolvable[UnresolvableReason.COARSE_PLACE.value] += 1
        else:
            r_users.append(rec.user_id)
            r_codes.append(entry.region)
            r_days.append((secs + 60 * utc_offset_minutes) // 86400)
    pos, pdays = resolve_columns(np.array(p_lon, float), np.array(p_lat, float),
                                 np.array(p_secs, np.int64), regions, utc_offset_minutes,
                                 threads)
    hit = pos >= 0
    summary.unresolvable[UnresolvableReason.NO_CONTAINING_REGION.value] += int((~hit).sum())
    codes = np.array(regions.codes, dtype=object)
    users = np.concatenate([np.array(p_users, dtype=object)[hit], np.array(r_users, dtype=object)])
    region_codes = np.concatenate([codes[pos[hit]] if len(codes) else np.empty(0, object),
                                   np.array(r_codes, dtype=object)])
    days = np.concatenate([pdays[hit], np.array(r_days, dtype=np.int32)])
    table = EventTable.from_arrays(users, region_codes, days,
                                   codes=set(regions.codes) | registry.region_codes())
    summary.n_resolved = len(table)
    return table, summary
