import io
from datetime import date, datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popstock.errors import DuplicatePlace, MalformedHeader
from popstock.ingest import (GeoEvent, PlaceEntry, PlaceRef, PlaceRegistry, Point, Precision,
                             RecordError, RecordErrorKind, ResolvedEvent, Unresolvable,
                             UnresolvableReason, load_places, parse_events, resolve_batch,
                             resolve_columns, resolve_event)
from popstock.regions import RegionSet, box_region, grid_regions

HEADER = "event_id,user_id,timestamp_utc,lon,lat,place_id\n"


def parse(body: str):
    return list(parse_events(io.BytesIO((HEADER + body).encode())))


def test_point_row():
    (ev,) = parse("e1,u1,2017-08-21T14:00:00Z,-81.03,34.00,\n")
    assert ev == GeoEvent("e1", "u1", datetime(2017, 8, 21, 14, tzinfo=timezone.utc),
                          Point(-81.03, 34.0))


def test_place_row():
    (ev,) = parse("e2,u1,2017-08-21T14:00:00Z,,,pl_columbia\n")
    assert ev.geotag == PlaceRef("pl_columbia")


@pytest.mark.parametrize("row, kind", [
    ("e3,u1,2017-08-21T14:00:00Z,,,", RecordErrorKind.NO_GEOTAG),
    ("e3,u1,2017-08-21T14:00:00Z,-81,34,pl_x", RecordErrorKind.BOTH_GEOTAGS),
    ("e3,u1,2017-08-21 14:00:00,-81,34,", RecordErrorKind.BAD_TIMESTAMP),
    ("e3,,2017-08-21T14:00:00Z,-81,34,", RecordErrorKind.MISSING_FIELD),
    ("e3,u1,2017-08-21T14:00:00Z,-81,,", RecordErrorKind.MISSING_FIELD),
    ("e3,u1,2017-08-21T14:00:00Z,-81", RecordErrorKind.MISSING_FIELD),
    ("e3,u1,2017-08-21T14:00:00Z,abc,34,", RecordErrorKind.BAD_COORDINATE),
])
def test_record_errors_carry_line(row, kind):
    out = parse("e1,u1,2017-08-21T14:00:00Z,-81.03,34.00,\n" + row + "\n")
    assert isinstance(out[0], GeoEvent)
    assert out[1] == RecordError(3, kind, out[1].detail)


def test_bad_header_raises():
    with pytest.raises(MalformedHeader):
        list(parse_events(io.StringIO("a,b,c\n")))


def test_places_registry():
    reg = load_places(io.StringIO("place_id,region_code,precision\npl_a,45079,city\n"
                                  "pl_sc,45,state\n"))
    assert reg["pl_a"] == PlaceEntry("45079", Precision.CITY)
    assert not reg["pl_sc"].precision.county_resolvable
    with pytest.raises(DuplicatePlace):
        load_places(io.StringIO("place_id,region_code,precision\na,1,city\na,2,city\n"))


@pytest.fixture(scope="module")
def world():
    rs = RegionSet((box_region("45079", -81.2, 33.9, -80.8, 34.2),))
    reg = PlaceRegistry(pl_columbia=PlaceEntry("45079", Precision.CITY),
                        pl_sc=PlaceEntry("45", Precision.STATE))
    return rs, reg


def ev(geotag, ts="2017-08-21T14:00:00Z"):
    when = datetime.strptime(ts, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    return GeoEvent("e", "u1", when, geotag)


def test_resolve_point_and_place(world):
    rs, reg = world
    r = resolve_event(ev(Point(-81.03, 34.0)), rs, reg, 0)
    assert r == ResolvedEvent("u1", "45079", date(2017, 8, 21), r.timestamp)
    assert resolve_event(ev(PlaceRef("pl_columbia")), rs, reg).region == "45079"


def test_resolve_offset_changes_date_only(world):
    rs, reg = world
    e = ev(Point(-81.03, 34.0), "2017-01-01T04:30:00Z")
    assert resolve_event(e, rs, reg, -300).local_date == date(2016, 12, 31)
    assert resolve_event(e, rs, reg, 0).local_date == date(2017, 1, 1)


@pytest.mark.parametrize("geotag, reason", [
    (Point(0.0, 0.0), UnresolvableReason.NO_CONTAINING_REGION),
    (PlaceRef("nowhere"), UnresolvableReason.UNKNOWN_PLACE),
    (PlaceRef("pl_sc"), UnresolvableReason.COARSE_PLACE),
])
def test_unresolvable(world, geotag, reason):
    rs, reg = world
    assert resolve_event(ev(geotag), rs, reg) == Unresolvable("e", reason)


lon_s = st.floats(-81.3, -80.7, allow_nan=False)
lat_s = st.floats(33.8, 34.3, allow_nan=False)
row_s = st.one_of(
    st.tuples(st.sampled_from(["u1", "u2", "u3"]), st.integers(0, 10 ** 6), lon_s, lat_s,
              st.just("")),
    st.tuples(st.sampled_from(["u1", "u2"]), st.integers(0, 10 ** 6), st.just(None),
              st.just(None), st.sampled_from(["pl_columbia", "pl_sc", "pl_zz"])),
    st.just("garbage,row"),
)


@settings(max_examples=80, deadline=None)
@given(st.lists(row_s, max_size=30), st.integers(-720, 720))
def test_batch_conservation_and_equivalence(world, rows, offset):
    rs, reg = world
    lines = []
    for i, r in enumerate(rows):
        if isinstance(r, str):
            lines.append(r)
            continue
        uid, secs, lon, lat, place = r
        ts = datetime.fromtimestamp(1483228800 + secs, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"e{i},{uid},{ts},{'' if lon is None else repr(lon)},"
                     f"{'' if lat is None else repr(lat)},{place}")
    text = HEADER + "".join(line + "\n" for line in lines)
    records = list(parse_events(io.StringIO(text)))
    assert len(records) == len(rows)
    single = [resolve_event(r, rs, reg, offset) for r in records if isinstance(r, GeoEvent)]
    resolved = [r for r in single if isinstance(r, ResolvedEvent)]
    table, summary = resolve_batch(records, rs, reg, offset)
    n_err = sum(isinstance(r, RecordError) for r in records)
    assert summary.n_records == len(rows)
    assert summary.n_resolved + sum(summary.unresolvable.values()) + summary.n_record_errors \
        == len(rows)
    assert summary.n_record_errors == n_err
    got = sorted((str(table.user_ids[u]), table.codes[r], int(d))
                 for u, r, d in zip(table.user, table.region, table.day))
    from popstock.ingest import day_number
    want = sorted((e.user_id, e.region, day_number(e.local_date)) for e in resolved)
    assert got == want
    # the offset never moves an event to another region
    regions0 = [r.region for r in (resolve_event(x, rs, reg, 0) for x in records
                                   if isinstance(x, GeoEvent)) if isinstance(r, ResolvedEvent)]
    assert sorted(regions0) == sorted(e.region for e in resolved)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_resolve_columns_chunking_is_invisible(threads):
    rs = grid_regions([f"{i:05d}" for i in range(1, 10)], 3)
    rng = np.random.default_rng(threads)
    lon = rng.uniform(-84, -81.5, 1001)
    lat = rng.uniform(31.5, 33.8, 1001)
    secs = rng.integers(0, 10 ** 9, 1001)
    one = resolve_columns(lon, lat, secs, rs, 60, threads=1)
    many = resolve_columns(lon, lat, secs, rs, 60, threads=threads)
    assert all(np.array_equal(a, b) for a, b in zip(one, many))
    assert (one[0] == -1).any() and (one[0] >= 0).any()
