import io
import random
from datetime import date, timedelta

import pytest
from hypothesis import given, strategies as st

from popstock.errors import MismatchedKey, ShardOverlap
from popstock.inference import HomeAssignment, StudyWindow, infer_homes
from popstock.ingest import EventTable, ResolvedEvent
from popstock.stocks import (DailyStock, VolumeRecord, compute_daily_stock, compute_stocks,
                             daily_active_users, merge_partial_stocks, normalize_by_volume,
                             read_stocks_csv, write_stocks_csv)
from popstock.synth import NaiveClassifier

D = date(2017, 1, 1)


def resident(uid, region):
    return HomeAssignment(uid, region, None, 3, 4)


def test_daily_active_users():
    evs = [ResolvedEvent(u, "A", D, None) for u in ("u1", "u2", "u1")]
    assert daily_active_users(evs, D, "A") == {"u1", "u2"}
    assert daily_active_users(evs, D + timedelta(days=1), "A") == set()
    evs.append(ResolvedEvent("u1", "B", D, None))
    assert "u1" in daily_active_users(evs, D, "A") and "u1" in daily_active_users(evs, D, "B")


def test_compute_daily_stock():
    homes = {"u1": resident("u1", "C"), "u2": resident("u2", "D"),
             "u3": HomeAssignment("u3", None, None, 1, 1)}
    assert compute_daily_stock({"u1", "u2", "u3"}, "C", homes, D).counts() == (1, 1, 1, 3)
    assert compute_daily_stock({"u1"}, "C", homes, D).counts() == (1, 0, 0, 1)
    assert compute_daily_stock(set(), "C", homes, D).counts() == (0, 0, 0, 0)
    # users without an assignment count as unknown
    assert compute_daily_stock({"zz"}, "C", homes, D).counts() == (0, 0, 1, 1)


def test_invariant_enforced():
    with pytest.raises(ValueError):
        DailyStock(D, "A", 1, 1, 1, 4)


def test_merge_examples():
    a = DailyStock(D, "A", 2, 1, 0, 3)
    b = DailyStock(D, "A", 1, 0, 2, 3)
    assert merge_partial_stocks(a, b).counts() == (3, 1, 2, 6)
    zero = DailyStock(D, "A", 0, 0, 0, 0)
    assert merge_partial_stocks(a, zero) == a
    with pytest.raises(ShardOverlap):
        merge_partial_stocks(a, b, {"u1", "u2"}, {"u2"})
    with pytest.raises(MismatchedKey):
        merge_partial_stocks(a, DailyStock(D, "B", 0, 0, 0, 0))


stock_s = st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50)).map(
    lambda t: DailyStock(D, "A", t[0], t[1], t[2], sum(t)))


@given(stock_s, stock_s, stock_s)
def test_merge_is_commutative_monoid(a, b, c):
    assert merge_partial_stocks(a, b) == merge_partial_stocks(b, a)
    assert merge_partial_stocks(merge_partial_stocks(a, b), c) == \
        merge_partial_stocks(a, merge_partial_stocks(b, c))


def test_normalize():
    s = DailyStock(D, "A", 10, 50, 5, 65)
    r = normalize_by_volume(s, VolumeRecord(D, "A", 1000))
    assert r.non_resident_rate == 0.05
    r = normalize_by_volume(DailyStock(D, "A", 0, 0, 0, 0), VolumeRecord(D, "A", 0))
    assert r.resident_rate is None and r.non_resident_rate is None and r.unknown_rate is None
    r = normalize_by_volume(DailyStock(D, "A", 1, 1, 1, 3), VolumeRecord(D, "A", 3))
    assert r.resident_rate + r.non_resident_rate + r.unknown_rate == pytest.approx(1.0)
    with pytest.raises(MismatchedKey):
        normalize_by_volume(s, VolumeRecord(D, "B", 3))


def _random_world(seed, n_users=40, n_events=600, days=10):
    rng = random.Random(seed)
    regions = ["A", "B", "C", "D"]
    evs = [ResolvedEvent(f"u{rng.randrange(n_users)}", rng.choice(regions),
                         D + timedelta(days=rng.randrange(days)), None)
           for _ in range(n_events)]
    return evs, StudyWindow(D, D + timedelta(days=days - 1))


@pytest.mark.parametrize("seed", range(5))
def test_batch_matches_oracle_and_shards(seed):
    evs, window = _random_world(seed)
    table = EventTable.from_resolved(evs, ["A", "B", "C", "D", "E"])
    homes = infer_homes(table, window)
    base = compute_stocks(table, homes, window.dates(), with_volume=True)
    oracle = NaiveClassifier(evs, window)
    rows = base.rows()
    assert len(rows) == window.n_days * 5  # region E has no events but still gets rows
    for s in rows:
        assert s == oracle.classify(s.region, s.date)
    for v, s in zip(base.volumes(), rows):
        n_ev = sum(1 for e in evs if e.local_date == v.date and e.region == v.region)
        assert v.total_events == n_ev >= s.total_active
    for k in (2, 3, 4, 8):
        assert compute_stocks(table, homes, window.dates(), shards=k, threads=4).rows() == rows


def test_user_counted_once_per_region_day():
    evs = [ResolvedEvent("u1", "A", D, None)] * 5 + [ResolvedEvent("u1", "B", D, None)]
    table = EventTable.from_resolved(evs)
    st_ = compute_stocks(table, infer_homes(table, StudyWindow(D, D)), [D])
    assert [s.total_active for s in st_.rows()] == [1, 1]
    assert [s.residents for s in st_.rows()] == [1, 0]


def test_csv_roundtrip_sorted():
    rows = [DailyStock(D + timedelta(days=1), "B", 1, 0, 0, 1), DailyStock(D, "B", 0, 1, 0, 1),
            DailyStock(D, "A", 0, 0, 2, 2)]
    buf = io.StringIO()
    write_stocks_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "date,region_code,residents,non_residents,unknown,total_active"
    assert lines[1:] == ["2017-01-01,A,0,0,2,2", "2017-01-01,B,0,1,0,1", "2017-01-02,B,1,0,0,1"]
    assert read_stocks_csv(io.StringIO(buf.getvalue())) == sorted(rows, key=lambda s: s.key)
