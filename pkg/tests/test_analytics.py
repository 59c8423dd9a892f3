import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from popstock.analytics import (StockSeries, aggregate_series, band_of, daily_share,
                                influx_ratio, influx_report, series_by_region, zscore_series,
                                zseries)
from popstock.errors import (DegenerateSeries, EmptyWindow, NonFinite, SeriesGap, ZeroBaseline,
                             ZeroTotal)
from popstock.stocks import DailyStock

D0 = date(2017, 1, 1)


def series(values, region="A", start=D0):
    return StockSeries(region, tuple(start + timedelta(days=i) for i in range(len(values))),
                       tuple(values))


def test_daily_share():
    assert daily_share(series([10, 30, 60])).tolist() == pytest.approx([0.1, 0.3, 0.6], abs=1e-15)
    assert daily_share([5, 5]).tolist() == [0.5, 0.5]
    with pytest.raises(ZeroTotal):
        daily_share([0, 0, 0])


def test_zscore():
    z = zscore_series(daily_share([1, 2, 3]))
    assert z.tolist() == pytest.approx([-1, 0, 1], abs=1e-12)
    with pytest.raises(DegenerateSeries):
        zscore_series([0.25] * 4)
    with pytest.raises(DegenerateSeries):
        zscore_series([1.0])


@pytest.mark.parametrize("z, band", [
    (0, 5), (2.3, 9), (-1.2, 3), (-2.0001, 1), (-2.0, 2), (-0.5, 5), (0.4999, 5), (0.5, 6),
    (1.0, 7), (1.5, 8), (2.0, 9), (-1.5, 3), (-1.0, 4), (-1e300, 1), (1e300, 9),
])
def test_band_table(z, band):
    assert band_of(z) == band


def test_band_non_finite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(NonFinite):
            band_of(bad)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_band_monotone(a, b):
    lo, hi = sorted((a, b))
    assert 1 <= band_of(lo) <= band_of(hi) <= 9


def test_influx():
    assert influx_ratio(650, [100, 95, 105]) == pytest.approx(550)
    assert influx_ratio(280, [100]) == pytest.approx(180)
    assert influx_ratio(7.5, [5, 10]) == 0
    with pytest.raises(ZeroBaseline):
        influx_ratio(3, [0, 0])
    with pytest.raises(ZeroBaseline):
        influx_ratio(3, [])


count_series = st.lists(st.integers(0, 10_000), min_size=2, max_size=120)


@settings(max_examples=200)
@given(count_series, st.integers(1, 1000))
def test_z_properties_and_integer_scale_invariance(values, k):
    assume(sum(values) > 0 and len(set(values)) > 1)
    zs = zseries(series(values))
    assert math.fsum(zs.shares) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.mean(zs.zscores)) <= 1e-9
    assert abs(np.std(zs.zscores, ddof=1) - 1) <= 1e-9
    scaled = zseries(series([k * v for v in values]))
    assert np.array_equal(scaled.zscores, zs.zscores)
    assert np.array_equal(scaled.bands, zs.bands)


@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=60), st.floats(1e-3, 1e3))
def test_real_scale_invariance(values, k):
    assume(np.ptp(values) > 1e-6 * max(values))
    z1 = zscore_series(daily_share([k * v for v in values]))
    z0 = zscore_series(daily_share(values))
    assert np.allclose(z1, z0, rtol=0, atol=1e-9)


@settings(max_examples=100)
@given(st.integers(30, 400), st.integers(0, 2 ** 32 - 1), st.floats(6, 20))
def test_spike_lands_in_band_9(n, seed, k):
    rng = np.random.default_rng(seed)
    base = 1000 + rng.normal(0, 10, n)
    sd = np.std(base, ddof=1)
    i = int(rng.integers(n))
    base[i] = np.mean(np.delete(base, i)) + k * sd
    zs = zseries(series(base.tolist()))
    assert zs.bands[i] == 9
    assert int(np.argmax(zs.zscores)) == i


def test_series_gap_detected():
    with pytest.raises(SeriesGap):
        StockSeries("A", (D0, D0 + timedelta(days=2)), (1, 2))


def stocks_for(region, values, field="residents", start=D0):
    out = []
    for i, v in enumerate(values):
        kw = dict(residents=0, non_residents=0, unknown=0)
        kw[field] = v
        out.append(DailyStock(start + timedelta(days=i), region, total_active=v, **kw))
    return out


def test_aggregate_examples():
    rows = stocks_for("A", [10] * 365)
    (agg,) = aggregate_series(rows, "residents", "annual_daily_mean")
    assert agg.value == 10 and agg.n_days == 365
    jan = stocks_for("B", [2] * 31, "non_residents")
    (m,) = aggregate_series(jan, "non_residents", "monthly_daily_mean")
    (s,) = aggregate_series(jan, "non_residents", "monthly_sum")
    assert (m.month, m.value, s.value) == ("2017-01", 2, 62)
    both = aggregate_series(rows + stocks_for("B", [3] * 365), "residents")
    assert [a.region for a in both] == ["A", "B"]
    with pytest.raises(EmptyWindow):
        aggregate_series([], "residents")


def test_influx_report_and_series_by_region():
    rows = stocks_for("A", [10, 10, 65, 10], "non_residents") + \
        stocks_for("B", [5, 5, 5, 5], "non_residents")
    ser = series_by_region(rows, "non_residents")
    rep = influx_report(ser, D0 + timedelta(days=2), [D0, D0 + timedelta(days=3)])
    assert [(r.region, r.pct_change) for r in rep] == [("A", 550.0), ("B", 0.0)]
