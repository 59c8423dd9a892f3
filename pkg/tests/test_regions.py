import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import feature_collection, square_feature
from oracles import linear_scan_locate, ring_list_contains
from popstock.errors import (CoordinateOutOfRange, DuplicateCode, InvalidCode, InvalidGroup,
                             MalformedGeometry, MissingCodeProperty)
from popstock.regions import RegionSet, box_region, load_regions, locate_point


def test_load_single_unit_square():
    rs = load_regions(feature_collection(square_feature("A")))
    assert len(rs) == 1
    assert rs.codes == ("A",)


def test_duplicate_code_rejected():
    doc = feature_collection(square_feature("45079"), square_feature("45079", x0=3))
    with pytest.raises(DuplicateCode):
        load_regions(doc)


def test_missing_code_property():
    f = square_feature("A")
    del f["properties"]["code"]
    with pytest.raises(MissingCodeProperty):
        load_regions(feature_collection(f))


@pytest.mark.parametrize("ring", [
    [[0, 0], [1, 0], [1, 1], [0, 1]],            # not closed
    [[0, 0], [1, 0], [0, 0]],                    # too few vertices
])
def test_malformed_rings(ring):
    f = {"type": "Feature", "properties": {"code": "A"},
         "geometry": {"type": "Polygon", "coordinates": [ring]}}
    with pytest.raises(MalformedGeometry):
        load_regions(feature_collection(f))


def test_strict_codes():
    load_regions(feature_collection(square_feature("45079"), square_feature("FR", x0=5)),
                 strict_codes=True)
    with pytest.raises(InvalidCode):
        load_regions(feature_collection(square_feature("A")), strict_codes=True)


def test_singleton_group_rejected():
    with pytest.raises(InvalidGroup):
        load_regions(feature_collection(square_feature("A", group="g")))


def test_sc46_fixture(data_dir):
    raw = (data_dir / "sc46.geojson").read_bytes()
    n_features = len(json.loads(raw)["features"])
    rs = load_regions(raw)
    assert n_features == 46 and len(rs) == 46
    assert len(rs.index) == 46  # one entry per ring bbox
    x0, y0, x1, y1 = rs.index.extent
    for x, y in [(x0, y0), ((x0 + x1) / 2, (y0 + y1) / 2), (x1, y1)]:
        assert len(rs.candidates(x, y)) <= 46
    assert rs.groups()["45079"] == rs.groups()["45063"] == "columbia-metro"


def test_locate_interior_exterior_and_shared_edge(two_squares):
    one = RegionSet((box_region("A", 0, 0, 1, 1),))
    assert locate_point(one, 0.5, 0.5) == "A"
    assert locate_point(one, 2, 2) is None
    # both polygons contain the edge point; the smaller code wins
    rings_a = [r.tolist() for r in two_squares.get("A").rings]
    rings_b = [r.tolist() for r in two_squares.get("B").rings]
    assert ring_list_contains(rings_a, 1.0, 0.5) and ring_list_contains(rings_b, 1.0, 0.5)
    assert locate_point(two_squares, 1.0, 0.5) == "A"


def test_hole_excluded():
    outer = [[0, 0], [4, 0], [4, 4], [0, 4], [0, 0]]
    hole = [[1, 1], [3, 1], [3, 3], [1, 3], [1, 1]]
    f = {"type": "Feature", "properties": {"code": "D"},
         "geometry": {"type": "Polygon", "coordinates": [outer, hole]}}
    rs = load_regions(feature_collection(f))
    assert locate_point(rs, 0.5, 0.5) == "D"
    assert locate_point(rs, 2, 2) is None
    assert locate_point(rs, 1, 2) == "D"  # on the hole's edge


def test_out_of_range():
    rs = RegionSet((box_region("A", 0, 0, 1, 1),))
    with pytest.raises(CoordinateOutOfRange):
        locate_point(rs, 181, 0)
    with pytest.raises(CoordinateOutOfRange):
        locate_point(rs, 0, -91)


def _random_regions(draw):
    n = draw(st.integers(1, 6))
    regions = []
    for i in range(n):
        x0 = draw(st.integers(-6, 4)) / 2
        y0 = draw(st.integers(-6, 4)) / 2
        w = draw(st.integers(1, 6)) / 2
        h = draw(st.integers(1, 6)) / 2
        if draw(st.booleans()):
            regions.append(box_region(f"R{i}", x0, y0, x0 + w, y0 + h))
        else:  # triangle
            ring = np.array([[x0, y0], [x0 + w, y0], [x0, y0 + h], [x0, y0]], float)
            from popstock.regions import Region
            regions.append(Region(f"R{i}", f"R{i}", ((ring,),)))
    return RegionSet(tuple(regions))


@st.composite
def world_and_points(draw):
    rs = _random_regions(draw)
    coords = st.integers(-16, 24).map(lambda v: v / 4)
    pts = draw(st.lists(st.tuples(coords, coords), min_size=1, max_size=40))
    return rs, pts


@settings(max_examples=150, deadline=None)
@given(world_and_points())
def test_indexed_equals_linear_scan(case):
    rs, pts = case
    plain = [(r.code, [ring.tolist() for ring in r.rings]) for r in rs]
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    bulk = rs.locate_many(xs, ys)
    for (x, y), pos in zip(pts, bulk):
        expect = linear_scan_locate(plain, x, y)
        assert locate_point(rs, x, y) == expect
        assert (None if pos < 0 else rs.codes[pos]) == expect
        if expect is not None:
            bx = rs.get(expect).bbox
            assert bx[0] <= x <= bx[2] and bx[1] <= y <= bx[3]


def test_agrees_with_shapely_covers():
    pytest.importorskip("shapely")
    from shapely.geometry import Point, Polygon
    rng = np.random.default_rng(7)
    ring = np.array([[0, 0], [3, 0.5], [4, 3], [2, 4.5], [0.5, 3], [1.5, 1.5], [0, 0]])
    from popstock.regions import Region
    rs = RegionSet((Region("P", "P", ((ring,),)),))
    poly = Polygon(ring)
    xs = rng.uniform(-1, 5, 2000)
    ys = rng.uniform(-1, 5, 2000)
    got = rs.locate_many(xs, ys) == 0
    want = np.array([poly.covers(Point(x, y)) for x, y in zip(xs, ys)])
    assert (got == want).all()
    # vertices are on the boundary
    assert all(locate_point(rs, x, y) == "P" for x, y in ring)


def test_locate_deterministic_and_parallel_safe(data_dir):
    from concurrent.futures import ThreadPoolExecutor
    rs = load_regions(data_dir / "sc46.geojson")
    rng = np.random.default_rng(3)
    xs = rng.uniform(-83.5, -78.9, 5000)
    ys = rng.uniform(31.9, 34.8, 5000)
    first = rs.locate_many(xs, ys)
    with ThreadPoolExecutor(4) as pool:
        parts = list(pool.map(lambda s: rs.locate_many(xs[s], ys[s]),
                              [slice(i, i + 1250) for i in range(0, 5000, 1250)]))
    assert (np.concatenate(parts) == first).all()
    assert (load_regions(data_dir / "sc46.geojson").locate_many(xs, ys) == first).all()
