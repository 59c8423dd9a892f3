"""Region boundaries, a bounding-box index and point-to-region lookup.

Geometry is planar lon/lat. Containment uses the even-odd rule over every
ring of a region (so holes need no special handling) and counts points on
an edge as contained. When several regions contain a point the smallest
code wins.
"""
from __future__ import annotations

import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoordinateOutOfRange,
    DuplicateCode,
    InvalidCode,
    InvalidGroup,
    MalformedGeometry,
    MissingCodeProperty,
)

FIPS_RE = re.compile(r"^\d{5}$")
ISO2_RE = re.compile(r"^[A-Z]{2}$")

# points x edges evaluated per containment block
_BLOCK = 1 << 22


def is_valid_code(code: str, strict: bool = False) -> bool:
    if not isinstance(code, str) or not code:
        return False
    if not strict:
        return True
    return bool(FIPS_RE.match(code)) != bool(ISO2_RE.match(code))


@dataclass(frozen=True, eq=False)
class Region:
    code: str
    name: str
    # polygons -> rings -> (n, 2) closed vertex arrays
    polygons: tuple[tuple[np.ndarray, ...], ...]
    group: str | None = None

    @property
    def rings(self) -> list[np.ndarray]:
        return [ring for poly in self.polygons for ring in poly]

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        pts = np.vstack(self.rings)
        return (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))

    def edges(self) -> np.ndarray:
        """All ring edges as an (m, 4) array of x1, y1, x2, y2."""
        parts = [np.hstack([r[:-1], r[1:]]) for r in self.rings]
        return np.vstack(parts)


def contains(edges: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Boundary-inclusive even-odd test of points against one region's edges."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(x.shape, dtype=bool)
    if x.size == 0:
        return out
    step = max(1, _BLOCK // max(1, len(edges)))
    x1, y1, x2, y2 = (edges[:, i][None, :] for i in range(4))
    for lo in range(0, x.size, step):
        px = x[lo:lo + step, None]
        py = y[lo:lo + step, None]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        on_edge = ((cross == 0)
                   & (px >= np.minimum(x1, x2)) & (px <= np.maximum(x1, x2))
                   & (py >= np.minimum(y1, y2)) & (py <= np.maximum(y1, y2)))
        straddle = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        crossings = np.count_nonzero(straddle & (px < xint), axis=1)
        out[lo:lo + step] = on_edge.any(axis=1) | (crossings % 2 == 1)
    return out


class BoxIndex:
    """Static index over ring bounding boxes, bucketed on a uniform grid.

    Each entry is one ring bbox tagged with the position of its owning
    region. A bbox is registered in every grid cell it overlaps, using the
    same cell arithmetic as queries, so pruning never loses a candidate.
    """

    def __init__(self, boxes: np.ndarray, owners: np.ndarray):
        self.boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
        self.owners = np.asarray(owners, dtype=np.int64)
        n = len(self.boxes)
        if n == 0:
            self.extent = (0.0, 0.0, 0.0, 0.0)
            self.nx = self.ny = 1
            self.cells: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
            return
        self.extent = (float(self.boxes[:, 0].min()), float(self.boxes[:, 1].min()),
                       float(self.boxes[:, 2].max()), float(self.boxes[:, 3].max()))
        side = min(256, 2 * math.ceil(math.sqrt(n)))
        self.nx = self.ny = side
        x0, y0, x1, y1 = self.extent
        self._dx = (x1 - x0) / side or 1.0
        self._dy = (y1 - y0) / side or 1.0
        buckets: list[list[int]] = [[] for _ in range(side * side)]
        cx0, cy0 = self._cell_xy(self.boxes[:, 0], self.boxes[:, 1])
        cx1, cy1 = self._cell_xy(self.boxes[:, 2], self.boxes[:, 3])
        for e in range(n):
            for i in range(cx0[e], cx1[e] + 1):
                for j in range(cy0[e], cy1[e] + 1):
                    buckets[i * side + j].append(e)
        self.cells = [np.asarray(b, dtype=np.int64) for b in buckets]

    def __len__(self) -> int:
        return len(self.boxes)

    def _cell_xy(self, x, y):
        x0, y0, _, _ = self.extent
        cx = np.clip(np.floor((np.asarray(x, float) - x0) / self._dx), 0, self.nx - 1)
        cy = np.clip(np.floor((np.asarray(y, float) - y0) / self._dy), 0, self.ny - 1)
        return cx.astype(np.int64), cy.astype(np.int64)

    def cell_of(self, x, y) -> np.ndarray:
        """Grid cell per point; -1 outside the indexed extent."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(self.boxes) == 0:
            return np.full(x.shape, -1, dtype=np.int64)
        x0, y0, x1, y1 = self.extent
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        cx, cy = self._cell_xy(x, y)
        return np.where(inside, cx * self.ny + cy, -1)

    def query(self, x: float, y: float) -> np.ndarray:
        """Sorted owner positions whose ring bbox contains (x, y)."""
        cell = int(self.cell_of(np.array([x]), np.array([y]))[0])
        if cell < 0:
            return np.empty(0, dtype=np.int64)
        ents = self.cells[cell]
        b = self.boxes[ents]
        hit = (b[:, 0] <= x) & (x <= b[:, 2]) & (b[:, 1] <= y) & (y <= b[:, 3])
        return np.unique(self.owners[ents[hit]])


@dataclass(eq=False)
class RegionSet:
    """Immutable collection of regions sorted by code, with its index."""

    regions: tuple[Region, ...]
    index: BoxIndex = field(init=False, repr=False)

    def __post_init__(self):
        regions = tuple(sorted(self.regions, key=lambda r: r.code))
        seen = set()
        for r in regions:
            if r.code in seen:
                raise DuplicateCode(f"duplicate region code {r.code!r}")
            seen.add(r.code)
        groups: dict[str, int] = {}
        for r in regions:
            if r.group is not None:
                groups[r.group] = groups.get(r.group, 0) + 1
        lonely = sorted(g for g, n in groups.items() if n < 2)
        if lonely:
            raise InvalidGroup(f"groups with a single member: {', '.join(lonely)}")
        self.regions = regions
        self._edges = [r.edges() for r in regions]
        self._bboxes = np.array([r.bbox for r in regions], dtype=float).reshape(-1, 4)
        boxes, owners = [], []
        for pos, r in enumerate(regions):
            for ring in r.rings:
                boxes.append((ring[:, 0].min(), ring[:, 1].min(),
                              ring[:, 0].max(), ring[:, 1].max()))
                owners.append(pos)
        self.index = BoxIndex(np.array(boxes, dtype=float), np.array(owners))

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(r.code for r in self.regions)

    def groups(self) -> dict[str, str]:
        return {r.code: r.group for r in self.regions if r.group is not None}

    def get(self, code: str) -> Region:
        for r in self.regions:
            if r.code == code:
                return r
        raise KeyError(code)

    def candidates(self, lon: float, lat: float) -> list[str]:
        return [self.regions[i].code for i in self.index.query(lon, lat)]

    def locate_many(self, lon, lat) -> np.ndarray:
        """Vectorized lookup; returns region positions (-1 when unmatched).

        Positions follow ``codes``, which is sorted, so the first containing
        candidate in position order is the lexicographically smallest code.
        """
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        _check_range(lon, lat)
        out = np.full(lon.shape, -1, dtype=np.int64)
        if lon.size == 0 or len(self.regions) == 0:
            return out
        cells = self.index.cell_of(lon, lat)
        order = np.argsort(cells, kind="stable")
        sorted_cells = cells[order]
        starts = np.flatnonzero(np.r_[True, sorted_cells[1:] != sorted_cells[:-1]])
        ends = np.r_[starts[1:], len(order)]
        for s, e in zip(starts, ends):
            cell = sorted_cells[s]
            if cell < 0:
                continue
            ents = self.index.cells[cell]
            if len(ents) == 0:
                continue
            pts = order[s:e]
            px, py = lon[pts], lat[pts]
            found = np.full(len(pts), -1, dtype=np.int64)
            for pos in np.unique(self.index.owners[ents]):
                bx = self._bboxes[pos]
                m = ((found < 0) & (px >= bx[0]) & (px <= bx[2])
                     & (py >= bx[1]) & (py <= bx[3]))
                if not m.any():
                    continue
                sel = np.flatnonzero(m)
                hit = contains(self._edges[pos], px[sel], py[sel])
                found[sel[hit]] = pos
            out[pts] = found
        return out


def _check_range(lon: np.ndarray, lat: np.ndarray) -> None:
    bad = ~((lon >= -180) & (lon <= 180) & (lat >= -90) & (lat <= 90))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CoordinateOutOfRange(f"coordinate out of range: ({lon.flat[i]}, {lat.flat[i]})")


def locate_point(regions: RegionSet, lon: float, lat: float) -> str | None:
    """Code of the region containing (lon, lat), or None."""
    pos = int(regions.locate_many(np.array([lon], float), np.array([lat], float))[0])
    return None if pos < 0 else regions.regions[pos].code


def _ring(coords, code: str) -> np.ndarray:
    try:
        arr = np.asarray(coords, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedGeometry(f"{code}: non-numeric ring coordinates") from exc
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise MalformedGeometry(f"{code}: ring is not a list of positions")
    arr = arr[:, :2]
    if len(arr) < 4:
        raise MalformedGeometry(f"{code}: ring has {len(arr)} vertices, need >= 4")
    if not np.array_equal(arr[0], arr[-1]):
        raise MalformedGeometry(f"{code}: ring is not closed")
    if not np.isfinite(arr).all():
        raise MalformedGeometry(f"{code}: non-finite coordinate")
    if (np.abs(arr[:, 0]) > 180).any() or (np.abs(arr[:, 1]) > 90).any():
        raise MalformedGeometry(f"{code}: coordinate outside lon/lat range")
    return arr


def _polygons(geometry, code: str) -> tuple[tuple[np.ndarray, ...], ...]:
    if not isinstance(geometry, dict):
        raise MalformedGeometry(f"{code}: missing geometry")
    kind = geometry.get("type")
    coords = geometry.get("coordinates")
    if kind == "Polygon":
        polys = [coords]
    elif kind == "MultiPolygon":
        polys = coords
    else:
        raise MalformedGeometry(f"{code}: unsupported geometry type {kind!r}")
    if not polys or any(not p for p in polys):
        raise MalformedGeometry(f"{code}: empty geometry")
    return tuple(tuple(_ring(r, code) for r in p) for p in polys)


def region_from_feature(feature: dict, strict_codes: bool = False) -> Region:
    props = feature.get("properties") or {}
    code = props.get("code")
    if code is None or code == "":
        raise MissingCodeProperty("feature without a 'code' property")
    if not is_valid_code(code, strict_codes):
        raise InvalidCode(f"invalid region code {code!r}")
    group = props.get("group")
    return Region(code=code, name=props.get("name") or code,
                  polygons=_polygons(feature.get("geometry"), code),
                  group=group or None)


def load_regions(source, format: str = "geo-boundary",
                 strict_codes: bool = False) -> RegionSet:
    """Parse a boundary feature collection into a ``RegionSet``.

    ``source`` may be a path, raw bytes/str, or a readable file object.
    With ``strict_codes`` every code must be a 5-digit FIPS or ISO alpha-2.
    """
    if format != "geo-boundary":
        raise ValueError(f"unsupported boundary format {format!r}")
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, "rb") as fh:
            doc = json.load(fh)
    elif isinstance(source, (bytes, bytearray, str)):
        doc = json.loads(source)
    else:
        doc = json.load(source)
    if doc.get("type") != "FeatureCollection":
        raise MalformedGeometry("boundary file is not a FeatureCollection")
    regions = [region_from_feature(f, strict_codes) for f in doc.get("features", [])]
    return RegionSet(tuple(regions))


def regions_to_geojson(regions: Iterable[Region]) -> dict:
    features = []
    for r in regions:
        props = {"code": r.code, "name": r.name}
        if r.group:
            props["group"] = r.group
        coords = [[ring.tolist() for ring in poly] for poly in r.polygons]
        geom = ({"type": "Polygon", "coordinates": coords[0]} if len(coords) == 1
                else {"type": "MultiPolygon", "coordinates": coords})
        features.append({"type": "Feature", "properties": props, "geometry": geom})
    return {"type": "FeatureCollection", "features": features}


def box_region(code: str, x0: float, y0: float, x1: float, y1: float,
               name: str | None = None, group: str | None = None) -> Region:
    ring = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]], dtype=float)
    return Region(code=code, name=name or code, polygons=((ring,),), group=group)


def grid_regions(codes: Sequence[str], ncols: int, origin=(-83.5, 32.0),
                 size: float = 0.5, groups: dict[str, str] | None = None) -> RegionSet:
    """Axis-aligned square regions laid out row-major on a grid."""
    groups = groups or {}
    out = []
    for k, code in enumerate(codes):
        i, j = k % ncols, k // ncols
        x0 = origin[0] + i * size
        y0 = origin[1] + j * size
        out.append(box_region(code, x0, y0, x0 + size, y0 + size, group=groups.get(code)))
    return RegionSet(tuple(out))


def dump_regions(regions: Iterable[Region], fh: io.TextIOBase) -> None:
    json.dump(regions_to_geojson(regions), fh, separators=(",", ":"))
