"""Regenerate the checked-in test fixtures under tests/data/.

* sc46.geojson: the 46 South Carolina county codes laid out as a schematic
  grid (not real boundaries) with the SC metro equivalence groups.
* golden/: a 3-user, 1-region, 2-day scenario and its stocks CSV as computed
  by the naive oracle classifier.
"""
import io
from pathlib import Path

from popstock.inference import StudyWindow
from popstock.ingest import GeoEvent, load_places, parse_events, resolve_event
from popstock.regions import RegionSet, box_region, dump_regions
from popstock.stocks import write_stocks_csv
from popstock.synth import NaiveClassifier

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

SC_COUNTIES = [
    "Abbeville", "Aiken", "Allendale", "Anderson", "Bamberg", "Barnwell", "Beaufort",
    "Berkeley", "Calhoun", "Charleston", "Cherokee", "Chester", "Chesterfield", "Clarendon",
    "Colleton", "Darlington", "Dillon", "Dorchester", "Edgefield", "Fairfield", "Florence",
    "Georgetown", "Greenville", "Greenwood", "Hampton", "Horry", "Jasper", "Kershaw",
    "Lancaster", "Laurens", "Lee", "Lexington", "McCormick", "Marion", "Marlboro",
    "Newberry", "Oconee", "Orangeburg", "Pickens", "Richland", "Saluda", "Spartanburg",
    "Sumter", "Union", "Williamsburg", "York",
]
SC_GROUPS = {
    "45019": "charleston-metro", "45035": "charleston-metro", "45015": "charleston-metro",
    "45079": "columbia-metro", "45063": "columbia-metro",
    "45077": "greenville-metro", "45045": "greenville-metro",
    "45091": "york-lancaster", "45057": "york-lancaster",
}


def sc46():
    regions = []
    for k, name in enumerate(SC_COUNTIES):
        code = f"45{2 * k + 1:03d}"
        i, j = k % 8, k // 8
        x0, y0 = -83.4 + 0.55 * i, 32.0 + 0.45 * j
        regions.append(box_region(code, x0, y0, x0 + 0.55, y0 + 0.45, name=name,
                                  group=SC_GROUPS.get(code)))
    return regions


GOLDEN_EVENTS = """event_id,user_id,timestamp_utc,lon,lat,place_id
e1,u1,2017-01-01T10:00:00Z,-81.0,34.0,
e2,u1,2017-01-01T18:30:00Z,-81.05,34.05,
e3,u1,2017-01-02T09:15:00Z,,,pl_columbia
e4,u2,2017-01-01T12:00:00Z,-80.95,33.95,
e5,u3,2017-01-02T08:00:00Z,-81.1,34.1,
e6,u3,2017-01-02T20:45:00Z,-81.0,33.98,
e7,u3,2017-01-02T21:00:00Z,,,pl_sc
"""
GOLDEN_PLACES = """place_id,region_code,precision
pl_columbia,45079,city
pl_sc,45,state
"""


def golden(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    regions = [box_region("45079", -81.2, 33.9, -80.8, 34.2, name="Richland")]
    with open(out / "regions.geojson", "w") as fh:
        dump_regions(regions, fh)
    (out / "events.csv").write_text(GOLDEN_EVENTS)
    (out / "places.csv").write_text(GOLDEN_PLACES)
    rs = RegionSet(tuple(regions))
    registry = load_places(io.StringIO(GOLDEN_PLACES))
    resolved = []
    for rec in parse_events(io.StringIO(GOLDEN_EVENTS)):
        if isinstance(rec, GeoEvent):
            r = resolve_event(rec, rs, registry, 0)
            if hasattr(r, "region"):
                resolved.append(r)
    window = StudyWindow.parse("2017-01-01:2017-01-02")
    oracle = NaiveClassifier(resolved, window)
    rows = [oracle.classify(code, d) for d in window.dates() for code in rs.codes]
    with open(out / "stocks.csv", "w", newline="") as fh:
        write_stocks_csv(rows, fh)


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / "sc46.geojson", "w") as fh:
        dump_regions(sc46(), fh)
    golden(DATA / "golden")
    print(f"fixtures written to {DATA}")
