import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from popstock.regions import RegionSet, box_region  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def two_squares():
    return RegionSet((box_region("A", 0, 0, 1, 1), box_region("B", 1, 0, 2, 1)))


def feature_collection(*features):
    import json
    return json.dumps({"type": "FeatureCollection", "features": list(features)}).encode()


def square_feature(code, x0=0.0, y0=0.0, size=1.0, **props):
    ring = [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]
    return {"type": "Feature", "properties": {"code": code, **props},
            "geometry": {"type": "Polygon", "coordinates": [ring]}}
