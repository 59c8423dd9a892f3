"""Daily resident / non-resident population stocks from geotagged events."""

from .analytics import (StockSeries, ZSeries, aggregate_series, band_of, daily_share,
                        influx_ratio, zscore_series, zseries)
from .errors import PopstockError
from .inference import (HomeAssignment, StudyWindow, UserLocationHistogram, build_histogram,
                        collapse_observations, infer_home, infer_homes)
from .ingest import (EventTable, GeoEvent, PlaceRegistry, ResolvedEvent, load_places,
                     parse_events, resolve_batch, resolve_event)
from .regions import Region, RegionSet, load_regions, locate_point
from .stocks import (DailyStock, VolumeRecord, compute_daily_stock, compute_stocks,
                     daily_active_users, merge_partial_stocks, normalize_by_volume)
from .synth import SynthConfig, generate_world, oracle_classify
from .validation import (external_report, fit_line, internal_accuracy, sample_size,
                         threshold_sweep)

__version__ = "0.1.0"

__all__ = [
    "DailyStock",
    "EventTable",
    "GeoEvent",
    "HomeAssignment",
    "PlaceRegistry",
    "PopstockError",
    "Region",
    "RegionSet",
    "ResolvedEvent",
    "StockSeries",
    "StudyWindow",
    "SynthConfig",
    "UserLocationHistogram",
    "VolumeRecord",
    "ZSeries",
    "aggregate_series",
    "band_of",
    "build_histogram",
    "collapse_observations",
    "compute_daily_stock",
    "compute_stocks",
    "daily_active_users",
    "daily_share",
    "external_report",
    "fit_line",
    "generate_world",
    "infer_home",
    "infer_homes",
    "influx_ratio",
    "internal_accuracy",
    "load_places",
    "load_regions",
    "locate_point",
    "merge_partial_stocks",
    "normalize_by_volume",
    "oracle_classify",
    "parse_events",
    "resolve_batch",
    "resolve_event",
    "sample_size",
    "threshold_sweep",
    "zscore_series",
    "zseries",
]
