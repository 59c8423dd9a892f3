"""Exception hierarchy shared by all modules.

Every data-level failure raised by the library derives from ``PopstockError``
so the CLI can map it to exit code 2 with a stable machine-readable code.
"""


class PopstockError(Exception):
    code = "DATA_ERROR"


# regions
class MalformedGeometry(PopstockError):
    code = "MALFORMED_GEOMETRY"


class DuplicateCode(PopstockError):
    code = "DUPLICATE_CODE"


class MissingCodeProperty(PopstockError):
    code = "MISSING_CODE_PROPERTY"


class InvalidCode(PopstockError):
    code = "INVALID_CODE"


class CoordinateOutOfRange(PopstockError):
    code = "COORDINATE_OUT_OF_RANGE"


# ingest
class MalformedHeader(PopstockError):
    code = "MALFORMED_HEADER"


class DuplicatePlace(PopstockError):
    code = "DUPLICATE_PLACE"


# inference
class InvalidWindow(PopstockError):
    code = "INVALID_WINDOW"


# stocks
class ShardOverlap(PopstockError):
    code = "SHARD_OVERLAP"


class MismatchedKey(PopstockError):
    code = "MISMATCHED_KEY"


# analytics
class ZeroTotal(PopstockError):
    code = "ZERO_TOTAL"


class DegenerateSeries(PopstockError):
    code = "DEGENERATE_SERIES"


class NonFinite(PopstockError):
    code = "NON_FINITE"


class ZeroBaseline(PopstockError):
    code = "ZERO_BASELINE"


class EmptyWindow(PopstockError):
    code = "EMPTY_WINDOW"


class SeriesGap(PopstockError):
    code = "SERIES_GAP"


# validation
class InvalidParameter(PopstockError):
    code = "INVALID_PARAMETER"


class NoLabeledResidents(PopstockError):
    code = "NO_LABELED_RESIDENTS"


class TooFewPoints(PopstockError):
    code = "TOO_FEW_POINTS"


class ZeroVariance(PopstockError):
    code = "ZERO_VARIANCE"


# synth / charts
class InvalidConfig(PopstockError):
    code = "INVALID_CONFIG"


class EmptySeries(PopstockError):
    code = "EMPTY_SERIES"


class InvalidGroup(PopstockError):
    code = "INVALID_GROUP"
