"""Internal and external validation statistics."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (InvalidParameter, MalformedHeader, NoLabeledResidents, TooFewPoints,
                     ZeroVariance)
from .inference import HomeAssignment

DEFAULT_THRESHOLDS = (1, 3, 5, 10, 15, 20, 25, 30, 50, 100, 200, 500, 1000)
THRESHOLD_HEADER = ["threshold", "n_users", "pct_total", "pct_successful"]
ACCURACY_HEADER = ["n_labeled", "n_mode_computed", "n_unknown", "coverage", "n_correct",
                   "n_correct_merged", "accuracy", "accuracy_merged"]
MISID_HEADER = ["inferred_region", "labeled_region", "n_users", "same_group"]
FIT_HEADER = ["group", "slope", "intercept", "r_squared", "n_points", "n_excluded",
              "n_missing", "transform", "error"]
TRANSFORMS = ("identity", "log10_log10")

# Acklam's rational approximation of the standard normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, refined with one Halley step."""
    if not 0.0 < p < 1.0:
        raise InvalidParameter(f"probability must be in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def sample_size(population: int, confidence: float = 0.99, margin: float = 0.05) -> int:
    """Cochran sample size at p = 0.5 with finite-population correction.

    The corrected size is rounded half-up (661.19 -> 661 for the 190,608
    user population at 99% / 5%) and never drops below 1.
    """
    if isinstance(population, bool) or int(population) != population or population < 1:
        raise InvalidParameter(f"population must be a positive integer, got {population}")
    if not 0 < confidence < 1:
        raise InvalidParameter(f"confidence must be in (0, 1), got {confidence}")
    if not 0 < margin < 1:
        raise InvalidParameter(f"margin must be in (0, 1), got {margin}")
    z = normal_quantile(1 - (1 - confidence) / 2)
    n0 = z * z * 0.25 / (margin * margin)
    n = n0 / (1 + (n0 - 1) / population)
    return max(1, int(math.floor(n + 0.5)))


# ---------------------------------------------------------------------------
# internal validation


@dataclass(frozen=True)
class ValidationLabel:
    user_id: str
    home_region: str


@dataclass(frozen=True)
class AccuracyReport:
    n_labeled: int
    n_mode_computed: int
    n_correct: int
    n_correct_merged: int
    accuracy: float
    accuracy_merged: float
    misidentifications: Mapping[tuple[str, str], int] = field(default_factory=dict)

    @property
    def n_unknown(self) -> int:
        return self.n_labeled - self.n_mode_computed

    @property
    def coverage(self) -> float:
        return self.n_mode_computed / self.n_labeled


def _label_map(labels) -> dict[str, str]:
    if isinstance(labels, Mapping):
        return dict(labels)
    out: dict[str, str] = {}
    for lab in labels:
        if lab.user_id in out:
            raise InvalidParameter(f"duplicate label for user {lab.user_id!r}")
        out[lab.user_id] = lab.home_region
    return out


def _same_group(a: str, b: str, groups: Mapping[str, str]) -> bool:
    ga = groups.get(a)
    return ga is not None and ga == groups.get(b)


def internal_accuracy(homes: Mapping[str, HomeAssignment], labels,
                      groups: Mapping[str, str] | None = None) -> AccuracyReport:
    """Compare inferred homes with labelled homes.

    Users whose mode could not be computed are left out of the accuracy
    denominator. A mismatch between two regions of the same equivalence
    group counts as correct in the merged score only.
    """
    labels = _label_map(labels)
    groups = groups or {}
    if not labels:
        raise NoLabeledResidents("no labels given")
    n_mode = n_ok = n_merged = 0
    misid: Counter = Counter()
    for uid, truth in labels.items():
        h = homes.get(uid)
        if h is None or h.region is None:
            continue
        n_mode += 1
        if h.region == truth:
            n_ok += 1
            n_merged += 1
        else:
            misid[(h.region, truth)] += 1
            if _same_group(h.region, truth, groups):
                n_merged += 1
    if n_mode == 0:
        raise NoLabeledResidents("no labelled user has a computable home")
    return AccuracyReport(len(labels), n_mode, n_ok, n_merged, n_ok / n_mode,
                          n_merged / n_mode, dict(sorted(misid.items())))


@dataclass(frozen=True)
class SweepRow:
    threshold: int
    n_users: int
    pct_total: float
    accuracy: float | None


def threshold_sweep(homes: Mapping[str, HomeAssignment], labels,
                    thresholds: Sequence[int] = DEFAULT_THRESHOLDS) -> list[SweepRow]:
    """Accuracy among mode-computed users with at least ``t`` observations."""
    if list(thresholds) != sorted(thresholds):
        raise InvalidParameter("thresholds must be ascending")
    labels = _label_map(labels)
    scored = []
    for uid, truth in labels.items():
        h = homes.get(uid)
        if h is not None and h.region is not None:
            scored.append((h.total_observations, h.region == truth))
    base = len(scored)
    rows = []
    for t in thresholds:
        kept = [ok for n, ok in scored if n >= t]
        rows.append(SweepRow(t, len(kept), len(kept) / base if base else 0.0,
                             sum(kept) / len(kept) if kept else None))
    return rows


# ---------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    transform: str = "identity"
    n_excluded: int = 0


def fit_line(points: Iterable[tuple[float, float]], transform: str = "identity") -> RegressionResult:
    """Ordinary least squares of y on x.

    Under ``log10_log10`` both axes are log-transformed; points with a
    non-positive coordinate are dropped first and counted in ``n_excluded``.
    """
    if transform not in TRANSFORMS:
        raise InvalidParameter(f"unknown transform {transform!r}")
    pts = [(float(x), float(y)) for x, y in points]
    excluded = 0
    if transform == "log10_log10":
        kept = [(math.log10(x), math.log10(y)) for x, y in pts if x > 0 and y > 0]
        excluded = len(pts) - len(kept)
        pts = kept
    n = len(pts)
    if n < 2:
        raise TooFewPoints(f"need >= 2 points, have {n}")
    mx = math.fsum(x for x, _ in pts) / n
    my = math.fsum(y for _, y in pts) / n
    sxx = math.fsum((x - mx) ** 2 for x, _ in pts)
    syy = math.fsum((y - my) ** 2 for _, y in pts)
    sxy = math.fsum((x - mx) * (y - my) for x, y in pts)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("x or y has zero variance")
    slope = sxy / sxx
    r2 = min(1.0, (sxy * sxy) / (sxx * syy))
    return RegressionResult(slope, my - slope * mx, r2, n, transform, excluded)


@dataclass(frozen=True)
class ExternalFit:
    group: str
    result: RegressionResult | None
    error: str | None
    n_missing: int


def external_report(aggregates: Mapping, reference: Mapping, transform: str = "identity") -> list[ExternalFit]:
    """Regress reference values on aggregates, one fit per month group.

    Keys are region codes (one ``all`` group) or ``(region, month)`` pairs.
    Keys present on only one side are dropped and counted in ``n_missing``.
    """
    def split(key):
        return ("all", key) if isinstance(key, str) else (key[1], key[0])

    sides: dict[str, list[dict]] = defaultdict(lambda: [{}, {}])
    for i, src in enumerate((aggregates, reference)):
        for key, value in src.items():
            group, region = split(key)
            sides[group][i][region] = value
    out = []
    for group in sorted(sides):
        agg, ref = sides[group]
        common = sorted(set(agg) & set(ref))
        missing = len(set(agg) ^ set(ref))
        try:
            res = fit_line([(agg[r], ref[r]) for r in common], transform)
            out.append(ExternalFit(group, res, None, missing))
        except (TooFewPoints, ZeroVariance) as exc:
            out.append(ExternalFit(group, None, exc.code, missing))
    return out


# ---------------------------------------------------------------------------
# file formats


def read_labels_csv(fh, known_codes: Iterable[str] | None = None) -> list[ValidationLabel]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["user_id", "region_code"]:
        raise MalformedHeader("labels header must be user_id,region_code")
    known = set(known_codes) if known_codes is not None else None
    out, seen = [], set()
    for row in reader:
        if not row:
            continue
        if len(row) != 2:
            raise MalformedHeader(f"labels line {reader.line_num}: expected 2 fields")
        uid, code = (v.strip() for v in row)
        if uid in seen:
            raise InvalidParameter(f"duplicate label for user {uid!r}")
        if known is not None and code not in known:
            raise InvalidParameter(f"label region {code!r} not in region set")
        seen.add(uid)
        out.append(ValidationLabel(uid, code))
    return out


def read_reference_csv(fh) -> dict:
    """Annual ``region_code,value`` or monthly ``region_code,month,value``."""
    reader = csv.reader(fh)
    header = [h.strip() for h in (next(reader, None) or [])]
    if header == ["region_code", "value"]:
        monthly = False
    elif header == ["region_code", "month", "value"]:
        monthly = True
    else:
        raise MalformedHeader("reference header must be region_code,value "
                              "or region_code,month,value")
    out = {}
    for row in reader:
        if not row:
            continue
        try:
            if monthly:
                code, month, value = row
                out[(code.strip(), month.strip())] = float(value)
            else:
                code, value = row
                out[code.strip()] = float(value)
        except ValueError as exc:
            raise MalformedHeader(f"reference line {reader.line_num}: {exc}") from exc
    return out


def _pct(x: float | None) -> str:
    return "" if x is None else f"{100 * x:.4f}"


def write_threshold_csv(rows: Iterable[SweepRow], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(THRESHOLD_HEADER)
    for r in rows:
        w.writerow([r.threshold, r.n_users, _pct(r.pct_total), _pct(r.accuracy)])


def write_accuracy_csv(rep: AccuracyReport, fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ACCURACY_HEADER)
    w.writerow([rep.n_labeled, rep.n_mode_computed, rep.n_unknown, repr(rep.coverage),
                rep.n_correct, rep.n_correct_merged, repr(rep.accuracy),
                repr(rep.accuracy_merged)])


def write_misidentifications_csv(rep: AccuracyReport, groups: Mapping[str, str],
                                 fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MISID_HEADER)
    for (inferred, labeled), n in sorted(rep.misidentifications.items()):
        w.writerow([inferred, labeled, n, int(_same_group(inferred, labeled, groups))])


def write_fits_csv(fits: Iterable[ExternalFit], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FIT_HEADER)
    for f in fits:
        r = f.result
        if r is None:
            w.writerow([f.group, "", "", "", "", "", f.n_missing, "", f.error])
        else:
            w.writerow([f.group, repr(r.slope), repr(r.intercept), repr(r.r_squared),
                        r.n_points, r.n_excluded, f.n_missing, r.transform, ""])
