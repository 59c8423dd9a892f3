"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
stderr as ``popstock: error code=<CODE>: <message>``; stdout only carries
requested results (the ``validate --sample-size`` number).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date
from pathlib import Path

from . import analytics, charts, inference, ingest, stocks, synth, validation
from .errors import PopstockError
from .inference import StudyWindow
from .parallel import default_threads
from .regions import dump_regions, grid_regions, load_regions


class UsageError(Exception):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad date {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _date_list(text: str) -> list[date]:
    return [_date(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="popstock", description="Daily resident / non-resident user stocks "
                "from geotagged events.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, threads=True):
        sp.add_argument("--out", default=".", help="output directory")
        if threads:
            sp.add_argument("--threads", type=int, default=None,
                            help="workers and user shards (default: cores)")

    def pipeline(sp):
        sp.add_argument("--regions", help="boundary feature collection (JSON)")
        sp.add_argument("--events", help="events CSV")
        sp.add_argument("--places", help="place registry CSV")
        sp.add_argument("--window", help="START:END dates, or trailing:N with --as-of")
        sp.add_argument("--as-of", type=_date, help="query date for trailing windows")
        sp.add_argument("--tz-offset", type=int, default=0, help="UTC offset in minutes")
        sp.add_argument("--ndays", type=int, default=1, help="n-day observation collapse")
        common(sp)

    sp = sub.add_parser("infer", help="events -> homes.csv")
    pipeline(sp)
    sp = sub.add_parser("stocks", help="events (+homes) -> stocks.csv")
    pipeline(sp)
    sp.add_argument("--homes", help="homes CSV; inferred from events when absent")
    sp.add_argument("--normalize", action="store_true", help="also write normalized.csv")

    sp = sub.add_parser("analyze", help="stocks -> zscores.csv, influx.csv, charts")
    sp.add_argument("--stocks", required=False)
    sp.add_argument("--component", default="non_residents", choices=analytics.COMPONENTS)
    sp.add_argument("--event-date", type=_date)
    sp.add_argument("--baseline-dates", type=_date_list)
    common(sp, threads=False)

    sp = sub.add_parser("validate", help="sample size, internal and external validation")
    sp.add_argument("--sample-size", type=int, metavar="POPULATION")
    sp.add_argument("--confidence", type=float, default=0.99)
    sp.add_argument("--margin", type=float, default=0.05)
    sp.add_argument("--homes")
    sp.add_argument("--labels")
    sp.add_argument("--regions", help="boundary file supplying equivalence groups")
    sp.add_argument("--thresholds", type=_int_list, default=list(validation.DEFAULT_THRESHOLDS))
    sp.add_argument("--stocks")
    sp.add_argument("--reference")
    sp.add_argument("--component", default="residents", choices=analytics.COMPONENTS)
    sp.add_argument("--grain", default=None, choices=analytics.GRAINS)
    sp.add_argument("--transform", default="identity", choices=validation.TRANSFORMS)
    common(sp, threads=False)

    sp = sub.add_parser("synth", help="generate a synthetic world")
    sp.add_argument("--config", help="JSON config; flags override its values")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--regions", help="boundary file (default: square grid)")
    sp.add_argument("--grid", type=int, help="number of grid regions (default 9)")
    sp.add_argument("--n-users", type=int)
    sp.add_argument("--window")
    sp.add_argument("--home-share", type=float)
    sp.add_argument("--events-per-day", type=float)
    sp.add_argument("--special", action="append", default=None,
                    help="DATE:REGION:MULTIPLIER, repeatable")
    common(sp, threads=False)

    sp = sub.add_parser("report", help="stocks -> annual z-distribution SVG per region")
    sp.add_argument("--stocks")
    sp.add_argument("--component", default="non_residents", choices=analytics.COMPONENTS)
    sp.add_argument("--select", help="comma-separated region codes (default: all)")
    common(sp, threads=False)
    return p


def _need(args, *names):
    for name in names:
        value = getattr(args, name.replace("-", "_"))
        if value is None:
            raise UsageError(f"{args.command} requires --{name}")


def _existing(path: str | None, flag: str) -> str | None:
    if path is not None and not os.path.exists(path):
        raise UsageError(f"--{flag}: no such file {path}")
    return path


def _warn(msg: str) -> None:
    print(f"popstock: warning: {msg}", file=sys.stderr)


def _out(args, name: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _write(path: Path, writer, *items) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer(*items, fh)


def _window(args) -> StudyWindow:
    if args.window is None:
        raise UsageError(f"{args.command} requires --window")
    trailing = args.window.startswith("trailing")
    if trailing and args.as_of is None:
        raise UsageError("--window trailing:N requires --as-of")
    return StudyWindow.parse(args.window, args.as_of)


def _load_table(args):
    _need(args, "regions", "events")
    _existing(args.regions, "regions")
    _existing(args.events, "events")
    _existing(args.places, "places")
    if args.ndays < 1:
        raise UsageError("--ndays must be >= 1")
    window = _window(args)
    regions = load_regions(args.regions)
    registry = ingest.PlaceRegistry()
    if args.places:
        with open(args.places, encoding="utf-8", newline="") as fh:
            registry = ingest.load_places(fh)
    with open(args.events, encoding="utf-8", newline="") as fh:
        table, summary = ingest.resolve_batch(ingest.parse_events(fh), regions, registry,
                                              args.tz_offset, _threads(args))
    print(f"popstock: resolve {summary.as_line()}", file=sys.stderr)
    return regions, table, window


def _threads(args) -> int:
    n = args.threads if args.threads is not None else default_threads()
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def cmd_infer(args) -> None:
    _, table, window = _load_table(args)
    n = _threads(args)
    homes = inference.infer_homes(table, window, args.ndays, shards=n, threads=n)
    _write(_out(args, "homes.csv"), inference.write_homes_csv, homes)


def cmd_stocks(args) -> None:
    _existing(args.homes, "homes")
    _, table, window = _load_table(args)
    n = _threads(args)
    if args.homes:
        with open(args.homes, encoding="utf-8", newline="") as fh:
            homes = inference.read_homes_csv(fh)
    else:
        homes = inference.infer_homes(table, window, args.ndays, shards=n, threads=n)
    days = [window.end] if args.window.startswith("trailing") else window.dates()
    st = stocks.compute_stocks(table, homes, days, shards=n, threads=n,
                               with_volume=args.normalize)
    rows = st.rows()
    _write(_out(args, "stocks.csv"), stocks.write_stocks_csv, rows)
    if args.normalize:
        rates = [stocks.normalize_by_volume(s, v) for s, v in zip(rows, st.volumes())]
        _write(_out(args, "normalized.csv"), stocks.write_normalized_csv, rates)


def _read_stocks(path: str) -> list[stocks.DailyStock]:
    _existing(path, "stocks")
    with open(path, encoding="utf-8", newline="") as fh:
        return stocks.read_stocks_csv(fh)


def _zseries_all(rows, component: str) -> list[analytics.ZSeries]:
    out = []
    for region, s in analytics.series_by_region(rows, component).items():
        try:
            out.append(analytics.zseries(s))
        except (analytics.ZeroTotal, analytics.DegenerateSeries) as exc:
            _warn(f"{region}: skipped ({exc.code})")
    return out


def cmd_analyze(args) -> None:
    _need(args, "stocks")
    rows = _read_stocks(args.stocks)
    zs = _zseries_all(rows, args.component)
    _write(_out(args, "zscores.csv"), analytics.write_zscores_csv, zs)
    for z in zs:
        charts.emit_chart(z, _out(args, f"zscore_{z.region}.svg"))
    if args.baseline_dates is not None or args.event_date is not None:
        _need(args, "event_date", "baseline_dates")
        series = analytics.series_by_region(rows, args.component)
        report = analytics.influx_report(series, args.event_date, args.baseline_dates)
        _write(_out(args, "influx.csv"), analytics.write_influx_csv, report)


def cmd_validate(args) -> None:
    did = False
    if args.sample_size is not None:
        print(validation.sample_size(args.sample_size, args.confidence, args.margin))
        did = True
    if args.homes is not None or args.labels is not None:
        _need(args, "homes", "labels")
        _existing(args.homes, "homes")
        _existing(args.labels, "labels")
        groups, known = {}, None
        if args.regions:
            regions = load_regions(_existing(args.regions, "regions"))
            groups, known = regions.groups(), regions.codes
        with open(args.homes, encoding="utf-8", newline="") as fh:
            homes = inference.read_homes_csv(fh).assignments()
        with open(args.labels, encoding="utf-8", newline="") as fh:
            labels = validation.read_labels_csv(fh, known)
        rep = validation.internal_accuracy(homes, labels, groups)
        sweep = validation.threshold_sweep(homes, labels, args.thresholds)
        _write(_out(args, "threshold_table.csv"), validation.write_threshold_csv, sweep)
        _write(_out(args, "accuracy.csv"), validation.write_accuracy_csv, rep)
        with open(_out(args, "misidentifications.csv"), "w", encoding="utf-8", newline="") as fh:
            validation.write_misidentifications_csv(rep, groups, fh)
        did = True
    if args.stocks is not None or args.reference is not None:
        _need(args, "stocks", "reference")
        rows = _read_stocks(args.stocks)
        with open(_existing(args.reference, "reference"), encoding="utf-8", newline="") as fh:
            ref = validation.read_reference_csv(fh)
        monthly = any(not isinstance(k, str) for k in ref)
        grain = args.grain or ("monthly_daily_mean" if monthly else "annual_daily_mean")
        if monthly == (grain == "annual_daily_mean"):
            raise UsageError(f"--grain {grain} does not match the reference file layout")
        aggs = {(a.region if a.month is None else (a.region, a.month)): a.value
                for a in analytics.aggregate_series(rows, args.component, grain)}
        fits = validation.external_report(aggs, ref, args.transform)
        for f in fits:
            if f.n_missing:
                _warn(f"group {f.group}: {f.n_missing} region(s) missing from one side")
            if f.error:
                _warn(f"group {f.group}: {f.error}")
        _write(_out(args, "external_fit.csv"), validation.write_fits_csv, fits)
        did = True
    if not did:
        raise UsageError("validate needs --sample-size, --homes/--labels or --stocks/--reference")


def _special(text: str) -> synth.SpecialEvent:
    try:
        d, code, mult = text.split(":")
        return synth.SpecialEvent(date.fromisoformat(d), code, float(mult))
    except ValueError as exc:
        raise UsageError(f"bad --special {text!r}, expected DATE:REGION:MULTIPLIER") from exc


def cmd_synth(args) -> None:
    conf = {}
    if args.config:
        with open(_existing(args.config, "config"), encoding="utf-8") as fh:
            conf = json.load(fh)
    for key in ("seed", "regions", "grid", "n_users", "window", "home_share",
                "events_per_day", "special"):
        value = getattr(args, key)
        if value is not None:
            conf[key] = value
    if conf.get("regions"):
        regions = load_regions(_existing(conf["regions"], "regions"))
    else:
        n = int(conf.get("grid", 9))
        codes = [f"{99000 + i + 1:05d}" for i in range(n)]
        regions = grid_regions(codes, max(1, int(n ** 0.5 + 0.999999)))
    window = StudyWindow.parse(conf.get("window", "2017-01-01:2017-12-31"))
    specials = conf.get("special") or []
    cfg = synth.SynthConfig(
        seed=int(conf.get("seed", 0)), regions=regions, n_users=int(conf.get("n_users", 1000)),
        window=window, home_share=float(conf.get("home_share", 0.8)),
        events_per_user_per_day=float(conf.get("events_per_day", 1.0)),
        special_events=tuple(_special(s) if isinstance(s, str) else synth.SpecialEvent(
            date.fromisoformat(s["date"]), s["region"], float(s["multiplier"])) for s in specials))
    world = synth.generate_world(cfg)
    _write(_out(args, "events.csv"), world.write_events_csv)
    _write(_out(args, "truth.csv"), world.write_truth_csv)
    with open(_out(args, "regions.geojson"), "w", encoding="utf-8") as fh:
        dump_regions(regions, fh)
    print(f"popstock: synth events={len(world.table)} users={cfg.n_users}", file=sys.stderr)


def cmd_report(args) -> None:
    _need(args, "stocks")
    rows = _read_stocks(args.stocks)
    keep = set(args.select.split(",")) if args.select else None
    for z in _zseries_all(rows, args.component):
        if keep is not None and z.region not in keep:
            continue
        title = f"{z.region}: annual distribution of {args.component} (daily z-score)"
        charts.emit_chart(z, _out(args, f"report_{z.region}.svg"), title)


COMMANDS = {"infer": cmd_infer, "stocks": cmd_stocks, "analyze": cmd_analyze,
            "validate": cmd_validate, "synth": cmd_synth, "report": cmd_report}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"popstock: error code=USAGE: {exc}", file=sys.stderr)
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return 1
    except PopstockError as exc:
        print(f"popstock: error code={exc.code}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"popstock: error code=DATA_ERROR: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
