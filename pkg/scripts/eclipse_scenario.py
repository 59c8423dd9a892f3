"""Synthetic one-day visitor surge, measured the way a case study would.

Generates a grid world where a few regions receive ``--multiplier`` times
their usual non-resident visitors on one date, runs the batch pipeline and
prints the influx ratio of every region against the mean of all other days.
Optionally writes the stocks CSV and a z-score chart per region.
"""
from __future__ import annotations

import argparse
from datetime import date
from pathlib import Path

from popstock.analytics import influx_ratio, series_by_region, zseries
from popstock.charts import emit_chart
from popstock.inference import infer_homes
from popstock.stocks import compute_stocks, write_stocks_csv
from popstock.synth import SpecialEvent, expected_visitors, generate_world, grid_config


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--users", type=int, default=9000)
    ap.add_argument("--days", type=int, default=30)
    ap.add_argument("--start", type=date.fromisoformat, default=date(2017, 8, 7))
    ap.add_argument("--event-date", type=date.fromisoformat, default=date(2017, 8, 21))
    ap.add_argument("--regions", default="99002,99005,99008",
                    help="comma-separated affected grid regions (99001..99009)")
    ap.add_argument("--multiplier", type=float, default=6.5)
    ap.add_argument("--out", type=Path, help="write stocks.csv and charts here")
    args = ap.parse_args(argv)

    affected = args.regions.split(",")
    cfg = grid_config(args.seed, n_regions=9, n_users=args.users, days=args.days,
                      start=args.start, special_events=tuple(
                          SpecialEvent(args.event_date, r, args.multiplier) for r in affected))
    world = generate_world(cfg)
    homes = infer_homes(world.table, cfg.window)
    stocks = compute_stocks(world.table, homes, cfg.window.dates())
    rows = stocks.rows()
    series = series_by_region(rows, "non_residents")

    print(f"{len(world.table)} events, {cfg.n_users} users, event date {args.event_date}")
    print(f"{'region':>7} {'expected/day':>12} {'event day':>9} {'baseline':>9} {'influx':>9}")
    for pos, (region, s) in enumerate(series.items()):
        values = dict(zip(s.dates, s.values))
        base = [v for d, v in values.items() if d != args.event_date]
        pct = influx_ratio(values[args.event_date], base)
        mark = "*" if region in affected else " "
        print(f"{region:>6}{mark} {expected_visitors(cfg, pos):12.1f} "
              f"{values[args.event_date]:9d} {sum(base) / len(base):9.1f} {pct:+8.1f}%")

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "stocks.csv", "w", newline="") as fh:
            write_stocks_csv(rows, fh)
        for region, s in series.items():
            emit_chart(zseries(s), args.out / f"zscore_{region}.svg")


if __name__ == "__main__":
    main()
