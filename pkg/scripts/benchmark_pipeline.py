"""Time resolve -> infer -> stocks on a synthetic world and report peak memory.

Prints one JSON object. The world (and the coordinates of its events) is
generated before the clock starts; only the pipeline stages are timed.

    python3 scripts/benchmark_pipeline.py --events 10000000 --regions 50 --days 365 --threads 8
"""
from __future__ import annotations

import argparse
import json
import math
import resource
import sys
import time

import numpy as np

from popstock.inference import infer_homes
from popstock.ingest import EventTable, resolve_columns
from popstock.parallel import default_threads
from popstock.stocks import compute_stocks
from popstock.synth import generate_world, grid_config


def peak_rss_bytes() -> int:
    kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return kb * 1024 if sys.platform != "darwin" else kb


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=10_000_000)
    ap.add_argument("--regions", type=int, default=50)
    ap.add_argument("--days", type=int, default=365)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    threads = args.threads or default_threads()

    n_users = max(1, math.ceil(args.events / args.days))
    cfg = grid_config(args.seed, n_regions=args.regions, n_users=n_users, days=args.days)
    t0 = time.perf_counter()
    world = generate_world(cfg)
    lon, lat = world.coordinates()
    secs = world.epoch_seconds()
    t_gen = time.perf_counter() - t0

    t0 = time.perf_counter()
    pos, day = resolve_columns(lon, lat, secs, cfg.regions, threads=threads)
    keep = pos >= 0
    table = EventTable(world.table.user_ids, cfg.regions.codes,
                       world.table.user[keep], pos[keep].astype(np.int32), day[keep])
    t_resolve = time.perf_counter() - t0
    t0 = time.perf_counter()
    homes = infer_homes(table, cfg.window, shards=threads, threads=threads)
    t_infer = time.perf_counter() - t0
    t0 = time.perf_counter()
    stocks = compute_stocks(table, homes, cfg.window.dates(), shards=threads, threads=threads)
    t_stocks = time.perf_counter() - t0

    print(json.dumps({
        "events": int(len(table)), "users": n_users, "regions": args.regions,
        "days": args.days, "threads": threads, "generate_s": round(t_gen, 3),
        "resolve_s": round(t_resolve, 3), "infer_s": round(t_infer, 3),
        "stocks_s": round(t_stocks, 3),
        "pipeline_s": round(t_resolve + t_infer + t_stocks, 3),
        "peak_rss_bytes": peak_rss_bytes(),
        "stock_rows": int(stocks.counts.shape[0] * stocks.counts.shape[1]),
        "unresolved": int((~keep).sum()),
    }))


if __name__ == "__main__":
    main()
