#!/usr/bin/env python3
"""Regenerate the figure-ready CSV data sets for the shared-server study.

Runs the analytical pipelines (and, optionally, verifying simulations) over
the standard scenario families and drops one CSV per curve into the chosen
output directory:

  sync_lat_mu / sync_paoi_mu    latency and peak-age CDFs, N=10, sweeping mu
  sync_lat_n  / sync_paoi_n     same with mu=5, sweeping the client count
  batch_<policy>_mu<M>          latency/peak-age CDFs for B in {1,2,4,8}, N=8
  period_sweep.csv              expected age and peak-age percentiles vs tau
  drift/                        per-client 95th percentiles and fairness vs xi

Everything goes through the command-line entry points, so each output comes
with its own manifest.  Use --periods to add Monte Carlo validation runs
(10^6 is comfortable; 10^7 reproduces the long protocol).
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from edgeaoi.cli import main as cli_main

SYNC_MUS = (2.0, 5.0, 10.0, 15.0)
SYNC_NS = (4, 6, 8, 10, 12)
BATCH_COUNTS = (1, 2, 4, 8)
BATCH_MUS = (5.0, 10.0)


def write_scenario(path: Path, n, mu, tau, sizes, tail):
    path.write_text(json.dumps(dict(
        n_clients=n, service_rate=mu, period=tau,
        batch_sizes=list(sizes), offsets_from_2=list(tail))))
    return path


def run(argv):
    code = cli_main(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {' '.join(argv)}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--grid", type=int, default=1000)
    parser.add_argument("--periods", type=int, default=0,
                        help="also run verifying simulations of this length")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix="edgeaoi_scn_"))

    # synchronized families (single batch, both policies coincide)
    for mu in SYNC_MUS:
        scn = write_scenario(tmp / f"sync_mu{mu}.json", 10, mu, 1.0, [10], [])
        for metric, tag in (("latency-cdf", "lat"), ("paoi-cdf", "paoi")):
            run(["analyze", "--scenario", str(scn), "--policy", "gps",
                 "--metric", metric, "--grid", str(args.grid),
                 "--out", str(out / f"sync_{tag}_mu{mu:g}.csv")])
    for n in SYNC_NS:
        scn = write_scenario(tmp / f"sync_n{n}.json", n, 5.0, 1.0, [n], [])
        for metric, tag in (("latency-cdf", "lat"), ("paoi-cdf", "paoi")):
            run(["analyze", "--scenario", str(scn), "--policy", "gps",
                 "--metric", metric, "--grid", str(args.grid),
                 "--out", str(out / f"sync_{tag}_n{n}.csv")])

    # staggered batches of equal size, N=8
    for n_batches in BATCH_COUNTS:
        sizes = [8 // n_batches] * n_batches
        tail = [1.0 / n_batches] * (n_batches - 1)
        scn = write_scenario(tmp / f"batch{n_batches}.json", 8, 5.0, 1.0, sizes, tail)
        for mu in BATCH_MUS:
            scn_mu = write_scenario(tmp / f"batch{n_batches}_mu{mu:g}.json",
                                    8, mu, 1.0, sizes, tail)
            for policy in ("gps", "fifo"):
                for metric, tag in (("latency-cdf", "lat"), ("paoi-cdf", "paoi")):
                    run(["analyze", "--scenario", str(scn_mu), "--policy", policy,
                         "--metric", metric, "--grid", str(args.grid),
                         "--out", str(out / f"batch_{tag}_{policy}_mu{mu:g}_B{n_batches}.csv")])
                if args.periods:
                    # ~100 envelope checks run across the sweep, so each one
                    # gets a 99.9% band to keep the family-wise rate sane
                    run(["validate", "--scenario", str(scn_mu), "--policy", policy,
                         "--periods", str(args.periods), "--replications", "8",
                         "--seed", str(args.seed), "--confidence", "0.999",
                         "--out", str(out / f"validate_{policy}_mu{mu:g}_B{n_batches}.txt")])

    # expected age and tail percentiles versus the period
    scn = write_scenario(tmp / "spread.json", 6, 4.0, 1.0, [1] * 6, [1 / 6] * 5)
    run(["sweep", "--scenario", str(scn), "--parameter", "tau",
         "--start", "0.25", "--stop", "4.0", "--steps", "16",
         "--metrics", "aoi,success,paoi-p95,paoi-p99,paoi-p99.9",
         "--policies", "gps,fifo", "--out", str(out / "period_sweep.csv")])

    # clock-drift fairness study
    run(["drift", "--scenario", str(scn), "--steps", "10",
         "--percentile", "95", "--out", str(out / "drift")])

    print(f"wrote figure data under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
