"""Reproduce the sampling-cycle and readout-throughput tables.

    python scripts/reproduce_tables.py [--seed N] [--csv out.csv]
"""

import argparse
import csv
import sys
import time

from nfcbms.tables import readout_rows, render, sampling_rows


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    sampling, readout = sampling_rows(args.seed), readout_rows(args.seed)
    wall = time.perf_counter() - t0
    sys.stdout.write(render(sampling, readout))
    print(f"wall clock {wall:.2f} s")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["table", "iterations", "simulated_ms", "reference_ms", "deviation_pct", "payload_bytes"])
            for r in sampling + readout:
                w.writerow([r.table, r.iterations, f"{r.simulated_ms:.3f}", r.reference_ms, f"{r.deviation_pct:.3f}", r.payload_bytes or ""])
    return 0


if __name__ == "__main__":
    sys.exit(main())
