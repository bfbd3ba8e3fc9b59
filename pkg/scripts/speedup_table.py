"""Median deterministic / randomized SVD time ratios.

Two sweeps on structured matrices with exponentially decaying spectra:
size at fixed q, and q at fixed size 1500 x 750. Absolute seconds depend
on the machine; only the trends are meaningful.

    python scripts/speedup_table.py --out results/ --threads 8
"""

import argparse
from pathlib import Path

from rrtebd.bench import BenchConfig, SpeedupSummary, TimingRecord, run_svd_bench, write_records_csv


def table(title, summary, key):
    print(title)
    print(f"  {key:>6} {'det s':>9} {'rrsvd s':>9} {'speed-up':>9}")
    for s in summary:
        print(f"  {getattr(s, key):>6} {s.median_det_seconds:9.3f} {s.median_rrsvd_seconds:9.3f} {s.speedup:9.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--sizes", default="900,1600,2500,3600,4900")
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in args.sizes.split(",")]

    sweeps = {
        "size": BenchConfig("speedup-size", sizes, "expw:4e-4", [args.k], [args.k], [2], args.trials,
                            threads=args.threads),
        "q": BenchConfig("speedup-q", [750], "expw:4e-4", [args.k], [args.k], [0, 2, 4, 6], args.trials,
                         threads=args.threads, row_factor=2),
    }
    for name, cfg in sweeps.items():
        records, summary = run_svd_bench(cfg)
        write_records_csv(records, out / f"speedup_{name}.csv", TimingRecord)
        write_records_csv(summary, out / f"speedup_{name}_summary.csv", SpeedupSummary)
        table(f"speed-up by {name} (k=p={args.k})", summary, "size" if name == "size" else "q")


if __name__ == "__main__":
    main()
