"""Single-threaded search latency on synthetic 768-d vectors (default 1M).

Prints a table and optionally writes JSON with timings, wall time and peak RSS.

    python scripts/bench_latency.py --n 1000000 --out latency.json
"""

import argparse
import json
import resource
import sys
import time

from lthkit.benchmarks import DeskConfig, desk_latency


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--d", type=int, default=768)
    ap.add_argument("--M", type=int, default=96)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write results as JSON here")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    res = desk_latency(DeskConfig(n=args.n, d=args.d, M=args.M, n_queries=args.queries, seed=args.seed))
    wall = time.perf_counter() - t0
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024 / 1e9  # ru_maxrss is KiB on Linux

    print(f"{args.n} x {args.d}, {args.queries} queries, build {res.build_seconds:.1f} s, wall {wall:.1f} s, peak {peak_gb:.2f} GB")
    for name, rep in res.latency.items():
        print(f"  {name:<15} {rep}")
    print(f"  f32 / hamming  {res.ratio('flat-f32', 'hamming'):.1f}x")
    print(f"  f32 / pq       {res.ratio('flat-f32', 'pq'):.1f}x")
    if args.out:
        body = res.to_dict() | {"wall_seconds": wall, "peak_rss_gb": peak_gb}
        with open(args.out, "w") as f:
            json.dump(body, f, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
