"""Index sizes for n vectors of dimension d, computed from container header layouts.

    python scripts/size_table.py            # 1M x 768, PQ M=96 K=256
    python scripts/size_table.py --n 8841823
"""

import argparse

from lthkit.benchmarks import pq_size_split, size_manifests
from lthkit.evalbench import report_index_size


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--d", type=int, default=768)
    ap.add_argument("--M", type=int, default=96)
    ap.add_argument("--K", type=int, default=256)
    args = ap.parse_args(argv)

    man = size_manifests(args.n, args.d, args.M, args.K)
    flat = man["flat-f32"].index_bytes()
    print(f"{'index':<10} {'size':>12} {'vs f32':>8}")
    for name, m in man.items():
        row = report_index_size(m)
        print(f"{name:<10} {row.mb:>12} {flat / row.n_bytes:>7.1f}x")
    split = pq_size_split(args.n, args.d, args.M, args.K)
    print(f"pq codes {split['codes'] / 1e6:.2f} MB + codebook {split['codebook'] / 1e6:.4f} MB")


if __name__ == "__main__":
    main()
