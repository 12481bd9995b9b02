"""Wall-clock comparison of classical samplers against the learned pipeline
stages across an m grid.

The learned sampler shares one forward pass sized at max(m) and truncates
columns, so its cost barely moves with m, while farthest point sampling is
O(n*m) and slows down visibly.

Usage: python scripts/bench_timing.py --n 1024 --m-grid 8,32,128,512
"""

import argparse
from pathlib import Path

from pcdown.harness import bench

STAGES = ("random", "fps", "feature", "matrix", "regress", "head", "learned")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--m-grid", default="8,32,128,512")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    m_grid = tuple(int(tok) for tok in args.m_grid.split(","))
    report = bench(n=args.n, m_grid=m_grid, repeats=args.repeats, seed=args.seed)

    stages = [s for s in STAGES if any(f"m={m}/{s}" in report.timings for m in m_grid)]
    header = "     m " + "".join(f"{s:>10}" for s in stages)
    print(f"timings in ms, n={args.n}, best of {args.repeats}:")
    print(header)
    for m in m_grid:
        cells = "".join(
            f"{report.timings[f'm={m}/{s}'] * 1e3:10.3f}"
            for s in stages
            if f"m={m}/{s}" in report.timings
        )
        print(f"{m:6d} {cells}")

    out = Path(args.out)
    report.save(out)
    print(f"report written to {out}/")


if __name__ == "__main__":
    main()
