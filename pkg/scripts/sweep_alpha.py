"""Sweep the simplification-loss weight alpha and report the generated-set
task metric at each value.

Alpha trades task performance against how closely generated points hug the
input cloud; very small values let points drift, very large ones override the
task gradient.

Usage: python scripts/sweep_alpha.py --values 0.01,0.1,1.0,10.0
"""

import argparse
from pathlib import Path

from pcdown.config import preset
from pcdown.harness import make_splits, pretrain_head, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweep_alpha")
    ap.add_argument("--task", default="classification")
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--values", default="0.01,0.1,1.0,10.0")
    args = ap.parse_args()

    values = [float(tok) for tok in args.values.split(",")]
    config = preset(args.task, toy=True, seed=args.seed, m=args.m)
    print(f"pretraining {args.task} head once (shared across the sweep) ...")
    head, _ = pretrain_head(config)
    train_items, test_items = make_splits(config)

    print(f"sweeping alpha over {values} ({config.epochs} epochs each) ...")
    report = sweep(config, "alpha", values, head, train_items, test_items)
    for key in sorted(report.metrics, key=lambda k: float(k.split("=")[1].split("/")[0])):
        print(f"  {key}: {report.metrics[key]:.4f}")

    out = Path(args.out)
    report.save(out)
    print(f"report written to {out}/")


if __name__ == "__main__":
    main()
