#!/usr/bin/env python3
"""Desk-scale overlap experiment: how similar are the four selections?

For each protection budget, averages the pairwise IoU of the selected index
sets over several synthetic outlier layers and prints one table row per
budget. The interesting question is whether the data-free svd selection
lands on the same weights as the data-driven awq and spqr selections.
"""

import argparse
import itertools

import numpy as np

from saliq import (
    hessian_info,
    iou,
    score_awq,
    score_random,
    score_spqr,
    score_svd,
    synthetic_outlier_layer,
    top_k_select,
)

METHOD_ORDER = ("random", "awq", "spqr", "svd")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=256, help="square layer dimension")
    parser.add_argument("--trials", type=int, default=5, help="layers to average over")
    parser.add_argument("--budgets", type=int, nargs="+",
                        default=[1, 16, 64, 256, 1024, 4096])
    parser.add_argument("--rank", type=int, default=8)
    parser.add_argument("--damping", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    pairs = list(itertools.combinations(METHOD_ORDER, 2))
    header = f"{'k':>6} " + " ".join(f"{a}/{b:<6}"[:14].ljust(14) for a, b in pairs)
    print(header)
    print("-" * len(header))

    for k in args.budgets:
        sums = {pair: [] for pair in pairs}
        for t in range(args.trials):
            w, x = synthetic_outlier_layer(args.dim, args.seed + t)
            info = hessian_info(x, args.damping)
            masks = {
                "random": top_k_select(score_random(w, args.seed + t), k),
                "awq": top_k_select(score_awq(w, x), k),
                "spqr": top_k_select(score_spqr(w, info), k),
                "svd": top_k_select(score_svd(w, args.rank), k),
            }
            for a, b in pairs:
                sums[(a, b)].append(iou(masks[a], masks[b]))
        row = " ".join(f"{np.mean(sums[pair]):.3f}".ljust(14) for pair in pairs)
        print(f"{k:>6} {row}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
