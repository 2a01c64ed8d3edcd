"""Mismatched-prior suite: mixed depths 1..3, one zeroed symbol per leaf."""

import argparse

from vomc.bench import ExperimentConfig, non_ctw_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trees", type=int, default=256)
    ap.add_argument("--len", type=int, default=5120)
    ap.add_argument("--window", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/nonctw")
    args = ap.parse_args()
    cfg = ExperimentConfig(prior="nonctw", depth=3, window=args.window, trees=args.trees, length=args.len,
                           seed=args.seed, predictors=("ctw", "ppm:3", "genie"), workers=args.workers, out=args.out)
    res, gaps = non_ctw_experiment(cfg)
    for name, c in res.curves.items():
        print(f"{name:<8} {c.window_average:.4f}")
    print("CTW excess over genie:", {k: round(v, 4) for k, v in gaps.items()})


if __name__ == "__main__":
    main()
