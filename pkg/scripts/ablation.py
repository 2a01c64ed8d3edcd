"""Second-layer feature ablations of the constructed transformer, evaluated without training."""

import argparse

from vomc.bench import ExperimentConfig, run_experiment

VARIANTS = ("syntf", "syntf:all-counts", "syntf:total-counts-only", "syntf:no-counts")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--trees", type=int, default=256)
    ap.add_argument("--window", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/ablation")
    args = ap.parse_args()
    cfg = ExperimentConfig(depth=args.depth, window=args.window, length=args.window, trees=args.trees,
                           seed=args.seed, predictors=VARIANTS, workers=args.workers, out=args.out)
    res = run_experiment(cfg)
    for name in VARIANTS:
        print(f"{name:<26} {res.curves[name].window_average:.4f}")


if __name__ == "__main__":
    main()
