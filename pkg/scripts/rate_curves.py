"""Per-position rate curves on the D=5 suite: CTW, PPM of order 5 and the genie."""

import argparse

from vomc.bench import ExperimentConfig, compare_predictors, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trees", type=int, default=256)
    ap.add_argument("--len", type=int, default=5120)
    ap.add_argument("--window", type=int, default=1536)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--with-blend", action="store_true", help="also run the path blend (slower)")
    ap.add_argument("--out", default="results/rate_curves")
    args = ap.parse_args()
    preds = ("ctw", "ppm:5", "genie") + (("blend",) if args.with_blend else ())
    cfg = ExperimentConfig(depth=5, window=args.window, trees=args.trees, length=args.len, seed=args.seed,
                           predictors=preds, workers=args.workers, out=args.out)
    table = compare_predictors(run_experiment(cfg).curves)
    for row in table["rows"]:
        print(f"{row['predictor']:<8} window {row['window_average']:.4f}  early {row['early']:.4f}  late {row['late']:.4f}")
    print(table["flags"])


if __name__ == "__main__":
    main()
