"""CTW row of the window-average rate table: D=3,4 at N=512 and D=5 at N=1536."""

import argparse
import json

from vomc.bench import ExperimentConfig, run_experiment

REFERENCE = {3: 0.7165, 4: 0.7603, 5: 0.7400}
WINDOWS = {3: 512, 4: 512, 5: 1536}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trees", type=int, default=256)
    ap.add_argument("--len", type=int, default=5120)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/ctw_rates")
    args = ap.parse_args()
    rows = {}
    for D, N in WINDOWS.items():
        cfg = ExperimentConfig(depth=D, window=N, trees=args.trees, length=args.len, seed=args.seed,
                               predictors=("ctw", "genie"), workers=args.workers, out=f"{args.out}/D{D}")
        res = run_experiment(cfg)
        rows[D] = {k: c.window_average for k, c in res.curves.items()}
        rows[D]["reference"] = REFERENCE[D]
        print(f"D={D} N={N}: CTW {rows[D]['ctw']:.4f}  genie {rows[D]['genie']:.4f}  (reference {REFERENCE[D]})")
    print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
