"""Command-line interface: ``vomc {gen,eval,compress,decompress,verify,compare}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench.runner import ExperimentConfig, RateCurve, compare_predictors, run_experiment
from .bench.verify import verify
from .coder import CodecError, CodeStream, decode, encode
from .model import (
    CtwPrior,
    SourceSequence,
    generate_sequence,
    make_rng,
    sample_ctw_source,
    sample_initial_context,
    sample_nonctw_leaf_distributions,
    sample_tree,
)


def _prior_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", "-D", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=0.15)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--alphabet", "-A", type=int, default=3)


def _prior(ns) -> CtwPrior:
    return CtwPrior.symmetric(ns.depth, ns.lam, ns.alpha, ns.alphabet)


def sequence_to_json(seq: SourceSequence) -> str:
    return json.dumps({"A": seq.A, "init": seq.init.tolist(), "body": seq.body.tolist(),
                       "tree_id": seq.tree_id, "seed": seq.seed})


def sequence_from_json(text: str) -> SourceSequence:
    d = json.loads(text)
    return SourceSequence(np.array(d["init"], dtype=np.int64), np.array(d["body"], dtype=np.int64), d["A"],
                          d.get("tree_id", 0), d.get("seed"))


def cmd_gen(ns) -> int:
    prior = _prior(ns)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(ns.trees):
        rng = make_rng([ns.seed, k])
        if ns.prior == "ctw":
            tree = sample_ctw_source(prior, rng)
        else:
            tree = sample_nonctw_leaf_distributions(sample_tree(prior, rng), rng)
        seq = generate_sequence(tree, ns.len, sample_initial_context(prior.A, prior.depth, rng), rng, k, ns.seed)
        (out / f"tree_{k:04d}.json").write_text(tree.to_json(prior.lam) + "\n")
        (out / f"seq_{k:04d}.json").write_text(sequence_to_json(seq) + "\n")
    print(f"wrote {ns.trees} trees and sequences to {out}")
    return 0


def cmd_eval(ns) -> int:
    cfg = ExperimentConfig(
        prior=ns.prior, depth=ns.depth, lam=ns.lam, alpha=ns.alpha, A=ns.alphabet, trees=ns.trees,
        length=ns.len, window=ns.window, predictors=tuple(ns.predictors.split(",")), seed=ns.seed,
        unit="bits" if ns.bits else ns.unit, workers=ns.workers, out=ns.out,
    )
    res = run_experiment(cfg)
    _print_table(compare_predictors(res.curves), cfg.unit)
    return 0


def cmd_compress(ns) -> int:
    seq = sequence_from_json(Path(ns.input).read_text())
    prior = CtwPrior.symmetric(ns.depth, ns.lam, ns.alpha, seq.A)
    stream, log2p = encode(seq, ns.predictor, prior)
    Path(ns.output).write_bytes(stream.to_bytes())
    print(f"{len(seq)} symbols -> {stream.payload_bits} payload bits (model: {-log2p:.2f} bits)")
    return 0


def cmd_decompress(ns) -> int:
    try:
        seq = decode(CodeStream.from_bytes(Path(ns.input).read_bytes()))
    except CodecError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    Path(ns.output).write_text(sequence_to_json(seq) + "\n")
    print(f"decoded {len(seq)} symbols")
    return 0


def cmd_verify(ns) -> int:
    results = verify(ns.level, ns.golden)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


def cmd_compare(ns) -> int:
    curves = {}
    for path in ns.curves:
        name, _, file = path.partition("=") if "=" in path else (Path(path).stem.removeprefix("curve_"), "", path)
        curves[name] = RateCurve.from_csv(name, Path(file).read_text(), ns.unit)
    table = compare_predictors(curves)
    _print_table(table, ns.unit)
    if ns.out:
        Path(ns.out).write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return 0


def _print_table(table: dict, unit: str) -> None:
    print(f"{'predictor':<26}{'window':>10}{'early':>10}{'late':>10}   ({unit}/symbol)")
    for row in table["rows"]:
        print(f"{row['predictor']:<26}{row['window_average']:>10.4f}{row['early']:>10.4f}{row['late']:>10.4f}")
    for k, v in table["flags"].items():
        print(f"  {k}: {v}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vomc", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="sample trees and sequences")
    _prior_args(p)
    p.add_argument("--prior", choices=("ctw", "nonctw"), default="ctw")
    p.add_argument("--trees", type=int, default=1)
    p.add_argument("--len", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("eval", help="run an experiment and write rate curves")
    _prior_args(p)
    p.add_argument("--prior", choices=("ctw", "nonctw"), default="ctw")
    p.add_argument("--trees", type=int, default=256)
    p.add_argument("--len", type=int, default=5120)
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--predictors", default="ctw,genie")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unit", choices=("nats", "bits"), default="nats")
    p.add_argument("--bits", action="store_true", help="shorthand for --unit bits")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compress", help="arithmetic-code a sequence file")
    _prior_args(p)
    p.add_argument("--predictor", choices=("ctw", "blend", "ppm", "uniform"), default="ctw")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("decompress", help="decode a VOMC stream")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=cmd_decompress)

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--golden", help="alternative golden-file directory")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("compare", help="merge curve CSVs into one comparison table")
    p.add_argument("curves", nargs="+", help="curve CSV files, optionally as name=path")
    p.add_argument("--unit", choices=("nats", "bits"), default="nats")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.fn(ns)


if __name__ == "__main__":
    raise SystemExit(main())
