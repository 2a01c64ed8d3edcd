"""Self-check suites: cross-module equivalences plus frozen golden files.

``quick`` uses small case counts (well under a minute); ``full`` scales the
randomised suites up and adds a desk-scale rate run.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from ..coder import decode, encode
from ..ctw import CtwState, bayes_oracle_logprob, bayes_oracle_path_weights, ctw_sequence_logprob
from ..model import (
    ContextTree,
    CtwPrior,
    SourceSequence,
    generate_sequence,
    make_rng,
    sample_ctw_source,
    sample_initial_context,
)
from ..pathblend import blend_predict, blend_weights, path_view
from ..ppm import PpmModel
from ..stats import CountTable, backward_stats, forward_stats, reconstruct_counts
from ..syntf import SyntheticTransformer

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "golden"
LEVELS = {"quick": 1, "full": 10}
REFERENCE_CTW_D3 = 0.7165  # depth-3 suite, N = 512


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _random_source(rng, A, D, lam, n):
    prior = CtwPrior.symmetric(D, lam, 0.5, A)
    tree = sample_ctw_source(prior, rng)
    seq = generate_sequence(tree, n, sample_initial_context(A, D, rng), rng)
    return prior, seq


def check_ctw_oracle(scale: int, rng) -> str:
    worst = 0.0
    for _ in range(20 * scale):
        A, D = int(rng.choice([2, 3])), int(rng.choice([1, 2]))
        lam = float(rng.choice([0.05, 0.15, 0.5]))
        prior, seq = _random_source(rng, A, D, lam, int(rng.integers(1, 51)))
        worst = max(worst, abs(ctw_sequence_logprob(prior, seq) - bayes_oracle_logprob(prior, seq)))
    assert worst <= 1e-9, f"max |CTW - oracle| = {worst:.3g}"
    return f"max |CTW - oracle| = {worst:.2g}"


def check_blend(scale: int, rng) -> str:
    worst_p = worst_w = 0.0
    for _ in range(50 * scale):
        A = int(rng.choice([2, 3]))
        D = int(rng.integers(0, 5))
        lam = float(rng.choice([0.05, 0.15, 0.5, 0.9]))
        prior, seq = _random_source(rng, A, D, lam, int(rng.integers(1, 129)))
        state = CtwState(prior, seq.init).extend(seq.body)
        bw = blend_weights(path_view(state), prior.lam, prior.alpha)
        worst_p = max(worst_p, float(np.max(np.abs(blend_predict(bw) - state.predict()))))
        if (A, D) in ((2, 1), (2, 2), (3, 1), (3, 2)) and len(seq) <= 40:
            worst_w = max(worst_w, float(np.max(np.abs(bw.omega - bayes_oracle_path_weights(prior, seq)))))
    assert worst_p <= 1e-9 and worst_w <= 1e-9, f"prediction gap {worst_p:.3g}, weight gap {worst_w:.3g}"
    return f"prediction gap {worst_p:.2g}, weight gap {worst_w:.2g}"


def check_syntf(scale: int, rng) -> str:
    worst = 0.0
    for _ in range(2 * scale):
        D = int(rng.integers(0, 4))
        prior, seq = _random_source(rng, 3, D, 0.15, 128 if scale == 1 else 512)
        out = SyntheticTransformer(prior).predict_all(seq)
        state = CtwState(prior, seq.init)
        for n, x in enumerate(seq.body):
            worst = max(worst, float(np.max(np.abs(out[n] - state.predict()))))
            state.update(int(x))
    assert worst <= 1e-6, f"max |syntf - CTW| = {worst:.3g}"
    return f"max |syntf - CTW| = {worst:.2g}"


def check_reconstruction(scale: int, rng) -> str:
    bad = 0
    trials = 100 * scale
    for _ in range(trials):
        A, D = int(rng.integers(2, 4)), int(rng.integers(1, 4))
        n = int(rng.integers(1, 200))
        seq = rng.integers(0, A, size=n + D)
        table = CountTable(A, D + 1, seq[:D]).extend(seq[D:])
        path = table.context(D)
        suffixes = [path[:l] for l in range(D + 1)]
        fw = [forward_stats(table, s) for s in suffixes]
        bw = [backward_stats(table, s) for s in suffixes[:-1]]
        rec, _ = reconstruct_counts(fw, bw, path, table.i)
        direct = np.stack([table.get(s) for s in suffixes])
        if not np.array_equal(np.rint(rec).astype(np.int64), direct):
            bad += 1
    assert bad == 0, f"{bad}/{trials} reconstructions differ"
    return f"{trials} random tables exact"


def check_coder(scale: int, rng) -> str:
    n_trials = 20 * scale
    worst = -math.inf
    for k in range(n_trials):
        A = int(rng.integers(2, 5))
        D = int(rng.integers(0, 4))
        prior, seq = _random_source(rng, A, D, 0.15, int(rng.integers(1, 300)))
        name = ("ctw", "blend", "ppm", "uniform")[k % 4]
        stream, log2p = encode(seq, name, prior)
        back = decode(stream)
        assert np.array_equal(back.body, seq.body), f"round trip failed for {name}"
        worst = max(worst, stream.payload_bits - math.ceil(-log2p))
    assert worst <= 32, f"payload exceeds ideal by {worst} bits"
    return f"{n_trials} round trips exact, max overhead {worst} bits"


def _load(golden_dir: Path, name: str) -> dict:
    return json.loads((golden_dir / name).read_text())


def check_golden_ppm(golden_dir: Path) -> str:
    g = _load(golden_dir, "ppm_counts.json")
    letters = g["alphabet"]
    seq = [letters.index(c) for c in g["sequence"]]
    m = PpmModel(len(letters), g["order"])
    for i, x in enumerate(seq):
        m.update(seq[max(0, i - m.order):i], x)
    for k, rows in m.table_rows().items():
        want = {ctx: row for ctx, row in g["counts"][str(k)].items()}
        got = {"".join(letters[c] for c in ctx) or "-": row for ctx, row in rows.items()}
        assert got == want, f"order-{k} counts differ: {got} != {want}"
    for case in g["predictions"]:
        ctx = [letters.index(c) for c in case["context"]]
        p = m.predict(ctx, letters.index(case["symbol"]), exact=True)
        assert p == Fraction(case["p"]), f"p({case['symbol']}|{case['context']}) = {p}, want {case['p']}"
    return "counts and exact predictions match"


def check_golden_tree(golden_dir: Path) -> str:
    g = _load(golden_dir, "example_tree.json")
    tree = ContextTree.from_json(json.dumps(g["tree"]))
    assert json.loads(tree.to_json(g["tree"]["lambda_used"])) == g["tree"], "tree JSON does not round-trip"
    letters = "abcdefghijklmnopqrstuvwxyz"[: tree.A]
    for case in g["classify"]:
        leaf = tree.classify([letters.index(c) for c in case["context"]])
        got = "".join(letters[x] for x in reversed(leaf))
        assert got == case["leaf"], f"context {case['context']} -> {got}, want {case['leaf']}"
    return f"{len(g['classify'])} classifications and JSON round trip"


def check_golden_ctw(golden_dir: Path) -> str:
    g = _load(golden_dir, "ctw_logprob.json")
    worst = 0.0
    for c in g["cases"]:
        prior = CtwPrior.symmetric(c["D"], c["lambda"], c["alpha"], c["A"])
        seq = SourceSequence(c["init"], c["body"], c["A"])
        worst = max(worst, abs(ctw_sequence_logprob(prior, seq) - float(c["logprob"])))
    assert worst <= 1e-10, f"frozen CTW log-probabilities drift by {worst:.3g}"
    return f"{len(g['cases'])} frozen values, max drift {worst:.2g}"


def check_rates(scale: int, rng) -> str:
    from .runner import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(depth=3, trees=256, length=5120, window=512, predictors=("ctw", "genie"), seed=7)
    res = run_experiment(cfg)
    ctw, genie = res.curves["ctw"].window_average, res.curves["genie"].window_average
    assert genie < ctw, f"genie {genie:.4f} not below CTW {ctw:.4f}"
    assert abs(ctw - REFERENCE_CTW_D3) <= 0.02, f"CTW rate {ctw:.4f} not within 0.02 of {REFERENCE_CTW_D3}"
    return f"CTW {ctw:.4f} nats, genie {genie:.4f} nats"


def suites(level: str, golden_dir: Path) -> list[tuple[str, Callable[[], str]]]:
    scale = LEVELS[level]
    rng = make_rng([20240601, scale])
    out = [
        ("golden:ppm_counts", lambda: check_golden_ppm(golden_dir)),
        ("golden:example_tree", lambda: check_golden_tree(golden_dir)),
        ("golden:ctw_logprob", lambda: check_golden_ctw(golden_dir)),
        ("ctw_vs_oracle", lambda: check_ctw_oracle(scale, rng)),
        ("blend_vs_ctw", lambda: check_blend(scale, rng)),
        ("syntf_vs_ctw", lambda: check_syntf(scale, rng)),
        ("count_reconstruction", lambda: check_reconstruction(scale, rng)),
        ("coder_round_trip", lambda: check_coder(scale, rng)),
    ]
    if level == "full":
        out.append(("ctw_rate_d3", lambda: check_rates(scale, rng)))
    return out


def verify(level: str = "quick", golden_dir: str | Path | None = None) -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {sorted(LEVELS)}")
    golden_dir = Path(golden_dir) if golden_dir else GOLDEN_DIR
    results = []
    for name, fn in suites(level, golden_dir):
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as err:  # noqa: BLE001  every failure is reported by name
            detail, ok = f"{type(err).__name__}: {err}", False
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
