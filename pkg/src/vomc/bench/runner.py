"""Experiment harness: sample test sources, segment their sequences into
context windows, run every predictor per window and aggregate per-position
log-loss curves."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..model import (
    CtwPrior,
    SourceSequence,
    generate_sequence,
    make_rng,
    sample_initial_context,
    sample_leaf_distributions,
    sample_nonctw_leaf_distributions,
    sample_tree,
    true_model_losses,
    context_leaf_indices,
    leaf_entropies,
)
from ..pathblend import BlendPredictor
from ..ppm import PpmPredictor
from ..predictors import CtwPredictor, observe
from ..syntf import SyntheticTransformer, reduced_predict_all

LN2 = math.log(2)
SYNTF_VARIANTS = {"syntf:no-counts": "no-counts", "syntf:total-counts-only": "total-counts-only",
                  "syntf:all-counts": "all-counts"}
MOVING_AVERAGE = 16


@dataclass
class ExperimentConfig:
    prior: str = "ctw"  # "ctw" or "nonctw"
    depth: int = 3
    lam: float = 0.15
    alpha: float = 0.5
    A: int = 3
    trees: int = 256
    length: int = 5120  # N_k
    window: int = 512  # N
    predictors: tuple[str, ...] = ("ctw", "genie")
    seed: int = 0
    unit: str = "nats"
    nonctw_depths: tuple[int, ...] = (1, 2, 3)
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        self.predictors = tuple(self.predictors)
        self.nonctw_depths = tuple(self.nonctw_depths)
        if self.prior not in ("ctw", "nonctw"):
            raise ValueError("prior must be 'ctw' or 'nonctw'")
        if self.window > self.length:
            raise ValueError("window N must not exceed sequence length N_k")
        if self.unit not in ("nats", "bits"):
            raise ValueError("unit must be nats or bits")
        for name in self.predictors:
            parse_predictor(name, self.depth)

    @property
    def ctw_prior(self) -> CtwPrior:
        """Prior assumed by the CTW-family predictors."""
        D = self.depth if self.prior == "ctw" else max(self.nonctw_depths)
        return CtwPrior.symmetric(D, self.lam, self.alpha, self.A)

    @property
    def padding_len(self) -> int:
        orders = [self.ctw_prior.depth]
        for name in self.predictors:
            kind, k = parse_predictor(name, self.depth)
            if kind == "ppm":
                orders.append(k)
        return max(orders)


def parse_predictor(name: str, depth: int) -> tuple[str, int | None]:
    if name in ("ctw", "blend", "syntf", "genie") or name in SYNTF_VARIANTS:
        return name, None
    if name == "ppm":
        return "ppm", depth
    if name.startswith("ppm:"):
        return "ppm", int(name.split(":", 1)[1])
    raise ValueError(f"unknown predictor {name!r}")


@dataclass
class RateCurve:
    predictor: str
    mean: np.ndarray
    stderr: np.ndarray
    n_windows: int
    unit: str = "nats"

    @property
    def window_average(self) -> float:
        return float(np.mean(self.mean))

    def segment_average(self, lo: float, hi: float) -> float:
        N = len(self.mean)
        a, b = int(round(lo * N)), max(int(round(hi * N)), int(round(lo * N)) + 1)
        return float(np.mean(self.mean[a:b]))

    @property
    def early(self) -> float:
        return self.segment_average(0.0, 0.1)

    @property
    def late(self) -> float:
        return self.segment_average(0.9, 1.0)

    def moving_average(self, k: int = MOVING_AVERAGE) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.mean)])
        idx = np.arange(1, len(self.mean) + 1)
        lo = np.maximum(idx - k, 0)
        return (c[idx] - c[lo]) / (idx - lo)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "mean", "stderr", f"ma{MOVING_AVERAGE}"])
        for t, (m, s, ma) in enumerate(zip(self.mean, self.stderr, self.moving_average()), start=1):
            w.writerow([t, repr(float(m)), repr(float(s)), repr(float(ma))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, predictor: str, text: str, unit: str = "nats") -> "RateCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        mean = np.array([float(r["mean"]) for r in rows])
        se = np.array([float(r["stderr"]) for r in rows])
        return cls(predictor, mean, se, 0, unit)


# one tree -------------------------------------------------------------------


def sample_test_source(config: ExperimentConfig, k: int):
    rng = make_rng([config.seed, k])
    if config.prior == "ctw":
        prior = CtwPrior.symmetric(config.depth, config.lam, config.alpha, config.A)
        tree = sample_leaf_distributions(sample_tree(prior, rng), prior.alpha, rng)
    else:
        D = int(config.nonctw_depths[int(rng.integers(len(config.nonctw_depths)))])
        prior = CtwPrior.symmetric(D, config.lam, config.alpha, config.A)
        tree = sample_nonctw_leaf_distributions(sample_tree(prior, rng), rng)
    init = sample_initial_context(config.A, config.padding_len, rng)
    seq = generate_sequence(tree, config.length, init, rng, tree_id=k, seed=config.seed)
    return tree, seq


def windows(seq: SourceSequence, N: int, pad: int):
    """Split the body into floor(N_k/N) windows; each keeps the preceding
    ``pad`` symbols of the stream as its initial context."""
    full = seq.full()
    off = len(seq.init)
    for w in range(len(seq.body) // N):
        start = off + w * N
        yield SourceSequence(full[start - pad:start], full[start:start + N], seq.A, seq.tree_id, seq.seed)


def window_losses(name: str, config: ExperimentConfig, tree, win: SourceSequence, cache: dict | None = None) -> np.ndarray:
    """Per-position log-loss of one predictor on one window.  ``cache`` lets the
    transformer variants share a single trace of the window."""
    kind, order = parse_predictor(name, config.depth)
    prior = config.ctw_prior
    x = win.body
    if kind == "genie":
        return true_model_losses(tree, win)
    if kind == "syntf" or kind in SYNTF_VARIANTS:
        cache = {} if cache is None else cache
        trace = cache.get("trace")
        if trace is None:
            tf = SyntheticTransformer(prior, n_ctx=len(x) + prior.depth + 1)
            pad = win.init[len(win.init) - prior.depth:] if prior.depth else win.init[:0]
            trace = cache["trace"] = tf.run(SourceSequence(pad, x, win.A))
        P = trace.output if kind == "syntf" else reduced_predict_all(SYNTF_VARIANTS[kind], trace, prior)
        return -np.log(P[np.arange(len(x)), x])
    k = order if kind == "ppm" else prior.depth
    pad = win.init[len(win.init) - k:] if k else []
    if kind == "ctw":
        pred = CtwPredictor(prior, pad)
    elif kind == "blend":
        pred = BlendPredictor(prior, pad)
    else:
        pred = PpmPredictor(config.A, order, pad)
    return np.array([observe(pred, int(s)) for s in x])


def run_tree(config: ExperimentConfig, k: int) -> dict:
    tree, seq = sample_test_source(config, k)
    out = {name: [] for name in config.predictors}
    ent = []
    for win in windows(seq, config.window, config.padding_len):
        cache: dict = {}
        for name in config.predictors:
            out[name].append(window_losses(name, config, tree, win, cache))
        ent.append(leaf_entropies(tree)[context_leaf_indices(tree, win)])
    res = {name: np.stack(v) for name, v in out.items()}
    res["_visit_entropy"] = np.stack(ent)
    res["_depth"] = tree.depth
    res["_leaves"] = tree.n_leaves
    return res


def _run_tree_star(args):
    return run_tree(*args)


# aggregation ----------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curves: dict[str, RateCurve]
    visit_entropy: float
    tree_depths: list[int]
    manifest: dict = field(default_factory=dict)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    tasks = [(config, k) for k in range(config.trees)]
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(config.workers) as ex:
                results = list(ex.map(_run_tree_star, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
        else:
            results = [_run_tree_star(t) for t in tasks]
    except Exception as err:  # noqa: BLE001
        manifest = build_manifest(config, status=f"failed: {err!r}")
        if config.out:
            _write(Path(config.out) / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        raise
    scale = 1.0 / LN2 if config.unit == "bits" else 1.0
    curves = {}
    for name in config.predictors:
        losses = np.concatenate([r[name] for r in results]) * scale  # (windows, N), tree order
        n = losses.shape[0]
        mean = losses.mean(axis=0)
        se = losses.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
        curves[name] = RateCurve(name, mean, se, n, config.unit)
    ent = float(np.concatenate([r["_visit_entropy"] for r in results]).mean()) * scale
    result = ExperimentResult(config, curves, ent, [r["_depth"] for r in results])
    result.manifest = build_manifest(config, status="ok")
    if config.out:
        write_outputs(result, Path(config.out))
    return result


def git_describe() -> str:
    try:
        return subprocess.run(
            ["git", "describe", "--always", "--dirty"], capture_output=True, text=True, timeout=10,
            cwd=Path(__file__).resolve().parent,
        ).stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def build_manifest(config: ExperimentConfig, status: str) -> dict:
    return {"git": git_describe(), "seed": config.seed, "status": status, "config": config_dict(config)}


def config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["predictors"] = list(config.predictors)
    d["nonctw_depths"] = list(config.nonctw_depths)
    d.pop("out", None)
    d.pop("workers", None)
    return d


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def write_outputs(result: ExperimentResult, out: Path) -> None:
    for name, curve in result.curves.items():
        _write(out / f"curve_{name.replace(':', '_')}.csv", curve.to_csv())
    _write(out / "summary.json", json.dumps(summary(result), indent=2, sort_keys=True))
    _write(out / "manifest.json", json.dumps(result.manifest, indent=2, sort_keys=True))


# comparisons ----------------------------------------------------------------

EQUIVALENCE_TOL = 1e-6


def compare_predictors(curves: dict[str, RateCurve]) -> dict:
    """Window/early/late averages per predictor plus the qualitative orderings."""
    curves = dict(curves)
    lengths = {len(c.mean) for c in curves.values()}
    units = {c.unit for c in curves.values()}
    if len(lengths) > 1 or len(units) > 1:
        raise ValueError("curves come from different configurations")
    rows = [
        {"predictor": n, "window_average": c.window_average, "early": c.early, "late": c.late}
        for n, c in curves.items()
    ]
    flags = {}
    same = [n for n in ("ctw", "blend", "syntf") if n in curves]
    if len(same) > 1:
        ref = curves[same[0]].mean
        flags["ctw_blend_syntf_equivalent"] = all(
            float(np.max(np.abs(curves[n].mean - ref))) <= EQUIVALENCE_TOL for n in same[1:]
        )
    if "genie" in curves:
        g = curves["genie"].window_average
        flags["genie_lowest"] = all(c.window_average >= g for n, c in curves.items())
    ppms = [n for n in curves if n.startswith("ppm")]
    if "ctw" in curves and ppms:
        ctw = curves["ctw"]
        for n in ppms:
            p = curves[n]
            flags[f"{n}_worse_than_ctw_early"] = p.early > ctw.early
            flags[f"{n}_catches_up"] = (p.late - ctw.late) < (p.early - ctw.early)
    return {"rows": rows, "flags": flags}


def summary(result: ExperimentResult) -> dict:
    cfg = result.config
    out = {
        "config": config_dict(cfg),
        "window_averages": {n: c.window_average for n, c in result.curves.items()},
        "comparison": compare_predictors(result.curves),
        "visit_weighted_entropy": result.visit_entropy,
        "node_touches_per_prediction": node_touch_counts(cfg.A, cfg.ctw_prior.depth),
    }
    if "genie" in result.curves and "ctw" in result.curves:
        out["ctw_gap_over_genie"] = genie_gaps(result.curves)
    return out


def genie_gaps(curves: dict[str, RateCurve]) -> dict:
    c, g = curves["ctw"], curves["genie"]
    return {"window": c.window_average - g.window_average, "early": c.early - g.early, "late": c.late - g.late}


def node_touch_counts(A: int, D: int) -> dict:
    """Nodes read to form one full predictive vector by each route."""
    # hypothetical update: per candidate symbol, D+1 path nodes plus A children
    # for each of the D internal path nodes
    ratio = A * ((D + 1) + A * D)
    # blend: the D+1 path nodes plus A siblings at each of the D levels
    blend = (D + 1) + A * D
    return {"ctw_ratio": ratio, "blend": blend}


def non_ctw_experiment(config: ExperimentConfig) -> tuple[ExperimentResult, dict]:
    """Run the mismatched-prior suite and report CTW's excess over the genie."""
    if config.prior != "nonctw":
        raise ValueError("non_ctw_experiment needs prior='nonctw'")
    res = run_experiment(config)
    gaps = genie_gaps(res.curves) if {"ctw", "genie"} <= res.curves.keys() else {}
    gaps["visit_weighted_entropy"] = res.visit_entropy
    return res, gaps
