"""Exact simulator of the (D+2)-layer transformer construction that mimics CTW.

All attention runs in the hard limit (temperature c -> infinity): a head
either selects the unique best-matching key or averages the values of all
exactly-matching keys.  Feed-forward layers are replaced by the exact
functions they are meant to approximate.  Weight matrices are never built;
block layouts follow the construction so every intermediate vector can be
dumped and audited.

Token stream: padding positions 1-P..0 followed by x_1..x_N.  Query
position n (0 <= n <= N) predicts x_{n+1}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ctw import log_dirichlet_evidence
from .model import CtwPrior, SourceSequence
from .pathblend import SubtreeEvidence, depth_predictives, prior_weights, weights_from_increments
from .stats import CountTable, reconstruct_counts

VARIANTS = ("full", "no-counts", "total-counts-only", "all-counts")
RETRIEVAL_MODES = ("exact", "latest")


@dataclass(frozen=True)
class ConstructionConfig:
    D: int
    M: int | None = None  # context-extension heads
    M_stats: int | None = None  # statistics heads
    retrieval: str = "exact"

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", self.D)
        if self.M_stats is None:
            object.__setattr__(self, "M_stats", self.M + 1)
        if self.M_stats > self.M + 1:
            raise ValueError("statistics heads must satisfy M' <= M + 1")
        if self.M != self.D or self.M_stats != self.D + 1:
            raise ValueError("the CTW-mimicking stack needs M = M' - 1 = D")
        if self.retrieval not in RETRIEVAL_MODES:
            raise ValueError(f"retrieval must be one of {RETRIEVAL_MODES}")


def positional(t: np.ndarray, n_ctx: int) -> np.ndarray:
    ang = np.asarray(t, dtype=np.float64) * math.pi / n_ctx
    return np.stack([np.ones_like(ang), np.cos(ang), np.sin(ang)], axis=-1)


def _rotation(m: int, n_ctx: int) -> np.ndarray:
    a = m * math.pi / n_ctx
    return np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])


@dataclass
class LayerTrace:
    """Per-position block contents after every functional layer."""

    A: int
    D: int
    n_ctx: int
    positions: np.ndarray  # stream positions t
    tokens: np.ndarray  # symbol at each stream position
    h1_onehot: np.ndarray  # (T, A)
    pos: np.ndarray  # (T, 3)
    h2_suffix: np.ndarray  # (T, M+1, A); zero block when the token does not exist
    # everything below is indexed by query position n = 0..N
    a2_forward: np.ndarray = field(default=None)  # (Q, M', A)
    a2_backward: np.ndarray = field(default=None)  # (Q, M', A)
    backward_collected: np.ndarray = field(default=None)  # (M',) bool
    recovered_i: np.ndarray = field(default=None)  # (Q,)
    counts: np.ndarray = field(default=None)  # (Q, D+1, A) reconstructed
    direct_counts: np.ndarray = field(default=None)  # (Q, D+1, A) read off a CountTable
    reconstruction_exact: np.ndarray = field(default=None)  # (Q,) bool
    h3_p: np.ndarray = field(default=None)  # (Q, D+1, A)
    h3_le: np.ndarray = field(default=None)  # (Q, D+1)
    lw_path: np.ndarray = field(default=None)  # (Q, D+1), filled depth D -> 0
    siblings: np.ndarray = field(default=None)  # (Q, D+1, A): lw(q s_{n,k-1}) at depth k
    delta: np.ndarray = field(default=None)  # (Q, D); delta[:, k-1] = delta_k
    output: np.ndarray = field(default=None)  # (Q, A)

    @property
    def n_query(self) -> int:
        return self.output.shape[0]

    def query_index(self, n: int) -> int:
        return n

    def embedding(self, layer: int, n: int) -> np.ndarray:
        """Flattened vector of query position n after ``layer`` (1, 2, 'a2', 3.., D+3)."""
        t = int(np.searchsorted(self.positions, n))
        pos = self.pos[t]
        if layer == 1:
            return np.concatenate([self.h1_onehot[t], np.zeros(self.D * self.A), pos])
        if layer == 2:
            return np.concatenate([self.h2_suffix[t].ravel(), pos])
        if layer == "a2":
            return np.concatenate([
                self.h2_suffix[t].ravel(), self.a2_forward[n].ravel(), self.a2_backward[n].ravel(), pos,
            ])
        if 3 <= layer <= self.D + 3:
            depth = self.D + 3 - layer  # lw slot held after this layer
            deltas = [self.delta[n, k - 1] for k in range(self.D, depth, -1)]
            tail = [self.lw_path[n, depth]] if layer < self.D + 3 else []
            return np.concatenate([
                self.h2_suffix[t].ravel(), self.h3_p[n].ravel(), self.h3_le[n], deltas, tail, pos,
            ])
        raise ValueError(f"no layer {layer!r}")

    def to_json(self) -> str:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        doc = {k: arr(v) if isinstance(v, np.ndarray) else v for k, v in self.__dict__.items()}
        return json.dumps(doc)


class SyntheticTransformer:
    def __init__(self, prior: CtwPrior, config: ConstructionConfig | None = None, n_ctx: int | None = None):
        self.prior = prior
        self.config = config or ConstructionConfig(prior.depth)
        if self.config.D != prior.depth:
            raise ValueError("construction depth must match the prior depth")
        self.n_ctx = n_ctx
        self.A = prior.A
        self.D = prior.depth

    # layer 1 ----------------------------------------------------------------

    def embed(self, seq: SourceSequence) -> LayerTrace:
        A, D = self.A, self.D
        pad = list(seq.init[len(seq.init) - D:]) if D else [0]
        tokens = np.array(pad + list(seq.body), dtype=np.int64)
        P = len(pad)
        positions = np.arange(1 - P, 1 - P + len(tokens))
        n_ctx = self.n_ctx or (len(tokens) + 1)
        if n_ctx < len(tokens):
            raise ValueError("context window smaller than the token stream")
        onehot = np.eye(A)[tokens]
        pos = positional(positions, n_ctx)
        return LayerTrace(A, D, n_ctx, positions, tokens, onehot, pos, None)

    def layer1_context_extension(self, trace: LayerTrace) -> LayerTrace:
        """Head m copies the token m places back, found by rotating the query's
        position code and matching it against every earlier key."""
        M = self.config.M
        T = len(trace.tokens)
        out = np.zeros((T, M + 1, self.A))
        out[:, 0] = trace.h1_onehot
        keys = trace.pos[:, 1:]
        causal = np.tril(np.ones((T, T), dtype=bool))
        for m in range(1, M + 1):
            query = keys @ _rotation(m, trace.n_ctx).T
            score = np.where(causal, query @ keys.T, -np.inf)
            best = np.argmax(score, axis=1)
            # c -> inf picks the argmax; a perfect match (cos = 1) exists only
            # when the token m places back is in the stream
            hit = score[np.arange(T), best] > 1 - 1e-9
            out[hit, m] = trace.h1_onehot[best[hit]]
        trace.h2_suffix = out
        return trace

    # layer 2 ----------------------------------------------------------------

    def layer2_statistics(self, trace: LayerTrace) -> LayerTrace:
        """Head for suffix length k averages, over earlier emitted positions t whose
        preceding k symbols equal the query's last k, the one-hot of x_t (forward)
        and of x_{t-k-1} (backward, when that block is in the embedding)."""
        A, M, Mp = self.A, self.config.M, self.config.M_stats
        blocks = trace.h2_suffix
        present = blocks.sum(axis=2) > 0.5
        sym = np.where(present, blocks.argmax(axis=2), -1)  # sym[t, j] = x_{t-j}
        P = int(np.sum(trace.positions <= 0))
        Q = len(trace.tokens) - P + 1
        qrows = np.arange(P - 1, len(trace.tokens))  # stream index of query n = 0..N
        emitted = trace.positions >= 1
        fwd = np.empty((Q, Mp, A))
        bwd = np.empty((Q, Mp, A))
        collected = np.zeros(Mp, dtype=bool)
        T = len(trace.tokens)
        causal = np.tril(np.ones((T, T), dtype=bool))[qrows] & emitted[None, :]
        for k in range(Mp):
            # query code: s_{n,k} = (x_n .. x_{n-k+1}); key code: s_{t-1,k} = (x_{t-1} .. x_{t-k})
            q_code = _codes(sym[qrows, :k], A)
            k_code = np.full(T, -1, dtype=np.int64)
            k_code[1:] = _codes(sym[:-1, :k], A)
            match = causal & (q_code[:, None] == k_code[None, :]) & (q_code[:, None] >= 0)
            tot = match.sum(axis=1, keepdims=True).astype(np.float64)
            safe = np.where(tot > 0, tot, 1.0)
            fwd[:, k] = np.where(tot > 0, (match @ trace.h1_onehot) / safe, 1.0 / A)
            if k + 1 <= M:
                collected[k] = True
                prev = blocks[:, k + 1]  # x_{t-k-1}
                bwd[:, k] = np.where(tot > 0, (match @ prev) / safe, 1.0 / A)
            else:
                bwd[:, k] = 1.0 / A
        trace.a2_forward = fwd
        trace.a2_backward = bwd
        trace.backward_collected = collected
        return trace

    # feed-forward after layer 2 ----------------------------------------------

    def ff_statistics_to_evidence(self, trace: LayerTrace) -> LayerTrace:
        """Counts from (g, g<-, position), then Dirichlet means and log evidences."""
        D = self.D
        Q = trace.a2_forward.shape[0]
        P = len(trace.tokens) - Q + 1
        qrows = np.arange(P - 1, len(trace.tokens))
        pos = trace.pos[qrows]
        i_rec = np.rint(np.arctan2(pos[:, 2], pos[:, 1]) * trace.n_ctx / math.pi).astype(np.int64)
        counts = np.empty((Q, D + 1, self.A))
        exact = np.ones(Q, dtype=bool)
        for n in range(Q):
            path = trace.h2_suffix[qrows[n]].argmax(axis=1)
            raw, _ = reconstruct_counts(trace.a2_forward[n, : D + 1], trace.a2_backward[n], path, int(i_rec[n]))
            rounded = np.rint(raw)
            exact[n] = bool(np.all(np.abs(raw - rounded) <= 1e-9))
            counts[n] = rounded
        trace.recovered_i = i_rec
        trace.counts = counts
        trace.reconstruction_exact = exact
        self._evidence(trace, counts)
        return trace

    def _evidence(self, trace: LayerTrace, counts: np.ndarray) -> None:
        alpha = self.prior.alpha
        Q = counts.shape[0]
        trace.h3_p = np.stack([depth_predictives(c, alpha) for c in counts])
        le = np.empty((Q, self.D + 1))
        for n in range(Q):
            for l in range(self.D + 1):
                le[n, l] = log_dirichlet_evidence(counts[n, l].tolist(), alpha)
        trace.h3_le = le
        trace.lw_path = np.full((Q, self.D + 1), np.nan)
        trace.lw_path[:, self.D] = le[:, self.D]

    # induction layers -----------------------------------------------------------

    def current_sibling_table(self, seq: SourceSequence) -> tuple[np.ndarray, np.ndarray]:
        """lw(q s_{n,k-1}) for every query n, depth k and symbol q, evaluated on
        the counts of x_1..x_n; also returns the direct path counts."""
        A, D = self.A, self.D
        pad = seq.init[len(seq.init) - D:] if D else []
        table = CountTable(A, D, pad)
        ev = SubtreeEvidence(table, self.prior)
        N = len(seq.body)
        sib = np.zeros((N + 1, D + 1, A))
        direct = np.zeros((N + 1, D + 1, A))
        for n in range(N + 1):
            path = table.context(D)
            for l in range(D + 1):
                direct[n, l] = table.get(path[:l])
            for k in range(1, D + 1):
                parent = path[: k - 1]
                for q in range(A):
                    sib[n, k, q] = ev.lw(parent + (q,))
            if n < N:
                table.update(int(seq.body[n]))
        return sib, direct

    def induction_layer(self, trace: LayerTrace, layer: int, current: np.ndarray | None = None) -> LayerTrace:
        """Layer ``layer`` (3 <= layer <= D+2) turns lw at depth k = D+3-layer
        into delta_k and lw at depth k-1.  Each of the A heads fetches the
        sibling lw(q s_{n,k-1}); in ``latest`` mode it takes the value stored at
        the latest position whose own depth-k suffix equals q s_{n,k-1}."""
        D, A = self.D, self.A
        k = D + 3 - layer
        if not 1 <= k <= D:
            raise ValueError(f"induction layers run for 3 <= layer <= D+2, got {layer}")
        lam = self.prior.lam
        log_lam = math.log(lam)
        log_branch = math.log1p(-lam) if lam < 1 else -math.inf
        Q = trace.h3_le.shape[0]
        P = len(trace.tokens) - Q + 1
        qrows = np.arange(P - 1, len(trace.tokens))
        sym = trace.h2_suffix[qrows].argmax(axis=2)  # sym[n, j] = x_{n-j}
        if trace.siblings is None:
            trace.siblings = np.zeros((Q, D + 1, A))
            trace.delta = np.full((Q, D), np.nan)
        if self.config.retrieval == "latest":
            own = _codes(sym[:, :k], A)
            latest: dict[int, int] = {}
        for n in range(Q):
            on_path = sym[n, k - 1]
            if self.config.retrieval == "latest":
                latest[int(own[n])] = n
                parent_code = _codes(sym[n : n + 1, : k - 1], A)[0]
                vals = np.zeros(A)
                for q in range(A):
                    hit = latest.get(int(parent_code + q * A ** (k - 1)))
                    vals[q] = 0.0 if hit is None else trace.lw_path[hit, k]
            else:
                vals = current[n, k].copy()
                vals[on_path] = trace.lw_path[n, k]
            trace.siblings[n, k] = vals
            sib_sum = float(vals.sum())
            le = trace.h3_le[n]
            trace.delta[n, k - 1] = (
                log_branch - (log_lam if k == D else 0.0) + le[k] - le[k - 1] + sib_sum - trace.lw_path[n, k]
            )
            a, b = log_lam + le[k - 1], log_branch + sib_sum
            trace.lw_path[n, k - 1] = max(a, b) + math.log1p(math.exp(-abs(a - b))) if b > -math.inf else a
        return trace

    def output_layer(self, trace: LayerTrace) -> LayerTrace:
        Q = trace.h3_le.shape[0]
        out = np.empty((Q, self.A))
        for n in range(Q):
            w = weights_from_increments(trace.delta[n]) if self.D else np.ones(1)
            out[n] = w @ trace.h3_p[n]
        trace.output = out
        return trace

    # full pipeline --------------------------------------------------------------

    def run(self, seq: SourceSequence) -> LayerTrace:
        if seq.A != self.A:
            raise ValueError("alphabet mismatch")
        trace = self.embed(seq)
        self.layer1_context_extension(trace)
        self.layer2_statistics(trace)
        self.ff_statistics_to_evidence(trace)
        current, direct = self.current_sibling_table(seq)
        trace.direct_counts = direct
        if self.D:
            trace.siblings = None
            for layer in range(3, self.D + 3):
                self.induction_layer(trace, layer, current)
        else:
            trace.delta = np.zeros((trace.h3_le.shape[0], 0))
            trace.siblings = np.zeros((trace.h3_le.shape[0], 1, self.A))
        self.output_layer(trace)
        return trace

    def predict_all(self, seq: SourceSequence) -> np.ndarray:
        """(N+1, A): law of x_{n+1} given x_{1-D}..x_n for n = 0..N."""
        return self.run(seq).output


def _codes(sym: np.ndarray, A: int) -> np.ndarray:
    """Base-A code of each row (first column least significant); -1 if any entry is missing."""
    sym = np.atleast_2d(sym)
    if sym.shape[1] == 0:
        return np.zeros(sym.shape[0], dtype=np.int64)
    weights = A ** np.arange(sym.shape[1], dtype=np.int64)
    code = (np.where(sym < 0, 0, sym) * weights).sum(axis=1)
    return np.where((sym < 0).any(axis=1), -1, code)


def layer1_context_extension(seq: SourceSequence, prior: CtwPrior) -> np.ndarray:
    tf = SyntheticTransformer(prior)
    return tf.layer1_context_extension(tf.embed(seq)).h2_suffix


def stale_retrieval_discrepancy(seq: SourceSequence, prior: CtwPrior) -> dict:
    """Compare exact sibling retrieval with latest-matching-position retrieval."""
    exact = SyntheticTransformer(prior, ConstructionConfig(prior.depth, retrieval="exact")).run(seq)
    stale = SyntheticTransformer(prior, ConstructionConfig(prior.depth, retrieval="latest")).run(seq)
    x = seq.body
    idx = np.arange(len(x))
    le = -np.log(exact.output[idx, x])
    ls = -np.log(stale.output[idx, x])
    diff_sib = np.abs(exact.siblings - stale.siblings)
    return {
        "max_abs_prediction_gap": float(np.abs(exact.output - stale.output).max()),
        "max_abs_sibling_gap": float(diff_sib.max()) if diff_sib.size else 0.0,
        "fraction_positions_affected": float(np.mean(np.abs(exact.output - stale.output).max(axis=1) > 1e-12)),
        "rate_exact": float(le.mean()),
        "rate_latest": float(ls.mean()),
    }


# reduced two-layer feature sets -----------------------------------------------

# The ablated variants have no trained feed-forward layer here.  Their blends
# are fixed, artifact-defined heuristics:
#   no-counts:          prior depth weights; per-depth law (alpha + g) / (sum alpha + 1)
#   total-counts-only:  per-depth pseudo-counts g_l * i / A^l, evidence increments
#                       along the path with the parent's remaining pseudo-counts
#                       pooled into one Dirichlet block in place of the siblings
NO_COUNTS_PSEUDO = 1.0


def _pooled_path_blend(counts: np.ndarray, prior: CtwPrior) -> np.ndarray:
    D = counts.shape[0] - 1
    alpha = prior.alpha
    p = depth_predictives(counts, alpha)
    if D == 0:
        return p[0]
    lam = prior.lam
    log_lam = math.log(lam)
    log_branch = math.log1p(-lam) if lam < 1 else -math.inf
    le = [log_dirichlet_evidence(c.tolist(), alpha) for c in counts]
    delta = np.empty(D)
    for l in range(1, D + 1):
        rest = np.clip(counts[l - 1] - counts[l], 0.0, None)
        delta[l - 1] = (
            log_branch - (log_lam if l == D else 0.0) + le[l] - le[l - 1]
            + log_dirichlet_evidence(rest.tolist(), alpha)
        )
    return weights_from_increments(delta) @ p


def reduced_feature_predict(variant: str, trace: LayerTrace, n: int, prior: CtwPrior) -> np.ndarray:
    """Prediction at query n from the feature set of an ablated second layer."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    D, A = trace.D, trace.A
    if variant == "full":
        return trace.output[n]
    if variant == "all-counts":
        counts = trace.direct_counts[n]
        p = depth_predictives(counts, prior.alpha)
        if D == 0:
            return p[0]
        le = np.array([log_dirichlet_evidence(c.tolist(), prior.alpha) for c in counts])
        lam = prior.lam
        log_lam, log_branch = math.log(lam), (math.log1p(-lam) if lam < 1 else -math.inf)
        lw = le[D]
        delta = np.empty(D)
        for k in range(D, 0, -1):
            sib = trace.siblings[n, k].copy()
            sib[trace.h2_suffix[int(np.searchsorted(trace.positions, n)), k - 1].argmax()] = lw
            s = float(sib.sum())
            delta[k - 1] = log_branch - (log_lam if k == D else 0.0) + le[k] - le[k - 1] + s - lw
            a, b = log_lam + le[k - 1], log_branch + s
            lw = max(a, b) + math.log1p(math.exp(-abs(a - b))) if b > -math.inf else a
        return weights_from_increments(delta) @ p
    g = trace.a2_forward[n, : D + 1]
    if variant == "no-counts":
        alpha = np.asarray(prior.alpha)
        p = (alpha + NO_COUNTS_PSEUDO * g) / (alpha.sum() + NO_COUNTS_PSEUDO)
        w = prior_weights(prior.lam, D)
        return w @ p
    # total-counts-only
    i = float(trace.recovered_i[n])
    scale = i / A ** np.arange(D + 1)
    return _pooled_path_blend(g * scale[:, None], prior)


def reduced_predict_all(variant: str, trace: LayerTrace, prior: CtwPrior) -> np.ndarray:
    return np.stack([reduced_feature_predict(variant, trace, n, prior) for n in range(trace.n_query)])
