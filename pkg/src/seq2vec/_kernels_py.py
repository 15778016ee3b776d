"""Pure-Python training kernels, used when the compiled extension is absent.

Same pair generation, random stream (splitmix64) and update rule as
``_kernels.pyx``; only floating-point summation order differs.  Shards run
one after another, so ``threads > 1`` costs nothing but also buys nothing.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

NAME = "python"

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0


class SplitMix64:
    """splitmix64 stream; state is a plain 64-bit integer."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = int(state) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _M1) & MASK64
        z = ((z ^ (z >> 27)) * _M2) & MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * _INV53


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _draw(cum: list[float], n: int, rng: SplitMix64) -> int:
    return min(bisect_right(cum, rng.next_double()), n - 1)


def train_pair(W, C, src, dst, forbidden, k, cum, rng, lr) -> float:
    n = len(cum)
    negs = []
    for _ in range(k):
        nb = _draw(cum, n, rng)
        while nb == forbidden:
            nb = _draw(cum, n, rng)
        negs.append(nb)
    w = W[src]
    c = C[dst]
    f = float(np.dot(w, c))
    g_pos = sigmoid(f) - 1.0
    loss = softplus(-f)
    cn = C[negs]
    fn = cn @ w
    gneg = np.array([sigmoid(x) for x in fn])
    loss += sum(softplus(x) for x in fn)
    grad_w = g_pos * c + gneg @ cn
    C[dst] -= (lr * g_pos) * w
    np.add.at(C, negs, -(lr * gneg)[:, None] * w)
    W[src] -= lr * grad_w
    return loss


def _run_shard(tokens, offsets, s_begin, s_end, keep_prob, cum, W, C, meta_of, meta_weight, window, k,
               lr0, lr_min, total_centers, centers_base, n_shards, item_rng, meta_rng, trace):
    n_centers = n_pairs = n_meta = 0
    loss = meta_loss = 0.0
    lr = lr0
    has_meta = len(meta_of) > 0
    for s in range(s_begin, s_end):
        kept = [tok for tok in tokens[offsets[s]:offsets[s + 1]] if item_rng.next_double() < keep_prob[tok]]
        m = len(kept)
        for i in range(m):
            b = 1 + item_rng.next_u64() % window
            progress = (centers_base + n_centers * n_shards) / total_centers
            lr = max(lr_min, lr0 - (lr0 - lr_min) * progress)
            meta_lr = lr * meta_weight
            center = kept[i]
            trained = False
            for j in range(max(0, i - b), min(m - 1, i + b) + 1):
                if j == i:
                    continue
                ctx = kept[j]
                if trace is not None:
                    trace.append(("pair", s, i, j, center, ctx))
                loss += train_pair(W, C, center, ctx, ctx, k, cum, item_rng, lr)
                n_pairs += 1
                trained = True
                if has_meta:
                    mc = meta_of[ctx]
                    if mc >= 0:
                        meta_loss += meta_weight * train_pair(W, C, center, mc, -1, k, cum, meta_rng, meta_lr)
                        n_meta += 1
                    mcen = meta_of[center]
                    if mcen >= 0:
                        meta_loss += meta_weight * train_pair(W, C, mcen, ctx, ctx, k, cum, meta_rng, meta_lr)
                        n_meta += 1
            if has_meta and trained and meta_of[center] >= 0:
                meta_loss += meta_weight * train_pair(W, C, center, meta_of[center], -1, k, cum, meta_rng, meta_lr)
                n_meta += 1
            n_centers += 1
    return [loss, meta_loss, n_pairs, n_meta, n_centers, lr]


def train_epoch(tokens, offsets, keep_prob, cum, W, C, meta_of, meta_weight, window, negatives, lr0, lr_min,
                total_centers, centers_base, states, shard_bounds, trace=None):
    """Pure-Python twin of the compiled ``train_epoch``.

    ``trace``, if given, collects every generated (center, context) pair.
    """
    tokens_l = np.asarray(tokens).tolist()
    offsets_l = np.asarray(offsets).tolist()
    keep_l = np.asarray(keep_prob).tolist()
    cum_l = np.asarray(cum).tolist()
    meta_l = np.asarray(meta_of).tolist()
    n_shards = len(shard_bounds) - 1
    res = np.zeros((n_shards, 6))
    if len(tokens_l) == 0:
        return _collect(res, lr0)
    for sh in range(n_shards):
        item_rng = SplitMix64(int(states[sh, 0]))
        meta_rng = SplitMix64(int(states[sh, 1]))
        res[sh] = _run_shard(tokens_l, offsets_l, int(shard_bounds[sh]), int(shard_bounds[sh + 1]), keep_l, cum_l,
                             W, C, meta_l, meta_weight, int(window), int(negatives), lr0, lr_min, total_centers,
                             int(centers_base), n_shards, item_rng, meta_rng, trace)
        states[sh, 0] = item_rng.state
        states[sh, 1] = meta_rng.state
    return _collect(res, lr0)


def _collect(res, lr0):
    last = res[:, 4] > 0
    return {
        "loss": float(res[:, 0].sum()),
        "meta_loss": float(res[:, 1].sum()),
        "pairs": int(res[:, 2].sum()),
        "meta_pairs": int(res[:, 3].sum()),
        "centers": int(res[:, 4].sum()),
        "lr": float(res[last, 5].min()) if last.any() else lr0,
    }


def draw_from_table(cum, n, forbidden, seed):
    rng = SplitMix64(seed)
    cum_l = np.asarray(cum).tolist()
    size = len(cum_l)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        nb = _draw(cum_l, size, rng)
        while nb == forbidden:
            nb = _draw(cum_l, size, rng)
        out[i] = nb
    return out


def subsample_counts(tokens, keep_prob, passes, seed):
    rng = SplitMix64(seed)
    toks = np.asarray(tokens).tolist()
    keep_l = np.asarray(keep_prob).tolist()
    kept = [0] * len(toks)
    for _ in range(passes):
        for p, tok in enumerate(toks):
            if rng.next_double() < keep_l[tok]:
                kept[p] += 1
    return np.array(kept, dtype=np.int64)
