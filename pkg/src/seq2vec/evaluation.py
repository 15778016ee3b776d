"""Next-event prediction: rank items by similarity to the query item.

For each ``(query, target)`` pair the prediction list is the ``K`` items
most similar to the query (query excluded, ties to the lower index).
HR@K is 1 when the target is in the list; NDCG@K is ``1 / log2(j + 1)``
for a hit at rank ``j``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from seq2vec.corpus import SplitCorpus, Vocabulary, sample_eval_split
from seq2vec.sgns import EmbeddingModel, Hyperparameters, train

METRICS = ("cosine", "dot")
COLDSTART_BUCKETS = {"=0": lambda n: n == 0, "<3": lambda n: n < 3}


def _vectors(model) -> np.ndarray:
    if isinstance(model, EmbeddingModel):
        return model.item_vectors
    return np.asarray(model, dtype=np.float64)


def _prepare(vectors: np.ndarray, metric: str) -> np.ndarray:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if metric == "dot":
        return vectors
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def nearest_neighbors(model, query: int, K: int, metric: str = "cosine") -> np.ndarray:
    """The ``K`` items closest to ``query``, best first."""
    vectors = _vectors(model)
    n = vectors.shape[0]
    if not 0 <= query < n:
        raise IndexError(f"query {query} outside vocabulary of size {n}")
    if K >= n:
        raise ValueError(f"K={K} must be smaller than the vocabulary size {n}")
    unit = _prepare(vectors, metric)
    sims = unit @ unit[query]
    sims[query] = -np.inf
    order = np.lexsort((np.arange(n), -sims))
    return order[:K]


def target_ranks(model, pairs: np.ndarray, K: int | None = None, metric: str = "cosine",
                 chunk: int = 1024) -> np.ndarray:
    """1-based rank of each target in its query's ranking (0 when beyond ``K``).

    Rank is ``1 + #{better items} + #{equal-scored items with lower index}``,
    which is exactly the target's position in :func:`nearest_neighbors`.
    """
    vectors = _vectors(model)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    unit = _prepare(vectors, metric)
    n = unit.shape[0]
    ranks = np.zeros(len(pairs), dtype=np.int64)
    idx = np.arange(n)
    for lo in range(0, len(pairs), chunk):
        q, t = pairs[lo:lo + chunk, 0], pairs[lo:lo + chunk, 1]
        sims = unit[q] @ unit.T
        rows = np.arange(len(q))
        sims[rows, q] = -np.inf
        s_t = sims[rows, t][:, None]
        better = (sims > s_t).sum(axis=1)
        tied_before = ((sims == s_t) & (idx[None, :] < t[:, None])).sum(axis=1)
        r = 1 + better + tied_before
        r[q == t] = 0  # the query is never predicted
        ranks[lo:lo + chunk] = r
    if K is not None:
        ranks[ranks > K] = 0
    return ranks


def ndcg_at_k(rank: int | None) -> float:
    if not rank:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def hit_ratio_at_k(rank: int | None) -> int:
    return 1 if rank else 0


def pair_scores(model, pairs, K: int, metric: str = "cosine") -> tuple[np.ndarray, np.ndarray]:
    """Per-pair hit indicators and NDCG gains."""
    ranks = target_ranks(model, pairs, K, metric)
    hits = (ranks > 0).astype(np.float64)
    gains = np.zeros(len(ranks))
    found = ranks > 0
    gains[found] = 1.0 / np.log2(ranks[found] + 1.0)
    return hits, gains


def evaluate(model, pairs, K: int = 10, metric: str = "cosine") -> tuple[float, float]:
    """Mean HR@K and NDCG@K over ``pairs``, both in [0, 1]."""
    if len(pairs) == 0:
        raise ValueError("no evaluation pairs")
    hits, gains = pair_scores(model, pairs, K, metric)
    return float(hits.mean()), float(gains.mean())


def aggregate_folds(scores: Sequence[float]) -> tuple[float, float]:
    """Mean and Student-t 95% confidence half-width."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise ValueError("need at least two folds for a confidence interval")
    n = scores.size
    sd = scores.std(ddof=1)
    return float(scores.mean()), float(stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))


def cooccurrence_counts(pairs, train_sessions: Sequence[np.ndarray], window: int) -> np.ndarray:
    """Number of training sessions in which query and target occur within ``window`` positions."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    wanted: dict[tuple[int, int], int] = {}
    for q, t in pairs.tolist():
        wanted[(min(q, t), max(q, t))] = 0
    for sess in train_sessions:
        items = sess.tolist() if isinstance(sess, np.ndarray) else list(sess)
        seen = set()
        for i, a in enumerate(items):
            for b in items[i + 1:i + 1 + window]:
                key = (a, b) if a <= b else (b, a)
                if key in wanted:
                    seen.add(key)
        for key in seen:
            wanted[key] += 1
    return np.array([wanted[(min(q, t), max(q, t))] for q, t in pairs.tolist()], dtype=np.int64)


def coldstart_slices(pairs, train_sessions: Sequence[np.ndarray], window: int) -> dict[str, np.ndarray]:
    """Indices of pairs whose training co-occurrence count is ``0`` and ``< 3``."""
    counts = cooccurrence_counts(pairs, train_sessions, window)
    return {name: np.flatnonzero(rule(counts)) for name, rule in COLDSTART_BUCKETS.items()}


@dataclass
class MetricSummary:
    folds: list[float]
    mean: float
    ci95: float | None

    @classmethod
    def from_folds(cls, folds: Sequence[float]) -> "MetricSummary":
        folds = [float(x) for x in folds]
        if len(folds) >= 2:
            mean, ci = aggregate_folds(folds)
        else:
            mean, ci = (folds[0] if folds else float("nan")), None
        return cls(folds, mean, ci)


@dataclass
class EvalReport:
    K: int
    hr: MetricSummary
    ndcg: MetricSummary
    n_pairs: list[int]
    split: str = "test"
    metric: str = "cosine"
    slices: dict[str, dict] = field(default_factory=dict)

    @property
    def n_folds(self) -> int:
        return len(self.hr.folds)

    def to_dict(self) -> dict:
        out = {
            "K": self.K,
            "folds": self.n_folds,
            "split": self.split,
            "similarity": self.metric,
            "n_pairs": self.n_pairs,
            "metrics": {f"HR@{self.K}": dataclasses.asdict(self.hr), f"NDCG@{self.K}": dataclasses.asdict(self.ndcg)},
            "slices": self.slices,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table_row(self) -> str:
        """``HR (x100) +- ci`` and ``NDCG +- ci`` in the results-table style."""
        return f"{format_metric(self.hr, 100)}  {format_metric(self.ndcg, 1, digits=3)}"


def format_metric(summary: MetricSummary, scale: float = 1.0, digits: int = 2) -> str:
    text = f"{summary.mean * scale:.{digits}f}"
    if summary.ci95 is not None:
        text += f" ± {summary.ci95 * scale:.{digits}f}"
    return text


def _slice_summaries(per_fold: list[tuple[np.ndarray, np.ndarray, dict]], K: int) -> dict[str, dict]:
    out = {}
    for name in COLDSTART_BUCKETS:
        hr, nd, sizes = [], [], []
        for hits, gains, slices in per_fold:
            sel = slices[name]
            sizes.append(int(len(sel)))
            if len(sel):
                hr.append(hits[sel].mean())
                nd.append(gains[sel].mean())
        out[name] = {
            "n_pairs": sizes,
            f"HR@{K}": dataclasses.asdict(MetricSummary.from_folds(hr)) if hr else None,
            f"NDCG@{K}": dataclasses.asdict(MetricSummary.from_folds(nd)) if nd else None,
        }
    return out


def run_folds(
    split: SplitCorpus,
    vocab: Vocabulary,
    hp: Hyperparameters,
    n_folds: int = 10,
    n_pairs: int = 10_000,
    K: int = 10,
    seed: int = 0,
    on: str = "test",
    side=None,
    coldstart: bool = False,
    metric: str = "cosine",
) -> EvalReport:
    """Train and evaluate ``n_folds`` times; fold ``f`` uses seed ``seed + f``
    for both the training run and the evaluation-pair sample."""
    if on not in ("test", "validation"):
        raise ValueError("on must be 'test' or 'validation'")
    hrs, ndcgs, sizes, details = [], [], [], []
    for fold in range(n_folds):
        fold_seed = seed + fold
        ev = sample_eval_split(split, n_pairs, fold_seed)
        pairs = ev.test_pairs if on == "test" else ev.validation_pairs
        model, _ = train(split, vocab, hp.replace(seed=fold_seed), side=side)
        hits, gains = pair_scores(model, pairs, K, metric)
        hrs.append(hits.mean())
        ndcgs.append(gains.mean())
        sizes.append(len(pairs))
        if coldstart:
            details.append((hits, gains, coldstart_slices(pairs, split.train_sessions, hp.window)))
    report = EvalReport(K, MetricSummary.from_folds(hrs), MetricSummary.from_folds(ndcgs), sizes, on, metric)
    if coldstart:
        report.slices = _slice_summaries(details, K)
    return report


def evaluate_model(
    model,
    split: SplitCorpus,
    pairs_per_fold: Sequence[np.ndarray],
    K: int = 10,
    window: int | None = None,
    metric: str = "cosine",
    split_name: str = "test",
) -> EvalReport:
    """Evaluate a fixed model on several pair samples (one per fold)."""
    hrs, ndcgs, sizes, details = [], [], [], []
    for pairs in pairs_per_fold:
        hits, gains = pair_scores(model, pairs, K, metric)
        hrs.append(hits.mean())
        ndcgs.append(gains.mean())
        sizes.append(len(pairs))
        if window is not None:
            details.append((hits, gains, coldstart_slices(pairs, split.train_sessions, window)))
    report = EvalReport(K, MetricSummary.from_folds(hrs), MetricSummary.from_folds(ndcgs), sizes, split_name, metric)
    if window is not None:
        report.slices = _slice_summaries(details, K)
    return report
