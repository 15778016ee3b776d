"""Negative-sampling distribution and frequent-item subsampling.

The negative distribution is the unigram distribution raised to an arbitrary
real exponent ``alpha``: 1 samples by popularity, 0 uniformly, and negative
values favour rare items.  Draws use inverse-CDF lookup by binary search.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seq2vec.corpus import Vocabulary


@dataclass(frozen=True)
class NegativeTable:
    weights: np.ndarray
    cumulative: np.ndarray
    alpha: float

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def __len__(self) -> int:
        return len(self.weights)


def smoothed_weights(counts: np.ndarray, alpha: float) -> np.ndarray:
    """``counts ** alpha`` rescaled so the largest weight is 1.

    Computed in log space so large ``|alpha|`` cannot overflow; the
    rescaling cancels on normalisation.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size == 0:
        raise ValueError("empty vocabulary")
    if np.any(counts <= 0):
        raise ValueError("counts must be positive")
    logw = alpha * np.log(counts)
    return np.exp(logw - logw.max())


def build_negative_table(vocab: Vocabulary | np.ndarray, alpha: float) -> NegativeTable:
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    counts = vocab.counts if isinstance(vocab, Vocabulary) else np.asarray(vocab)
    weights = smoothed_weights(counts, alpha)
    cumulative = np.cumsum(weights)
    cumulative /= cumulative[-1]
    cumulative[-1] = 1.0
    return NegativeTable(weights=weights, cumulative=cumulative, alpha=float(alpha))


def draw_negatives(table: NegativeTable, k: int, forbidden: int | None, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` items from ``table``, redrawing any equal to ``forbidden``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(table)
    if forbidden is not None and n < 2:
        raise ValueError("cannot draw negatives distinct from the only item")
    out = np.searchsorted(table.cumulative, rng.random(k), side="right")
    np.minimum(out, n - 1, out=out)
    if forbidden is not None:
        bad = out == forbidden
        while bad.any():
            redraw = np.searchsorted(table.cumulative, rng.random(int(bad.sum())), side="right")
            out[bad] = np.minimum(redraw, n - 1)
            bad = out == forbidden
    return out


def discard_probability(f, t: float):
    """Probability that one occurrence of an item with frequency ``f`` is dropped.

    ``max(0, (f - t) / f - sqrt(t / f))``; zero whenever ``f <= t``.
    Accepts scalars or arrays.
    """
    if t <= 0:
        raise ValueError("threshold must be positive")
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr <= 0):
        raise ValueError("frequency must be positive")
    p = np.maximum(0.0, (f_arr - t) / f_arr - np.sqrt(t / f_arr))
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class SubsampleFilter:
    threshold: float
    discard_prob: np.ndarray

    @classmethod
    def from_vocab(cls, vocab: Vocabulary, threshold: float) -> "SubsampleFilter":
        return cls(threshold=float(threshold), discard_prob=discard_probability(vocab.freq, threshold))

    @property
    def keep_prob(self) -> np.ndarray:
        return 1.0 - self.discard_prob


def subsample_session(session: np.ndarray, filt: SubsampleFilter, rng: np.random.Generator) -> np.ndarray:
    """Keep each occurrence independently with probability ``1 - p(item)``."""
    session = np.asarray(session)
    if session.size == 0:
        return session
    keep = rng.random(session.size) >= filt.discard_prob[session]
    return session[keep]
