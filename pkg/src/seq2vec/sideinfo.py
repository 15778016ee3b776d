"""Item metadata (e.g. artist) as extra training contexts.

A simplified Meta-Prod2vec: each item may carry one metadata token.  Meta
tokens get their own rows after the item rows of the embedding matrices,
and training adds, per (center, context) pair, the weighted pairs
``center -> meta(context)`` and ``meta(center) -> context``, plus one
``center -> meta(center)`` pair per window.  Negatives always come from the
item distribution.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from seq2vec.corpus import CorpusError, Vocabulary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SideInfoMap:
    """``meta_of[item]`` is the meta row index (``>= n_items``) or -1."""

    meta_of: np.ndarray
    meta_tokens: tuple[str, ...]
    n_items: int
    weight: float = 1.0
    skipped_rows: int = 0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("side-information weight must be non-negative")
        mapped = self.meta_of[self.meta_of >= 0]
        if len(self.meta_of) != self.n_items:
            raise ValueError("meta_of must have one entry per item")
        if mapped.size and (mapped.min() < self.n_items or mapped.max() >= self.n_items + self.n_meta):
            raise ValueError("meta indices must lie in the extended range")

    @property
    def n_meta(self) -> int:
        return len(self.meta_tokens)

    def meta(self, item: int) -> int | None:
        m = int(self.meta_of[item])
        return m if m >= 0 else None

    def with_weight(self, weight: float) -> "SideInfoMap":
        return SideInfoMap(self.meta_of, self.meta_tokens, self.n_items, weight, self.skipped_rows)


def build_side_info(assignments: dict[str, str], vocab: Vocabulary, weight: float = 1.0) -> SideInfoMap:
    """Map item tokens to meta tokens; items outside ``vocab`` are ignored."""
    known = {item: meta for item, meta in assignments.items() if item in vocab}
    meta_tokens = tuple(sorted(set(known.values())))
    meta_index = {m: vocab.size + j for j, m in enumerate(meta_tokens)}
    meta_of = np.full(vocab.size, -1, dtype=np.int32)
    for item, meta in known.items():
        meta_of[vocab.index_of(item)] = meta_index[meta]
    return SideInfoMap(meta_of, meta_tokens, vocab.size, weight, skipped_rows=len(assignments) - len(known))


def load_side_info(path: str | Path, vocab: Vocabulary, weight: float = 1.0) -> SideInfoMap:
    """Read ``item<TAB>meta`` rows (no header).

    Rows for items not in ``vocab`` and repeated rows for an item are
    skipped and counted in ``skipped_rows``.
    """
    assignments: dict[str, str] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise CorpusError(f"{path}:{lineno}: expected 'item<TAB>meta', got {line!r}")
            item, meta = parts
            if item in assignments:
                duplicates += 1
                continue
            assignments[item] = meta
    side = build_side_info(assignments, vocab, weight)
    side = SideInfoMap(side.meta_of, side.meta_tokens, side.n_items, weight, side.skipped_rows + duplicates)
    logger.info("side info: %d meta tokens, %d rows skipped", side.n_meta, side.skipped_rows)
    return side


def augment_pairs(center: int, contexts: Sequence[int], side: SideInfoMap) -> list[tuple[int, int, float]]:
    """Weighted ``(input row, output row, weight)`` pairs for one training window.

    Order matches the training kernels.  With weight 0 only the plain item
    pairs are returned.
    """
    lam = side.weight
    out: list[tuple[int, int, float]] = []
    m_center = side.meta(center)
    for ctx in contexts:
        out.append((center, ctx, 1.0))
        if lam == 0:
            continue
        m_ctx = side.meta(ctx)
        if m_ctx is not None:
            out.append((center, m_ctx, lam))
        if m_center is not None:
            out.append((m_center, ctx, lam))
    if lam != 0 and contexts and m_center is not None:
        out.append((center, m_center, lam))
    return out
