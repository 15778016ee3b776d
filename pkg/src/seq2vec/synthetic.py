"""Synthetic session corpora with known structure."""
from __future__ import annotations

import numpy as np


def planted_pairs_sessions(n_sessions: int = 5000, n_pairs: int = 50, min_pairs: int = 2, max_pairs: int = 6,
                           seed: int = 0, walk: str = "ring") -> list[list[str]]:
    """Sessions that walk over ``n_pairs`` disjoint item pairs ``(a_i, b_i)``.

    Every step emits ``a_i b_i``, so ``b_i`` always directly follows
    ``a_i`` and every session ends on a complete pair.  With
    ``walk="ring"`` the pairs sit on a cycle and each step moves to a
    neighbouring pair (``i +- 1 mod n_pairs``) from a uniform start; with
    ``walk="uniform"`` every step picks a pair independently.
    """
    if walk not in ("ring", "uniform"):
        raise ValueError("walk must be 'ring' or 'uniform'")
    rng = np.random.default_rng(seed)
    sessions = []
    for _ in range(n_sessions):
        length = int(rng.integers(min_pairs, max_pairs + 1))
        if walk == "uniform":
            steps = rng.integers(0, n_pairs, size=length)
        else:
            moves = rng.choice((-1, 1), size=length - 1)
            steps = (int(rng.integers(n_pairs)) + np.concatenate(([0], np.cumsum(moves)))) % n_pairs
        sessions.append([tok for p in steps for tok in (f"a{p}", f"b{p}")])
    return sessions


def popularity_block_sessions(
    n_items: int = 2000,
    n_sessions: int = 4000,
    n_clusters: int = 40,
    zipf: float = 1.0,
    n_blocks: tuple[int, int] = (1, 3),
    block_len: tuple[int, int] = (3, 6),
    stay: float = 0.8,
    local: float = 0.5,
    seed: int = 0,
) -> tuple[list[list[str]], dict[str, str]]:
    """Zipf-popular items in sessions of popularity-homogeneous blocks.

    Items are ranked by popularity (item ``i{r}`` has Zipf weight
    ``1 / (r + 1) ** zipf``) and cut into ``n_clusters`` contiguous rank
    bands, so a cluster holds items of similar popularity.  A session picks
    a cluster with probability proportional to its popularity mass and
    emits blocks of items from it: each item is, with probability ``local``,
    a rank neighbour (+-1 or +-2) of the previous one, otherwise a fresh
    draw by Zipf weight.  Between blocks the session
    stays in the same cluster with probability ``stay`` and otherwise moves
    to a neighbouring band.  Returns the sessions and the item -> cluster
    map (usable as side information).
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_items + 1) ** zipf
    bands = np.array_split(np.arange(n_items), n_clusters)
    mass = np.array([weights[b].sum() for b in bands])
    mass /= mass.sum()
    sessions = []
    for _ in range(n_sessions):
        c = int(rng.choice(n_clusters, p=mass))
        items: list[str] = []
        for _ in range(rng.integers(n_blocks[0], n_blocks[1] + 1)):
            band = bands[c]
            p = weights[band] / weights[band].sum()
            pos = int(rng.choice(len(band), p=p))
            for _ in range(rng.integers(block_len[0], block_len[1] + 1)):
                items.append(f"i{band[pos]}")
                if rng.random() < local:
                    pos = int(np.clip(pos + rng.choice((-2, -1, 1, 2)), 0, len(band) - 1))
                else:
                    pos = int(rng.choice(len(band), p=p))
            if rng.random() > stay:
                c = int(np.clip(c + rng.choice((-1, 1)), 0, n_clusters - 1))
        sessions.append(items)
    clusters = {f"i{r}": f"c{k}" for k, band in enumerate(bands) for r in band}
    return sessions, clusters
