"""Session ingestion, vocabulary and the next-event-prediction split.

Sessions are chronological item sequences (listening sessions, purchase
histories, click streams).  Every sequence is cut into a training prefix
(all items but the last) and one held-out ``(query, target)`` pair made of
its last two items.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FORMATS = ("lines", "csv_retail", "csv_events")

# Column layout of the public Online Retail dataset, and of a generic event log.
RETAIL_COLUMNS = {"session": "CustomerID", "item": "StockCode", "time": "InvoiceDate"}
EVENT_COLUMNS = {"session": "session_id", "item": "item_id", "time": "timestamp"}

_TIME_FORMATS = ("%m/%d/%Y %H:%M", "%m/%d/%Y %H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d")


class CorpusError(ValueError):
    """Raised for unreadable or unusable session data."""


@dataclass(frozen=True)
class Vocabulary:
    """Token/index map with raw occurrence counts.

    Indices are assigned by descending count, ties broken by token.
    """

    tokens: tuple[str, ...]
    counts: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(self.tokens)})
        if len(self._index) != len(self.tokens):
            raise CorpusError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())

    @property
    def freq(self) -> np.ndarray:
        """Relative frequency of every item, summing to one."""
        return self.counts / self.counts.sum()

    def index_of(self, token: str) -> int:
        return self._index[token]

    def token_of(self, index: int) -> str:
        return self.tokens[index]

    def get(self, token: str, default: int = -1) -> int:
        return self._index.get(token, default)

    def encode(self, sequence: Iterable[str]) -> np.ndarray:
        """Map tokens to indices, dropping out-of-vocabulary tokens."""
        index = self._index
        return np.fromiter((index[t] for t in sequence if t in index), dtype=np.int32)


@dataclass
class SplitCorpus:
    """Training prefixes plus one held-out (query, target) pair per session.

    ``train_sessions`` holds int32 index arrays.  ``holdout_pairs`` is an
    ``(n, 2)`` array of ``(query, target)`` and ``pair_session`` the position
    of the originating sequence in the input.
    """

    train_sessions: list[np.ndarray]
    holdout_pairs: np.ndarray
    pair_session: np.ndarray

    @property
    def n_tokens(self) -> int:
        return int(sum(len(s) for s in self.train_sessions))


@dataclass
class EvalSplit:
    """Disjoint validation/test samples drawn from the holdout pairs."""

    validation_pairs: np.ndarray
    test_pairs: np.ndarray
    validation_index: np.ndarray
    test_index: np.ndarray
    fold_seed: int


def load_sessions(
    path: str | Path,
    format: str = "lines",
    columns: dict[str, str] | None = None,
    delimiter: str = ",",
) -> list[list[str]]:
    """Read one token sequence per session/user from ``path``.

    ``lines``: one session per line, items separated by spaces.
    ``csv_retail`` / ``csv_events``: a CSV with a header; rows are grouped by
    the session column and ordered by the time column (stable for ties).
    ``columns`` overrides the ``session``/``item``/``time`` column names.
    """
    path = Path(path)
    if format not in FORMATS:
        raise CorpusError(f"unknown format {format!r}; expected one of {FORMATS}")
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            if format == "lines":
                sequences = [line.split() for line in fh]
                sequences = [s for s in sequences if s]
            else:
                defaults = RETAIL_COLUMNS if format == "csv_retail" else EVENT_COLUMNS
                cols = {**defaults, **(columns or {})}
                sequences = _read_csv_sessions(fh, cols, delimiter, path)
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    if not sequences:
        raise CorpusError(f"no sessions found in {path}")
    return sequences


def _parse_time(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        pass
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(value, fmt).timestamp()
        except ValueError:
            continue
    raise ValueError(f"unparseable timestamp {value!r}")


def _read_csv_sessions(fh, cols: dict[str, str], delimiter: str, path: Path) -> list[list[str]]:
    reader = csv.DictReader(fh, delimiter=delimiter)
    missing = [c for c in cols.values() if reader.fieldnames is None or c not in reader.fieldnames]
    if missing:
        raise CorpusError(f"{path}: missing columns {missing}")
    events: dict[str, list[tuple]] = defaultdict(list)
    order: list[str] = []
    skipped = 0
    for row in reader:
        line = reader.line_num
        if None in row or any(row.get(c) is None for c in cols.values()):
            raise CorpusError(f"{path}:{line}: malformed row")
        session, item = row[cols["session"]].strip(), row[cols["item"]].strip()
        if not session or not item:
            # e.g. guest purchases without a customer id
            skipped += 1
            continue
        try:
            ts = _parse_time(row[cols["time"]].strip())
        except ValueError as exc:
            raise CorpusError(f"{path}:{line}: {exc}") from None
        if session not in events:
            order.append(session)
        events[session].append((ts, line, item))
    if skipped:
        logger.info("%s: skipped %d rows with empty session or item", path, skipped)
    return [[item for _, _, item in sorted(events[s])] for s in order]


def build_vocabulary(sequences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Count tokens and keep those seen at least ``min_count`` times."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter[str] = Counter()
    for seq in sequences:
        counter.update(seq)
    kept = sorted(((t, c) for t, c in counter.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    if not kept:
        raise CorpusError(f"empty vocabulary after applying min_count={min_count}")
    tokens = tuple(t for t, _ in kept)
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(tokens, counts)


def split_nep(sequences: Iterable[Sequence[str]], vocab: Vocabulary) -> SplitCorpus:
    """Filter out-of-vocabulary tokens, then hold out each session's last item."""
    train: list[np.ndarray] = []
    pairs: list[tuple[int, int]] = []
    origin: list[int] = []
    for sid, seq in enumerate(sequences):
        items = vocab.encode(seq)
        if len(items) == 0:
            continue
        if len(items) == 1:
            train.append(items)
            continue
        prefix = items[:-1]
        train.append(prefix)
        pairs.append((int(prefix[-1]), int(items[-1])))
        origin.append(sid)
    if not pairs:
        raise CorpusError("no session has two in-vocabulary items; nothing to evaluate")
    return SplitCorpus(
        train_sessions=train,
        holdout_pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        pair_session=np.array(origin, dtype=np.int64),
    )


def sample_eval_split(split: SplitCorpus, n_pairs: int, seed: int = 0) -> EvalSplit:
    """Draw disjoint test and validation samples of up to ``n_pairs`` each.

    When fewer than ``2 * n_pairs`` pairs exist, the available pairs are
    divided evenly between the two sets.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    available = len(split.holdout_pairs)
    n_each = min(n_pairs, available // 2)
    if n_each == 0:
        raise CorpusError(f"need at least 2 holdout pairs for disjoint test/validation sets, have {available}")
    perm = np.random.default_rng(seed).permutation(available)
    test_idx = np.sort(perm[:n_each])
    val_idx = np.sort(perm[n_each : 2 * n_each])
    return EvalSplit(
        validation_pairs=split.holdout_pairs[val_idx],
        test_pairs=split.holdout_pairs[test_idx],
        validation_index=val_idx,
        test_index=test_idx,
        fold_seed=seed,
    )


def count_histogram(vocab: Vocabulary) -> list[tuple[int, float]]:
    """(rank, natural-log count) for every item, most frequent first."""
    order = sorted(range(vocab.size), key=lambda i: (-int(vocab.counts[i]), i))
    return [(rank, math.log(float(vocab.counts[i]))) for rank, i in enumerate(order)]


def write_sessions(sequences: Iterable[Sequence[str]], path: str | Path) -> None:
    """Write sessions in the space-separated ``lines`` format."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(" ".join(seq) + "\n")
