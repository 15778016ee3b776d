"""Skip-gram with negative sampling over item sessions.

Training objective per observed (item, context) pair with ``k`` sampled
negatives::

    loss = -log sigmoid(w . c) - sum_i log sigmoid(-w . c_neg_i)

optimised by plain SGD with a linearly decaying learning rate.  The hot
loop lives in the compiled kernel (``_kernels.pyx``) with a pure-Python
twin selected automatically when the extension is not built.
"""
from __future__ import annotations

import dataclasses
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from seq2vec._backend import get_kernels
from seq2vec.corpus import SplitCorpus, Vocabulary
from seq2vec.sampling import SubsampleFilter, build_negative_table

if TYPE_CHECKING:
    from seq2vec.sideinfo import SideInfoMap

logger = logging.getLogger(__name__)

MAGIC = b"SEQ2VEC1"


@dataclass(frozen=True)
class Hyperparameters:
    """SGNS training configuration.

    Defaults are the usual word2vec/gensim values (window 5, 5 epochs,
    subsampling 1e-3, exponent 0.75, 50 dimensions, 5 negatives, rate 0.025).
    ``lr_min`` defaults to ``lr0 * 1e-4``.
    """

    window: int = 5
    n_epochs: int = 5
    subsample: float = 1e-3
    alpha: float = 0.75
    dim: int = 50
    negatives: int = 5
    lr0: float = 0.025
    lr_min: float | None = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.lr_min is None:
            object.__setattr__(self, "lr_min", self.lr0 * 1e-4)
        for name in ("window", "n_epochs", "dim", "negatives", "threads"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not self.subsample > 0:
            raise ValueError("subsample threshold must be positive")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not 0 < self.lr_min < self.lr0:
            raise ValueError("need 0 < lr_min < lr0")
        for name in ("subsample", "alpha", "lr0", "lr_min"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def replace(self, **changes) -> "Hyperparameters":
        if "lr0" in changes and "lr_min" not in changes:
            changes["lr_min"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparameters":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EmbeddingModel:
    """Item vectors ``W`` and context vectors ``C``.

    Rows ``[0, n_items)`` are items; any rows after that belong to side
    information tokens and never take part in prediction.
    """

    W: np.ndarray
    C: np.ndarray | None
    tokens: tuple[str, ...] = ()
    n_items: int | None = None
    hyperparameters: Hyperparameters | None = None

    def __post_init__(self):
        if self.n_items is None:
            self.n_items = self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def item_vectors(self) -> np.ndarray:
        return self.W[: self.n_items]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.W).all() and (self.C is None or np.isfinite(self.C).all()))


@dataclass
class TrainReport:
    epoch_loss: list[float | None] = field(default_factory=list)
    pairs: int = 0
    meta_pairs: int = 0
    centers: int = 0
    wall_time: float = 0.0
    final_lr: float = 0.0
    backend: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def init_model(vocab_size: int, dim: int, seed: int = 0) -> EmbeddingModel:
    """Uniform ``[-0.5/d, 0.5/d]`` item vectors and all-zero context vectors."""
    if vocab_size < 1 or dim < 1:
        raise ValueError("vocab_size and dim must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
    C = np.zeros((vocab_size, dim))
    return EmbeddingModel(W=W, C=C)


def log_sigmoid(x):
    """Numerically stable ``log(sigmoid(x))``."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def pair_loss(w_vec, c_vec, neg_vecs) -> float:
    w_vec = np.asarray(w_vec, dtype=np.float64)
    c_vec = np.asarray(c_vec, dtype=np.float64)
    neg = np.asarray(neg_vecs, dtype=np.float64).reshape(-1, w_vec.shape[0]) if len(neg_vecs) else np.empty((0, w_vec.shape[0]))
    if c_vec.shape != w_vec.shape or neg.shape[1] != w_vec.shape[0]:
        raise ValueError("dimension mismatch")
    return float(-log_sigmoid(w_vec @ c_vec) - log_sigmoid(-(neg @ w_vec)).sum())


def pair_gradients(w_vec, c_vec, neg_vecs):
    """Loss and its gradients with respect to ``w``, ``c`` and each negative row."""
    w = np.asarray(w_vec, dtype=np.float64)
    c = np.asarray(c_vec, dtype=np.float64)
    neg = np.asarray(neg_vecs, dtype=np.float64).reshape(-1, w.shape[0])
    loss = pair_loss(w, c, neg)
    g_pos = _sigmoid(w @ c) - 1.0
    g_neg = _sigmoid(neg @ w)
    grad_w = g_pos * c + g_neg @ neg
    grad_c = g_pos * w
    grad_neg = g_neg[:, None] * w[None, :]
    return loss, grad_w, grad_c, grad_neg


def _sigmoid(x):
    return np.exp(log_sigmoid(x))


def sgd_update(model: EmbeddingModel, center: int, context: int, negatives: Sequence[int], lr: float) -> float:
    """One SGD step on a single pair; returns the pre-update loss.

    All gradients are taken at the current parameters, then applied; repeated
    negatives accumulate.
    """
    W, C = model.W, model.C
    negatives = np.asarray(negatives, dtype=np.int64)
    loss, grad_w, grad_c, grad_neg = pair_gradients(W[center], C[context], C[negatives])
    C[context] -= lr * grad_c
    np.add.at(C, negatives, -lr * grad_neg)
    W[center] -= lr * grad_w
    return loss


def _flatten(sessions: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.fromiter((len(s) for s in sessions), dtype=np.int64, count=len(sessions))
    offsets = np.zeros(len(sessions) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.concatenate(sessions).astype(np.int32) if sessions else np.zeros(0, np.int32)
    return np.ascontiguousarray(tokens), offsets


def _shard_bounds(offsets: np.ndarray, n_shards: int) -> np.ndarray:
    """Contiguous session ranges with roughly equal token counts."""
    n_sessions = len(offsets) - 1
    n_shards = max(1, min(n_shards, n_sessions))
    targets = offsets[-1] * np.arange(1, n_shards) / n_shards
    cuts = np.searchsorted(offsets, targets, side="left")
    bounds = np.concatenate([[0], cuts, [n_sessions]]).astype(np.int64)
    return np.maximum.accumulate(bounds)


def _stream_states(seed: int, n_shards: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(2 * n_shards, dtype=np.uint64).reshape(n_shards, 2).copy()


def train(
    split: SplitCorpus | Sequence[np.ndarray],
    vocab: Vocabulary,
    hp: Hyperparameters | None = None,
    side: "SideInfoMap | None" = None,
    backend: str | None = None,
    trace: list | None = None,
) -> tuple[EmbeddingModel, TrainReport]:
    """Train item embeddings on the training prefixes of ``split``.

    Each epoch re-subsamples every session, draws a window radius in
    ``1..window`` per center and applies one SGD step per (center, context)
    pair.  With ``threads == 1`` the result is fully determined by ``seed``.
    ``trace`` collects generated pairs (pure-Python backend only).
    """
    hp = hp or Hyperparameters()
    sessions = split.train_sessions if isinstance(split, SplitCorpus) else list(split)
    if not sessions or sum(len(s) for s in sessions) == 0:
        raise ValueError("no training sessions")
    if vocab.size < 2:
        raise ValueError("need at least two items to draw negatives")
    kern = get_kernels(backend)
    if trace is not None and kern.NAME != "python":
        raise ValueError("pair tracing is only supported by the python backend")

    tokens, offsets = _flatten(sessions)
    keep_prob = np.ascontiguousarray(SubsampleFilter.from_vocab(vocab, hp.subsample).keep_prob)
    cum = np.ascontiguousarray(build_negative_table(vocab, hp.alpha).cumulative)

    n_meta = side.n_meta if side is not None else 0
    model = init_model(vocab.size + n_meta, hp.dim, hp.seed)
    model.tokens = tuple(vocab.tokens)
    model.n_items = vocab.size
    model.hyperparameters = hp
    meta_of = side.meta_of.astype(np.int32) if side is not None else np.zeros(0, np.int32)
    meta_weight = side.weight if side is not None else 0.0

    bounds = _shard_bounds(offsets, hp.threads)
    states = _stream_states(hp.seed, len(bounds) - 1)
    total_centers = max(1.0, hp.n_epochs * float(keep_prob[tokens].sum()))

    report = TrainReport(backend=kern.NAME, final_lr=hp.lr0)
    centers_done = 0
    start = time.perf_counter()
    kwargs = {"trace": trace} if trace is not None else {}
    for epoch in range(hp.n_epochs):
        stats = kern.train_epoch(
            tokens, offsets, keep_prob, cum, model.W, model.C, meta_of, float(meta_weight),
            hp.window, hp.negatives, hp.lr0, hp.lr_min, total_centers, centers_done, states, bounds, **kwargs,
        )
        centers_done += stats["centers"]
        report.centers += stats["centers"]
        report.meta_pairs += stats["meta_pairs"]
        if stats["pairs"] == 0:
            warnings.warn(f"epoch {epoch + 1}: no training pairs after subsampling; epoch skipped", RuntimeWarning)
            report.epoch_loss.append(None)
            continue
        report.pairs += stats["pairs"]
        report.final_lr = stats["lr"]
        report.epoch_loss.append(stats["loss"] / stats["pairs"])
        logger.debug("epoch %d: loss %.4f over %d pairs", epoch + 1, report.epoch_loss[-1], stats["pairs"])
    report.wall_time = time.perf_counter() - start
    return model, report


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


def save_model(model: EmbeddingModel, path) -> None:
    """Binary format: ``SEQ2VEC1`` header, key=value lines (hyperparameters
    prefixed ``hp.``), blank line, one token per line, then little-endian
    float32 item rows."""
    W = model.item_vectors
    tokens = model.tokens or tuple(str(i) for i in range(W.shape[0]))
    if len(tokens) != W.shape[0]:
        raise ValueError("token count does not match the number of item rows")
    header = [f"vocab_size={W.shape[0]}", f"dim={W.shape[1]}"]
    if model.hyperparameters is not None:
        header += [f"hp.{k}={v!r}" for k, v in model.hyperparameters.to_dict().items()]
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(("\n".join(header) + "\n\n").encode("utf-8"))
        fh.write(("\n".join(tokens) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(W, dtype="<f4").tobytes())


def load_model(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n") != MAGIC:
            raise ValueError(f"{path}: not a SEQ2VEC1 model file")
        meta: dict[str, str] = {}
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            line = line.decode("utf-8").rstrip("\n")
            if not line:
                break
            key, _, value = line.partition("=")
            meta[key] = value
        n, d = int(meta.pop("vocab_size")), int(meta.pop("dim"))
        tokens = tuple(fh.readline().decode("utf-8").rstrip("\n") for _ in range(n))
        data = fh.read()
    if len(data) != 4 * n * d:
        raise ValueError(f"{path}: expected {n * d} float32 values, found {len(data) // 4}")
    W = np.frombuffer(data, dtype="<f4").reshape(n, d).astype(np.float64)
    hp_fields = {k[3:]: _parse_value(v) for k, v in meta.items() if k.startswith("hp.")}
    hp = Hyperparameters.from_dict(hp_fields) if hp_fields else None
    return EmbeddingModel(W=W, C=None, tokens=tokens, n_items=n, hyperparameters=hp)


def _parse_value(text: str):
    if text == "None":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def save_text(model: EmbeddingModel, path) -> None:
    """word2vec text format: ``n d`` header, then ``token v1 ... vd`` per line."""
    W = model.item_vectors
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{W.shape[0]} {W.shape[1]}\n")
        for tok, row in zip(model.tokens, W):
            fh.write(tok + " " + " ".join(f"{x:.8g}" for x in row) + "\n")


def load_text(path) -> EmbeddingModel:
    with open(path, encoding="utf-8") as fh:
        n, d = map(int, fh.readline().split())
        tokens, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise ValueError(f"{path}: expected {d} values for {parts[0]!r}")
            tokens.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(tokens) != n:
        raise ValueError(f"{path}: header says {n} rows, found {len(tokens)}")
    return EmbeddingModel(W=np.array(rows, dtype=np.float64).reshape(n, d), C=None, tokens=tuple(tokens))
