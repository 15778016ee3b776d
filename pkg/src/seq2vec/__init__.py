"""Item embeddings with skip-gram negative sampling, tuned for recommendation.

The negative-sampling exponent is a first-class hyperparameter (negative
values included), alongside window size, epochs and subsampling.  See
:mod:`seq2vec.sgns` for training, :mod:`seq2vec.evaluation` for
next-event prediction and :mod:`seq2vec.search` for grid sweeps.
"""
from seq2vec._backend import BACKEND
from seq2vec.corpus import (
    EvalSplit,
    SplitCorpus,
    Vocabulary,
    build_vocabulary,
    count_histogram,
    load_sessions,
    sample_eval_split,
    split_nep,
)
from seq2vec.evaluation import EvalReport, evaluate, nearest_neighbors, run_folds
from seq2vec.sampling import build_negative_table, discard_probability, draw_negatives
from seq2vec.sgns import EmbeddingModel, Hyperparameters, TrainReport, load_model, save_model, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EmbeddingModel",
    "EvalReport",
    "EvalSplit",
    "Hyperparameters",
    "SplitCorpus",
    "TrainReport",
    "Vocabulary",
    "build_negative_table",
    "build_vocabulary",
    "count_histogram",
    "discard_probability",
    "draw_negatives",
    "evaluate",
    "load_model",
    "load_sessions",
    "nearest_neighbors",
    "run_folds",
    "sample_eval_split",
    "save_model",
    "split_nep",
    "train",
]
