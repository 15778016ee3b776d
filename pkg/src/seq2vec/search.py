"""Resumable hyperparameter grid search.

A grid is a flat mapping from dimension name to a list of values (varied)
or a scalar (held fixed).  Trials are appended to a JSONL file as they
finish; rerunning with ``resume=True`` skips every configuration already
recorded.  Selection uses validation HR@10 only.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import multiprocessing as mp
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from seq2vec.corpus import SplitCorpus, Vocabulary
from seq2vec.evaluation import evaluate
from seq2vec.sgns import Hyperparameters, train

logger = logging.getLogger(__name__)

# grid key -> Hyperparameters field
DIMENSIONS = {
    "epochs": "n_epochs",
    "window": "window",
    "subsample": "subsample",
    "alpha": "alpha",
    "dim": "dim",
    "negatives": "negatives",
    "lr": "lr0",
}
PRESETS = ("desk", "core-4", "full")
PRIMARY_METRIC = "HR@10"


@dataclass
class GridSpec:
    """Values to sweep per dimension plus fixed values for the rest.

    ``grid`` keeps declaration order; the first dimension varies slowest.
    """

    grid: dict[str, list]
    fixed: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.grid:
            raise ValueError("grid spec has no dimensions to sweep")
        for key in list(self.grid) + list(self.fixed):
            if key not in DIMENSIONS:
                raise ValueError(f"unknown grid dimension {key!r}; expected one of {sorted(DIMENSIONS)}")
        for key, values in self.grid.items():
            if not values:
                raise ValueError(f"dimension {key!r} has no values")
            if len(set(values)) != len(values):
                raise ValueError(f"dimension {key!r} has duplicate values")
            for v in values:
                _check_value(key, v)
        for key, v in self.fixed.items():
            _check_value(key, v)

    @property
    def size(self) -> int:
        return int(np.prod([len(v) for v in self.grid.values()], dtype=object))

    @classmethod
    def from_mapping(cls, data: dict) -> "GridSpec":
        grid, fixed = {}, {}
        for key, value in data.items():
            if isinstance(value, (list, tuple)):
                grid[key] = list(value)
            else:
                fixed[key] = value
        return cls(grid, fixed)

    @classmethod
    def load(cls, path: str | Path) -> "GridSpec":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: grid file must be a mapping of dimension -> values")
        return cls.from_mapping(data)

    @classmethod
    def preset(cls, name: str) -> "GridSpec":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
        text = resources.files("seq2vec").joinpath(f"presets/{name}.yaml").read_text(encoding="utf-8")
        return cls.from_mapping(yaml.safe_load(text))


def _check_value(key: str, value) -> None:
    if key == "alpha":
        if not np.isfinite(value):
            raise ValueError("alpha must be finite")
    elif key in ("epochs", "window", "dim", "negatives"):
        if int(value) != value or value < 1:
            raise ValueError(f"{key} must be a positive integer, got {value!r}")
    elif not value > 0:
        raise ValueError(f"{key} must be positive, got {value!r}")


def enumerate_grid(spec: GridSpec, base: Hyperparameters | None = None) -> list[Hyperparameters]:
    """Cartesian product of the grid, first declared dimension slowest."""
    base = base or Hyperparameters()
    fixed = {DIMENSIONS[k]: v for k, v in spec.fixed.items()}
    base = base.replace(**fixed) if fixed else base
    keys = [DIMENSIONS[k] for k in spec.grid]
    return [base.replace(**dict(zip(keys, combo))) for combo in itertools.product(*spec.grid.values())]


def trial_key(hp: Hyperparameters) -> str:
    return json.dumps(hp.to_dict(), sort_keys=True)


@dataclass
class TrialResult:
    trial: int
    hyperparameters: dict
    status: str
    validation: dict | None = None
    test: dict | None = None
    seed: int = 0
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "TrialResult":
        return cls(**{f.name: data.get(f.name) for f in dataclasses.fields(cls) if f.name in data})

    @property
    def hp(self) -> Hyperparameters:
        return Hyperparameters.from_dict(self.hyperparameters)

    def score(self, metric: str = PRIMARY_METRIC, split: str = "validation") -> float | None:
        block = getattr(self, split)
        return None if block is None else block.get(metric)


def read_results(path: str | Path) -> list[TrialResult]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(TrialResult.from_dict(json.loads(line)))
            except json.JSONDecodeError:
                # a line cut short by a kill; the trial will be rerun
                logger.warning("%s:%d: ignoring truncated record", path, lineno)
    return out


# worker state, installed once per process
_WORK: dict[str, Any] = {}


def _init_worker(split, vocab, pairs, K, side):
    _WORK.update(split=split, vocab=vocab, pairs=pairs, K=K, side=side)


def _run_trial(index: int, hp: Hyperparameters) -> tuple[TrialResult, float]:
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model, _ = train(_WORK["split"], _WORK["vocab"], hp, side=_WORK["side"])
        hr, ndcg = evaluate(model, _WORK["pairs"], _WORK["K"])
        K = _WORK["K"]
        result = TrialResult(index, hp.to_dict(), "done", {f"HR@{K}": hr, f"NDCG@{K}": ndcg}, seed=hp.seed)
    except Exception as exc:  # a failed trial must not abort the sweep
        result = TrialResult(index, hp.to_dict(), "failed", seed=hp.seed, error=f"{type(exc).__name__}: {exc}")
    return result, time.perf_counter() - start


def run_search(
    spec: GridSpec,
    split: SplitCorpus,
    vocab: Vocabulary,
    validation_pairs: np.ndarray,
    results_path: str | Path,
    base: Hyperparameters | None = None,
    budget: int | None = None,
    resume: bool = False,
    workers: int = 1,
    K: int = 10,
    side=None,
) -> list[TrialResult]:
    """Run pending trials and append each to ``results_path`` as it finishes.

    Returns all records in the file afterwards.  ``budget`` caps the number
    of trials executed by this call.  Per-trial wall times go to a
    ``.timing.jsonl`` sidecar so the results file stays reproducible.
    """
    results_path = Path(results_path)
    timing_path = results_path.with_suffix(".timing.jsonl")
    existing = read_results(results_path)
    if existing and not resume:
        raise FileExistsError(f"{results_path} already has {len(existing)} trials; pass resume=True to continue")
    configs = enumerate_grid(spec, base)
    done = {trial_key(r.hp) for r in existing}
    pending = [(i, hp) for i, hp in enumerate(configs) if trial_key(hp) not in done]
    if budget is not None:
        pending = pending[: max(0, budget)]
    logger.info("grid: %d configurations, %d recorded, %d to run", len(configs), len(done), len(pending))
    if pending:
        results_path.parent.mkdir(parents=True, exist_ok=True)
        _sweep(pending, split, vocab, validation_pairs, K, side, workers, results_path, timing_path)
    return read_results(results_path)


def _terminate_last_line(path: Path) -> None:
    # a killed run can leave a partial record; keep new records on their own lines
    if path.exists() and path.stat().st_size:
        with open(path, "rb+") as fh:
            fh.seek(-1, 2)
            if fh.read(1) != b"\n":
                fh.write(b"\n")


def _sweep(pending, split, vocab, pairs, K, side, workers, results_path, timing_path):
    _terminate_last_line(results_path)
    with open(results_path, "a", encoding="utf-8") as out, open(timing_path, "a", encoding="utf-8") as timing:

        def record(result: TrialResult, seconds: float) -> None:
            out.write(result.to_json() + "\n")
            out.flush()
            timing.write(json.dumps({"trial": result.trial, "wall_time": round(seconds, 4)}) + "\n")
            timing.flush()

        if workers <= 1:
            _init_worker(split, vocab, pairs, K, side)
            for index, hp in pending:
                record(*_run_trial(index, hp))
            return
        ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
        with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker,
                                 initargs=(split, vocab, pairs, K, side)) as pool:
            futures = [pool.submit(_run_trial, index, hp) for index, hp in pending]
            for fut in as_completed(futures):
                record(*fut.result())


def select_best(results: Sequence[TrialResult], metric: str = PRIMARY_METRIC) -> TrialResult:
    """Best successful trial by validation ``metric``.

    Ties go to fewer epochs, then the smaller window, then grid order.
    """
    ok = [(pos, r) for pos, r in enumerate(results) if r.status == "done" and r.score(metric) is not None]
    if not ok:
        raise ValueError("no successful trials")

    def key(item):
        pos, r = item
        hp = r.hyperparameters
        order = r.trial if r.trial is not None else pos
        return (-r.score(metric), hp["n_epochs"], hp["window"], order)

    return min(ok, key=key)[1]


def alpha_profile(results: Sequence[TrialResult], metric: str = PRIMARY_METRIC) -> list[tuple[float, float]]:
    """Best validation score for each alpha value, ordered by alpha."""
    best: dict[float, float] = {}
    seen: set[float] = set()
    for r in results:
        alpha = float(r.hyperparameters["alpha"])
        seen.add(alpha)
        s = r.score(metric) if r.status == "done" else None
        if s is not None and (alpha not in best or s > best[alpha]):
            best[alpha] = s
    for alpha in sorted(seen - set(best)):
        warnings.warn(f"all trials failed for alpha={alpha}; omitted from profile", RuntimeWarning)
    if len(best) < 2:
        raise ValueError("alpha profile needs successful trials for at least two alpha values")
    return sorted(best.items())


def write_alpha_profile(profile: Iterable[tuple[float, float]], path: str | Path, metric: str = PRIMARY_METRIC) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"alpha,best_{metric}\n")
        for alpha, score in profile:
            fh.write(f"{alpha!r},{score!r}\n")


# ---------------------------------------------------------------------------
# results-table comparison
# ---------------------------------------------------------------------------

ROW_LABELS = {
    "out_of_the_box": "Out-of-the-box SGNS",
    "optimized": "Optimized SGNS (alpha fixed at 0.75)",
    "fully_optimized": "Fully optimized SGNS",
}
_COMPARED = ("window", "n_epochs", "subsample", "alpha", "dim", "negatives", "lr0")


def comparison_rows(results: Sequence[TrialResult], default: Hyperparameters | None = None,
                    metric: str = PRIMARY_METRIC) -> dict[str, TrialResult | None]:
    """Default-config row, best with alpha = 0.75, and the global best."""
    default = default or Hyperparameters()
    done = [r for r in results if r.status == "done"]
    want = {k: getattr(default, k) for k in _COMPARED}
    oob = next((r for r in done if all(np.isclose(r.hyperparameters[k], v) for k, v in want.items())), None)
    fixed_alpha = [r for r in done if np.isclose(r.hyperparameters["alpha"], default.alpha)]
    return {
        "out_of_the_box": oob,
        "optimized": select_best(fixed_alpha, metric) if fixed_alpha else None,
        "fully_optimized": select_best(done, metric) if done else None,
    }


def env_workers(default: int = 1) -> int:
    value = os.environ.get("SEQ2VEC_WORKERS")
    return int(value) if value else default
