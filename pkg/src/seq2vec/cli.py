"""Command-line entry point: ``seq2vec {train,eval,grid,report,histogram}``.

Settings come from an optional YAML config file (``--config``) and are
overridden by flags.  ``--toy`` swaps in the small bundled corpus.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from seq2vec import corpus, evaluation, search, sgns
from seq2vec._backend import BACKEND
from seq2vec.sideinfo import load_side_info

logger = logging.getLogger("seq2vec")

HP_FLAGS = {  # flag dest -> Hyperparameters field
    "window": "window",
    "epochs": "n_epochs",
    "subsample": "subsample",
    "alpha": "alpha",
    "dim": "dim",
    "negatives": "negatives",
    "lr": "lr0",
    "seed": "seed",
    "threads": "threads",
}


class UsageError(Exception):
    """Bad invocation; exits with status 2."""


def toy_path(name: str = "toy_sessions.txt") -> Path:
    return Path(str(resources.files("seq2vec").joinpath(f"data/{name}")))


@dataclass
class RunConfig:
    dataset: str | None = None
    format: str = "lines"
    columns: dict | None = None
    delimiter: str = ","
    min_count: int = 1
    meta: str | None = None
    meta_weight: float = 1.0
    hyperparameters: dict = field(default_factory=dict)
    preset: str | None = None
    grid: str | None = None
    eval_pairs: int = 10_000
    folds: int = 1
    K: int = 10
    out: str = "runs"
    seed: int = 0
    workers: int = 1

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def hp(self) -> sgns.Hyperparameters:
        values = {search.DIMENSIONS.get(k, k): v for k, v in self.hyperparameters.items()}
        values.setdefault("seed", self.seed)
        values.setdefault("threads", int(os.environ.get("SEQ2VEC_THREADS", "1")))
        return sgns.Hyperparameters.from_dict(values)


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    for name in ("format", "min_count", "meta", "meta_weight", "preset", "grid", "eval_pairs", "folds", "K", "out",
                 "seed", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "dataset", None):
        cfg.dataset = args.dataset
    if getattr(args, "toy", False):
        cfg.dataset = str(toy_path())
    if cfg.meta == "toy":
        cfg.meta = str(toy_path("toy_artists.tsv"))
    for dest, name in HP_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg.hyperparameters[name] = value
    return cfg


def _load_data(cfg: RunConfig):
    if not cfg.dataset:
        raise UsageError("no dataset given (positional DATASET, --toy, or 'dataset' in the config file)")
    if not Path(cfg.dataset).is_file():
        raise UsageError(f"dataset not found: {cfg.dataset}")
    sequences = corpus.load_sessions(cfg.dataset, cfg.format, cfg.columns, cfg.delimiter)
    vocab = corpus.build_vocabulary(sequences, cfg.min_count)
    split = corpus.split_nep(sequences, vocab)
    logger.info("%d sessions, %d items, %d holdout pairs", len(sequences), vocab.size, len(split.holdout_pairs))
    return vocab, split


def _load_side(cfg: RunConfig, vocab):
    if not cfg.meta:
        return None
    if not Path(cfg.meta).is_file():
        raise UsageError(f"side-information file not found: {cfg.meta}")
    side = load_side_info(cfg.meta, vocab, cfg.meta_weight)
    logger.info("side information: %d meta tokens (weight %g), %d rows skipped", side.n_meta, side.weight,
                side.skipped_rows)
    return side


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(cfg: RunConfig, args) -> int:
    vocab, split = _load_data(cfg)
    side = _load_side(cfg, vocab)
    hp = cfg.hp()
    model, report = sgns.train(split, vocab, hp, side=side)
    out = _out_dir(cfg)
    sgns.save_model(model, out / "model.s2v")
    if args.text:
        sgns.save_text(model, out / "model.txt")
    payload = {
        "hyperparameters": hp.to_dict(),
        "vocab_size": vocab.size,
        "meta_vocab_size": side.n_meta if side else 0,
        "train": report.to_dict(),
    }
    _write_json(out / "train_report.json", payload)
    if side is not None:
        print(f"side information: {side.n_meta} meta tokens, {side.skipped_rows} rows skipped")
    print(f"trained {vocab.size} items in {report.wall_time:.2f}s ({report.pairs} pairs, {report.backend} kernels); "
          f"model written to {out / 'model.s2v'}")
    return 0


def _model_pairs(model: sgns.EmbeddingModel, vocab: corpus.Vocabulary, pairs: np.ndarray) -> np.ndarray:
    """Re-index dataset pairs into the model's vocabulary, dropping unknown items."""
    index = {tok: i for i, tok in enumerate(model.tokens)}
    mapped = [(index.get(vocab.token_of(q)), index.get(vocab.token_of(t))) for q, t in pairs.tolist()]
    kept = [(q, t) for q, t in mapped if q is not None and t is not None]
    if len(kept) < len(mapped):
        logger.warning("%d evaluation pairs reference items missing from the model", len(mapped) - len(kept))
    return np.array(kept, dtype=np.int64).reshape(-1, 2)


def cmd_eval(cfg: RunConfig, args) -> int:
    vocab, split = _load_data(cfg)
    coldstart = args.slices == "coldstart"
    splits = [corpus.sample_eval_split(split, cfg.eval_pairs, cfg.seed + f) for f in range(cfg.folds)]
    if args.model:
        model = sgns.load_model(args.model)
        window = cfg.hyperparameters.get("window") or (model.hyperparameters.window if model.hyperparameters else 5)
        pairs = [_model_pairs(model, vocab, (s.test_pairs if args.on == "test" else s.validation_pairs))
                 for s in splits]
        if any(len(p) == 0 for p in pairs):
            raise UsageError("no evaluation pairs overlap the model vocabulary")
        # cold-start counts need training sessions in model index space
        if coldstart:
            index = {tok: i for i, tok in enumerate(model.tokens)}
            remap = np.array([index.get(t, -1) for t in vocab.tokens])
            split = corpus.SplitCorpus([remap[s][remap[s] >= 0] for s in split.train_sessions],
                                       split.holdout_pairs, split.pair_session)
        report = evaluation.evaluate_model(model, split, pairs, cfg.K, window if coldstart else None,
                                           args.similarity, args.on)
    else:
        side = _load_side(cfg, vocab)
        report = evaluation.run_folds(split, vocab, cfg.hp(), cfg.folds, cfg.eval_pairs, cfg.K, cfg.seed, args.on,
                                      side, coldstart, args.similarity)
    out = _out_dir(cfg)
    _write_json(out / "eval_report.json", report.to_dict())
    if args.csv:
        with open(out / "eval_folds.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["fold", "n_pairs", f"HR@{cfg.K}", f"NDCG@{cfg.K}"])
            for i, (n, h, g) in enumerate(zip(report.n_pairs, report.hr.folds, report.ndcg.folds)):
                w.writerow([i, n, repr(h), repr(g)])
    print(f"HR@{cfg.K} (x100): {evaluation.format_metric(report.hr, 100)}   "
          f"NDCG@{cfg.K}: {evaluation.format_metric(report.ndcg, 1, 3)}   ({report.n_folds} fold(s), {args.on})")
    for name, block in report.slices.items():
        hr = block.get(f"HR@{cfg.K}")
        text = evaluation.format_metric(evaluation.MetricSummary(**hr), 100) if hr else "n/a"
        print(f"  pair frequency {name}: HR@{cfg.K} (x100) {text}   pairs/fold {block['n_pairs']}")
    return 0


def _grid_spec(cfg: RunConfig) -> search.GridSpec:
    if cfg.grid:
        return search.GridSpec.load(cfg.grid)
    return search.GridSpec.preset(cfg.preset or "desk")


def cmd_grid(cfg: RunConfig, args) -> int:
    vocab, split = _load_data(cfg)
    side = _load_side(cfg, vocab)
    spec = _grid_spec(cfg)
    base = cfg.hp().replace(threads=1)
    ev = corpus.sample_eval_split(split, cfg.eval_pairs, cfg.seed)
    out = _out_dir(cfg)
    results_path = out / "results.jsonl"
    print(f"grid: {spec.size} configurations over {list(spec.grid)}")
    try:
        results = search.run_search(spec, split, vocab, ev.validation_pairs, results_path, base=base,
                                    budget=args.budget, resume=args.resume, workers=cfg.workers, K=cfg.K, side=side)
    except FileExistsError as exc:
        raise UsageError(f"{exc} (use --resume)") from None
    metric = f"HR@{cfg.K}"
    done = [r for r in results if r.status == "done"]
    print(f"{len(results)} trials recorded ({len(done)} succeeded)")
    if not done:
        return 1
    best = search.select_best(results, metric)
    model, _ = sgns.train(split, vocab, best.hp, side=side)
    hr, ndcg = evaluation.evaluate(model, ev.test_pairs, cfg.K)
    best = dataclasses.replace(best, test={metric: hr, f"NDCG@{cfg.K}": ndcg})
    _write_json(out / "best.json", dataclasses.asdict(best))
    print(f"best: {_hp_label(best.hyperparameters)} validation {metric} {best.score(metric):.4f}, test {hr:.4f}")
    try:
        profile = search.alpha_profile(results, metric)
        search.write_alpha_profile(profile, out / "alpha_profile.csv", metric)
    except ValueError as exc:
        logger.warning("alpha profile skipped: %s", exc)
    return 0


def _hp_label(hp: dict) -> str:
    return f"(L={hp['window']}, n={hp['n_epochs']}, t={hp['subsample']:g}, alpha={hp['alpha']:g})"


def cmd_report(cfg: RunConfig, args) -> int:
    results = search.read_results(args.results)
    if not results:
        raise UsageError(f"no trial records in {args.results}")
    metric = f"HR@{cfg.K}"
    rows = search.comparison_rows(results, metric=metric)
    reevaluate = cfg.dataset is not None or getattr(args, "toy", False)
    if reevaluate:
        vocab, split = _load_data(cfg)
        side = _load_side(cfg, vocab)
    table = []
    for key, label in search.ROW_LABELS.items():
        row = rows[key]
        if row is None and key == "out_of_the_box" and reevaluate:
            hp = sgns.Hyperparameters(seed=cfg.seed)
        elif row is None:
            table.append((label, "-", "-", "-"))
            continue
        else:
            hp = row.hp
        if reevaluate:
            rep = evaluation.run_folds(split, vocab, hp, max(cfg.folds, 1), cfg.eval_pairs, cfg.K, cfg.seed,
                                       side=side)
            hr_text = evaluation.format_metric(rep.hr, 100)
            nd_text = evaluation.format_metric(rep.ndcg, 1, 3)
        else:
            hr_text = f"{row.score(metric) * 100:.2f}"
            nd_text = f"{row.score(f'NDCG@{cfg.K}'):.3f}"
        table.append((label, _hp_label(hp.to_dict()), hr_text, nd_text))
    source = f"test, {max(cfg.folds, 1)} fold(s)" if reevaluate else "validation"
    header = ("Model", "(L, n, t, alpha)", f"{metric} x100 ({source})", f"NDCG@{cfg.K}")
    widths = [max(len(str(r[i])) for r in [header] + table) for i in range(4)]
    for r in [header] + table:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows([header] + table)
    return 0


def cmd_histogram(cfg: RunConfig, args) -> int:
    vocab, _ = _load_data(cfg)
    rows = corpus.count_histogram(vocab)
    fh = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["rank", "log_count"])
        w.writerows((r, repr(c)) for r, c in rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("dataset", nargs="?", help="session file")
    p.add_argument("--toy", action="store_true", help="use the bundled synthetic corpus")
    p.add_argument("--format", choices=corpus.FORMATS)
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--meta", help="item<TAB>meta side-information file ('toy' for the bundled one)")
    p.add_argument("--meta-weight", type=float, dest="meta_weight")


def _hp_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--window", type=int, help="maximum window size L (default 5)")
    g.add_argument("--epochs", type=int, help="number of epochs (default 5)")
    g.add_argument("--subsample", type=float, help="subsampling threshold t (default 1e-3)")
    g.add_argument("--alpha", type=float, help="negative-sampling exponent (default 0.75)")
    g.add_argument("--dim", type=int, help="embedding size (default 50)")
    g.add_argument("--negatives", type=int, help="negatives per pair (default 5)")
    g.add_argument("--lr", type=float, help="initial learning rate (default 0.025)")
    g.add_argument("--threads", type=int, help="training threads (default $SEQ2VEC_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seq2vec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--config", help="YAML run configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    common.add_argument("--out", help="output directory (default runs/)")
    common.add_argument("--seed", type=int)
    common.add_argument("-K", type=int, dest="K", help="cutoff for HR@K / NDCG@K (default 10)")
    common.add_argument("--pairs", type=int, dest="eval_pairs", help="evaluation pairs per set (default 10000)")

    p = sub.add_parser("train", parents=[common], help="train one model")
    _data_args(p)
    _hp_args(p)
    p.add_argument("--text", action="store_true", help="also write word2vec text format")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="next-event prediction evaluation")
    _data_args(p)
    _hp_args(p)
    p.add_argument("--model", help="evaluate this model file instead of training per fold")
    p.add_argument("--folds", type=int)
    p.add_argument("--on", choices=("test", "validation"), default="test")
    p.add_argument("--slices", choices=("coldstart",))
    p.add_argument("--similarity", choices=evaluation.METRICS, default="cosine")
    p.add_argument("--csv", action="store_true", help="also write one CSV row per fold")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", parents=[common], help="hyperparameter grid search")
    _data_args(p)
    _hp_args(p)
    p.add_argument("--preset", choices=search.PRESETS)
    p.add_argument("--grid", help="YAML grid file (overrides --preset)")
    p.add_argument("--budget", type=int, help="run at most this many new trials")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, help="parallel trials (default $SEQ2VEC_WORKERS or 1)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", parents=[common], help="results-table comparison from grid results")
    p.add_argument("results", help="results.jsonl from `grid`")
    _data_args(p)
    p.add_argument("--folds", type=int, help="re-evaluate rows on test pairs over this many folds (needs dataset)")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("histogram", parents=[common], help="export rank / log-count pairs")
    _data_args(p)
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_histogram)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(RunConfig.load(args.config), args)
        if getattr(args, "workers", None) is None and args.command == "grid":
            cfg.workers = search.env_workers(cfg.workers)
        logger.debug("backend: %s", BACKEND)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"seq2vec: error: {exc}", file=sys.stderr)
        return 2
    except (corpus.CorpusError, ValueError, OSError) as exc:
        print(f"seq2vec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
