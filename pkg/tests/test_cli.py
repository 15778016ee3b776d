import csv
import json

import pytest
import yaml

from seq2vec import cli

FAST = ["--epochs", "1", "--dim", "8"]


@pytest.fixture
def run(capsys):
    def call(*argv):
        code = cli.main([*argv])
        out = capsys.readouterr()
        return code, out.out, out.err

    return call


class TestTrain:
    def test_writes_model_and_report(self, run, tmp_path, validate):
        code, out, _ = run("train", "--toy", "--out", str(tmp_path), *FAST, "--alpha", "-0.5", "--text")
        assert code == 0
        assert "model written" in out
        assert (tmp_path / "model.s2v").read_bytes().startswith(b"SEQ2VEC1")
        assert (tmp_path / "model.txt").exists()
        report = json.loads((tmp_path / "train_report.json").read_text())
        validate("train_report.schema.json", report)
        assert report["hyperparameters"]["alpha"] == -0.5
        assert report["meta_vocab_size"] == 0

    def test_meta(self, run, tmp_path, validate):
        code, out, _ = run("train", "--toy", "--meta", "toy", "--out", str(tmp_path), *FAST)
        assert code == 0
        assert "meta tokens" in out
        report = json.loads((tmp_path / "train_report.json").read_text())
        validate("train_report.schema.json", report)
        assert report["meta_vocab_size"] > 0
        assert report["train"]["meta_pairs"] > 0

    def test_missing_dataset(self, run, tmp_path):
        missing = tmp_path / "nope.txt"
        code, _, err = run("train", str(missing), "--out", str(tmp_path))
        assert code == 2
        assert str(missing) in err

    def test_no_dataset(self, run, tmp_path):
        code, _, err = run("train", "--out", str(tmp_path))
        assert code == 2 and "no dataset" in err

    def test_invalid_hyperparameter(self, run, tmp_path):
        code, _, err = run("train", "--toy", "--out", str(tmp_path), "--window", "0")
        assert code == 1 and "window" in err


class TestConfig:
    def test_yaml_config(self, run, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(yaml.safe_dump({"out": str(tmp_path / "o"),
                                       "hyperparameters": {"epochs": 1, "dim": 6, "alpha": 0.0}}))
        code, _, _ = run("--config", str(cfg), "train", "--toy", "--dim", "4")
        assert code == 0
        hp = json.loads((tmp_path / "o" / "train_report.json").read_text())["hyperparameters"]
        assert (hp["dim"], hp["n_epochs"], hp["alpha"]) == (4, 1, 0.0)

    def test_unknown_key(self, run, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("colour: blue\n")
        code, _, err = run("--config", str(cfg), "train", "--toy")
        assert code == 2 and "colour" in err


class TestEval:
    def test_trained_per_fold(self, run, tmp_path, validate):
        code, out, _ = run("eval", "--toy", "--out", str(tmp_path), *FAST, "--folds", "2", "--pairs", "50",
                           "--slices", "coldstart", "--csv")
        assert code == 0
        assert "HR@10 (x100)" in out and "±" in out
        report = json.loads((tmp_path / "eval_report.json").read_text())
        validate("eval_report.schema.json", report)
        assert report["folds"] == 2 and set(report["slices"]) == {"=0", "<3"}
        rows = list(csv.reader(open(tmp_path / "eval_folds.csv")))
        assert rows[0] == ["fold", "n_pairs", "HR@10", "NDCG@10"] and len(rows) == 3

    def test_saved_model(self, run, tmp_path, validate):
        assert run("train", "--toy", "--out", str(tmp_path), *FAST)[0] == 0
        code, out, _ = run("eval", "--toy", "--out", str(tmp_path / "e"), "--model", str(tmp_path / "model.s2v"),
                           "--pairs", "60", "--slices", "coldstart", "-K", "5")
        assert code == 0
        report = json.loads((tmp_path / "e" / "eval_report.json").read_text())
        validate("eval_report.schema.json", report)
        assert report["K"] == 5 and report["metrics"]["HR@5"]["ci95"] is None

    def test_validation_split(self, run, tmp_path):
        code, out, _ = run("eval", "--toy", "--out", str(tmp_path), *FAST, "--pairs", "30", "--on", "validation")
        assert code == 0 and "validation" in out


class TestGrid:
    def _grid(self, tmp_path):
        g = tmp_path / "grid.yaml"
        g.write_text(yaml.safe_dump({"window": [1, 3], "alpha": [-0.5, 0.75], "epochs": [1], "dim": [8]}))
        return g

    def test_budget_resume_and_report(self, run, tmp_path, validate):
        g, out_dir = self._grid(tmp_path), tmp_path / "g"
        base = ["grid", "--toy", "--grid", str(g), "--out", str(out_dir), "--pairs", "60"]
        code, out, _ = run(*base, "--budget", "2")
        assert code == 0 and "2 trials recorded" in out
        code, _, err = run(*base)
        assert code == 2 and "--resume" in err
        assert run(*base, "--resume")[0] == 0
        lines = (out_dir / "results.jsonl").read_text().splitlines()
        assert len(lines) == 4
        code, out, _ = run(*base, "--resume")
        assert code == 0 and "4 trials recorded" in out
        assert (out_dir / "results.jsonl").read_text().splitlines() == lines

        best = json.loads((out_dir / "best.json").read_text())
        validate("trial_result.schema.json", best)
        assert best["test"]["HR@10"] is not None
        profile = list(csv.reader(open(out_dir / "alpha_profile.csv")))
        assert [r[0] for r in profile] == ["alpha", "-0.5", "0.75"]

        code, out, _ = run("report", str(out_dir / "results.jsonl"), "--csv", str(tmp_path / "t.csv"))
        assert code == 0
        table = list(csv.reader(open(tmp_path / "t.csv")))
        assert len(table) == 4

    def test_report_reevaluates_on_test(self, run, tmp_path):
        g, out_dir = self._grid(tmp_path), tmp_path / "g"
        assert run("grid", "--toy", "--grid", str(g), "--out", str(out_dir), "--pairs", "40")[0] == 0
        code, out, _ = run("report", str(out_dir / "results.jsonl"), "--toy", "--folds", "2", "--pairs", "40")
        assert code == 0
        assert "test, 2 fold(s)" in out and "±" in out

    def test_report_empty(self, run, tmp_path):
        (tmp_path / "r.jsonl").write_text("")
        assert run("report", str(tmp_path / "r.jsonl"))[0] == 2


class TestHistogram:
    def test_stdout(self, run):
        code, out, _ = run("histogram", "--toy")
        rows = list(csv.reader(out.splitlines()))
        assert code == 0 and rows[0] == ["rank", "log_count"]
        counts = [float(c) for _, c in rows[1:]]
        assert counts == sorted(counts, reverse=True)
        assert [int(r) for r, _ in rows[1:]] == list(range(len(rows) - 1))

    def test_file(self, run, tmp_path):
        assert run("histogram", "--toy", "-o", str(tmp_path / "h.csv"))[0] == 0
        assert (tmp_path / "h.csv").read_text().startswith("rank,log_count")
