import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seq2vec._backend import available
from seq2vec.corpus import build_vocabulary, split_nep
from seq2vec.sgns import (
    MAGIC,
    EmbeddingModel,
    Hyperparameters,
    init_model,
    load_model,
    load_text,
    log_sigmoid,
    pair_gradients,
    pair_loss,
    save_model,
    save_text,
    sgd_update,
    train,
)
from seq2vec.sgns import _shard_bounds


class TestHyperparameters:
    def test_defaults(self):
        hp = Hyperparameters()
        assert (hp.window, hp.n_epochs, hp.subsample, hp.alpha) == (5, 5, 1e-3, 0.75)
        assert (hp.dim, hp.negatives, hp.lr0) == (50, 5, 0.025)
        assert hp.lr_min == pytest.approx(0.025e-4)

    @pytest.mark.parametrize(
        "bad",
        [{"n_epochs": 0}, {"window": 0}, {"dim": 0}, {"negatives": 0}, {"threads": 0}, {"subsample": 0.0},
         {"alpha": float("inf")}, {"lr0": 0.0}, {"lr_min": 0.1}, {"window": 2.5}],
    )
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            Hyperparameters(**bad)

    def test_negative_alpha_allowed(self):
        assert Hyperparameters(alpha=-1.4).alpha == -1.4

    def test_replace_rescales_lr_min(self):
        hp = Hyperparameters().replace(lr0=0.25)
        assert hp.lr_min == pytest.approx(0.25e-4)
        assert Hyperparameters().replace(lr0=0.25, lr_min=1e-3).lr_min == 1e-3

    def test_dict_roundtrip(self):
        hp = Hyperparameters(window=3, alpha=-0.5, seed=4)
        assert Hyperparameters.from_dict(hp.to_dict()) == hp
        with pytest.raises(ValueError, match="unknown"):
            Hyperparameters.from_dict({"epochs": 3})


class TestInit:
    def test_bounds(self):
        m = init_model(40, 50, seed=1)
        assert np.abs(m.W).max() <= 0.01
        assert not m.C.any()

    def test_first_step_sigmoid_half(self):
        m = init_model(5, 8)
        assert np.all(1 / (1 + np.exp(-(m.W @ m.C.T))) == 0.5)

    def test_deterministic(self):
        assert np.array_equal(init_model(10, 4, seed=3).W, init_model(10, 4, seed=3).W)
        assert not np.array_equal(init_model(10, 4, seed=3).W, init_model(10, 4, seed=4).W)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            init_model(0, 4)


class TestLoss:
    def test_zero_vectors(self):
        z = np.zeros(4)
        assert pair_loss(z, z, [z]) == pytest.approx(2 * math.log(2), abs=1e-12)
        assert pair_loss(z, z, [z]) == pytest.approx(1.386294, abs=1e-6)

    def test_confident_positive(self):
        # log(1 + e^-20) to 40 digits: 2.061153620314380703e-9
        w = np.array([4.0, 0.0])
        c = np.array([5.0, 0.0])
        assert pair_loss(w, c, []) == pytest.approx(2.061153620314380703e-9, rel=1e-12)

    def test_no_overflow(self):
        w = np.array([700.0])
        assert 0.0 <= pair_loss(w, np.array([1.0]), []) < 1e-300
        assert pair_loss(w, np.array([-1.0]), []) == pytest.approx(700.0)
        assert pair_loss(w, np.array([1.0]), [np.array([1.0])]) == pytest.approx(700.0)
        assert np.isfinite(log_sigmoid(np.array([-800.0, 800.0]))).all()

    def test_additive_negatives(self):
        rng = np.random.default_rng(0)
        w, c, n = rng.normal(size=(3, 6))
        pos = pair_loss(w, c, [])
        single = pair_loss(w, c, [n]) - pos
        assert pair_loss(w, c, [n, n]) == pytest.approx(pos + 2 * single, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pair_loss(np.zeros(3), np.zeros(4), [])
        with pytest.raises(ValueError):
            pair_loss(np.zeros(3), np.zeros(3), [np.zeros(4)])

    @given(st.integers(1, 8), st.integers(0, 4), st.integers(0, 10**6))
    def test_nonnegative_and_gradient_consistent(self, d, k, seed):
        rng = np.random.default_rng(seed)
        w, c = rng.normal(0, 2, (2, d))
        negs = rng.normal(0, 2, (k, d))
        loss, gw, gc, gn = pair_gradients(w, c, negs)
        assert loss >= 0
        assert loss == pytest.approx(pair_loss(w, c, negs))
        assert gn.shape == (k, d)
        # directional derivative along a random direction
        u = rng.normal(size=d)
        eps = 1e-6
        fd = (pair_loss(w + eps * u, c, negs) - pair_loss(w - eps * u, c, negs)) / (2 * eps)
        assert fd == pytest.approx(gw @ u, rel=1e-4, abs=1e-7)


class TestSgdUpdate:
    def test_zero_context_step(self):
        m = init_model(4, 3, seed=0)
        w0 = m.W[0].copy()
        loss = sgd_update(m, 0, 1, [2, 3], lr=0.1)
        assert loss == pytest.approx(3 * math.log(2))
        np.testing.assert_array_equal(m.W[0], w0)
        np.testing.assert_allclose(m.C[1], 0.1 * 0.5 * w0)
        np.testing.assert_allclose(m.C[2], -0.1 * 0.5 * w0)
        np.testing.assert_allclose(m.C[3], -0.1 * 0.5 * w0)

    def test_lr_zero_identity(self):
        m = init_model(4, 3, seed=0)
        m.C[:] = np.random.default_rng(1).normal(size=m.C.shape)
        W, C = m.W.copy(), m.C.copy()
        sgd_update(m, 0, 1, [2, 2, 3], lr=0.0)
        assert np.array_equal(m.W, W) and np.array_equal(m.C, C)

    def test_matches_gradient(self):
        rng = np.random.default_rng(3)
        m = EmbeddingModel(W=rng.normal(size=(5, 4)), C=rng.normal(size=(5, 4)))
        W, C = m.W.copy(), m.C.copy()
        _, gw, gc, gn = pair_gradients(W[1], C[2], C[[3, 3, 4]])
        sgd_update(m, 1, 2, [3, 3, 4], lr=0.05)
        np.testing.assert_allclose(m.W[1], W[1] - 0.05 * gw)
        np.testing.assert_allclose(m.C[2], C[2] - 0.05 * gc)
        # duplicated negative accumulates both contributions
        np.testing.assert_allclose(m.C[3], C[3] - 0.05 * (gn[0] + gn[1]))
        np.testing.assert_allclose(m.C[4], C[4] - 0.05 * gn[2])

    def test_descends(self):
        rng = np.random.default_rng(7)
        m = EmbeddingModel(W=rng.normal(size=(4, 6)), C=rng.normal(size=(4, 6)))
        before = pair_loss(m.W[0], m.C[1], m.C[[2, 3]])
        sgd_update(m, 0, 1, [2, 3], lr=0.01)
        assert pair_loss(m.W[0], m.C[1], m.C[[2, 3]]) < before


def _corpus(seqs):
    vocab = build_vocabulary(seqs)
    return vocab, split_nep(seqs, vocab)


class TestTrain:
    def test_planted_bigram(self):
        seqs = [["a", "b", "a", "b"]] * 200 + [["f1"], ["f2"]] * 50 + [["x", "y"]] * 2
        vocab, split = _corpus(seqs)
        hp = Hyperparameters(window=1, n_epochs=50, subsample=1.0, dim=8, negatives=2, seed=0)
        model, _ = train(split, vocab, hp)
        a, b = vocab.index_of("a"), vocab.index_of("b")
        w = model.W[a]
        cos = model.C @ w / (np.linalg.norm(model.C, axis=1) * np.linalg.norm(w) + 1e-300)
        others = [i for i in range(vocab.size) if i not in (a, b)]
        assert cos[b] > cos[others].max()

    def test_loss_descent(self, tiny_corpus):
        vocab, split = tiny_corpus
        _, rep = train(split, vocab, Hyperparameters(n_epochs=10, dim=10, subsample=1.0, seed=1))
        assert rep.epoch_loss[9] < rep.epoch_loss[0]
        assert rep.pairs > 0

    def test_finite(self, tiny_corpus):
        vocab, split = tiny_corpus
        model, _ = train(split, vocab, Hyperparameters(n_epochs=20, lr0=0.25, alpha=-1.4, dim=10, subsample=1.0))
        assert model.is_finite()

    def test_reproducible(self, tiny_corpus):
        vocab, split = tiny_corpus
        hp = Hyperparameters(n_epochs=3, dim=8, seed=5, subsample=1.0)
        a, ra = train(split, vocab, hp)
        b, rb = train(split, vocab, hp)
        assert np.array_equal(a.W, b.W) and np.array_equal(a.C, b.C)
        assert ra.epoch_loss == rb.epoch_loss
        c, _ = train(split, vocab, hp.replace(seed=6))
        assert not np.array_equal(a.W, c.W)

    def test_single_epoch_pair_count(self, tiny_corpus):
        vocab, split = tiny_corpus
        _, rep = train(split, vocab, Hyperparameters(window=1, n_epochs=1, subsample=1.0, dim=4))
        assert rep.pairs == sum(2 * (len(s) - 1) for s in split.train_sessions)

    def test_lr_decays_to_floor(self, tiny_corpus):
        vocab, split = tiny_corpus
        hp = Hyperparameters(n_epochs=4, subsample=1.0, dim=4)
        _, rep = train(split, vocab, hp)
        assert hp.lr_min <= rep.final_lr < hp.lr0 * 0.05

    @pytest.mark.parametrize("threads", [2, 4])
    @pytest.mark.parametrize("backend", available())
    def test_threads(self, tiny_corpus, threads, backend):
        vocab, split = tiny_corpus
        model, rep = train(split, vocab, Hyperparameters(n_epochs=3, dim=8, threads=threads, subsample=0.05), backend=backend)
        assert model.is_finite()
        assert rep.pairs > 0

    @given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_window_legality(self, window, threads, seed):
        seqs = [[f"i{(s * 7 + k) % 11}" for k in range(2 + s % 9)] for s in range(30)]
        vocab, split = _corpus(seqs)
        trace = []
        hp = Hyperparameters(window=window, n_epochs=2, subsample=1.0, dim=4, seed=seed, threads=threads)
        train(split, vocab, hp, backend="python", trace=trace)
        assert trace
        for _, s, i, j, center, ctx in trace:
            assert 1 <= abs(i - j) <= window
            sess = split.train_sessions[s]
            assert center == sess[i] and ctx == sess[j]

    def test_window_one_adjacent_only(self, tiny_corpus):
        vocab, split = tiny_corpus
        trace = []
        train(split, vocab, Hyperparameters(window=1, n_epochs=1, dim=4, subsample=1.0), backend="python", trace=trace)
        assert {abs(i - j) for _, _, i, j, _, _ in trace} == {1}

    def test_window_sizes_all_drawn(self):
        seqs = [[f"i{k}" for k in range(12)]] * 20
        vocab, split = _corpus(seqs)
        trace = []
        train(split, vocab, Hyperparameters(window=3, n_epochs=1, subsample=1.0, dim=4), backend="python", trace=trace)
        assert {abs(i - j) for _, _, i, j, _, _ in trace} == {1, 2, 3}

    def test_trace_needs_python_backend(self, tiny_corpus):
        if "cython" not in available():
            pytest.skip("compiled kernels not built")
        vocab, split = tiny_corpus
        with pytest.raises(ValueError, match="python backend"):
            train(split, vocab, Hyperparameters(n_epochs=1), backend="cython", trace=[])

    def test_empty_epoch_warns(self):
        vocab, split = _corpus([["a"], ["b"], ["a", "b"]])
        with pytest.warns(RuntimeWarning, match="no training pairs"):
            _, rep = train(split, vocab, Hyperparameters(n_epochs=2, dim=4))
        assert rep.epoch_loss == [None, None]
        assert rep.pairs == 0

    def test_rejects_empty(self):
        vocab, _ = _corpus([["a", "b"]])
        with pytest.raises(ValueError):
            train([], vocab)
        with pytest.raises(ValueError):
            train([np.array([0], dtype=np.int32)], build_vocabulary([["a"]]))

    def test_accepts_session_list(self):
        vocab, split = _corpus([["a", "b", "c"]] * 5)
        model, _ = train(split.train_sessions, vocab, Hyperparameters(n_epochs=1, dim=4, subsample=1.0))
        assert model.W.shape == (vocab.size, 4)


class TestShards:
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=40), st.integers(1, 8))
    def test_bounds_partition_sessions(self, lengths, n):
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        b = _shard_bounds(offsets, n)
        assert b[0] == 0 and b[-1] == len(lengths)
        assert np.all(np.diff(b) >= 0)
        assert len(b) - 1 == min(n, len(lengths))


class TestModelFiles:
    def _model(self):
        m = init_model(6, 3, seed=2)
        m.tokens = tuple(f"item{i}" for i in range(6))
        m.hyperparameters = Hyperparameters(window=3, alpha=-0.5)
        return m

    def test_binary_roundtrip(self, tmp_path):
        m = self._model()
        save_model(m, tmp_path / "m.s2v")
        raw = (tmp_path / "m.s2v").read_bytes()
        assert raw.startswith(MAGIC + b"\n")
        assert b"vocab_size=6\n" in raw and b"\ndim=3\n" in raw and b"hp.window=3\n" in raw
        back = load_model(tmp_path / "m.s2v")
        assert back.tokens == m.tokens
        np.testing.assert_array_equal(back.W, m.W.astype(np.float32))
        assert back.hyperparameters == m.hyperparameters

    def test_meta_rows_not_saved(self, tmp_path):
        m = self._model()
        m.W = np.vstack([m.W, np.ones((2, 3))])
        m.n_items = 6
        save_model(m, tmp_path / "m.s2v")
        assert load_model(tmp_path / "m.s2v").W.shape == (6, 3)

    def test_binary_rejects_garbage(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOTAMODEL\n")
        with pytest.raises(ValueError, match="not a SEQ2VEC1"):
            load_model(tmp_path / "x")

    def test_binary_truncated(self, tmp_path):
        save_model(self._model(), tmp_path / "m.s2v")
        raw = (tmp_path / "m.s2v").read_bytes()
        (tmp_path / "t.s2v").write_bytes(raw[:-5])
        with pytest.raises(ValueError, match="float32"):
            load_model(tmp_path / "t.s2v")

    def test_text_roundtrip(self, tmp_path):
        m = self._model()
        save_text(m, tmp_path / "m.txt")
        lines = (tmp_path / "m.txt").read_text().splitlines()
        assert lines[0] == "6 3"
        assert lines[1].split()[0] == "item0"
        back = load_text(tmp_path / "m.txt")
        np.testing.assert_allclose(back.W, m.W, rtol=1e-7)
        assert back.tokens == m.tokens
