import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from adaptmt.errors import CheckpointError, NumericError
from adaptmt.model import DecodeOptions, NmtModel
from adaptmt.textpipe import EOS, RESERVED_TOKENS, Vocabulary


def make_vocab(size):
    return Vocabulary.from_tokens(list(RESERVED_TOKENS) + [f"t{i}" for i in range(size - 4)])


@pytest.fixture(scope="module")
def small_model():
    model = NmtModel(make_vocab(20), make_vocab(20), embed_dim=12, hidden_dim=16, seed=7)
    return model.init_params()


class TestForward:
    def test_logit_shape(self, small_model):
        logits = small_model.forward([4, 5, 6], [7, 8, 9, 10, 11])
        assert logits.shape == (5, 20)

    def test_all_zero_output_projection_gives_uniform(self):
        model = NmtModel(make_vocab(16), make_vocab(16), embed_dim=8, hidden_dim=8, seed=0)
        model.init_params()
        model.params_["out.W"].data[...] = 0.0
        model.params_["out.b"].data[...] = 0.0
        logits = model.forward([4, 5], [6, 7, 8])
        assert np.allclose(logits.data, logits.data[0, 0])
        loss, _ = model.loss_and_grad([4, 5], [6, 7, 8])
        assert loss == pytest.approx(np.log(16), rel=1e-6)

    def test_deterministic(self, small_model):
        a = small_model.forward([4, 5, 6], [7, 8]).data
        b = small_model.forward([4, 5, 6], [7, 8]).data
        assert np.array_equal(a, b)

    def test_out_of_range_id(self, small_model):
        with pytest.raises(ValueError, match="invalid token id"):
            small_model.forward([4, 99], [5])

    def test_empty_sequences_rejected(self, small_model):
        with pytest.raises(ValueError, match="non-empty"):
            small_model.forward([], [5])
        with pytest.raises(ValueError, match="non-empty"):
            small_model.forward([4], [])

    def test_unfitted(self):
        model = NmtModel(make_vocab(8), make_vocab(8))
        with pytest.raises(NotFittedError):
            model.forward([4], [5])

    def test_nan_parameter_raises_numeric_error(self):
        model = NmtModel(make_vocab(12), make_vocab(12), embed_dim=8, hidden_dim=8, seed=1)
        model.init_params()
        model.params_["out.b"].data[0] = np.nan
        with pytest.raises(NumericError):
            model.forward([4, 5], [6])

    def test_softmax_rows_normalize(self, small_model):
        logits = small_model.forward([4, 5, 6], [7, 8, 9]).data
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


class TestLossAndGrad:
    def test_loss_non_negative(self, small_model):
        loss, _ = small_model.loss_and_grad([4, 5], [6, 7])
        assert loss >= 0.0

    def test_grad_keys_and_shapes_match_params(self, small_model):
        _, grads = small_model.loss_and_grad([4, 5], [6, 7])
        assert set(grads) == set(small_model.params_)
        for name, g in grads.items():
            assert g.shape == small_model.params_[name].data.shape

    def test_gradient_matches_finite_differences(self):
        """Central finite differences over every parameter of a <=5k model."""
        model = NmtModel(
            make_vocab(12), make_vocab(12), embed_dim=8, hidden_dim=8, seed=3, dtype="float64"
        )
        model.init_params()
        assert model.num_params() <= 5000
        src, tgt = [4, 5, 6, 7], [8, 9, 10]
        _, grads = model.loss_and_grad(src, tgt)
        eps = 1e-5
        max_rel = 0.0
        for name, p in model.params_.items():
            flat = p.data.reshape(-1)
            gflat = grads[name].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = model.loss(src, tgt)
                flat[i] = orig - eps
                down = model.loss(src, tgt)
                flat[i] = orig
                fd = (up - down) / (2 * eps)
                # denominator floored: FD noise at eps=1e-5 swamps gradients below ~1e-8
                max_rel = max(max_rel, abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-4))
        assert max_rel < 1e-4


class TestSgdStep:
    def test_single_scalar_arithmetic(self):
        model = NmtModel(make_vocab(8), make_vocab(8), embed_dim=4, hidden_dim=4, seed=0)
        model.init_params()
        model.params_["out.b"].data[...] = 0.0
        model.params_["out.b"].data[0] = 1.0
        grads = {n: np.zeros_like(p.data) for n, p in model.params_.items()}
        grads["out.b"][0] = 0.5
        model.sgd_step(grads, lr=0.1)
        assert model.params_["out.b"].data[0] == pytest.approx(0.95)

    def test_lr_must_be_positive(self, small_model):
        grads = {n: np.zeros_like(p.data) for n, p in small_model.params_.items()}
        with pytest.raises(ValueError, match="positive"):
            small_model.sgd_step(grads, lr=0.0)

    def test_key_mismatch(self, small_model):
        with pytest.raises(ValueError, match="keys"):
            small_model.sgd_step({"nope": np.zeros(3)}, lr=0.1)

    def test_shape_mismatch(self, small_model):
        grads = {n: np.zeros_like(p.data) for n, p in small_model.params_.items()}
        grads["out.b"] = np.zeros(3)
        with pytest.raises(ValueError, match="shape"):
            small_model.sgd_step(grads, lr=0.1)

    def test_non_finite_gradient_leaves_params_untouched(self):
        model = NmtModel(make_vocab(8), make_vocab(8), embed_dim=4, hidden_dim=4, seed=0)
        model.init_params()
        before = model.param_hash()
        grads = {n: np.ones_like(p.data) for n, p in model.params_.items()}
        grads["out.W"][0, 0] = np.inf
        with pytest.raises(NumericError):
            model.sgd_step(grads, lr=0.1)
        assert model.param_hash() == before

    def test_norm_clipping(self):
        model = NmtModel(make_vocab(8), make_vocab(8), embed_dim=4, hidden_dim=4, seed=0)
        model.init_params()
        before = {n: p.data.copy() for n, p in model.params_.items()}
        grads = {n: np.full_like(p.data, 100.0) for n, p in model.params_.items()}
        model.sgd_step(grads, lr=1.0, max_norm=5.0)
        moved_sq = sum(
            float(((p.data - before[n]).astype(np.float64) ** 2).sum())
            for n, p in model.params_.items()
        )
        assert np.sqrt(moved_sq) == pytest.approx(5.0, rel=1e-5)

    def test_descent_property(self):
        """One lr=1e-3 step does not increase the pair's own loss, >=95/100."""
        model = NmtModel(make_vocab(30), make_vocab(30), embed_dim=16, hidden_dim=24, seed=2)
        model.init_params()
        rng = np.random.default_rng(11)
        non_increasing = 0
        for _ in range(100):
            src = [int(x) for x in rng.integers(4, 30, size=rng.integers(3, 9))]
            tgt = [int(x) for x in rng.integers(4, 30, size=rng.integers(3, 9))]
            pre, grads = model.loss_and_grad(src, tgt)
            model.sgd_step(grads, lr=1e-3)
            non_increasing += model.loss(src, tgt) <= pre + 1e-12
        assert non_increasing >= 95


class TestTrainBatch:
    def test_copy_task_convergence(self):
        """50 copy pairs over a 20-token vocab: 30 epochs cut loss by >10x."""
        vocab = make_vocab(24)
        rng = np.random.default_rng(0)
        pairs = []
        for _ in range(50):
            seq = [int(x) for x in rng.integers(4, 24, size=rng.integers(3, 8))]
            pairs.append((seq, list(seq)))
        model = NmtModel(vocab, vocab, embed_dim=32, hidden_dim=48, seed=1).init_params()
        trace = model.train_batch(pairs, lr=0.008, epochs=30, batch_size=4, optimizer="adam", seed=7)
        assert len(trace) == 30
        assert trace[-1] < 0.1 * trace[0]

    def test_zero_epochs(self, small_model):
        before = small_model.param_hash()
        trace = small_model.train_batch([([4], [5])], epochs=0)
        assert trace == []
        assert small_model.param_hash() == before

    def test_same_seed_same_trace(self):
        vocab = make_vocab(16)
        pairs = [([4, 5], [6, 7]), ([8], [9, 10]), ([11, 12], [13])]

        def run():
            model = NmtModel(vocab, vocab, embed_dim=8, hidden_dim=8, seed=5).init_params()
            trace = model.train_batch(pairs, lr=0.01, epochs=3, seed=42)
            return trace, model.param_hash()

        (trace_a, hash_a), (trace_b, hash_b) = run(), run()
        assert trace_a == trace_b
        assert hash_a == hash_b

    def test_empty_pairs_rejected(self, small_model):
        with pytest.raises(ValueError, match="non-empty"):
            small_model.train_batch([])


class TestDecode:
    def test_hand_built_model_forces_token_then_eos(self):
        vocab = make_vocab(12)
        model = NmtModel(vocab, vocab, embed_dim=8, hidden_dim=8, seed=0).init_params()
        for tensor in model.params_.values():
            tensor.data[...] = 0.0
        # step 1: bias makes token 7 the argmax everywhere
        model.params_["out.b"].data[7] = 1.0
        # step 2: feeding token 7 back in drives the EOS logit far above it
        model.params_["tgt_embed"].data[7, :] = 1.0
        model.params_["readout.W"].data[3 * 8 :, 0] = 4.0
        model.params_["out.W"].data[0, EOS] = 10.0
        assert model.decode([4, 5], DecodeOptions(beam_size=1, max_length=10)) == [7]

    def test_max_length_caps_output(self, small_model):
        out = small_model.decode([4, 5, 6], DecodeOptions(beam_size=1, max_length=1))
        assert len(out) <= 1

    def test_beam_dominates_greedy(self, small_model):
        opts = DecodeOptions(beam_size=4, max_length=12)
        greedy = small_model.decode([4, 5, 6], DecodeOptions(beam_size=1, max_length=12))
        beam = small_model.decode([4, 5, 6], opts)
        g_score = small_model.hypothesis_score([4, 5, 6], greedy, opts) if greedy else -np.inf
        b_score = small_model.hypothesis_score([4, 5, 6], beam, opts) if beam else -np.inf
        if greedy and beam:
            assert b_score >= g_score - 1e-9

    def test_never_emits_pad_or_bos(self, small_model):
        for src in ([4], [5, 6], [7, 8, 9]):
            out = small_model.decode(src, DecodeOptions(beam_size=3, max_length=20))
            assert 0 not in out and 2 not in out

    def test_decode_options_validated(self):
        with pytest.raises(ValueError):
            DecodeOptions(beam_size=0)
        with pytest.raises(ValueError):
            DecodeOptions(max_length=0)
        with pytest.raises(ValueError):
            DecodeOptions(length_penalty=-1.0)

    def test_overfit_one_pair_reproduces_target(self):
        model = NmtModel(make_vocab(40), make_vocab(40), embed_dim=64, hidden_dim=128, seed=0)
        model.init_params()
        src, tgt = [5, 9, 12, 20, 7], [6, 11, 33, 8]
        for _ in range(50):
            _, grads = model.loss_and_grad(src, tgt)
            model.sgd_step(grads, lr=0.1)
        assert model.decode(src, DecodeOptions(beam_size=1, max_length=20)) == tgt


class TestEstimatorFacade:
    def test_fit_predict(self):
        vocab = make_vocab(16)
        model = NmtModel(
            vocab, vocab, embed_dim=8, hidden_dim=8, seed=1,
            learning_rate=0.01, epochs=2, batch_size=2,
        )
        X = [[4, 5], [6, 7]]
        y = [[8], [9, 10]]
        model.fit(X, y)
        assert len(model.train_history_) == 2
        preds = model.predict(X)
        assert len(preds) == 2 and all(isinstance(p, list) for p in preds)

    def test_partial_fit_changes_params(self):
        vocab = make_vocab(16)
        model = NmtModel(vocab, vocab, embed_dim=8, hidden_dim=8, seed=1).init_params()
        before = model.param_hash()
        model.partial_fit([[4, 5]], [[6]])
        assert model.param_hash() != before

    def test_get_params_roundtrip(self):
        vocab = make_vocab(8)
        model = NmtModel(vocab, vocab, embed_dim=8, hidden_dim=8, seed=9)
        params = model.get_params()
        assert params["embed_dim"] == 8 and params["seed"] == 9
        clone = NmtModel(**params)
        assert clone.get_params()["hidden_dim"] == model.hidden_dim


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, tmp_path):
        model = NmtModel(make_vocab(20), make_vocab(20), embed_dim=12, hidden_dim=16, seed=4)
        model.init_params()
        path = tmp_path / "model.ckpt"
        model.save_checkpoint(path)
        loaded = NmtModel.load_checkpoint(path)
        assert loaded.param_hash() == model.param_hash()
        assert loaded.decode([4, 5, 6]) == model.decode([4, 5, 6])
        assert loaded.src_vocab.token_of_ == model.src_vocab.token_of_

    def test_float32_roundtrip_exact(self, tmp_path):
        model = NmtModel(make_vocab(12), make_vocab(12), embed_dim=8, hidden_dim=8, seed=4, dtype="float32")
        model.init_params()
        model.save_checkpoint(tmp_path / "m.ckpt")
        loaded = NmtModel.load_checkpoint(tmp_path / "m.ckpt")
        assert loaded.param_hash() == model.param_hash()

    def test_wrong_format_string(self, tmp_path):
        import json
        import zipfile

        path = tmp_path / "bad.ckpt"
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("meta.json", json.dumps({"format": "other-v9"}))
        with pytest.raises(CheckpointError, match="incompatible checkpoint"):
            NmtModel.load_checkpoint(path)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"this is not a checkpoint")
        with pytest.raises(CheckpointError, match="cannot parse"):
            NmtModel.load_checkpoint(path)
