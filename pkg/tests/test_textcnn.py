"""Text CNN: config validation, seeded init, masked forward pass, training,
transfer plans, and checkpoint round-trips."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from satdkit.imbalance import ClassWeights, compute_class_weights
from satdkit.model.textcnn import (
    POSITIVE_CLASS,
    TRANSFER_SETTINGS,
    ActivationsRecord,
    CnnConfig,
    ConfigError,
    TextCnnModel,
    TrainingData,
    TrainingDivergenceError,
    TransferPlan,
    apply_transfer_plan,
    cnn_forward,
    cnn_init,
    cnn_predict,
    cnn_train,
    default_config,
    load_model,
    save_model,
    tuned_config,
)
from satdkit.preprocess.embeddings import init_random_embedding
from satdkit.preprocess.vocab import EncodedSection, build_vocabulary, encode, encode_batch


def tiny_setup(regions=(1, 2), maps=3, dim=4, max_len=8, seed=5, **overrides):
    vocab = build_vocabulary([[f"w{i}" for i in range(6)]], min_count=1)
    cfg = CnnConfig(region_sizes=regions, feature_maps_per_size=maps,
                    embedding_dim=dim, max_len=max_len, seed=seed, **overrides)
    embedding = init_random_embedding(vocab, dim, seed)
    return vocab, embedding, cnn_init(cfg, embedding, vocab_hash=vocab.content_hash())


def separable_data(n_per_class=10, max_len=6):
    """Positives always contain 'debtword', negatives never do — a keyword
    rule separates them, so a trained model must reach training F1 = 1.0."""
    pos = [["debtword", f"fill{i % 3}", "common"] for i in range(n_per_class)]
    neg = [["cleanword", f"fill{i % 3}", "common"] for i in range(n_per_class)]
    tokens = pos + neg
    labels = np.array([1] * n_per_class + [0] * n_per_class, dtype=np.int64)
    vocab = build_vocabulary(tokens, min_count=1)
    indices, lengths = encode_batch(tokens, vocab, max_len)
    return vocab, TrainingData(indices=indices, lengths=lengths, labels=labels)


def binary_f1(true, pred):
    tp = int(np.sum(true & pred))
    fp = int(np.sum(~true & pred))
    fn = int(np.sum(true & ~pred))
    if tp == 0:
        return 0.0
    p, r = tp / (tp + fp), tp / (tp + fn)
    return 2 * p * r / (p + r)


class TestConfig:
    def test_tuned_and_default_presets(self):
        tuned = tuned_config()
        assert tuned.region_sizes == (1, 2, 3)
        assert tuned.feature_maps_per_size == 200
        assert tuned.embedding_dim == 300
        assert tuned.total_feature_maps == 600
        base = default_config()
        assert base.region_sizes == (3, 4, 5)
        assert base.total_feature_maps == 300

    def test_region_size_validation(self):
        with pytest.raises(ConfigError, match="positive"):
            CnnConfig(region_sizes=())
        with pytest.raises(ConfigError, match="positive"):
            CnnConfig(region_sizes=(0, 2))
        with pytest.raises(ConfigError, match="distinct"):
            CnnConfig(region_sizes=(2, 2))
        with pytest.raises(ConfigError, match="max_len"):
            CnnConfig(region_sizes=(1, 9), max_len=8)

    def test_scalar_validation(self):
        with pytest.raises(ConfigError, match="epochs"):
            CnnConfig(epochs=0)
        with pytest.raises(ConfigError, match="binary"):
            CnnConfig(num_classes=3)
        with pytest.raises(ConfigError, match="learning_rate"):
            CnnConfig(learning_rate=0.0)


class TestInit:
    def test_deterministic_per_seed(self):
        _, _, a = tiny_setup(seed=9)
        _, _, b = tiny_setup(seed=9)
        assert np.array_equal(a.output_weights, b.output_weights)
        for r in a.config.region_sizes:
            assert np.array_equal(a.conv_weights[r], b.conv_weights[r])
        _, _, c = tiny_setup(seed=10)
        assert not np.array_equal(a.output_weights, c.output_weights)

    def test_illustrative_three_by_three_width_nine(self):
        vocab = build_vocabulary([["a", "b"]], 1)
        cfg = CnnConfig(region_sizes=(1, 2, 3), feature_maps_per_size=3,
                        embedding_dim=5, max_len=16)
        model = cnn_init(cfg, init_random_embedding(vocab, 5, 0))
        assert model.total_feature_maps == 9
        assert model.output_weights.shape == (9, 2)

    def test_tuned_penultimate_width(self):
        vocab = build_vocabulary([["a"]], 1)
        model = cnn_init(tuned_config(max_len=8),
                         init_random_embedding(vocab, 300, 0))
        assert model.output_weights.shape == (600, 2)

    def test_dimension_mismatch_rejected(self):
        vocab = build_vocabulary([["a"]], 1)
        with pytest.raises(ConfigError, match="embedding_dim"):
            cnn_init(CnnConfig(embedding_dim=7), init_random_embedding(vocab, 5, 0))

    def test_fan_in_scaled_bounds(self):
        _, _, model = tiny_setup(regions=(1, 3), dim=4)
        for r in (1, 3):
            bound = np.sqrt(6.0 / (r * 4))
            assert np.all(np.abs(model.conv_weights[r]) <= bound)
            assert np.all(model.conv_biases[r] == 0.0)
        assert np.all(np.abs(model.output_weights) <= np.sqrt(6.0 / 6))

    def test_embedding_copied_not_aliased(self):
        _, matrix, model = tiny_setup()
        model.embedding[1, 0] = 123.0
        assert matrix.vectors[1, 0] != 123.0
        assert model.embedding_source == "random"

    def test_feature_layout_spans(self):
        _, _, model = tiny_setup(regions=(1, 2), maps=3)
        assert model.feature_layout() == [(1, 0, 3), (2, 3, 6)]
        assert model.feature_region_sizes().tolist() == [1, 1, 1, 2, 2, 2]


class TestForward:
    def test_probabilities_sum_to_one(self):
        vocab, _, model = tiny_setup()
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 9))
            tokens = [f"w{rng.integers(0, 6)}" for _ in range(n)]
            probs = cnn_forward(model, encode(tokens, vocab, 8))
            assert probs.shape == (2,)
            assert np.all(probs > 0) and np.all(probs < 1)
            assert abs(probs.sum() - 1.0) < 1e-6

    def test_map_length_law_seven_six_five(self):
        vocab, _, model = tiny_setup(regions=(1, 2, 3), max_len=10)
        encoded = encode([f"w{i % 6}" for i in range(7)], vocab, 10)
        _, record = cnn_forward(model, encoded, capture_activations=True)
        assert isinstance(record, ActivationsRecord)
        by_region = dict(zip(record.region_sizes.tolist(),
                             record.valid_positions.tolist()))
        assert by_region == {1: 7, 2: 6, 3: 5}
        assert np.all(record.argmax < record.valid_positions)

    def test_short_section_region_contributes_zero(self):
        vocab, _, model = tiny_setup(regions=(2, 3))
        _, record = cnn_forward(model, encode(["w0"], vocab, 8),
                                capture_activations=True)
        assert np.all(record.pooled == 0.0)
        assert np.all(record.argmax == -1)
        assert np.all(record.valid_positions == 0)

    def test_padding_never_changes_output(self):
        # same seed, two max_len configs: parameters are identical, so any
        # output difference could only come from padding leaking in
        vocab = build_vocabulary([[f"w{i}" for i in range(6)]], 1)
        emb = init_random_embedding(vocab, 4, 3)
        short = cnn_init(CnnConfig(region_sizes=(1, 2), feature_maps_per_size=3,
                                   embedding_dim=4, max_len=8, seed=3), emb)
        long = cnn_init(CnnConfig(region_sizes=(1, 2), feature_maps_per_size=3,
                                  embedding_dim=4, max_len=64, seed=3), emb)
        tokens = ["w0", "w3", "w5"]
        a = cnn_forward(short, encode(tokens, vocab, 8))
        b = cnn_forward(long, encode(tokens, vocab, 64))
        assert np.array_equal(a, b)

    def test_empty_section_rejected(self):
        vocab, _, model = tiny_setup()
        empty = encode([], vocab, 8)
        with pytest.raises(ValueError, match="empty section"):
            cnn_forward(model, empty)
        with pytest.raises(ValueError, match="empty section"):
            cnn_predict(model, [encode(["w0"], vocab, 8), empty])

    def test_tie_breaks_toward_negative(self):
        vocab, _, model = tiny_setup()
        model.output_weights[:] = 0.0
        model.output_bias[:] = 0.0
        labels, probs = cnn_predict(model, [encode(["w1", "w2"], vocab, 8)])
        assert probs[0] == 0.5
        assert labels[0] == np.False_

    def test_batch_equals_per_item(self):
        vocab, _, model = tiny_setup()
        rng = np.random.default_rng(4)
        sections = [encode([f"w{rng.integers(0, 6)}"
                            for _ in range(rng.integers(1, 9))], vocab, 8)
                    for _ in range(17)]
        labels, probs = cnn_predict(model, sections, batch_size=5)
        for i, enc in enumerate(sections):
            single = cnn_forward(model, enc)
            assert probs[i] == single[POSITIVE_CLASS]
            assert labels[i] == (single[POSITIVE_CLASS] > single[0])

    def test_empty_batch_allowed(self):
        _, _, model = tiny_setup()
        labels, probs = cnn_predict(model, [])
        assert labels.shape == (0,) and probs.shape == (0,)

    def test_forward_matches_explicit_computation(self):
        vocab, _, model = tiny_setup(regions=(1, 2), maps=2, dim=3, seed=8)
        encoded = encode(["w1", "w4", "w2"], vocab, 8)
        x = model.embedding[list(encoded.indices[:3])]
        pooled = []
        for r in (1, 2):
            w, b = model.conv_weights[r], model.conv_biases[r]
            for f in range(2):
                best = 0.0
                for p in range(3 - r + 1):
                    window = x[p:p + r].reshape(-1)
                    best = max(best, max(0.0, float(window @ w[:, f] + b[f])))
                pooled.append(best)
        logits = np.array(pooled) @ model.output_weights + model.output_bias
        expected = np.exp(logits - logits.max())
        expected /= expected.sum()
        assert np.allclose(cnn_forward(model, encoded), expected, rtol=1e-12)


class TestTrain:
    def test_loss_improves_and_flags_trained(self):
        vocab, data = separable_data()
        cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=4,
                        embedding_dim=8, max_len=6, seed=1, epochs=8,
                        batch_size=8)
        model = cnn_init(cfg, init_random_embedding(vocab, 8, 1))
        assert not model.trained
        model, history = cnn_train(model, data)
        assert len(history) == 8
        assert history[-1] < history[0]
        assert model.trained

    def test_separable_toy_reaches_f1_one(self):
        vocab, data = separable_data()
        cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=4,
                        embedding_dim=8, max_len=6, seed=2, epochs=50,
                        batch_size=8)
        model = cnn_init(cfg, init_random_embedding(vocab, 8, 2))
        model, _ = cnn_train(model, data)
        pred, _ = cnn_predict(model, data)
        assert binary_f1(data.labels.astype(bool), pred) == 1.0

    def test_bit_identical_given_seed(self):
        vocab, data = separable_data(6)
        cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=3,
                        embedding_dim=4, max_len=6, seed=3, epochs=3,
                        batch_size=4)

        def run():
            model = cnn_init(cfg, init_random_embedding(vocab, 4, 3))
            return cnn_train(model, data)

        a, history_a = run()
        b, history_b = run()
        assert history_a == history_b
        assert np.array_equal(a.embedding, b.embedding)
        assert np.array_equal(a.output_weights, b.output_weights)
        for r in cfg.region_sizes:
            assert np.array_equal(a.conv_weights[r], b.conv_weights[r])

    def test_uniform_weights_equal_unweighted(self):
        vocab, data = separable_data(6)
        cfg = CnnConfig(region_sizes=(1,), feature_maps_per_size=3,
                        embedding_dim=4, max_len=6, seed=4, epochs=3,
                        batch_size=4)
        plain = cnn_init(cfg, init_random_embedding(vocab, 4, 4))
        plain, history_plain = cnn_train(plain, data, weights=None)
        uniform = cnn_init(cfg, init_random_embedding(vocab, 4, 4))
        ones = ClassWeights(weight_per_class={True: Fraction(1), False: Fraction(1)})
        uniform, history_uniform = cnn_train(uniform, data, weights=ones)
        assert history_plain == history_uniform
        assert np.array_equal(plain.output_weights, uniform.output_weights)

    def test_class_weights_change_training(self):
        vocab, data = separable_data(6)
        cfg = CnnConfig(region_sizes=(1,), feature_maps_per_size=3,
                        embedding_dim=4, max_len=6, seed=4, epochs=2,
                        batch_size=4)
        skewed = compute_class_weights([True] + [False] * 5)
        a = cnn_init(cfg, init_random_embedding(vocab, 4, 4))
        a, _ = cnn_train(a, data, weights=skewed)
        b = cnn_init(cfg, init_random_embedding(vocab, 4, 4))
        b, _ = cnn_train(b, data, weights=None)
        assert not np.array_equal(a.output_weights, b.output_weights)

    def test_early_stop_halts_and_restores_best(self):
        vocab, data = separable_data(10)

        def run(epochs, **kwargs):
            cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=4,
                            embedding_dim=8, max_len=6, seed=5, epochs=epochs,
                            batch_size=8)
            model = cnn_init(cfg, init_random_embedding(vocab, 8, 5))
            return cnn_train(model, data, **kwargs)

        model, history = run(200, val_data=data, patience=2)
        k = len(history)
        assert k < 200  # stopped long before the epoch budget

        # Replay oracle: an n-epoch run without validation is bit-identical
        # to the first n epochs above, so it reconstructs the per-epoch
        # validation F1 the early stopper saw.
        f1_per_epoch = []
        for epochs in range(1, k + 1):
            prefix, prefix_history = run(epochs)
            assert prefix_history == history[:epochs]
            pred, _ = cnn_predict(prefix, data)
            f1_per_epoch.append(binary_f1(data.labels.astype(bool), pred))

        best = max(f1_per_epoch)
        last_improvement = f1_per_epoch.index(best)
        assert k == last_improvement + 1 + 2  # patience epochs past the best
        pred, _ = cnn_predict(model, data)
        assert binary_f1(data.labels.astype(bool), pred) == best

    def test_empty_training_data_rejected(self):
        _, _, model = tiny_setup()
        empty = TrainingData(indices=np.zeros((0, 8), dtype=np.int64),
                             lengths=np.zeros(0, dtype=np.int64),
                             labels=np.zeros(0, dtype=np.int64))
        with pytest.raises(ValueError, match="empty"):
            cnn_train(model, empty)

    def test_divergence_names_first_bad_batch(self):
        vocab, data = separable_data(4)
        cfg = CnnConfig(region_sizes=(1,), feature_maps_per_size=2,
                        embedding_dim=4, max_len=6, seed=6, epochs=2,
                        batch_size=8)
        model = cnn_init(cfg, init_random_embedding(vocab, 4, 6))
        model.output_bias[0] = np.nan
        with pytest.raises(TrainingDivergenceError, match="epoch 0 batch 0"):
            cnn_train(model, data)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_huge_learning_rate_diverges(self):
        vocab, data = separable_data(4)
        cfg = CnnConfig(region_sizes=(1,), feature_maps_per_size=2,
                        embedding_dim=4, max_len=6, seed=7, epochs=5,
                        batch_size=8, learning_rate=1e160)
        model = cnn_init(cfg, init_random_embedding(vocab, 4, 7))
        with pytest.raises(TrainingDivergenceError, match="non-finite"):
            cnn_train(model, data)


class TestTransferPlan:
    def make_source(self):
        vocab, data = separable_data(5)
        cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=3,
                        embedding_dim=4, max_len=6, seed=11, epochs=2,
                        batch_size=4)
        model = cnn_init(cfg, init_random_embedding(vocab, 4, 11))
        model, _ = cnn_train(model, data)
        return vocab, data, model

    def test_settings_validated(self):
        with pytest.raises(ConfigError, match="conv_setting"):
            TransferPlan(conv_setting="thaw", output_setting="fresh")
        with pytest.raises(ConfigError, match="source_params"):
            TransferPlan(conv_setting="fine_tune", output_setting="fresh")
        assert TRANSFER_SETTINGS == ("fresh", "fine_tune", "frozen")

    def test_tags(self):
        assert TransferPlan("fresh", "fresh").tag() == "conv=fresh,output=fresh"
        src = {"conv_weights": {}, "conv_biases": {},
               "output_weights": np.zeros((6, 2)), "output_bias": np.zeros(2)}
        plan = TransferPlan("frozen", "fine_tune", source_params=src)
        assert plan.tag() == "conv=freeze,output=tune"

    def test_fully_fresh_reproduces_scratch_init(self):
        _, _, trained = self.make_source()
        fresh = apply_transfer_plan(trained, TransferPlan("fresh", "fresh"))
        scratch = cnn_init(trained.config,
                           init_random_embedding(
                               build_vocabulary([[f"w{i}" for i in range(5)]], 1),
                               4, 11))
        # conv/output layers match bit for bit; the embedding is carried over
        for r in trained.config.region_sizes:
            assert np.array_equal(fresh.conv_weights[r], scratch.conv_weights[r])
            assert np.array_equal(fresh.conv_biases[r], scratch.conv_biases[r])
        assert np.array_equal(fresh.output_weights, scratch.output_weights)
        assert np.array_equal(fresh.output_bias, scratch.output_bias)
        assert np.array_equal(fresh.embedding, trained.embedding)
        assert fresh.conv_trainable and fresh.output_trainable
        assert not fresh.trained

    def test_copy_semantics_fine_tune_conv_fresh_output(self):
        _, _, source = self.make_source()
        plan = TransferPlan("fine_tune", "fresh", source_params=source.snapshot())
        target = apply_transfer_plan(source, plan)
        for r in source.config.region_sizes:
            assert np.array_equal(target.conv_weights[r], source.conv_weights[r])
            assert target.conv_weights[r] is not source.conv_weights[r]
        assert not np.array_equal(target.output_weights, source.output_weights)
        target.conv_weights[1][0, 0] += 1.0
        assert target.conv_weights[1][0, 0] != source.conv_weights[1][0, 0]

    def test_frozen_layers_survive_training_untouched(self):
        vocab, data, source = self.make_source()
        plan = TransferPlan("frozen", "frozen", source_params=source.snapshot())
        target = apply_transfer_plan(source, plan)
        assert not target.conv_trainable and not target.output_trainable
        before_conv = {r: w.copy() for r, w in target.conv_weights.items()}
        before_out = target.output_weights.copy()
        before_embedding = target.embedding.copy()
        target, _ = cnn_train(target, data)
        for r in target.config.region_sizes:
            assert np.array_equal(target.conv_weights[r], before_conv[r])
        assert np.array_equal(target.output_weights, before_out)
        assert not np.array_equal(target.embedding, before_embedding)

    def test_shape_mismatch_names_layer(self):
        _, _, source = self.make_source()
        vocab = build_vocabulary([["a", "b"]], 1)
        wide_cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=5,
                             embedding_dim=4, max_len=6, seed=1)
        wide = cnn_init(wide_cfg, init_random_embedding(vocab, 4, 1))
        plan = TransferPlan("fine_tune", "fresh", source_params=source.snapshot())
        with pytest.raises(ConfigError, match=r"conv r=1 weights"):
            apply_transfer_plan(wide, plan)
        out_plan = TransferPlan("fresh", "frozen", source_params=source.snapshot())
        with pytest.raises(ConfigError, match="output weights"):
            apply_transfer_plan(wide, out_plan)

    def test_missing_region_named(self):
        _, _, source = self.make_source()
        params = source.snapshot()
        del params["conv_weights"][2]
        plan = TransferPlan("fine_tune", "fresh", source_params=params)
        with pytest.raises(ConfigError, match="conv r=2 weights missing"):
            apply_transfer_plan(source, plan)


class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path):
        vocab, data = separable_data(5)
        cfg = CnnConfig(region_sizes=(1, 2), feature_maps_per_size=3,
                        embedding_dim=4, max_len=6, seed=21, epochs=2,
                        batch_size=4)
        model = cnn_init(cfg, init_random_embedding(vocab, 4, 21),
                         vocab_hash=vocab.content_hash())
        model, _ = cnn_train(model, data)
        path = tmp_path / "model.satdcnn"  # extension must survive as-is
        save_model(model, path, vocab=vocab)
        assert path.is_file() and not (tmp_path / "model.satdcnn.npz").exists()

        loaded, loaded_vocab = load_model(path)
        assert loaded.config == cfg
        assert loaded_vocab == vocab
        assert loaded_vocab.counts == vocab.counts
        assert loaded.vocab_hash == vocab.content_hash()
        assert loaded.embedding_source == "random"
        assert loaded.trained
        assert np.array_equal(loaded.embedding, model.embedding)
        assert np.array_equal(loaded.output_weights, model.output_weights)
        for r in cfg.region_sizes:
            assert np.array_equal(loaded.conv_weights[r], model.conv_weights[r])
            assert np.array_equal(loaded.conv_biases[r], model.conv_biases[r])

        original_pred = cnn_predict(model, data)
        reloaded_pred = cnn_predict(loaded, data)
        assert np.array_equal(original_pred[0], reloaded_pred[0])
        assert np.array_equal(original_pred[1], reloaded_pred[1])

    def test_round_trip_without_vocab(self, tmp_path):
        _, _, model = tiny_setup()
        path = tmp_path / "bare.satdcnn"
        save_model(model, path)
        loaded, vocab = load_model(path)
        assert vocab is None
        assert np.array_equal(loaded.output_weights, model.output_weights)

    def test_trainability_flags_persist(self, tmp_path):
        _, _, model = tiny_setup()
        frozen = apply_transfer_plan(
            model, TransferPlan("frozen", "frozen", source_params=model.snapshot()))
        path = tmp_path / "frozen.satdcnn"
        save_model(frozen, path)
        loaded, _ = load_model(path)
        assert not loaded.conv_trainable
        assert not loaded.output_trainable
