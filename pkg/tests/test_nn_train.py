import numpy as np
import pytest

from printguard.dataset import GenerationConfig, generate_sample
from printguard.core import derive_child
from printguard.nn import (Architecture, TrainConfig, evaluate, init_model,
                           save_model, train)
from printguard.preprocess import image_to_tensor
from printguard.textgen import GlyphAtlas


@pytest.fixture(scope="module")
def small_corpus():
    """40 balanced samples straight from the generation pipeline."""
    gen = GenerationConfig.scaled(40)
    atlas = GlyphAtlas(gen.glyph_scale)
    plan = []
    for kind, count in gen.composition.items():
        plan.extend([kind] * count)
    xs, ys = [], []
    for i, kind in enumerate(plan):
        seed, _ = derive_child(17, i)
        img, _ = generate_sample(seed, 2 * i + 1, kind, gen, atlas)
        xs.append(image_to_tensor(img))
        ys.append(0 if kind is None else 1)
    return np.stack(xs), np.array(ys)


class TestTrainLoop:
    def test_zero_epochs_returns_initial_model(self, small_corpus, tmp_path):
        x, y = small_corpus
        cfg = TrainConfig(epochs=0, seed=3)
        init = init_model(Architecture(), cfg.seed)
        trained, curve = train(init, x, y, x, y, cfg)
        assert curve == []
        reference = init_model(Architecture(), cfg.seed)
        for (_, a), (_, b) in zip(trained.tensors(), reference.tensors()):
            assert np.array_equal(a, b)

    def test_empty_data_rejected(self):
        cfg = TrainConfig(epochs=1)
        model = init_model(Architecture(), 1)
        empty = np.zeros((0, 45, 132, 1), dtype=np.float32)
        with pytest.raises(ValueError):
            train(model, empty, np.zeros(0, int), empty, np.zeros(0, int), cfg)

    def test_first_minibatch_loss_near_ln2(self, small_corpus):
        x, y = small_corpus
        cfg = TrainConfig(epochs=1, validation_every=1, seed=5)
        model = init_model(Architecture(), cfg.seed)
        _, curve = train(model, x, y, x, y, cfg)
        assert abs(curve[0].train_loss - np.log(2)) <= 0.5

    def test_overfits_small_balanced_subset(self, small_corpus):
        x, y = small_corpus
        cfg = TrainConfig(epochs=60, validation_every=30, seed=7)
        model = init_model(Architecture(), cfg.seed)
        model, _ = train(model, x, y, x, y, cfg)
        metrics = evaluate(model, x, y)
        assert metrics.accuracy == 1.0

    def test_curve_cadence_and_final_point(self, small_corpus):
        x, y = small_corpus
        # 40 samples, minibatch 16 -> 3 iterations/epoch; 4 epochs -> 12 iters
        cfg = TrainConfig(minibatch=16, epochs=4, validation_every=5, seed=9)
        model = init_model(Architecture(), cfg.seed)
        _, curve = train(model, x, y, x, y, cfg)
        assert [p.iteration for p in curve] == [5, 10, 12]
        for p in curve:
            assert 0.0 <= p.val_accuracy <= 1.0
            assert np.isfinite(p.train_loss)

    def test_no_duplicate_final_point(self, small_corpus):
        x, y = small_corpus
        cfg = TrainConfig(minibatch=20, epochs=2, validation_every=2, seed=9)
        model = init_model(Architecture(), cfg.seed)
        _, curve = train(model, x, y, x, y, cfg)
        assert [p.iteration for p in curve] == [2, 4]

    def test_bit_reproducible(self, small_corpus, tmp_path):
        x, y = small_corpus
        outs = []
        for run in range(2):
            cfg = TrainConfig(epochs=3, minibatch=16, seed=11)
            model = init_model(Architecture(), cfg.seed)
            model, _ = train(model, x, y, x, y, cfg)
            path = tmp_path / f"run{run}.pgdm"
            save_model(model, path)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_shape_chain_holds_after_training(self, small_corpus):
        x, y = small_corpus
        cfg = TrainConfig(epochs=1, minibatch=16, seed=13)
        model = init_model(Architecture(), cfg.seed)
        model, _ = train(model, x, y, x, y, cfg)
        assert model.conv1.w.shape == (5, 10, 1, 3)
        assert model.conv2.w.shape == (10, 5, 3, 5)
        assert model.dense1.w.shape == (740, 100)
        assert model.dense2.w.shape == (100, 2)
        assert model.forward(x[:4], train=False).shape == (4, 2)

    def test_partial_final_batch_included(self, small_corpus):
        x, y = small_corpus
        # 40 samples, minibatch 32 -> batches of 32 and 8 per epoch
        cfg = TrainConfig(minibatch=32, epochs=1, validation_every=1, seed=15)
        model = init_model(Architecture(), cfg.seed)
        _, curve = train(model, x, y, x, y, cfg)
        assert [p.iteration for p in curve] == [1, 2]

    def test_input_standardization(self, small_corpus):
        x, y = small_corpus
        cfg = TrainConfig(epochs=1, minibatch=16, seed=17)
        model = init_model(Architecture(), cfg.seed)
        assert (model.input_mean == 0).all()
        model, _ = train(model, x, y, x, y, cfg)
        assert np.allclose(model.input_mean, x.mean(axis=0), atol=1e-6)
        assert "input_mean" in dict(model.tensors())
        out_centered = model.forward(x[:4], train=False)
        model.input_mean[:] = 0
        out_raw = model.forward(x[:4], train=False)
        model.release_caches()
        assert not np.allclose(out_centered, out_raw)
