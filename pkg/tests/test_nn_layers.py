import math

import numpy as np
import pytest

from printguard.core import Rng
from printguard.nn import (BatchNorm, Conv2D, Dense, MaxPool, ReLU,
                           TrainConfig, sgdm_step, softmax_crossentropy)
from printguard.nn.gradcheck import (REL_TOLERANCE, check_batchnorm,
                                     check_conv, check_dense, check_maxpool,
                                     check_relu, check_softmax_xent, run_all)


def conv_oracle(x, w, b):
    """Direct-summation convolution, independent of the layer code."""
    n, h, wid, cin = x.shape
    fh, fw, _, cout = w.shape
    oh, ow = h - fh + 1, wid - fw + 1
    out = np.zeros((n, oh, ow, cout), dtype=np.float64)
    for ni in range(n):
        for i in range(oh):
            for j in range(ow):
                for k in range(cout):
                    acc = float(b[k])
                    for di in range(fh):
                        for dj in range(fw):
                            for c in range(cin):
                                acc += float(x[ni, i + di, j + dj, c]) * \
                                       float(w[di, dj, c, k])
                    out[ni, i, j, k] = acc
    return out


def pool_oracle(x, k=3):
    """Direct window-scan max pooling."""
    n, h, w, c = x.shape
    oh, ow = h // k, w // k
    out = np.zeros((n, oh, ow, c), dtype=x.dtype)
    for ni in range(n):
        for i in range(oh):
            for j in range(ow):
                for ci in range(c):
                    out[ni, i, j, ci] = x[ni, i * k:(i + 1) * k,
                                          j * k:(j + 1) * k, ci].max()
    return out


def rand_f32(gen, shape, scale=0.3):
    return (gen.standard_normal(shape) * scale).astype(np.float32)


class TestConv2D:
    def test_identity_kernel(self):
        gen = np.random.default_rng(0)
        x = rand_f32(gen, (2, 6, 7, 1))
        layer = Conv2D("c", 1, 1, 1, 1)
        layer.w[0, 0, 0, 0] = 1.0
        out = layer.forward(x, train=False)
        assert np.array_equal(out, x)

    def test_zero_input_bias_broadcast(self):
        layer = Conv2D("c", 3, 3, 2, 4)
        layer.b[:] = [0.5, -1.0, 2.0, 0.25]
        out = layer.forward(np.zeros((2, 5, 5, 2), dtype=np.float32), train=False)
        assert np.allclose(out, layer.b, atol=0)

    def test_matches_oracle(self):
        gen = np.random.default_rng(1)
        layer = Conv2D("c", 3, 3, 2, 3, dtype=np.float64)
        layer.w[:] = gen.standard_normal(layer.w.shape) * 0.3
        layer.b[:] = gen.standard_normal(3) * 0.3
        x = gen.standard_normal((2, 6, 8, 2)) * 0.3
        out = layer.forward(x, train=False)
        assert np.abs(out - conv_oracle(x, layer.w, layer.b)).max() < 1e-6

    def test_matches_oracle_random_shapes(self):
        gen = np.random.default_rng(2)
        for _ in range(15):
            fh, fw = gen.integers(1, 5), gen.integers(1, 5)
            cin, cout = gen.integers(1, 4), gen.integers(1, 4)
            h, w = fh + gen.integers(0, 6), fw + gen.integers(0, 6)
            n = gen.integers(1, 4)
            layer = Conv2D("c", fh, fw, cin, cout, dtype=np.float64)
            layer.w[:] = gen.standard_normal(layer.w.shape) * 0.3
            layer.b[:] = gen.standard_normal(cout) * 0.3
            x = gen.standard_normal((n, h, w, cin)) * 0.3
            out = layer.forward(x, train=False)
            assert np.abs(out - conv_oracle(x, layer.w, layer.b)).max() < 1e-6

    def test_linearity_at_zero_bias(self):
        gen = np.random.default_rng(3)
        layer = Conv2D("c", 2, 3, 2, 2)
        layer.w[:] = rand_f32(gen, layer.w.shape, 0.5)
        x = rand_f32(gen, (2, 5, 6, 2))
        y = rand_f32(gen, (2, 5, 6, 2))
        a, b = 0.7, -1.3
        combined = layer.forward(a * x + b * y, train=False)
        separate = a * layer.forward(x, train=False) + \
            b * layer.forward(y, train=False)
        assert np.abs(combined - separate).max() < 1e-5

    def test_filter_too_large(self):
        layer = Conv2D("c", 7, 7, 1, 1)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 5, 9, 1), dtype=np.float32), train=False)

    def test_channel_mismatch(self):
        layer = Conv2D("c", 3, 3, 2, 1)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 5, 5, 3), dtype=np.float32), train=False)

    def test_backward_matches_finite_differences(self):
        report = check_conv(Rng(100), trials=4)
        assert report.worst_rel_error < REL_TOLERANCE


class TestMaxPool:
    def test_constant_input(self):
        x = np.full((1, 6, 9, 2), 3.5, dtype=np.float32)
        out = MaxPool(3).forward(x, train=False)
        assert out.shape == (1, 2, 3, 2)
        assert (out == 3.5).all()

    def test_forced_6x6(self):
        x = np.arange(1, 37, dtype=np.float32).reshape(1, 6, 6, 1)
        out = MaxPool(3).forward(x, train=False)
        assert out[0, :, :, 0].tolist() == [[15.0, 18.0], [33.0, 36.0]]

    def test_shape_chain_floor(self):
        x = np.zeros((1, 41, 123, 3), dtype=np.float32)
        assert MaxPool(3).forward(x, train=False).shape == (1, 13, 41, 3)

    def test_matches_oracle_random(self):
        gen = np.random.default_rng(4)
        for _ in range(15):
            n, c = gen.integers(1, 3), gen.integers(1, 4)
            h, w = gen.integers(3, 14), gen.integers(3, 14)
            x = rand_f32(gen, (n, h, w, c), 2.0)
            out = MaxPool(3).forward(x, train=False)
            assert np.array_equal(out, pool_oracle(x))

    def test_backward_routes_to_argmax(self):
        x = np.zeros((1, 3, 3, 1), dtype=np.float32)
        x[0, 1, 2, 0] = 5.0
        layer = MaxPool(3)
        layer.forward(x, train=True)
        dx = layer.backward(np.full((1, 1, 1, 1), 2.0, dtype=np.float32))
        expected = np.zeros_like(x)
        expected[0, 1, 2, 0] = 2.0
        assert np.array_equal(dx, expected)

    def test_tie_goes_to_first_in_row_major_scan(self):
        x = np.full((1, 3, 3, 1), 1.0, dtype=np.float32)
        layer = MaxPool(3)
        layer.forward(x, train=True)
        dx = layer.backward(np.ones((1, 1, 1, 1), dtype=np.float32))
        assert dx[0, 0, 0, 0] == 1.0
        assert dx.sum() == 1.0

    def test_backward_matches_finite_differences(self):
        report = check_maxpool(Rng(101), trials=4)
        assert report.worst_rel_error < REL_TOLERANCE


class TestBatchNorm:
    def test_constant_batch_maps_to_zero(self):
        layer = BatchNorm("bn", 2)
        x = np.full((8, 2), 4.25, dtype=np.float32)
        out = layer.forward(x, train=True)
        assert np.abs(out).max() <= 1e-3

    def test_three_point_batch(self):
        layer = BatchNorm("bn", 1, eps=1e-12)
        x = np.array([[1.0], [2.0], [3.0]], dtype=np.float32)
        out = layer.forward(x, train=True)
        expected = np.array([-1.2247449, 0.0, 1.2247449])
        assert np.allclose(out[:, 0], expected, atol=1e-4)

    def test_affine_contract(self):
        gen = np.random.default_rng(5)
        x = rand_f32(gen, (6, 3), 2.0)
        plain = BatchNorm("bn", 3)
        scaled = BatchNorm("bn", 3)
        scaled.gamma[:] = 2.0
        scaled.beta[:] = 1.0
        xhat = plain.forward(x, train=True)
        out = scaled.forward(x, train=True)
        assert np.array_equal(out, 2.0 * xhat + 1.0)

    def test_batch_of_one_rejected(self):
        layer = BatchNorm("bn", 1)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 1), dtype=np.float32), train=True)

    def test_train_mode_normalizes_spatial_activations(self):
        gen = np.random.default_rng(6)
        x = (gen.standard_normal((4, 5, 7, 3)) * 3 + 1).astype(np.float32)
        layer = BatchNorm("bn", 3)
        out = layer.forward(x, train=True)
        assert np.abs(out.mean(axis=(0, 1, 2))).max() <= 1e-4
        assert np.abs(out.var(axis=(0, 1, 2)) - 1).max() <= 1e-3

    def test_running_stats_update(self):
        gen = np.random.default_rng(7)
        x = (gen.standard_normal((16, 2)) * 2 + 5).astype(np.float32)
        layer = BatchNorm("bn", 2)
        layer.forward(x, train=True)
        expected_mean = 0.1 * x.mean(axis=0)
        assert np.allclose(layer.running_mean, expected_mean, atol=1e-6)
        expected_var = 0.9 * 1.0 + 0.1 * x.var(axis=0)
        assert np.allclose(layer.running_var, expected_var, atol=1e-5)

    def test_infer_uses_running_stats(self):
        layer = BatchNorm("bn", 1)
        layer.running_mean[:] = 2.0
        layer.running_var[:] = 4.0
        out = layer.forward(np.array([[4.0]], dtype=np.float32), train=False)
        assert out[0, 0] == pytest.approx((4.0 - 2.0) / math.sqrt(4.0 + 1e-5),
                                          rel=1e-6)

    def test_backward_matches_finite_differences(self):
        report = check_batchnorm(Rng(102), trials=4)
        assert report.worst_rel_error < REL_TOLERANCE


class TestDense:
    def test_identity(self):
        layer = Dense("d", 4, 4)
        layer.w[:] = np.eye(4, dtype=np.float32)
        x = np.arange(8, dtype=np.float32).reshape(2, 4)
        assert np.array_equal(layer.forward(x, train=False), x)

    def test_zero_input_gives_bias(self):
        layer = Dense("d", 3, 2)
        layer.b[:] = [1.5, -2.0]
        out = layer.forward(np.zeros((4, 3), dtype=np.float32), train=False)
        assert np.allclose(out, layer.b)

    def test_linearity_at_zero_bias(self):
        gen = np.random.default_rng(8)
        layer = Dense("d", 5, 3)
        layer.w[:] = rand_f32(gen, (5, 3), 0.5)
        x, y = rand_f32(gen, (2, 5)), rand_f32(gen, (2, 5))
        combined = layer.forward(2.0 * x - 0.5 * y, train=False)
        separate = 2.0 * layer.forward(x, train=False) - \
            0.5 * layer.forward(y, train=False)
        assert np.abs(combined - separate).max() < 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Dense("d", 3, 2).forward(np.zeros((1, 4), dtype=np.float32),
                                     train=False)

    def test_backward_matches_finite_differences(self):
        report = check_dense(Rng(103), trials=4)
        assert report.worst_rel_error < REL_TOLERANCE


class TestReLU:
    def test_all_negative(self):
        out = ReLU().forward(np.array([[-1.0, -0.5]], dtype=np.float32),
                             train=False)
        assert (out == 0).all()

    def test_all_positive_identity(self):
        x = np.array([[1.0, 2.5]], dtype=np.float32)
        assert np.array_equal(ReLU().forward(x, train=False), x)

    def test_zero_input_zero_gradient(self):
        layer = ReLU()
        x = np.zeros((1, 3), dtype=np.float32)
        assert (layer.forward(x, train=True) == 0).all()
        dx = layer.backward(np.ones_like(x))
        assert (dx == 0).all()

    def test_backward_matches_finite_differences(self):
        report = check_relu(Rng(104), trials=4)
        assert report.worst_rel_error < REL_TOLERANCE


class TestSoftmaxCrossentropy:
    def test_symmetric_case(self):
        loss, grad = softmax_crossentropy(np.array([[0.0, 0.0]]), np.array([0]))
        assert loss == pytest.approx(math.log(2), rel=1e-6)
        assert np.allclose(grad, [[-0.5, 0.5]], atol=1e-7)

    def test_saturated_correct(self):
        loss, _ = softmax_crossentropy(np.array([[20.0, -20.0]]), np.array([0]))
        assert loss < 1e-8

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            softmax_crossentropy(np.array([[np.inf, 0.0]]), np.array([0]))

    def test_probabilities_gradient_shift_invariance(self):
        gen = np.random.default_rng(9)
        logits = gen.standard_normal((4, 2))
        _, g1 = softmax_crossentropy(logits, np.array([0, 1, 0, 1]))
        _, g2 = softmax_crossentropy(logits + 7.0, np.array([0, 1, 0, 1]))
        assert np.allclose(g1, g2, atol=1e-9)

    def test_gradient_matches_finite_differences(self):
        report = check_softmax_xent(Rng(105), trials=6)
        assert report.worst_rel_error < 1e-5


class TestSgdmStep:
    def cfg(self, lr=0.1, momentum=0.1, l2=0.0):
        return TrainConfig(learning_rate=lr, momentum=momentum, l2=l2,
                           minibatch=2, epochs=1)

    def test_plain_sgd_reduction(self):
        p = np.array([1.0, 2.0], dtype=np.float32)
        g = np.array([0.5, -0.5], dtype=np.float32)
        v = np.zeros(2, dtype=np.float32)
        sgdm_step(p, g, v, self.cfg(momentum=0.0), decay=False)
        assert np.allclose(p, [1.0 - 0.05, 2.0 + 0.05])

    def test_forced_two_step_sequence(self):
        p = np.array([1.0], dtype=np.float32)
        v = np.zeros(1, dtype=np.float32)
        g = np.array([1.0], dtype=np.float32)
        cfg = self.cfg()
        sgdm_step(p, g, v, cfg, decay=False)
        assert v[0] == pytest.approx(-0.1) and p[0] == pytest.approx(0.9)
        sgdm_step(p, g, v, cfg, decay=False)
        assert v[0] == pytest.approx(-0.11) and p[0] == pytest.approx(0.79)

    def test_velocity_decays_geometrically(self):
        p = np.array([0.0], dtype=np.float32)
        v = np.array([1.0], dtype=np.float32)
        g = np.zeros(1, dtype=np.float32)
        cfg = self.cfg(momentum=0.5)
        for k in range(1, 6):
            sgdm_step(p, g, v, cfg, decay=False)
            assert v[0] == pytest.approx(0.5 ** k)

    def test_l2_applies_to_weights_only(self):
        cfg = self.cfg(momentum=0.0, l2=0.01)
        w = np.array([2.0], dtype=np.float32)
        b = np.array([2.0], dtype=np.float32)
        zero = np.zeros(1, dtype=np.float32)
        sgdm_step(w, zero.copy(), np.zeros(1, np.float32), cfg, decay=True)
        sgdm_step(b, zero.copy(), np.zeros(1, np.float32), cfg, decay=False)
        assert w[0] == pytest.approx(2.0 - 0.1 * 0.01 * 2.0)
        assert b[0] == 2.0


def test_gradcheck_full_suite_passes():
    reports, elapsed = run_all(seed=555, trials=10)
    for r in reports:
        assert r.passed, f"{r.layer}: {r.worst_rel_error:.3e}"
        assert r.configs >= 10
    assert elapsed < 60
