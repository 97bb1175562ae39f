"""Finite-difference verification of every layer's backward pass.

Each layer is probed with the scalar L = sum(G * f(x)) for a random G; the
analytic gradient from backward(G) is compared elementwise against central
differences. Probe tensors hold float32 values (the production storage
type) while the layers run at float64 so the differences measure the math,
not accumulation noise; the effective step is recomputed from the stored
perturbed values. Inputs near ReLU/pool kinks are nudged away so the
divided difference stays on one linear piece.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..core import Rng
from .layers import BatchNorm, Conv2D, Dense, MaxPool, ReLU, softmax_crossentropy

FD_STEP = 1e-3
REL_TOLERANCE = 1e-4
CONFIGS_PER_LAYER = 10


def _rand(rng: Rng, shape, scale=1.0) -> np.ndarray:
    out = np.empty(int(np.prod(shape)), dtype=np.float64)
    for i in range(out.size):
        out[i] = rng.normal(0.0, scale)
    return out.reshape(shape).astype(np.float32).astype(np.float64)


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float((num / den).max())


def fd_gradient(fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar fn at x, elementwise, exact-step form."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        hi = np.float32(orig + step)
        lo = np.float32(orig - step)
        flat[i] = hi
        f_hi = fn()
        flat[i] = lo
        f_lo = fn()
        flat[i] = orig
        gflat[i] = (f_hi - f_lo) / (float(hi) - float(lo))
    return grad


@dataclass
class LayerReport:
    layer: str
    worst_rel_error: float
    configs: int

    @property
    def passed(self) -> bool:
        return self.worst_rel_error < REL_TOLERANCE


def _check_tensors(layer, x, g, tensors) -> float:
    """Worst relative error across the listed (array, analytic-grad) pairs."""
    def loss() -> float:
        return float((g * layer.forward(x, train=True)).sum())

    loss()  # populate caches
    dx = layer.backward(g)
    worst = 0.0
    analytic = {"input": dx}
    analytic.update({name: grad.copy() for name, _, grad, _ in layer.params()})
    for name, arr in tensors:
        fd = fd_gradient(loss, arr)
        worst = max(worst, rel_error(np.asarray(analytic[name], dtype=np.float64), fd))
    return worst


def check_conv(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        n = 1 + rng.next_below(3)
        fh, fw = 1 + rng.next_below(4), 1 + rng.next_below(4)
        cin, cout = 1 + rng.next_below(3), 1 + rng.next_below(3)
        h, w = fh + rng.next_below(5), fw + rng.next_below(5)
        layer = Conv2D("conv", fh, fw, cin, cout, dtype=np.float64)
        layer.w[:] = _rand(rng, layer.w.shape, 0.5)
        layer.b[:] = _rand(rng, layer.b.shape, 0.5)
        x = _rand(rng, (n, h, w, cin))
        g = _rand(rng, (n, h - fh + 1, w - fw + 1, cout))
        worst = max(worst, _check_tensors(
            layer, x, g,
            [("input", x), ("conv.w", layer.w), ("conv.b", layer.b)]))
    return LayerReport("conv2d", worst, trials)


def check_dense(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        n = 1 + rng.next_below(5)
        n_in, n_out = 1 + rng.next_below(12), 1 + rng.next_below(8)
        layer = Dense("dense", n_in, n_out, dtype=np.float64)
        layer.w[:] = _rand(rng, layer.w.shape, 0.5)
        layer.b[:] = _rand(rng, layer.b.shape, 0.5)
        x = _rand(rng, (n, n_in))
        g = _rand(rng, (n, n_out))
        worst = max(worst, _check_tensors(
            layer, x, g,
            [("input", x), ("dense.w", layer.w), ("dense.b", layer.b)]))
    return LayerReport("dense", worst, trials)


def check_batchnorm(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        n = 2 + rng.next_below(4)
        c = 1 + rng.next_below(4)
        spatial = rng.next_below(2)  # vector or image activations
        shape = (n, 2 + rng.next_below(3), 2 + rng.next_below(3), c) if spatial \
            else (n, c)
        x = _rand(rng, shape)
        g = _rand(rng, shape)
        layer = BatchNorm("bn", c, dtype=np.float64)
        layer.gamma[:] = _rand(rng, (c,), 0.5) + 1.0
        layer.beta[:] = _rand(rng, (c,), 0.5)

        def probe() -> float:
            # running stats are training side effects; reset so the probe is pure
            layer.running_mean[:] = 0
            layer.running_var[:] = 1
            return float((g * layer.forward(x, train=True)).sum())

        probe()
        dx = layer.backward(g)
        analytic = {"input": dx, "bn.gamma": layer.g_gamma.copy(),
                    "bn.beta": layer.g_beta.copy()}
        for name, arr in (("input", x), ("bn.gamma", layer.gamma),
                          ("bn.beta", layer.beta)):
            fd = fd_gradient(probe, arr)
            worst = max(worst, rel_error(np.asarray(analytic[name]), fd))
    return LayerReport("batchnorm", worst, trials)


def _clear_of_kinks(x: np.ndarray, margin: float) -> np.ndarray:
    """Push values away from 0 so +-step stays on one side."""
    sign = np.where(x >= 0, 1.0, -1.0)
    return np.where(np.abs(x) < margin, sign * margin, x)


def check_relu(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        shape = (1 + rng.next_below(3), 1 + rng.next_below(10))
        x = _clear_of_kinks(_rand(rng, shape), 4 * FD_STEP)
        g = _rand(rng, shape)
        layer = ReLU()
        worst = max(worst, _check_tensors(layer, x, g, [("input", x)]))
    return LayerReport("relu", worst, trials)


def check_maxpool(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        n, c = 1 + rng.next_below(2), 1 + rng.next_below(3)
        h = 3 * (1 + rng.next_below(3)) + rng.next_below(2)
        w = 3 * (1 + rng.next_below(3)) + rng.next_below(2)
        # globally distinct values with gaps > 2*step: no argmax can flip
        size = n * h * w * c
        values = (np.arange(size) - size / 2) * (8 * FD_STEP)
        rng.shuffle(values)
        x = values.reshape(n, h, w, c).astype(np.float32).astype(np.float64)
        layer = MaxPool(3)
        g = _rand(rng, (n,) + layer.out_shape(h, w, c))
        worst = max(worst, _check_tensors(layer, x, g, [("input", x)]))
    return LayerReport("maxpool", worst, trials)


def check_softmax_xent(rng: Rng, trials: int = CONFIGS_PER_LAYER) -> LayerReport:
    worst = 0.0
    for _ in range(trials):
        n = 1 + rng.next_below(6)
        logits = _rand(rng, (n, 2), 2.0)
        labels = np.array([rng.next_below(2) for _ in range(n)])

        def loss() -> float:
            return softmax_crossentropy(logits, labels)[0]

        _, analytic = softmax_crossentropy(logits, labels)
        fd = fd_gradient(loss, logits)
        worst = max(worst, rel_error(np.asarray(analytic, dtype=np.float64), fd))
    return LayerReport("softmax_crossentropy", worst, trials)


def run_all(seed: int = 2024, trials: int = CONFIGS_PER_LAYER
            ) -> tuple[list[LayerReport], float]:
    """Every layer's finite-difference suite; returns reports and wall time."""
    start = time.time()
    rng = Rng(seed, stream=11)
    reports = [
        check_conv(rng, trials),
        check_dense(rng, trials),
        check_batchnorm(rng, trials),
        check_relu(rng, trials),
        check_maxpool(rng, trials),
        check_softmax_xent(rng, trials),
    ]
    return reports, time.time() - start
