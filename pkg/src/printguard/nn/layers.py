"""Network layers with hand-derived backward passes.

All layers share the same conventions: activations are (batch, height,
width, channels) or (batch, features) arrays, parameters live on the layer
as `dtype` arrays, and backward() consumes the upstream gradient and both
returns the input gradient and fills the layer's parameter gradients.
Convolution uses valid padding, stride 1, and the cross-correlation
convention (no kernel flip).

`dtype` is float32 for production training; the gradient-check suite runs
the same code at float64 where finite differences are clean.
"""

from __future__ import annotations

import numpy as np

from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    """Interface: forward/backward plus (name, param, grad, decay) tuples."""

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[tuple[str, np.ndarray, np.ndarray, bool]]:
        return []

    def release_cache(self) -> None:
        pass


class Conv2D(Layer):
    """Valid-padding stride-1 cross-correlation, filters (fh, fw, cin, cout).

    Forward and filter gradients are row-band matmuls over width-window
    views (an im2col split by filter row, which keeps the scratch small);
    the input gradient accumulates shifted outer products per filter tap.
    """

    def __init__(self, name: str, fh: int, fw: int, cin: int, cout: int,
                 dtype=np.float32):
        self.name = name
        self.fh, self.fw, self.cin, self.cout = fh, fw, cin, cout
        self.dtype = np.dtype(dtype)
        self.w = np.zeros((fh, fw, cin, cout), dtype=self.dtype)
        self.b = np.zeros(cout, dtype=self.dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None
        self._cols = None

    def out_shape(self, h: int, w: int) -> tuple[int, int, int]:
        oh, ow = h - self.fh + 1, w - self.fw + 1
        if oh <= 0 or ow <= 0:
            raise ValueError(f"{self.name}: {self.fh}x{self.fw} filter does not "
                             f"fit inside {h}x{w} input")
        return oh, ow, self.cout

    def _row_cols(self, x: np.ndarray, di: int, oh: int, ow: int) -> np.ndarray:
        # (N, oh, ow, cin, fw) window view -> (N*oh*ow, cin*fw) matrix
        v = sliding_window_view(x[:, di:di + oh], self.fw, axis=2)
        return v.reshape(-1, self.cin * self.fw)

    def _row_weight(self, di: int) -> np.ndarray:
        return self.w[di].transpose(1, 0, 2).reshape(self.cin * self.fw, self.cout)

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim != 4 or x.shape[3] != self.cin:
            raise ValueError(f"{self.name}: expected (n, h, w, {self.cin}) input, "
                             f"got {x.shape}")
        n, h, w, _ = x.shape
        oh, ow, _ = self.out_shape(h, w)
        out = np.zeros((n, oh, ow, self.cout), dtype=self.dtype)
        flat = out.reshape(-1, self.cout)
        cols = []
        for di in range(self.fh):
            c = self._row_cols(x, di, oh, ow)
            flat += c @ self._row_weight(di)
            if train:
                cols.append(c)
        out += self.b
        self._x = x if train else None
        self._cols = cols if train else None
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, cols = self._x, self._cols
        if x is None:
            raise RuntimeError(f"{self.name}: backward before training forward")
        n, h, w, _ = x.shape
        oh, ow = dy.shape[1], dy.shape[2]
        dy = np.ascontiguousarray(dy, dtype=self.dtype)
        dy_flat = dy.reshape(-1, self.cout)

        self.gb[:] = dy_flat.sum(axis=0)
        for di in range(self.fh):
            gw_row = cols[di].T @ dy_flat                       # (cin*fw, cout)
            self.gw[di] = gw_row.reshape(self.cin, self.fw, self.cout
                                         ).transpose(1, 0, 2)

        dx = np.zeros_like(x)
        for di in range(self.fh):
            for dj in range(self.fw):
                dx[:, di:di + oh, dj:dj + ow, :] += dy @ self.w[di, dj].T
        return dx

    def params(self):
        return [(f"{self.name}.w", self.w, self.gw, True),
                (f"{self.name}.b", self.b, self.gb, False)]

    def release_cache(self):
        self._x = None
        self._cols = None


class BatchNorm(Layer):
    """Per-channel batch normalization over (batch, spatial) positions.

    Training uses biased batch variance and updates running statistics with
    factor 0.1; inference normalizes with the running statistics.
    """

    def __init__(self, name: str, channels: int, eps: float = 1e-5,
                 momentum: float = 0.1, dtype=np.float32):
        self.name = name
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.dtype = np.dtype(dtype)
        self.gamma = np.ones(channels, dtype=self.dtype)
        self.beta = np.zeros(channels, dtype=self.dtype)
        self.running_mean = np.zeros(channels, dtype=self.dtype)
        self.running_var = np.ones(channels, dtype=self.dtype)
        self.g_gamma = np.zeros_like(self.gamma)
        self.g_beta = np.zeros_like(self.beta)
        self._cache = None

    def _axes(self, x: np.ndarray) -> tuple:
        return tuple(range(x.ndim - 1))

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.channels:
            raise ValueError(f"{self.name}: expected {self.channels} channels, "
                             f"got shape {x.shape}")
        axes = self._axes(x)
        if train:
            if x.shape[0] < 2:
                raise ValueError(f"{self.name}: training needs batch size >= 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)  # biased
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            self.running_mean[:] = ((1 - self.momentum) * self.running_mean
                                    + self.momentum * mean)
            self.running_var[:] = ((1 - self.momentum) * self.running_var
                                   + self.momentum * var)
            self._cache = (xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var.astype(self.dtype) + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = None
        return self.gamma * xhat + self.beta

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward before training forward")
        xhat, inv_std = self._cache
        axes = self._axes(dy)
        dy = np.asarray(dy, dtype=self.dtype)
        self.g_beta[:] = dy.sum(axis=axes)
        self.g_gamma[:] = (dy * xhat).sum(axis=axes)
        dxhat = dy * self.gamma
        # Full gradient through the batch mean and variance.
        return inv_std * (dxhat
                          - dxhat.mean(axis=axes)
                          - xhat * (dxhat * xhat).mean(axis=axes))

    def params(self):
        return [(f"{self.name}.gamma", self.gamma, self.g_gamma, False),
                (f"{self.name}.beta", self.beta, self.g_beta, False)]

    def state(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{self.name}.mean", self.running_mean),
                (f"{self.name}.var", self.running_var)]

    def release_cache(self):
        self._cache = None


class MaxPool(Layer):
    """Window-max with full stride; trailing rows/cols are dropped (floor)."""

    def __init__(self, window: int = 3, stride: int | None = None):
        self.window = window
        self.stride = stride or window
        if self.stride != self.window:
            raise ValueError("only full-stride pooling is supported")
        self._cache = None

    def out_shape(self, h: int, w: int, c: int) -> tuple[int, int, int]:
        return h // self.window, w // self.window, c

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        n, h, w, c = x.shape
        k = self.window
        oh, ow = h // k, w // k
        win = (x[:, :oh * k, :ow * k, :]
               .reshape(n, oh, k, ow, k, c)
               .transpose(0, 1, 3, 5, 2, 4)
               .reshape(n, oh, ow, c, k * k))
        # argmax ties resolve to the first element in the window's row-major scan
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, idx) if train else None
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("maxpool: backward before training forward")
        (n, h, w, c), idx = self._cache
        k = self.window
        oh, ow = h // k, w // k
        dwin = np.zeros((n, oh, ow, c, k * k), dtype=dy.dtype)
        np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
        dx = np.zeros((n, h, w, c), dtype=dy.dtype)
        dx[:, :oh * k, :ow * k, :] = (dwin
                                      .reshape(n, oh, ow, c, k, k)
                                      .transpose(0, 1, 4, 2, 5, 3)
                                      .reshape(n, oh * k, ow * k, c))
        return dx

    def release_cache(self):
        self._cache = None


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        out = np.maximum(x, 0)
        self._mask = x > 0 if train else None  # gradient at exactly 0 is 0
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("relu: backward before training forward")
        return dy * self._mask

    def release_cache(self):
        self._mask = None


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)


class Dense(Layer):
    """Affine map: out = x @ w + b, weights (n_in, n_out)."""

    def __init__(self, name: str, n_in: int, n_out: int, dtype=np.float32):
        self.name = name
        self.n_in, self.n_out = n_in, n_out
        self.dtype = np.dtype(dtype)
        self.w = np.zeros((n_in, n_out), dtype=self.dtype)
        self.b = np.zeros(n_out, dtype=self.dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"{self.name}: expected (n, {self.n_in}) input, "
                             f"got {x.shape}")
        self._x = x if train else None
        return x @ self.w + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError(f"{self.name}: backward before training forward")
        dy = np.asarray(dy, dtype=self.dtype)
        self.gw[:] = self._x.T @ dy
        self.gb[:] = dy.sum(axis=0)
        return dy @ self.w.T

    def params(self):
        return [(f"{self.name}.w", self.w, self.gw, True),
                (f"{self.name}.b", self.b, self.gb, False)]

    def release_cache(self):
        self._x = None


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_crossentropy(logits: np.ndarray, labels: np.ndarray
                         ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    The gradient already carries the 1/n factor of the mean.
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    if not np.isfinite(logits).all():
        raise ValueError("non-finite logits")
    n = logits.shape[0]
    p = softmax(logits.astype(np.float64))
    picked = p[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    grad = p
    grad[np.arange(n), labels] -= 1.0
    return loss, (grad / n).astype(logits.dtype)
