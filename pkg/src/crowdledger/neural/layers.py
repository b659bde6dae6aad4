"""Trainable layers with hand-written backward passes, float64 throughout.

The layer inventory is exactly what the two classifiers need: dense,
embedding, 1-D convolution, max-pool, dropout, LSTM and tanh/sigmoid
activations, plus a flatten adapter and MSE loss.  Every layer caches its
forward activations and consumes an upstream gradient in ``backward``,
returning the input gradient; parameter gradients accumulate on the
``Parameter`` holders until the optimizer clears them.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from crowdledger.neural import backend


class NeuralError(Exception):
    pass


class ShapeMismatchError(NeuralError):
    pass


class NoForwardCacheError(NeuralError):
    pass


class Parameter:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Parameter]:
        return []

    def _require_cache(self, cache):
        if cache is None:
            raise NoForwardCacheError(f"{type(self).__name__}.backward before forward")
        return cache


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(0)
        self.w = Parameter("w", glorot_uniform(rng, n_in, n_out, (n_in, n_out)))
        self.b = Parameter("b", np.zeros(n_out))
        self._x = None

    def forward(self, x, training=False):
        if x.shape[-1] != self.w.value.shape[0]:
            raise ShapeMismatchError(
                f"dense expects {self.w.value.shape[0]} inputs, got {x.shape[-1]}"
            )
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy):
        x = self._require_cache(self._x)
        self.w.grad += x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T

    def params(self):
        return [self.w, self.b]


class Embedding(Layer):
    """Id lookup table.  Input (B, T) int ids -> (B, T, dim).

    An optional (B, T) mask zeroes padded positions in both directions, so
    no gradient flows into any table row for a padded slot.
    """

    def __init__(self, vocab: int, dim: int, rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(0)
        self.table = Parameter("table", glorot_uniform(rng, vocab, dim, (vocab, dim)))
        self._cache = None

    @property
    def vocab(self) -> int:
        return self.table.value.shape[0]

    def forward(self, ids, training=False, mask: Optional[np.ndarray] = None):
        ids = np.asarray(ids)
        if ids.min(initial=0) < 0 or ids.max(initial=0) >= self.vocab:
            raise ShapeMismatchError(f"ids out of range [0, {self.vocab})")
        out = self.table.value[ids]
        if mask is not None:
            out = out * mask[..., None]
        self._cache = (ids, mask)
        return out

    def backward(self, dy):
        ids, mask = self._require_cache(self._cache)
        if mask is not None:
            dy = dy * mask[..., None]
        np.add.at(self.table.grad, ids.reshape(-1), dy.reshape(-1, dy.shape[-1]))
        return np.zeros(ids.shape + (self.table.value.shape[1],))

    def params(self):
        return [self.table]


class Conv1D(Layer):
    """Valid (no-padding) convolution along the time axis."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel
        self.w = Parameter("w", glorot_uniform(rng, fan_in, out_channels,
                                               (out_channels, kernel, in_channels)))
        self.b = Parameter("b", np.zeros(out_channels))
        self.kernel = kernel
        self._x = None

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[2] != self.w.value.shape[2]:
            raise ShapeMismatchError(
                f"conv1d expects (B, T, {self.w.value.shape[2]}), got {x.shape}"
            )
        if x.shape[1] < self.kernel:
            raise ShapeMismatchError(f"sequence length {x.shape[1]} < kernel {self.kernel}")
        self._x = np.ascontiguousarray(x)
        return backend.conv1d_forward(self._x, self.w.value, self.b.value)

    def backward(self, dy):
        x = self._require_cache(self._x)
        dx, dw, db = backend.conv1d_backward(x, self.w.value, np.ascontiguousarray(dy))
        self.w.grad += dw
        self.b.grad += db
        return dx

    def params(self):
        return [self.w, self.b]


class MaxPool1D(Layer):
    """Non-overlapping max pooling along time; ties go to the first index."""

    def __init__(self, width: int):
        self.width = width
        self._cache = None

    def forward(self, x, training=False):
        b, t, c = x.shape
        t_out = t // self.width
        if t_out == 0:
            raise ShapeMismatchError(f"sequence length {t} < pool width {self.width}")
        trimmed = x[:, : t_out * self.width, :].reshape(b, t_out, self.width, c)
        arg = trimmed.argmax(axis=2)
        self._cache = (x.shape, arg)
        return np.take_along_axis(trimmed, arg[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, dy):
        shape, arg = self._require_cache(self._cache)
        b, t, c = shape
        t_out = dy.shape[1]
        dx = np.zeros((b, t_out, self.width, c))
        np.put_along_axis(dx, arg[:, :, None, :], dy[:, :, None, :], axis=2)
        out = np.zeros(shape)
        out[:, : t_out * self.width, :] = dx.reshape(b, t_out * self.width, c)
        return out


class Dropout(Layer):
    """Inverted dropout: active only in training mode."""

    def __init__(self, rate: float, rng: Optional[np.random.Generator] = None):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng or np.random.default_rng(0)
        self._mask = None

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = 1.0
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dy):
        mask = self._require_cache(self._mask)
        return dy * mask


class LSTM(Layer):
    """Standard gated recurrence over (B, T, D); zero initial state.

    ``return_sequences`` keeps the full (B, T, H) output, otherwise only the
    final hidden state (B, H) is produced and upstream gradient is routed to
    the last step.
    """

    def __init__(self, n_in: int, hidden: int, return_sequences: bool = False,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(0)
        self.wx = Parameter("wx", glorot_uniform(rng, n_in, hidden, (n_in, 4 * hidden)))
        self.wh = Parameter("wh", glorot_uniform(rng, hidden, hidden, (hidden, 4 * hidden)))
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0  # forget gate starts open
        self.b = Parameter("b", bias)
        self.hidden = hidden
        self.return_sequences = return_sequences
        self._cache = None

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[2] != self.wx.value.shape[0]:
            raise ShapeMismatchError(
                f"lstm expects (B, T, {self.wx.value.shape[0]}), got {x.shape}"
            )
        x = np.ascontiguousarray(x)
        h, c, gates = backend.lstm_forward(x, self.wx.value, self.wh.value, self.b.value)
        self._cache = (x, h, c, gates)
        return h if self.return_sequences else h[:, -1, :]

    def backward(self, dy):
        x, h, c, gates = self._require_cache(self._cache)
        if self.return_sequences:
            dh = np.ascontiguousarray(dy)
        else:
            dh = np.zeros_like(h)
            dh[:, -1, :] = dy
        dx, dwx, dwh, db = backend.lstm_backward(
            x, self.wx.value, self.wh.value, h, c, gates, dh
        )
        self.wx.grad += dwx
        self.wh.grad += dwh
        self.b.grad += db
        return dx

    def params(self):
        return [self.wx, self.wh, self.b]


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, training=False):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        y = self._require_cache(self._y)
        return dy * (1.0 - y * y)


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, training=False):
        self._y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                           np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        return self._y

    def backward(self, dy):
        y = self._require_cache(self._y)
        return dy * y * (1.0 - y)


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        shape = self._require_cache(self._shape)
        return dy.reshape(shape)


class Sequential(Layer):
    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size
