"""Layer kinds for the 1D network, each with a forward pass and analytic backward pass.

Arrays are batched feature maps of shape ``(N, C, L)`` in float64.  Every
layer caches what it needs during ``forward`` and writes parameter gradients
into ``self.grads`` during ``backward``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

CONV1D = "CONV1D"
SEPCONV1D = "SEPCONV1D"
RELU = "RELU"
MAXPOOL1D = "MAXPOOL1D"
GLOBALAVGPOOL = "GLOBALAVGPOOL"
DENSE = "DENSE"
SOFTMAX = "SOFTMAX"

LAYER_KINDS = (CONV1D, SEPCONV1D, RELU, MAXPOOL1D, GLOBALAVGPOOL, DENSE, SOFTMAX)


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: int = 1
    out_channels: int = 0
    stride: int = 1
    padding: str = "SAME"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.padding not in ("SAME", "VALID"):
            raise ValueError(f"unknown padding {self.padding!r}")
        if self.kind in (CONV1D, SEPCONV1D, MAXPOOL1D) and self.kernel < 1:
            raise ValueError("kernel must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.kind == MAXPOOL1D and self.stride != self.kernel:
            raise ValueError("max-pool window must have kernel == stride")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def output_geometry(length: int, kernel: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Return ``(out_length, pad_left, pad_right)`` for a 1D sliding window.

    SAME keeps ``ceil(length / stride)`` outputs, splitting any padding with the
    extra sample on the right.  VALID uses no padding.
    """
    if padding == "SAME":
        out = -(-length // stride)
        total = max((out - 1) * stride + kernel - length, 0)
        return out, total // 2, total - total // 2
    if length < kernel:
        raise ShapeError(f"VALID window of {kernel} does not fit length {length}")
    return (length - kernel) // stride + 1, 0, 0


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ShapeError(f"expected (C, L) or (N, C, L) input, got shape {x.shape}")
    return x, False


def _patches(x: np.ndarray, kernel: int, stride: int, padding: str):
    n, c, length = x.shape
    out, left, right = output_geometry(length, kernel, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x
    view = sliding_window_view(xp, kernel, axis=2)[:, :, : (out - 1) * stride + 1 : stride]
    return view, xp.shape[2], left


def _scatter_taps(taps: np.ndarray, padded_len: int, left: int, length: int, stride: int) -> np.ndarray:
    # taps: (N, C, out, k) contributions to each padded input position
    n, c, out, k = taps.shape
    dxp = np.zeros((n, c, padded_len))
    span = (out - 1) * stride + 1
    for j in range(k):
        dxp[:, :, j : j + span : stride] += taps[:, :, :, j]
    return dxp[:, :, left : left + length]


def conv1d_forward(x, weights, bias, stride: int = 1, padding: str = "SAME") -> np.ndarray:
    """Cross-correlation ``out[o, t] = b[o] + sum_{c,j} w[o, c, j] * in[c, t*stride + j - pad]``.

    ``x`` may be a single ``(C, L)`` feature map or a batch ``(N, C, L)``.
    """
    x, single = _as_batch(x)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 3 or w.shape[1] != x.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"weights {w.shape} / bias {b.shape} do not match input channels {x.shape[1]}")
    patches, _, _ = _patches(x, w.shape[2], stride, padding)
    y = np.tensordot(patches, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1) + b[None, :, None]
    return y[0] if single else y


def sepconv1d_forward(x, depthwise, pointwise, depthwise_bias=None, pointwise_bias=None,
                      stride: int = 1, padding: str = "SAME") -> np.ndarray:
    """Depthwise per-channel filtering followed by a 1x1 channel mix."""
    x, single = _as_batch(x)
    d = np.asarray(depthwise, dtype=np.float64)
    p = np.asarray(pointwise, dtype=np.float64)
    c = x.shape[1]
    bd = np.zeros(c) if depthwise_bias is None else np.asarray(depthwise_bias, dtype=np.float64)
    bp = np.zeros(p.shape[0]) if pointwise_bias is None else np.asarray(pointwise_bias, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != c or p.ndim != 2 or p.shape[1] != c:
        raise ShapeError(f"depthwise {d.shape} / pointwise {p.shape} do not match {c} input channels")
    if bd.shape != (c,) or bp.shape != (p.shape[0],):
        raise ShapeError("bias shapes do not match")
    patches, _, _ = _patches(x, d.shape[1], stride, padding)
    h = np.einsum("nclk,ck->ncl", patches, d) + bd[None, :, None]
    y = np.matmul(p, h) + bp[None, :, None]
    return y[0] if single else y


def conv_param_count(kernel: int, c_in: int, c_out: int) -> int:
    return kernel * c_in * c_out + c_out


def sepconv_param_count(kernel: int, c_in: int, c_out: int) -> int:
    return kernel * c_in + c_in + c_in * c_out + c_out


def _kaiming_uniform(gen: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return gen.uniform(-bound, bound, size=shape)


class Layer:
    kind = ""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv1D(Layer):
    kind = CONV1D

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding="SAME", gen=None):
        super().__init__()
        self.stride, self.padding = stride, padding
        gen = gen if gen is not None else np.random.default_rng(0)
        self.params["w"] = _kaiming_uniform(gen, (out_channels, in_channels, kernel), in_channels * kernel)
        self.params["b"] = np.zeros(out_channels)

    def output_shape(self, in_shape):
        c, length = in_shape
        out, _, _ = output_geometry(length, self.params["w"].shape[2], self.stride, self.padding)
        return (self.params["w"].shape[0], out)

    def forward(self, x):
        w, b = self.params["w"], self.params["b"]
        patches, padded_len, left = _patches(x, w.shape[2], self.stride, self.padding)
        self._cache = (patches, padded_len, left, x.shape[2])
        return np.tensordot(patches, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1) + b[None, :, None]

    def backward(self, grad):
        patches, padded_len, left, length = self._cache
        w = self.params["w"]
        self.grads["w"] = np.tensordot(grad, patches, axes=([0, 2], [0, 2]))
        self.grads["b"] = grad.sum(axis=(0, 2))
        # (N, out, C, k) -> (N, C, out, k)
        taps = np.tensordot(grad, w, axes=([1], [0])).transpose(0, 2, 1, 3)
        return _scatter_taps(taps, padded_len, left, length, self.stride)


class SepConv1D(Layer):
    kind = SEPCONV1D

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding="SAME", gen=None):
        super().__init__()
        self.stride, self.padding = stride, padding
        gen = gen if gen is not None else np.random.default_rng(0)
        self.params["depthwise"] = _kaiming_uniform(gen, (in_channels, kernel), kernel)
        self.params["depthwise_b"] = np.zeros(in_channels)
        self.params["pointwise"] = _kaiming_uniform(gen, (out_channels, in_channels), in_channels)
        self.params["pointwise_b"] = np.zeros(out_channels)

    def output_shape(self, in_shape):
        c, length = in_shape
        out, _, _ = output_geometry(length, self.params["depthwise"].shape[1], self.stride, self.padding)
        return (self.params["pointwise"].shape[0], out)

    def forward(self, x):
        d, p = self.params["depthwise"], self.params["pointwise"]
        patches, padded_len, left = _patches(x, d.shape[1], self.stride, self.padding)
        h = np.einsum("nclk,ck->ncl", patches, d) + self.params["depthwise_b"][None, :, None]
        self._cache = (patches, h, padded_len, left, x.shape[2])
        return np.matmul(p, h) + self.params["pointwise_b"][None, :, None]

    def backward(self, grad):
        patches, h, padded_len, left, length = self._cache
        d, p = self.params["depthwise"], self.params["pointwise"]
        self.grads["pointwise"] = np.einsum("nol,ncl->oc", grad, h)
        self.grads["pointwise_b"] = grad.sum(axis=(0, 2))
        gh = np.matmul(p.T, grad)
        self.grads["depthwise"] = np.einsum("ncl,nclk->ck", gh, patches)
        self.grads["depthwise_b"] = gh.sum(axis=(0, 2))
        taps = gh[:, :, :, None] * d[None, :, None, :]
        return _scatter_taps(taps, padded_len, left, length, self.stride)


class ReLU(Layer):
    kind = RELU

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0.0)


class MaxPool1D(Layer):
    """Non-overlapping max pooling; trailing samples that do not fill a window are dropped."""

    kind = MAXPOOL1D

    def __init__(self, size):
        super().__init__()
        self.size = size

    def output_shape(self, in_shape):
        c, length = in_shape
        if length < self.size:
            raise ShapeError(f"pool window {self.size} exceeds length {length}")
        return (c, length // self.size)

    def forward(self, x):
        n, c, length = x.shape
        out = length // self.size
        blocks = x[:, :, : out * self.size].reshape(n, c, out, self.size)
        # argmax returns the first maximum, which is the tie rule
        idx = blocks.argmax(axis=3)
        self._cache = (idx, x.shape)
        return np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]

    def backward(self, grad):
        idx, shape = self._cache
        n, c, length = shape
        out = grad.shape[2]
        blocks = np.zeros((n, c, out, self.size))
        np.put_along_axis(blocks, idx[..., None], grad[..., None], axis=3)
        dx = np.zeros(shape)
        dx[:, :, : out * self.size] = blocks.reshape(n, c, out * self.size)
        return dx


class GlobalAvgPool(Layer):
    kind = GLOBALAVGPOOL

    def output_shape(self, in_shape):
        return (in_shape[0],)

    def forward(self, x):
        self._length = x.shape[2]
        return x.mean(axis=2)

    def backward(self, grad):
        return np.repeat(grad[:, :, None] / self._length, self._length, axis=2)


class Dense(Layer):
    kind = DENSE

    def __init__(self, in_features, out_features, gen=None):
        super().__init__()
        gen = gen if gen is not None else np.random.default_rng(0)
        self.params["w"] = _kaiming_uniform(gen, (out_features, in_features), in_features)
        self.params["b"] = np.zeros(out_features)

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.params["w"].shape[1]:
            raise ShapeError(f"dense layer expects {self.params['w'].shape[1]} features, got {in_shape}")
        return (self.params["w"].shape[0],)

    def forward(self, x):
        self._shape = x.shape
        self._x = x.reshape(x.shape[0], -1)
        return self._x @ self.params["w"].T + self.params["b"]

    def backward(self, grad):
        self.grads["w"] = grad.T @ self._x
        self.grads["b"] = grad.sum(axis=0)
        return (grad @ self.params["w"]).reshape(self._shape)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient with respect to the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def build_layer(spec: LayerSpec, in_shape: tuple[int, ...], gen: np.random.Generator) -> Layer | None:
    """Instantiate ``spec`` for an input of ``in_shape``; SOFTMAX is folded into the loss."""
    if spec.kind == CONV1D:
        return Conv1D(in_shape[0], spec.out_channels, spec.kernel, spec.stride, spec.padding, gen)
    if spec.kind == SEPCONV1D:
        return SepConv1D(in_shape[0], spec.out_channels, spec.kernel, spec.stride, spec.padding, gen)
    if spec.kind == RELU:
        return ReLU()
    if spec.kind == MAXPOOL1D:
        return MaxPool1D(spec.kernel)
    if spec.kind == GLOBALAVGPOOL:
        return GlobalAvgPool()
    if spec.kind == DENSE:
        return Dense(int(np.prod(in_shape)), spec.out_channels, gen)
    return None
