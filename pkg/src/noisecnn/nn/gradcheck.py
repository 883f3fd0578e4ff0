"""Central finite-difference checks of the analytic gradients."""

from __future__ import annotations

import numpy as np

from noisecnn.nn.layers import Layer, softmax_cross_entropy
from noisecnn.nn.model import Network

STEP = 1e-5
# below this magnitude both gradients are treated as absolute errors
ABS_FLOOR = 1e-6


def numeric_grad(f, arr: np.ndarray, h: float = STEP) -> np.ndarray:
    """d f() / d arr by central differences, perturbing ``arr`` in place."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f()
        flat[i] = keep - h
        down = f()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, ABS_FLOOR)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), ABS_FLOOR)
    return float(np.max(np.abs(a - n) / denom))


def check_layer(layer: Layer, x: np.ndarray, gen: np.random.Generator, h: float = STEP) -> dict[str, float]:
    """Errors for the input and every parameter of ``layer`` under loss = sum(out * R)."""
    x = np.array(x, dtype=np.float64)
    proj = gen.standard_normal(layer.forward(x).shape)

    def loss():
        return float(np.sum(layer.forward(x) * proj))

    layer.forward(x)
    dx = layer.backward(proj)
    errors = {"input": relative_error(dx, numeric_grad(loss, x, h))}
    analytic = {k: v.copy() for k, v in layer.grads.items()}
    for name, p in layer.params.items():
        errors[name] = relative_error(analytic[name], numeric_grad(loss, p, h))
    return errors


def check_softmax_ce(logits: np.ndarray, labels: np.ndarray, h: float = STEP) -> float:
    logits = np.array(logits, dtype=np.float64)
    _, grad = softmax_cross_entropy(logits, labels)
    num = numeric_grad(lambda: softmax_cross_entropy(logits, labels)[0], logits, h)
    return relative_error(grad, num)


def check_network(net: Network, x: np.ndarray, labels: np.ndarray, h: float = STEP) -> dict[str, float]:
    """Errors for every named parameter of ``net`` under mean cross-entropy."""
    _, grads = net.loss_and_grads(x, labels)
    analytic = {k: v.copy() for k, v in grads.items()}
    params = net.named_params()

    def loss():
        return softmax_cross_entropy(net.forward(x), labels)[0]

    return {name: relative_error(analytic[name], numeric_grad(loss, p, h)) for name, p in params.items()}
