"""Sequential network built from a list of ``LayerSpec`` plus the two shipped presets."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from noisecnn import rng
from noisecnn.nn.layers import (
    CONV1D,
    DENSE,
    GLOBALAVGPOOL,
    MAXPOOL1D,
    RELU,
    SEPCONV1D,
    SOFTMAX,
    LayerSpec,
    ShapeError,
    build_layer,
    softmax,
    softmax_cross_entropy,
)

CHECKPOINT_FORMAT = "noisecnn-checkpoint"
CHECKPOINT_VERSION = 1


def preset(classifier: str, num_classes: int) -> list[LayerSpec]:
    """Two-block 1D CNN; ``SEPCNN`` swaps every convolution for its separable form."""
    conv = {"CNN": CONV1D, "SEPCNN": SEPCONV1D}[classifier]
    return [
        LayerSpec(conv, kernel=16, out_channels=16, padding="SAME"),
        LayerSpec(RELU),
        LayerSpec(MAXPOOL1D, kernel=4, stride=4),
        LayerSpec(conv, kernel=16, out_channels=32, padding="SAME"),
        LayerSpec(RELU),
        LayerSpec(MAXPOOL1D, kernel=4, stride=4),
        LayerSpec(GLOBALAVGPOOL),
        LayerSpec(DENSE, out_channels=num_classes),
        LayerSpec(SOFTMAX),
    ]


class Network:
    """Layers in sequence; the trailing SOFTMAX is applied inside the loss and ``predict_proba``."""

    def __init__(self, arch, input_shape: tuple[int, int], seed: int = 0):
        self.arch = list(arch)
        self.input_shape = tuple(int(v) for v in input_shape)
        gen = rng.stream(seed, 0)
        self.layers = []
        shape = self.input_shape
        for i, spec in enumerate(self.arch):
            if spec.kind == SOFTMAX:
                if i != len(self.arch) - 1:
                    raise ShapeError("SOFTMAX must be the last layer")
                continue
            layer = build_layer(spec, shape, gen)
            shape = layer.output_shape(shape)
            self.layers.append(layer)
        if len(shape) != 1:
            raise ShapeError(f"network output must be flat logits, got shape {shape}")
        self.num_classes = shape[0]

    def named_params(self) -> dict[str, np.ndarray]:
        return {f"{i}.{name}": arr for i, layer in enumerate(self.layers) for name, arr in layer.params.items()}

    def named_grads(self) -> dict[str, np.ndarray]:
        return {f"{i}.{name}": arr for i, layer in enumerate(self.layers) for name, arr in layer.grads.items()}

    def param_count(self) -> int:
        return sum(a.size for a in self.named_params().values())

    def get_state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params().items()}

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                value = np.asarray(state[f"{i}.{name}"], dtype=np.float64)
                if value.shape != layer.params[name].shape:
                    raise ShapeError(f"parameter {i}.{name}: expected {layer.params[name].shape}, got {value.shape}")
                layer.params[name] = value.copy()

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, None, :]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"network expects inputs of shape {self.input_shape}, got {x.shape[1:]}")
        return x

    def forward(self, x) -> np.ndarray:
        """Logits for a batch of ``(N, C, L)`` inputs (``(N, L)`` is read as one channel)."""
        out = self._check_input(x)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, grad_logits: np.ndarray) -> None:
        grad = grad_logits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def loss_and_grads(self, x, labels) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy over the batch and analytic gradients for every parameter."""
        logits = self.forward(x)
        loss, grad = softmax_cross_entropy(logits, np.asarray(labels, dtype=np.int64))
        self.backward(grad)
        return loss, self.named_grads()

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        x = self._check_input(x)
        chunks = [softmax(self.forward(x[i : i + batch_size])) for i in range(0, len(x), batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros((0, self.num_classes))

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        """Class index per input; ties go to the lowest index."""
        return self.predict_proba(x, batch_size).argmax(axis=1)


def predict_from_logits(logits) -> np.ndarray:
    return np.asarray(logits, dtype=np.float64).argmax(axis=-1)


def save_checkpoint(net: Network, path) -> None:
    """Write architecture and parameters as JSON with hex floats (exact round trip)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_shape": list(net.input_shape),
        "layers": [spec.to_dict() for spec in net.arch],
        "params": {
            name: {"shape": list(arr.shape), "data": [float(v).hex() for v in arr.ravel()]}
            for name, arr in net.named_params().items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path) -> Network:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    net = Network([LayerSpec.from_dict(d) for d in doc["layers"]], tuple(doc["input_shape"]))
    state = {
        name: np.array([float.fromhex(v) for v in entry["data"]], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    net.set_state(state)
    return net
