"""Adam optimiser and the mini-batch training loop with validation early stopping."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from noisecnn import rng
from noisecnn.metrics import confusion, macro_f1
from noisecnn.nn.model import Network

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 25
    batch_size: int = 32
    learning_rate: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 6

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    """Bias-corrected Adam holding first/second moments per named tensor."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    @classmethod
    def from_config(cls, config: TrainConfig) -> "Adam":
        return cls(config.learning_rate, config.beta1, config.beta2, config.epsilon)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite gradient in parameter {name!r}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], optimizer: Adam) -> dict[str, np.ndarray]:
    optimizer.step(params, grads)
    return params


def _stack(windows) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([np.asarray(w.values, dtype=np.float64) for w in windows])
    y = np.array([w.label.index for w in windows], dtype=np.int64)
    return x, y


def evaluate_macro_f1(net: Network, x: np.ndarray, y: np.ndarray, num_classes: int) -> float:
    return macro_f1(confusion(y, net.predict(x), num_classes)).macro_f1


def train(arch, train_windows, val_windows, config: TrainConfig, num_classes: int | None = None,
          evaluate=None) -> tuple[Network, list[dict]]:
    """Fit a network with Adam and keep the weights of the best validation epoch.

    ``evaluate(net, epoch)`` may replace the default validation macro F1; it
    must return a score where larger is better.
    """
    if not train_windows:
        raise ValueError("empty training set")
    x, y = _stack(train_windows)
    if num_classes is None:
        num_classes = max(w.label.index for w in list(train_windows) + list(val_windows)) + 1
    if val_windows:
        xv, yv = _stack(val_windows)
    net = Network(arch, (1, x.shape[1]), seed=config.seed)
    if evaluate is None:
        def evaluate(model, epoch):
            if not val_windows:
                return -float(history[-1]["train_loss"])
            return evaluate_macro_f1(model, xv, yv, num_classes)

    opt = Adam.from_config(config)
    params = net.named_params()
    history: list[dict] = []
    best_score, best_epoch, best_state = -np.inf, 0, net.get_state()
    for epoch in range(1, config.epochs + 1):
        order = rng.stream(config.seed, 1, epoch).permutation(len(x))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = net.loss_and_grads(x[idx, None, :], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(idx)
            seen += len(idx)
        history.append({"epoch": epoch, "train_loss": total / seen})
        score = float(evaluate(net, epoch))
        history[-1]["val_score"] = score
        if score > best_score:
            best_score, best_epoch, best_state = score, epoch, net.get_state()
        elif epoch - best_epoch >= config.early_stop_patience:
            log.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
            break
    net.set_state(best_state)
    net.best_epoch = best_epoch
    return net, history
