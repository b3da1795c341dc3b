"""Dense feed-forward softmax classifier with exact input gradients.

The network is deliberately small: a chain of affine layers with ReLU
between them and a softmax on the final logits. Everything is float64
numpy, so forward passes, losses and gradients are deterministic and
reproducible bit for bit given a seed. Argmax/argmin ties always resolve
to the lowest index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UsageError

# Probabilities below this floor are clamped before taking the log so the
# loss value stays finite; the returned gradient is the exact gradient of
# the unclamped cross-entropy (probs - onehot propagated to the input).
PROB_FLOOR = 1e-12

MODEL_FORMAT = "advrev-model"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    """Plain SGD hyperparameters. ``seed`` drives the epoch shuffling."""

    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise UsageError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be >= 1")


@dataclass
class MicroNet:
    """Weights and biases of the classifier.

    ``weights[i]`` has shape (fan_out, fan_in); ``biases[i]`` has shape
    (fan_out,). The last layer produces the logits; all earlier layers are
    followed by ReLU. After training the net is treated as immutable, so
    forward passes and gradient queries are safe to run concurrently.
    """

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @classmethod
    def create(cls, input_dim: int, hidden: list[int], n_classes: int, seed: int = 0) -> "MicroNet":
        """Seeded init: weights uniform in [-s, s], s = sqrt(6/(fan_in+fan_out))."""
        if input_dim < 1 or n_classes < 1:
            raise UsageError("input_dim and n_classes must be >= 1")
        sizes = [input_dim, *hidden, n_classes]
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            s = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights=weights, biases=biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [w.shape[0] for w in self.weights[:-1]]


def _check_input(net: MicroNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise UsageError(
            f"input has shape {x.shape}, model expects a flat vector of length {net.input_dim}"
        )
    return x


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _forward_trace(net: MicroNet, x: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backprop."""
    inputs = [x]
    pre_acts = []
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b
        pre_acts.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            inputs.append(a)
    return inputs, pre_acts


def forward_logits(net: MicroNet, x: np.ndarray) -> np.ndarray:
    x = _check_input(net, x)
    _, pre_acts = _forward_trace(net, x)
    return pre_acts[-1]


def forward_probs(net: MicroNet, x: np.ndarray) -> np.ndarray:
    """Class probability vector for one image (sums to 1 within 1e-9)."""
    return softmax(forward_logits(net, x))


def forward_probs_batch(net: MicroNet, xs: np.ndarray) -> np.ndarray:
    """Vectorized forward over rows of ``xs`` (n, input_dim) -> (n, D)."""
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise UsageError(f"batch has shape {a.shape}, expected (n, {net.input_dim})")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if i < last:
            np.maximum(a, 0.0, out=a)
    return softmax(a)


def predict(net: MicroNet, x: np.ndarray) -> int:
    """Predicted class: argmax of the probabilities, lowest index on ties."""
    return int(np.argmax(forward_probs(net, x)))


def predict_batch(net: MicroNet, xs: np.ndarray) -> np.ndarray:
    return np.argmax(forward_probs_batch(net, xs), axis=1)


def least_likely_class(probs: np.ndarray) -> int:
    """Index of the smallest probability, lowest index on ties."""
    return int(np.argmin(np.asarray(probs)))


def loss_and_input_grad(net: MicroNet, x: np.ndarray, target: int):
    """Cross-entropy loss -log p(target|x) and its exact pixel gradient.

    The loss value is clamped at -log(PROB_FLOOR) when p(target|x)
    underflows; the gradient is the analytic softmax/cross-entropy
    gradient (probs - onehot) backpropagated through the layers.
    """
    x = _check_input(net, x)
    if not 0 <= target < net.n_classes:
        raise UsageError(f"target {target} out of range for {net.n_classes} classes")
    inputs, pre_acts = _forward_trace(net, x)
    probs = softmax(pre_acts[-1])
    loss = -math.log(max(probs[target], PROB_FLOOR))

    g = probs.copy()
    g[target] -= 1.0
    for i in range(len(net.weights) - 1, 0, -1):
        g = g @ net.weights[i]
        g = g * (pre_acts[i - 1] > 0.0)
    g = g @ net.weights[0]
    return loss, g


def logits_and_input_jacobian(net: MicroNet, x: np.ndarray):
    """Logits and the full (D, input_dim) Jacobian of logits w.r.t. pixels.

    Within a fixed ReLU activation pattern the net is affine, so the
    Jacobian is the product of the weight matrices masked by the active
    units. Used by boundary-projection attacks.
    """
    x = _check_input(net, x)
    _, pre_acts = _forward_trace(net, x)
    jac = net.weights[-1]
    for i in range(len(net.weights) - 2, -1, -1):
        jac = (jac * (pre_acts[i] > 0.0)) @ net.weights[i]
    return pre_acts[-1], jac


def train(net: MicroNet, images: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
          epoch_hook=None) -> MicroNet:
    """Mini-batch SGD on cross-entropy. Mutates and returns ``net``.

    Deterministic given ``cfg.seed``: the same seed yields bitwise
    identical weights. ``epoch_hook(epoch, mean_loss, train_accuracy)``
    is invoked after each epoch when given.
    """
    X = np.asarray(images, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("training data must be a non-empty (n, input_dim) array")
    if X.shape[0] != y.shape[0]:
        raise UsageError("images and labels length mismatch")
    if X.shape[1] != net.input_dim:
        raise UsageError(f"training data has {X.shape[1]} features, model expects {net.input_dim}")
    if np.any(y < 0) or np.any(y >= net.n_classes):
        raise UsageError("labels must lie in [0, n_classes)")

    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    last = len(net.weights) - 1
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            bsz = xb.shape[0]

            acts = [xb]
            pre = []
            a = xb
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                z = a @ w.T + b
                pre.append(z)
                if i < last:
                    a = np.maximum(z, 0.0)
                    acts.append(a)
            probs = softmax(pre[-1])
            picked = probs[np.arange(bsz), yb]
            losses.append(float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR)))))

            g = probs
            g[np.arange(bsz), yb] -= 1.0
            g /= bsz
            for i in range(last, -1, -1):
                gw = g.T @ acts[i]
                gb = g.sum(axis=0)
                if i > 0:
                    g = (g @ net.weights[i]) * (pre[i - 1] > 0.0)
                net.weights[i] -= cfg.learning_rate * gw
                net.biases[i] -= cfg.learning_rate * gb
        if epoch_hook is not None:
            acc = float(np.mean(predict_batch(net, X) == y))
            epoch_hook(epoch, float(np.mean(losses)), acc)
    return net


def save_model(net: MicroNet, path) -> None:
    """Write the versioned JSON weight file (layout documented in README)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": net.input_dim,
        "n_classes": net.n_classes,
        "hidden": net.hidden_sizes,
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    from .records import atomic_write_text

    atomic_write_text(path, json.dumps(doc, sort_keys=True))


def load_model(path) -> MicroNet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a valid model file: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: unrecognized model format {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(
            f"{path}: model file version {doc.get('version')} unsupported, "
            f"this build reads version {MODEL_VERSION}"
        )
    weights = [np.asarray(layer["weight"], dtype=np.float64) for layer in doc["layers"]]
    biases = [np.asarray(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
    net = MicroNet(weights=weights, biases=biases)
    fan = doc["input_dim"]
    for w, b in zip(weights, biases):
        if w.ndim != 2 or w.shape[1] != fan or b.shape != (w.shape[0],):
            raise FormatError(f"{path}: layer shapes do not chain consistently")
        fan = w.shape[0]
    if fan != doc["n_classes"]:
        raise FormatError(f"{path}: final layer width {fan} != n_classes {doc['n_classes']}")
    return net
