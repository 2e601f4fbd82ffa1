"""Feedforward network mapping contour pairs to push actions.

Architecture: 40 inputs (two 10-point contours), three hidden layers of
100 rectified-linear units, 4 linear outputs (start and end pixels).
Training is plain minibatch gradient descent with momentum on a
mean-squared-error loss; inputs and outputs are scaled to [0, 1] by the
per-coordinate min/max of the training split. Everything is seeded, so
training is reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_NAME = "sandshape-mlp"
FORMAT_VERSION = 1
OUTPUT_NAMES = ("u_s", "v_s", "u_e", "v_e")


class ModelFormatError(ValueError):
    """Model file is malformed or has an unsupported version."""


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    in_min: np.ndarray
    in_max: np.ndarray
    out_min: np.ndarray
    out_max: np.ndarray
    seed: int = 0

    def __post_init__(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]) or b.shape != (self.layer_dims[i + 1],):
                raise ValueError("layer shapes inconsistent with layer_dims")

    def scale_in(self, x: np.ndarray) -> np.ndarray:
        span = np.where(self.in_max > self.in_min, self.in_max - self.in_min, 1.0)
        return (x - self.in_min) / span

    def descale_out(self, y: np.ndarray) -> np.ndarray:
        span = np.where(self.out_max > self.out_min, self.out_max - self.out_min, 1.0)
        return y * span + self.out_min

    def scale_out(self, y: np.ndarray) -> np.ndarray:
        span = np.where(self.out_max > self.out_min, self.out_max - self.out_min, 1.0)
        return (y - self.out_min) / span

    def predict_pixels(self, x: np.ndarray) -> np.ndarray:
        """Full pipeline: scale the raw pixel input, run the net, de-scale."""
        return self.descale_out(forward(self, self.scale_in(np.asarray(x, dtype=np.float64))))


@dataclass
class TrainConfig:
    episodes: int = 25_000
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    learning_rate: float = 1e-3
    batch_size: int = 64
    momentum: float = 0.9
    seed: int = 0
    episodes_are_epochs: bool = False  # reinterpret episodes as full passes

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.episodes < 1:
            raise ValueError("need at least one episode")


@dataclass
class EvalReport:
    mae: dict[str, float]
    n_samples: int
    loss_first: float | None = None
    loss_final: float | None = None
    loss_curve: list[tuple[int, float]] = field(default_factory=list)


def init_model(layer_dims, rng: np.random.Generator, seed: int = 0) -> MlpModel:
    """Scaled-uniform weight init, zero biases, identity scaling."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    d_in, d_out = layer_dims[0], layer_dims[-1]
    return MlpModel(
        list(layer_dims), weights, biases,
        in_min=np.zeros(d_in), in_max=np.ones(d_in),
        out_min=np.zeros(d_out), out_max=np.ones(d_out),
        seed=seed,
    )


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Rectified affine chain with a linear output layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.layer_dims[0]:
        raise ValueError(f"expected input width {model.layer_dims[0]}, got {x.shape[-1]}")
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w + b
        if i < last:
            a = np.maximum(a, 0.0)
    return a


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its gradients w.r.t. weights and biases."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    pre, post = [], [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        post.append(a)
    diff = post[-1] - y
    loss = float((diff * diff).mean())

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    delta = 2.0 * diff / diff.size
    for i in range(last, -1, -1):
        if i < last:
            delta = delta * (pre[i] > 0)
        grad_w[i] = post[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
    return loss, grad_w, grad_b


def triplets_to_arrays(triplets) -> tuple[np.ndarray, np.ndarray]:
    """Stack triplets into (inputs, targets): contour pair -> push pixels."""
    x = np.array([np.concatenate([t.x_m.ravel(), t.x_n.ravel()]) for t in triplets])
    y = np.array([t.p for t in triplets], dtype=np.float64)
    return x, y


def train(triplets, config: TrainConfig, layer_dims=(40, 100, 100, 100, 4)) -> tuple[MlpModel, EvalReport]:
    """Seeded split, scaling from the training set, SGD with momentum."""
    if len(triplets) < 10:
        raise ValueError("need at least 10 triplets to train")
    x_all, y_all = triplets_to_arrays(triplets)
    rng = np.random.default_rng(config.seed)

    perm = rng.permutation(len(x_all))
    n_train = int(config.split[0] * len(x_all))
    n_test = int(config.split[1] * len(x_all))
    train_idx = perm[:n_train]
    test_idx = perm[n_train : n_train + n_test]

    model = init_model(list(layer_dims), rng, seed=config.seed)
    model.in_min = x_all[train_idx].min(axis=0)
    model.in_max = x_all[train_idx].max(axis=0)
    model.out_min = y_all[train_idx].min(axis=0)
    model.out_max = y_all[train_idx].max(axis=0)

    xs = model.scale_in(x_all[train_idx])
    ys = model.scale_out(y_all[train_idx])

    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]

    episodes = config.episodes
    if config.episodes_are_epochs:
        episodes = config.episodes * max(1, len(train_idx) // config.batch_size)

    losses = np.empty(episodes)
    for ep in range(episodes):
        batch = rng.integers(0, len(xs), size=min(config.batch_size, len(xs)))
        loss, grad_w, grad_b = loss_and_grads(model, xs[batch], ys[batch])
        losses[ep] = loss
        for i in range(len(model.weights)):
            vel_w[i] = config.momentum * vel_w[i] - config.learning_rate * grad_w[i]
            vel_b[i] = config.momentum * vel_b[i] - config.learning_rate * grad_b[i]
            model.weights[i] += vel_w[i]
            model.biases[i] += vel_b[i]

    report = evaluate(model, [triplets[i] for i in test_idx]) if n_test else EvalReport(
        mae={k: float("nan") for k in OUTPUT_NAMES}, n_samples=0
    )
    report.loss_first = float(losses[0])
    report.loss_final = float(losses[-1])
    stride = max(1, episodes // 200)
    report.loss_curve = [(int(i), float(losses[i])) for i in range(0, episodes, stride)]
    return model, report


def evaluate(model: MlpModel, triplets) -> EvalReport:
    """Per-output mean absolute error in pixels."""
    if not triplets:
        raise ValueError("empty evaluation set")
    x, y = triplets_to_arrays(triplets)
    pred = model.descale_out(forward(model, model.scale_in(x)))
    mae = np.abs(pred - y).mean(axis=0)
    return EvalReport(mae={k: float(m) for k, m in zip(OUTPUT_NAMES, mae)}, n_samples=len(triplets))


def save(model: MlpModel, path):
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layer_dims": model.layer_dims,
        "seed": model.seed,
        "in_min": model.in_min.tolist(),
        "in_max": model.in_max.tolist(),
        "out_min": model.out_min.tolist(),
        "out_max": model.out_max.tolist(),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load(path) -> MlpModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ModelFormatError(f"not a model file: {err}") from err
    if doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("unrecognized model format")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')}")
    try:
        return MlpModel(
            layer_dims=list(doc["layer_dims"]),
            weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
            biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
            in_min=np.array(doc["in_min"], dtype=np.float64),
            in_max=np.array(doc["in_max"], dtype=np.float64),
            out_min=np.array(doc["out_min"], dtype=np.float64),
            out_max=np.array(doc["out_max"], dtype=np.float64),
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"malformed model file: {err}") from err
