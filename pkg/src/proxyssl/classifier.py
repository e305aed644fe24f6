"""Feed-forward classifier: input -> 16 -> 16 -> C, ReLU hidden, softmax out.

Training is plain mini-batch cross-entropy with the Adam update rule,
implemented directly on numpy arrays. The success metric of a training run
is the maximum test accuracy observed across its epochs, recorded in a
RunRecord alongside the full per-epoch trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .numerics import Rng, check_finite

DEFAULT_HIDDEN = (16, 16)


@dataclass
class TrainConfig:
    """Optimizer and schedule knobs for one fit call.

    score_on_validation switches the per-epoch accuracy trace from the test
    set to a carved-out fraction of the training data, for callers who do
    not want model selection to peek at test labels.
    """

    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    score_on_validation: bool = False
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigError(
                f"betas must lie in (0,1), got {self.adam_beta1}, {self.adam_beta2}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.score_on_validation and not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation_fraction must lie in (0,1), got {self.validation_fraction}"
            )


class MlpModel:
    """Layer weights/biases plus per-parameter Adam moment state."""

    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = list(layer_dims)
        self.weights = weights
        self.biases = biases
        self.m_w = [np.zeros_like(w) for w in weights]
        self.v_w = [np.zeros_like(w) for w in weights]
        self.m_b = [np.zeros_like(b) for b in biases]
        self.v_b = [np.zeros_like(b) for b in biases]
        self.t = 0

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def n_classes(self):
        return self.layer_dims[-1]


@dataclass
class RunRecord:
    """Per-epoch test-accuracy trace of one training and its maximum."""

    epoch_test_accuracy: list[float]
    max_test_accuracy: float
    final_model: MlpModel = field(repr=False)


def init_model(input_dim, n_classes, rng: Rng, hidden=DEFAULT_HIDDEN):
    """Fresh model with Glorot-uniform weights and zero biases.

    Weights for a (fan_in, fan_out) layer are drawn uniformly from
    +/- sqrt(6 / (fan_in + fan_out)); Adam state starts zeroed at t=0.
    """
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    dims = [int(input_dim)] + [int(h) for h in hidden] + [int(n_classes)]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def _forward_cached(m: MlpModel, x):
    """Forward pass keeping pre/post activations for backprop."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.input_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input_dim={m.input_dim}")
    acts = [x]
    pre = []
    h = x
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    probs = _softmax(pre[-1])
    return probs, pre, acts


def _softmax(logits):
    # max-subtraction keeps exp() in range for logits up to +/- ~700;
    # the clip keeps every probability strictly inside (0, 1) even when a
    # logit gap is wide enough to underflow (sum error stays << 1e-9)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return np.clip(p, 1e-300, np.nextafter(1.0, 0.0))


def forward(m: MlpModel, x):
    """Class-probability matrix; each row sums to 1."""
    probs, _, _ = _forward_cached(m, x)
    return probs


def loss_and_grads(m: MlpModel, x, y):
    """Mean cross-entropy over the batch and gradients for every parameter.

    Returns (loss, grads) where grads is {"w": [...], "b": [...]} matching
    the model's layer order.
    """
    y = np.asarray(y)
    bad = np.where((y < 0) | (y >= m.n_classes))[0]
    if bad.size:
        raise DataError(f"label {y[bad[0]]} out of range at sample index {bad[0]}")
    probs, pre, acts = _forward_cached(m, x)
    n = x.shape[0]
    picked = np.clip(probs[np.arange(n), y], 1e-12, None)
    loss = float(-np.log(picked).mean())

    # softmax + cross-entropy gradient, then backprop through ReLU layers
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [None] * len(m.weights)
    grads_b = [None] * len(m.biases)
    for i in range(len(m.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i].T) * (pre[i - 1] > 0)
    return loss, {"w": grads_w, "b": grads_b}


def adam_step(m: MlpModel, grads, cfg: TrainConfig):
    """One Adam update in place; t is incremented before bias correction."""
    m.t += 1
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, cfg.learning_rate
    c1 = 1.0 - b1 ** m.t
    c2 = 1.0 - b2 ** m.t
    for i in range(len(m.weights)):
        for param, grad, mom, vel in (
            (m.weights[i], grads["w"][i], m.m_w[i], m.v_w[i]),
            (m.biases[i], grads["b"][i], m.m_b[i], m.v_b[i]),
        ):
            mom *= b1
            mom += (1.0 - b1) * grad
            vel *= b2
            vel += (1.0 - b2) * grad * grad
            param -= lr * (mom / c1) / (np.sqrt(vel / c2) + eps)
        check_finite(m.weights[i], f"weights[{i}] after adam step")
    return m


def predict(m: MlpModel, x):
    """(labels, confidences): argmax class per row and its probability.

    Ties resolve to the lowest class index.
    """
    probs = forward(m, x)
    labels = probs.argmax(axis=1)
    conf = probs[np.arange(len(labels)), labels]
    return labels, conf


def accuracy(m: MlpModel, x, y):
    labels, _ = predict(m, x)
    return float(np.mean(labels == np.asarray(y)))


def fit(m: MlpModel, train_x, train_y, test_x, test_y, cfg: TrainConfig, rng: Rng):
    """Shuffled mini-batch training, scoring the test set after every epoch.

    Advances the model in place (optimizer moments persist), so successive
    calls warm-start from the previous state; callers wanting a fresh model
    call init_model first. Returns the RunRecord for this call.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    n = train_x.shape[0]
    if n == 0:
        raise ValueError("fit needs a nonempty training set")
    if len(test_y) == 0:
        raise ValueError("fit needs a nonempty test set")
    score_x, score_y = test_x, test_y
    if cfg.score_on_validation:
        n_val = max(1, int(round(cfg.validation_fraction * n)))
        if n_val >= n:
            raise ValueError(f"validation carve leaves no training data (n={n})")
        carve = rng.permutation(n)
        score_x, score_y = train_x[carve[:n_val]], train_y[carve[:n_val]]
        train_x, train_y = train_x[carve[n_val:]], train_y[carve[n_val:]]
        n = n - n_val
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = loss_and_grads(m, train_x[idx], train_y[idx])
            adam_step(m, grads, cfg)
        trace.append(accuracy(m, score_x, score_y))
    return RunRecord(trace, max(trace), m)
