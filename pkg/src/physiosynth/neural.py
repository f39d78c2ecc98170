"""Single-hidden-layer perceptron with Adam training, in plain numpy.

Used for the emotion -> delta mappings (heart rate, breathing rate) and for
the sudomotor burst generator. Training can run on a plain MSE target
(:func:`train_adam`) or on any differentiable loss over the network
outputs (:func:`fit`), which the skin-conductance model uses to train end
to end through its convolution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, EmptyDatasetError, ValidationError

OUTPUT_ACTIVATIONS = ("sigmoid", "linear")


@dataclass(frozen=True)
class MLPConfig:
    input_dim: int
    hidden_dim: int
    output_dim: int
    output_activation: str = "sigmoid"
    hidden_activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ValidationError("all layer sizes must be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValidationError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if self.hidden_activation != "tanh":
            raise ValidationError("only tanh hidden units are supported")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    minibatch_size: int = 32
    epochs: int = 100
    l2_penalty: float = 1e-4
    dropout_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.minibatch_size < 1:
            raise ValidationError("minibatch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must lie in [0, 1)")


@dataclass
class MLPWeights:
    config: MLPConfig
    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (output, hidden)
    b2: np.ndarray  # (output,)
    meta: dict = field(default_factory=dict)

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "MLPWeights":
        return MLPWeights(self.config, *(p.copy() for p in self.params()),
                          meta=json.loads(json.dumps(self.meta)))

    def to_json(self) -> dict:
        return {
            "config": asdict(self.config),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MLPWeights":
        cfg = MLPConfig(**obj["config"])
        w = cls(cfg, *(np.array(obj[k], dtype=float) for k in ("w1", "b1", "w2", "b2")),
                meta=obj.get("meta", {}))
        expected = [(cfg.hidden_dim, cfg.input_dim), (cfg.hidden_dim,),
                    (cfg.output_dim, cfg.hidden_dim), (cfg.output_dim,)]
        if [p.shape for p in w.params()] != expected:
            raise DimensionError("weight shapes do not match the stored config")
        return w

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "MLPWeights":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def init_weights(config: MLPConfig) -> MLPWeights:
    """Uniform init in +-1/sqrt(fan_in), deterministic per ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    lim1 = 1.0 / np.sqrt(config.input_dim)
    lim2 = 1.0 / np.sqrt(config.hidden_dim)
    return MLPWeights(
        config,
        rng.uniform(-lim1, lim1, (config.hidden_dim, config.input_dim)),
        rng.uniform(-lim1, lim1, config.hidden_dim),
        rng.uniform(-lim2, lim2, (config.output_dim, config.hidden_dim)),
        rng.uniform(-lim2, lim2, config.output_dim),
    )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(weights: MLPWeights, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != weights.config.input_dim:
        raise DimensionError(
            f"expected input of width {weights.config.input_dim}, got shape {x.shape}")
    return x2, single


def _forward(weights: MLPWeights, x: np.ndarray, mask: Optional[np.ndarray] = None):
    h = np.tanh(x @ weights.w1.T + weights.b1)
    if mask is not None:
        h = h * mask
    z = h @ weights.w2.T + weights.b2
    y = _sigmoid(z) if weights.config.output_activation == "sigmoid" else z
    return h, y


def forward(weights: MLPWeights, x) -> np.ndarray:
    """Network output for one input vector or a batch (rows)."""
    x2, single = _as_batch(weights, x)
    _, y = _forward(weights, x2)
    return y[0] if single else y


def backward(weights: MLPWeights, x: np.ndarray, h: np.ndarray, y: np.ndarray,
             grad_y: np.ndarray, mask: Optional[np.ndarray] = None):
    """Gradients of a loss w.r.t. ``(w1, b1, w2, b2)`` given dL/dy."""
    if weights.config.output_activation == "sigmoid":
        grad_z = grad_y * y * (1.0 - y)
    else:
        grad_z = grad_y
    gw2 = grad_z.T @ h
    gb2 = grad_z.sum(axis=0)
    grad_h = grad_z @ weights.w2
    if mask is not None:
        grad_h = grad_h * mask
        # h already carries the mask; recover the pre-dropout activation
        act = np.divide(h, mask, out=np.zeros_like(h), where=mask != 0)
    else:
        act = h
    grad_a = grad_h * (1.0 - act ** 2)
    gw1 = grad_a.T @ x
    gb1 = grad_a.sum(axis=0)
    return [gw1, gb1, gw2, gb2]


def mse(weights: MLPWeights, inputs, targets) -> float:
    """Mean over samples of the summed squared output error."""
    y = forward(weights, np.atleast_2d(inputs))
    return float(np.mean(np.sum((y - np.atleast_2d(targets)) ** 2, axis=1)))


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.epsilon)


LossFn = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def fit(weights: MLPWeights, train_config: TrainConfig, inputs,
        loss_fn: LossFn, callback=None) -> MLPWeights:
    """Train ``weights`` (a copy) with Adam on a custom loss.

    ``loss_fn(outputs, batch_indices)`` returns the batch loss and its
    gradient w.r.t. the outputs. Shuffling and dropout masks come from a
    generator seeded with ``train_config.seed``, so runs are bitwise
    reproducible.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if inputs.shape[1] != weights.config.input_dim:
        raise DimensionError("input width does not match the network")
    w = weights.copy()
    cfg = train_config
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(w.params(), cfg)
    n = inputs.shape[0]
    keep = 1.0 - cfg.dropout_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            xb = inputs[idx]
            mask = None
            if cfg.dropout_rate > 0:
                mask = (rng.random((idx.size, w.config.hidden_dim)) < keep) / keep
            h, y = _forward(w, xb, mask)
            loss, grad_y = loss_fn(y, idx)
            grads = backward(w, xb, h, y, grad_y, mask)
            if cfg.l2_penalty:
                grads[0] = grads[0] + cfg.l2_penalty * w.w1
                grads[2] = grads[2] + cfg.l2_penalty * w.w2
            opt.step(w.params(), grads)
            epoch_loss += loss * idx.size
        if callback is not None:
            callback(epoch, epoch_loss / n)
    return w


def train_adam(config: MLPConfig, train_config: TrainConfig, inputs, targets,
               init: Optional[MLPWeights] = None) -> MLPWeights:
    """Fit the network to ``targets`` by minimising the squared error."""
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.size == 0 or targets.size == 0:
        raise EmptyDatasetError("training set is empty")
    inputs = np.atleast_2d(inputs)
    targets = targets.reshape(inputs.shape[0], -1) if targets.ndim < 2 else targets
    if inputs.shape[1] != config.input_dim or targets.shape[1] != config.output_dim:
        raise DimensionError("dataset widths do not match the network config")
    if inputs.shape[0] != targets.shape[0]:
        raise DimensionError("inputs and targets differ in length")

    def loss_fn(y, idx):
        err = y - targets[idx]
        return float(np.mean(np.sum(err ** 2, axis=1))), 2.0 * err / idx.size

    start = init if init is not None else init_weights(config)
    return fit(start, train_config, inputs, loss_fn)


def _loss_single(weights: MLPWeights, x, target) -> float:
    y = forward(weights, x)
    return float(np.sum((y - target) ** 2))


def gradient_check(weights: MLPWeights, x, target, step: float = 1e-5) -> float:
    """Largest relative mismatch between backprop and central differences.

    The error for each parameter array is ``|g_a - g_n| / (|g_a| + |g_n|)``
    (Euclidean norms); arrays whose gradients both vanish count as 0.
    """
    x = np.asarray(x, dtype=float)
    target = np.asarray(target, dtype=float)
    x2, _ = _as_batch(weights, x)
    h, y = _forward(weights, x2)
    analytic = backward(weights, x2, h, y, 2.0 * (y - target[None, :]))
    w = weights.copy()
    worst = 0.0
    for p, g_a in zip(w.params(), analytic):
        g_n = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g_n.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = _loss_single(w, x, target)
            flat[i] = orig - step
            lm = _loss_single(w, x, target)
            flat[i] = orig
            gflat[i] = (lp - lm) / (2 * step)
        denom = np.linalg.norm(g_a) + np.linalg.norm(g_n)
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(g_a - g_n) / denom))
    return worst


def encode_symmetric(delta, scale):
    """Map deltas in ``[-scale, scale]`` onto sigmoid targets (0 -> 0.5)."""
    return 0.5 + 0.5 * np.asarray(delta, dtype=float) / np.asarray(scale, dtype=float)


def decode_symmetric(output, scale):
    return (np.asarray(output, dtype=float) - 0.5) * 2.0 * np.asarray(scale, dtype=float)
