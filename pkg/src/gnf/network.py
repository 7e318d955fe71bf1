"""Feedforward networks trained by backpropagation.

Each neuron computes ``a = w . x + b`` and emits ``y = f(a)``. Layers are
stored as weight matrices of shape ``(n_out, n_in)`` so that row ``i``
holds the incoming weights of neuron ``i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "ACTIVATIONS",
    "Network",
    "Dataset",
    "TrainConfig",
    "TrainTrace",
    "DivergenceError",
    "activation_apply",
    "activation_derivative",
    "neuron_action",
    "init_network",
    "forward",
    "gradient",
    "mse",
    "parameter_jacobian",
    "train_backprop",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

ACTIVATIONS = ("threshold", "linear", "ramp", "sigmoid", "tan_sigmoid")
MODEL_FORMAT = "gnf-model"
MODEL_VERSION = 1


class DivergenceError(ArithmeticError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"training diverged at epoch {epoch}: loss is {value}")
        self.epoch = epoch


def activation_apply(kind: str, a):
    """Neuron output function.

    ``threshold`` is 1 for ``a >= 0`` else 0, ``ramp`` clamps to [0, 1],
    ``sigmoid`` is the logistic ``1/(1+e^-a)`` and ``tan_sigmoid`` is
    ``2/(1+e^(-2a)) - 1``, evaluated as ``tanh`` to avoid overflow.
    """
    a = np.asarray(a, dtype=float)
    if kind == "linear":
        y = a.copy()
    elif kind == "tan_sigmoid":
        y = np.tanh(a)
    elif kind == "sigmoid":
        y = 0.5 * (1.0 + np.tanh(0.5 * a))
    elif kind == "ramp":
        y = np.clip(a, 0.0, 1.0)
    elif kind == "threshold":
        y = np.where(a >= 0.0, 1.0, 0.0)
    else:
        raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    return float(y) if y.ndim == 0 else y


def activation_derivative(kind: str, a, y):
    """dy/da given both the action ``a`` and output ``y``."""
    if kind == "linear":
        return np.ones_like(a)
    if kind == "tan_sigmoid":
        return 1.0 - y * y
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "ramp":
        return ((a > 0.0) & (a < 1.0)).astype(float)
    if kind == "threshold":
        return np.zeros_like(a)
    raise ValueError(f"unknown activation {kind!r}")


def neuron_action(weights, inputs, bias: float = 0.0) -> float:
    w = np.asarray(weights, dtype=float)
    x = np.asarray(inputs, dtype=float)
    if w.shape != x.shape or w.ndim != 1:
        raise ValueError(f"weights and inputs must be equal-length vectors, got {w.shape} and {x.shape}")
    return float(w @ x + bias)


@dataclass(eq=False)
class Network:
    """Layered weights, biases and per-layer activations.

    ``input_range`` optionally holds ``(lo, hi)`` arrays; inputs are mapped
    affinely from ``[lo, hi]`` onto ``[-1, 1]`` before the first layer.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]
    input_range: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.weights = [np.array(w, dtype=float, ndmin=2) for w in self.weights]
        self.biases = [np.array(b, dtype=float, ndmin=1) for b in self.biases]
        self.activations = tuple(self.activations)
        if not self.weights:
            raise ValueError("a network needs at least one layer")
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have one entry per layer")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight shape {w.shape} does not match bias shape {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: expects {w.shape[1]} inputs, previous layer has {self.weights[i - 1].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: weights and biases must be finite")
        if self.input_range is not None:
            lo, hi = (np.array(v, dtype=float, ndmin=1) for v in self.input_range)
            if lo.shape != (self.input_dim,) or hi.shape != (self.input_dim,) or not np.all(lo < hi):
                raise ValueError("input_range must be per-input (lo, hi) arrays with lo < hi")
            self.input_range = (lo, hi)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Network":
        rng = None if self.input_range is None else (self.input_range[0].copy(), self.input_range[1].copy())
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activations, rng)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        if self.input_range is None:
            return X
        lo, hi = self.input_range
        return 2.0 * (X - lo) / (hi - lo) - 1.0

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        if self.activations != other.activations or self.layer_sizes != other.layer_sizes:
            return False
        if (self.input_range is None) != (other.input_range is None):
            return False
        pairs = list(zip(self.weights, other.weights)) + list(zip(self.biases, other.biases))
        if self.input_range is not None:
            pairs += list(zip(self.input_range, other.input_range))
        return all(np.array_equal(a, b) for a, b in pairs)

    __hash__ = None


def init_network(
    layer_sizes: Sequence[int],
    activations: Sequence[str],
    rng_seed: int = 0,
    input_range=None,
    scale: float = 0.5,
) -> Network:
    """Weights and biases drawn uniformly from ``[-scale, scale]``."""
    sizes = [int(n) for n in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes}")
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per non-input layer")
    rng = np.random.default_rng(rng_seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes, sizes[1:]):
        weights.append(rng.uniform(-scale, scale, size=(n_out, n_in)))
        biases.append(rng.uniform(-scale, scale, size=n_out))
    return Network(weights, biases, tuple(activations), input_range)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"expected input of dimension {net.input_dim}, got shape {np.shape(x)}")
    return X, single


def _forward_cache(net: Network, X: np.ndarray):
    outs = [net.normalize(X)]
    actions = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        a = outs[-1] @ w.T + b
        actions.append(a)
        outs.append(activation_apply(act, a))
    return actions, outs


def forward(net: Network, x) -> np.ndarray:
    """Network output for one input vector or a batch of row vectors."""
    X, single = _as_batch(net, x)
    _, outs = _forward_cache(net, X)
    return outs[-1][0] if single else outs[-1]


def _backprop(net: Network, actions, outs, delta_out):
    """Per-layer (dW, db) summed over the batch for output-error signal ``delta_out``."""
    grads = []
    delta = delta_out * activation_derivative(net.activations[-1], actions[-1], outs[-1])
    for layer in range(len(net.weights) - 1, -1, -1):
        grads.append((delta.T @ outs[layer], delta.sum(axis=0)))
        if layer:
            back = delta @ net.weights[layer]
            delta = back * activation_derivative(net.activations[layer - 1], actions[layer - 1], outs[layer])
    return grads[::-1]


def gradient(net: Network, x, t) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact partials of ``0.5 * ||t - y||^2`` for a single sample.

    Returned as ``[(dW, db), ...]`` matching ``net.weights``/``net.biases``.
    """
    X, _ = _as_batch(net, x)
    if X.shape[0] != 1:
        raise ValueError("gradient takes a single sample")
    T = np.asarray(t, dtype=float).reshape(1, -1)
    if T.shape[1] != net.output_dim:
        raise ValueError(f"expected target of dimension {net.output_dim}, got {T.shape[1]}")
    actions, outs = _forward_cache(net, X)
    return _backprop(net, actions, outs, outs[-1] - T)


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    T: np.ndarray
    input_names: tuple[str, ...] = ()
    target_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.X = np.array(self.X, dtype=float)
        self.T = np.array(self.T, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        if self.T.ndim == 1:
            self.T = self.T[:, None]
        if self.X.ndim != 2 or self.T.ndim != 2 or len(self.X) != len(self.T):
            raise ValueError(f"inputs {self.X.shape} and targets {self.T.shape} must pair row for row")
        if len(self.X) == 0:
            raise ValueError("dataset must not be empty")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.T))):
            raise ValueError("dataset values must be finite")
        if not self.input_names:
            self.input_names = tuple(f"x{i}" for i in range(self.input_dim))
        if not self.target_names:
            self.target_names = tuple(f"t{i}" for i in range(self.target_dim))
        self.input_names = tuple(self.input_names)
        self.target_names = tuple(self.target_names)

    def __len__(self):
        return len(self.X)

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    @property
    def target_dim(self) -> int:
        return self.T.shape[1]


def _check_dims(net: Network, data: Dataset):
    if net.input_dim != data.input_dim or net.output_dim != data.target_dim:
        raise ValueError(
            f"network maps {net.input_dim}->{net.output_dim} but dataset is {data.input_dim}->{data.target_dim}"
        )


def mse(net: Network, data: Dataset) -> float:
    """Mean squared error over every sample and output unit."""
    _check_dims(net, data)
    err = forward(net, data.X) - data.T
    return float(np.mean(err * err))


def parameter_jacobian(net: Network, X: np.ndarray) -> np.ndarray:
    """d(output)/d(parameter) with one row per (sample, output) pair.

    Columns follow the flat genome order: each layer's weights row-major,
    then its biases.
    """
    X, _ = _as_batch(net, X)
    actions, outs = _forward_cache(net, X)
    n, m = len(X), net.output_dim
    J = np.empty((n, m, net.n_params))
    for k in range(m):
        seed = np.zeros((n, m))
        seed[:, k] = 1.0
        delta = seed * activation_derivative(net.activations[-1], actions[-1], outs[-1])
        cols = []
        for layer in range(len(net.weights) - 1, -1, -1):
            dW = delta[:, :, None] * outs[layer][:, None, :]
            cols.append(np.concatenate([dW.reshape(n, -1), delta], axis=1))
            if layer:
                back = delta @ net.weights[layer]
                delta = back * activation_derivative(net.activations[layer - 1], actions[layer - 1], outs[layer])
        J[:, k, :] = np.concatenate(cols[::-1], axis=1)
    return J.reshape(n * m, -1)


@dataclass
class TrainConfig:
    """Backpropagation settings.

    ``method="lm"`` runs Levenberg-Marquardt steps built from the
    backpropagated Jacobian; ``method="gd"`` is plain full-batch gradient
    descent on ``0.5 * mean ||t - y||^2`` with step ``learning_rate``.
    Training stops once the epoch MSE is at or below ``tolerance``.
    """

    method: Literal["lm", "gd"] = "lm"
    learning_rate: float = 0.01
    max_epochs: int = 5000
    tolerance: float = 1e-3
    rng_seed: int = 0
    mu: float = 1e-3
    mu_decrease: float = 0.1
    mu_increase: float = 10.0
    mu_max: float = 1e10

    def __post_init__(self):
        if self.method not in ("lm", "gd"):
            raise ValueError(f"method must be 'lm' or 'gd', got {self.method!r}")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_epochs) < 1:
            raise ValueError("max_epochs must be >= 1")
        if not (self.mu > 0 and 0 < self.mu_decrease < 1 < self.mu_increase and self.mu_max > self.mu):
            raise ValueError("invalid Levenberg-Marquardt damping schedule")


@dataclass
class TrainTrace:
    mse: list[float] = field(default_factory=list)
    initial_mse: float = math.nan
    converged: bool = False
    stop_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.mse)

    @property
    def final_mse(self) -> float:
        return self.mse[-1] if self.mse else self.initial_mse


def _flat(net: Network) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(net.weights, net.biases)])


def _assign(net: Network, p: np.ndarray) -> None:
    i = 0
    for w, b in zip(net.weights, net.biases):
        w[...] = p[i : i + w.size].reshape(w.shape)
        i += w.size
        b[...] = p[i : i + b.size]
        i += b.size


def train_backprop(net: Network, data: Dataset, config: TrainConfig | None = None) -> tuple[Network, TrainTrace]:
    """Train a private copy of ``net`` on ``data``; the input is untouched.

    The trace records the epoch MSE after every update. Raises
    :class:`DivergenceError` if the loss becomes non-finite.
    """
    config = config or TrainConfig()
    _check_dims(net, data)
    net = net.copy()
    trace = TrainTrace(initial_mse=mse(net, data))
    if not math.isfinite(trace.initial_mse):
        raise DivergenceError(0, trace.initial_mse)
    if trace.initial_mse <= config.tolerance:
        trace.converged, trace.stop_reason = True, "tolerance"
        return net, trace
    step = _lm_epochs if config.method == "lm" else _gd_epochs
    step(net, data, config, trace)
    return net, trace


def _record(trace: TrainTrace, epoch: int, value: float, config: TrainConfig) -> bool:
    if not math.isfinite(value):
        raise DivergenceError(epoch, value)
    trace.mse.append(value)
    if value <= config.tolerance:
        trace.converged, trace.stop_reason = True, "tolerance"
        return True
    return False


def _gd_epochs(net, data, config, trace):
    n = len(data)
    for epoch in range(1, int(config.max_epochs) + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            actions, outs = _forward_cache(net, data.X)
            grads = _backprop(net, actions, outs, (outs[-1] - data.T) / n)
            for (dW, db), w, b in zip(grads, net.weights, net.biases):
                w -= config.learning_rate * dW
                b -= config.learning_rate * db
            err = forward(net, data.X) - data.T
            value = float(np.mean(err * err))
        if _record(trace, epoch, value, config):
            return
    trace.stop_reason = "max_epochs"


def _lm_epochs(net, data, config, trace):
    T = data.T.ravel()
    p = _flat(net)
    mu = config.mu
    err = forward(net, data.X).ravel() - T
    sse = float(err @ err)
    eye = np.eye(p.size)
    for epoch in range(1, int(config.max_epochs) + 1):
        J = parameter_jacobian(net, data.X)
        A = J.T @ J
        g = J.T @ err
        while True:
            candidate = p - np.linalg.solve(A + mu * eye, g)
            _assign(net, candidate)
            new_err = forward(net, data.X).ravel() - T
            new_sse = float(new_err @ new_err)
            if new_sse < sse:
                p, err, sse = candidate, new_err, new_sse
                mu = max(mu * config.mu_decrease, 1e-20)
                break
            mu *= config.mu_increase
            if mu > config.mu_max:
                _assign(net, p)
                trace.stop_reason = "mu_max"
                return
        if _record(trace, epoch, sse / err.size, config):
            return
    trace.stop_reason = "max_epochs"


def model_to_dict(net: Network) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "activations": list(net.activations),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "input_normalization": None
        if net.input_range is None
        else {"lo": net.input_range[0].tolist(), "hi": net.input_range[1].tolist()},
    }


def model_from_dict(doc: dict) -> Network:
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} document")
    sizes = doc["layer_sizes"]
    weights = [np.array(w, dtype=float).reshape(n_out, n_in) for w, n_in, n_out in zip(doc["weights"], sizes, sizes[1:])]
    norm = doc.get("input_normalization")
    rng = None if norm is None else (np.array(norm["lo"], dtype=float), np.array(norm["hi"], dtype=float))
    return Network(weights, [np.array(b, dtype=float) for b in doc["biases"]], tuple(doc["activations"]), rng)


def save_model(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(model_to_dict(net), indent=2) + "\n")


def load_model(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
