"""Layered models over boosted trees and the back-propagating trainer.

A stack is an ordered list of layers, each either a bundle of scalar GBDTs
(one per output column) or a small dense affine layer.  Training treats the
full-batch hidden matrices as the trainable quantities: every epoch runs a
forward pass, pulls the loss gradient back through the per-sample layer
Jacobians, nudges each hidden matrix along its momentum-smoothed gradient,
and refits each layer from scratch to map its (not yet updated) input to its
freshly updated output.  Tree layers are rebuilt each epoch; dense layers
take a fixed number of full-batch gradient steps instead.

The loss helpers report the gradient of the *averaged* loss.  The hidden
updates use the per-row gradient (averaged gradient times the row count) so
that the step size keeps the same meaning at any batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .booster import Booster, BoosterParams, fit_booster
from .data import accuracy, rmse
from .errors import (
    DimensionMismatchError,
    InvalidOneHotError,
    NonFiniteLossError,
    ShapeMismatchError,
)
from .linalg import gaussian_matrix
from .tree import presort_columns

Array = np.ndarray

LOSS_MSE = "mse"
LOSS_SOFTMAX_CE = "softmax_ce"
LOSSES = (LOSS_MSE, LOSS_SOFTMAX_CE)

ACT_RELU = "relu"
ACT_IDENTITY = "identity"


def loss_and_gradient(pred: Array, y: Array, loss: str) -> tuple[float, Array]:
    """Averaged loss and its gradient with respect to the predictions.

    mse: mean squared error over all entries, gradient (pred - y) * 2/(n*d).
    softmax_ce: mean row-wise cross-entropy of the softmax, gradient
    (softmax(pred) - y) / n; rows of ``y`` must be one-hot.
    """
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape or pred.ndim != 2:
        raise ShapeMismatchError(f"predictions {pred.shape} vs targets {y.shape}")
    n, d = pred.shape
    if loss == LOSS_MSE:
        diff = pred - y
        return float(np.mean(diff * diff)), diff * (2.0 / (n * d))
    if loss == LOSS_SOFTMAX_CE:
        if not np.isin(y, (0.0, 1.0)).all() or not (y.sum(axis=1) == 1.0).all():
            raise InvalidOneHotError("softmax cross-entropy needs one-hot target rows")
        shifted = pred - pred.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_prob = shifted - log_norm
        value = float(-(y * log_prob).sum() / n)
        return value, (np.exp(log_prob) - y) / n
    raise ValueError(f"unknown loss {loss!r}")


def momentum_update(m: Array, g: Array, mu: float) -> Array:
    """Exponential moving average step: mu * m + (1 - mu) * g."""
    if m.shape != g.shape:
        raise ShapeMismatchError(f"momentum {m.shape} vs gradient {g.shape}")
    return mu * m + (1.0 - mu) * g


def update_hidden(h: Array, m: Array, alpha: float) -> Array:
    """Gradient-descent step on a hidden matrix: h - alpha * m."""
    if h.shape != m.shape:
        raise ShapeMismatchError(f"hidden {h.shape} vs momentum {m.shape}")
    return h - alpha * m


@dataclass
class GbdtLayer:
    """One booster per output column, all reading the same input width."""

    in_dim: int
    out_dim: int
    params: BoosterParams
    boosters: list[Booster] = field(default_factory=list)

    def forward(self, h: Array) -> Array:
        h = self._check_input(h)
        if len(self.boosters) != self.out_dim:
            raise RuntimeError("layer has not been fitted yet")
        return np.column_stack([b.predict(h) for b in self.boosters])

    def backprop(self, h: Array, grad_out: Array) -> Array:
        """Per-row Jacobian-transpose product: sum_j grad_out[:, j] * dT_j/dh."""
        h = self._check_input(h)
        grad_in = np.zeros_like(h, dtype=np.float64)
        for j, booster in enumerate(self.boosters):
            grad_in += grad_out[:, j : j + 1] * booster.gradient(h)
        return grad_in

    def jacobian(self, x: Array) -> Array:
        """Jacobian at a single input row, shape (out_dim, in_dim)."""
        return np.vstack([b.gradient_row(x) for b in self.boosters])

    def refit(self, h_in: Array, h_target: Array, rng: np.random.Generator):
        """Discard the boosters and refit each output column from scratch."""
        h_in = self._check_input(h_in)
        if h_target.shape != (h_in.shape[0], self.out_dim):
            raise ShapeMismatchError(
                f"targets {h_target.shape} vs expected ({h_in.shape[0]}, {self.out_dim})"
            )
        orders = presort_columns(h_in)
        children = rng.spawn(self.out_dim)
        self.boosters = [
            fit_booster(h_in, h_target[:, j], self.params, children[j], presorted=orders)
            for j in range(self.out_dim)
        ]

    def split_thresholds(self) -> list[tuple[int, float]]:
        found = []
        for booster in self.boosters:
            for tree in booster.trees:
                found.extend(tree.split_thresholds())
        return found

    def _check_input(self, h: Array) -> Array:
        h = np.asarray(h, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise DimensionMismatchError(f"expected (n, {self.in_dim}) input, got {h.shape}")
        return h


@dataclass
class DenseLayer:
    """Affine map with an optional ReLU, updated by full-batch gradient steps."""

    weights: Array  # (out_dim, in_dim)
    bias: Array  # (out_dim,)
    activation: str = ACT_RELU
    sgd_lr: float = 0.01
    sgd_steps: int = 15

    def __post_init__(self):
        if self.activation not in (ACT_RELU, ACT_IDENTITY):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.sgd_lr <= 0:
            raise ValueError(f"sgd_lr must be positive, got {self.sgd_lr}")
        if self.sgd_steps < 1:
            raise ValueError(f"sgd_steps must be >= 1, got {self.sgd_steps}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def initialize(
        cls,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        activation: str = ACT_RELU,
        sgd_lr: float = 0.01,
        sgd_steps: int = 15,
    ) -> "DenseLayer":
        """Random weights with std 1/sqrt(in_dim); zero bias."""
        weights = gaussian_matrix(out_dim, in_dim, 0.0, 1.0 / np.sqrt(in_dim), rng)
        return cls(
            weights=weights,
            bias=np.zeros(out_dim),
            activation=activation,
            sgd_lr=sgd_lr,
            sgd_steps=sgd_steps,
        )

    def forward(self, h: Array) -> Array:
        h = self._check_input(h)
        pre = h @ self.weights.T + self.bias
        return np.maximum(pre, 0.0) if self.activation == ACT_RELU else pre

    def backprop(self, h: Array, grad_out: Array) -> Array:
        h = self._check_input(h)
        delta = grad_out * self._act_prime(h @ self.weights.T + self.bias)
        return delta @ self.weights

    def jacobian(self, x: Array) -> Array:
        pre = self.weights @ np.asarray(x, dtype=np.float64) + self.bias
        return self._act_prime(pre)[:, None] * self.weights

    def refit(self, h_in: Array, h_target: Array, rng: np.random.Generator):
        """Full-batch gradient steps on the mean squared error to the targets."""
        h_in = self._check_input(h_in)
        if h_target.shape != (h_in.shape[0], self.out_dim):
            raise ShapeMismatchError(
                f"targets {h_target.shape} vs expected ({h_in.shape[0]}, {self.out_dim})"
            )
        n = h_in.shape[0]
        scale = 2.0 / (n * self.out_dim)
        for _ in range(self.sgd_steps):
            pre = h_in @ self.weights.T + self.bias
            out = np.maximum(pre, 0.0) if self.activation == ACT_RELU else pre
            delta = (out - h_target) * self._act_prime(pre) * scale
            self.weights = self.weights - self.sgd_lr * (delta.T @ h_in)
            self.bias = self.bias - self.sgd_lr * delta.sum(axis=0)

    def split_thresholds(self) -> list[tuple[int, float]]:
        return []

    def _act_prime(self, pre: Array) -> Array:
        if self.activation == ACT_RELU:
            return (pre > 0.0).astype(np.float64)
        return np.ones_like(pre)

    def _check_input(self, h: Array) -> Array:
        h = np.asarray(h, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise DimensionMismatchError(f"expected (n, {self.in_dim}) input, got {h.shape}")
        return h


Layer = GbdtLayer | DenseLayer


@dataclass
class LayerStack:
    """Ordered layers plus the final loss choice."""

    layers: list[Layer]
    loss: str = LOSS_MSE

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a stack needs at least one layer")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise DimensionMismatchError(
                    f"layer widths do not chain: {a.out_dim} -> {b.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward_all(self, x: Array) -> list[Array]:
        """Hidden matrices after each layer, in order."""
        hiddens = []
        h = x
        for layer in self.layers:
            h = layer.forward(h)
            hiddens.append(h)
        return hiddens

    def predict(self, x: Array) -> Array:
        return self.forward_all(np.asarray(x, dtype=np.float64))[-1]

    def backward(
        self, x: Array, hiddens: list[Array], grad_last: Array, need_input_grad: bool = True
    ) -> list[Array | None]:
        """Pull a gradient at the final output back through every layer.

        Returns a list ``grads`` with ``grads[i]`` the gradient with respect
        to layer ``i``'s input (``grads[0]`` is with respect to ``x``; it is
        ``None`` when ``need_input_grad`` is false and the pass stops early).
        """
        inputs = [x] + hiddens[:-1]
        grads: list[Array | None] = [None] * len(self.layers)
        g = grad_last
        for li in range(len(self.layers) - 1, -1, -1):
            if li == 0 and not need_input_grad:
                break
            g = self.layers[li].backprop(inputs[li], g)
            grads[li] = g
        return grads

    def split_margins(self, x: Array) -> Array:
        """Per-row distance to the nearest split threshold across all layers.

        Rows far from every threshold sit strictly inside one cell of the
        joint tree partition, where the model is smooth and finite
        differences of the forward map are trustworthy.
        """
        x = np.asarray(x, dtype=np.float64)
        margins = np.full(x.shape[0], np.inf)
        h = x
        for layer in self.layers:
            for feature, threshold in layer.split_thresholds():
                margins = np.minimum(margins, np.abs(h[:, feature] - threshold))
            h = layer.forward(h)
        return margins

    def routing_signature(self, x_row: Array) -> tuple[int, ...]:
        """Identity of every leaf reached by one sample, across all trees.

        Two inputs with equal signatures live in the same cell of the joint
        partition, so the stack restricted to the segment between them is a
        fixed composition of leaf polynomials.
        """
        sig: list[int] = []
        h = np.asarray(x_row, dtype=np.float64)
        for layer in self.layers:
            if isinstance(layer, GbdtLayer):
                for booster in layer.boosters:
                    for tree in booster.trees:
                        sig.append(id(tree.route(h)))
                h = np.array([b.predict_row(h) for b in layer.boosters])
            else:
                h = layer.forward(h[None, :])[0]
        return tuple(sig)


@dataclass
class TrainConfig:
    """Hyperparameters of the layered trainer."""

    epochs: int = 60
    alpha: float = 0.5
    mu: float = 0.5
    init_std: float = 1.0
    seed: int = 0
    metric: str | None = None  # "rmse" | "accuracy"; default picked from the loss

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"mu must be in [0, 1), got {self.mu}")
        if self.init_std <= 0:
            raise ValueError(f"init_std must be positive, got {self.init_std}")
        if self.metric not in (None, "rmse", "accuracy"):
            raise ValueError(f"unknown metric {self.metric!r}")


def _evaluate_metric(metric: str, pred: Array, y: Array) -> float:
    return accuracy(pred, y) if metric == "accuracy" else rmse(pred, y)


def train(
    stack: LayerStack,
    x: Array,
    y: Array,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
    on_epoch: Callable[[int, list[Array], dict], None] | None = None,
) -> list[dict]:
    """Fit the stack on a full batch and return the per-epoch history.

    Initialization draws every hidden matrix as Gaussian noise and fits each
    layer once to map the (previous) noise to its own, so the forward pass is
    meaningful from epoch 1.  Each epoch then runs: forward; loss gradient at
    the top; backward; and, from the last layer down to the first, momentum
    update of the hidden targets followed by a from-scratch refit of the
    layer against the not-yet-updated inputs.  Momentum buffers persist
    across epochs.

    History entry ``k`` records the loss and metric of the model after ``k``
    complete epochs; with ``epochs == 0`` the history is empty and the stack
    keeps its initialization.  ``on_epoch(k, hiddens, record)`` fires as each
    entry is recorded.

    Raises:
        NonFiniteLossError: the loss stopped being finite, with the epoch
            index at which this was detected.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"inputs {x.shape} vs targets {y.shape}")
    if x.shape[1] != stack.in_dim:
        raise DimensionMismatchError(f"stack expects {stack.in_dim} inputs, data has {x.shape[1]}")
    if y.shape[1] != stack.out_dim:
        raise DimensionMismatchError(f"stack emits {stack.out_dim} outputs, data has {y.shape[1]}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    metric_name = config.metric or ("accuracy" if stack.loss == LOSS_SOFTMAX_CE else "rmse")

    n = x.shape[0]
    layers = stack.layers
    hidden = [gaussian_matrix(n, layer.out_dim, 0.0, config.init_std, rng) for layer in layers]
    init_inputs = [x] + hidden[:-1]
    for li, layer in enumerate(layers):
        layer.refit(init_inputs[li], hidden[li], rng)
    momentum = [np.zeros_like(h) for h in hidden]

    history: list[dict] = []

    def record(epoch_done: int, loss_value: float, hiddens: list[Array]):
        entry = {
            "epoch": epoch_done,
            "loss": loss_value,
            "metric_name": metric_name,
            "metric": _evaluate_metric(metric_name, hiddens[-1], y),
        }
        history.append(entry)
        if on_epoch is not None:
            on_epoch(epoch_done, hiddens, entry)

    for epoch in range(1, config.epochs + 1):
        hiddens = stack.forward_all(x)
        loss_value, grad_avg = loss_and_gradient(hiddens[-1], y, stack.loss)
        if not np.isfinite(loss_value):
            raise NonFiniteLossError(f"loss became non-finite entering epoch {epoch}", epoch)
        if epoch > 1:
            record(epoch - 1, loss_value, hiddens)
        grad_rows = grad_avg * n  # per-row gradient; keeps alpha batch-size independent
        grads = stack.backward(x, hiddens, grad_rows, need_input_grad=False)
        for li in range(len(layers) - 1, -1, -1):
            g = grad_rows if li == len(layers) - 1 else grads[li + 1]
            momentum[li] = momentum_update(momentum[li], g, config.mu)
            hidden[li] = update_hidden(hiddens[li], momentum[li], config.alpha)
            layer_input = x if li == 0 else hiddens[li - 1]
            layers[li].refit(layer_input, hidden[li], rng)

    if config.epochs > 0:
        hiddens = stack.forward_all(x)
        loss_value, _ = loss_and_gradient(hiddens[-1], y, stack.loss)
        if not np.isfinite(loss_value):
            raise NonFiniteLossError(
                f"loss became non-finite after epoch {config.epochs}", config.epochs
            )
        record(config.epochs, loss_value, hiddens)
    return history
