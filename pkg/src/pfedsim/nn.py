"""Minimal dense neural-network engine: forward, backprop, plain SGD.

Models are stacks of fully connected layers in float64.  Every model is
decoupled into a feature extractor (all layers but the last) and a
classifier (the last, linear layer); the classifier's rows are the
per-class decision boundaries used by the similarity metrics.

Parameter arrays are treated as immutable: every update builds new arrays,
so layers can be shared between models and snapshots are free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

RELU = "relu"
IDENTITY = "identity"
_ACTIVATIONS = (RELU, IDENTITY)


@dataclass
class DenseLayer:
    """One fully connected layer: ``weights`` is (out, in), ``bias`` is (out,)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = IDENTITY

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer expects 2-d weights and 1-d bias")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} does not match "
                f"{self.weights.shape[0]} output units"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def num_params(self) -> int:
        return self.weights.size + self.bias.size


@dataclass
class Model:
    """An MLP whose last layer is the linear classifier.

    ``extractor`` is ``layers[:-1]`` and ``classifier`` is ``layers[-1]``;
    together they partition the parameter set.
    """

    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ShapeError("model needs at least one layer")
        for k in range(len(self.layers) - 1):
            if self.layers[k].out_width != self.layers[k + 1].in_width:
                raise ShapeError(
                    f"layer {k} outputs {self.layers[k].out_width} values but "
                    f"layer {k + 1} expects {self.layers[k + 1].in_width}"
                )
        if self.layers[-1].activation != IDENTITY:
            raise ShapeError("the final (classifier) layer must be linear")

    @property
    def extractor(self) -> list[DenseLayer]:
        return self.layers[:-1]

    @property
    def classifier(self) -> DenseLayer:
        return self.layers[-1]

    @property
    def in_width(self) -> int:
        return self.layers[0].in_width

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_width

    @property
    def num_params(self) -> int:
        return sum(layer.num_params for layer in self.layers)


def init_mlp(
    dim: int, hidden: tuple[int, ...], classes: int, rng: np.random.Generator
) -> Model:
    """Build ``dim -> hidden... (ReLU) -> classes (linear)`` with Glorot-uniform init."""
    widths = [dim, *hidden, classes]
    layers = []
    for k in range(len(widths) - 1):
        fan_in, fan_out = widths[k], widths[k + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = RELU if k < len(widths) - 2 else IDENTITY
        layers.append(DenseLayer(weights, np.zeros(fan_out), act))
    return Model(layers)


def join_model(extractor: list[DenseLayer], classifier: DenseLayer) -> Model:
    return Model([*extractor, classifier])


def forward(model: Model, inputs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run the model on a (batch, features) array.

    Returns the logits and the post-activation output of every layer; the
    second-to-last entry is the feature representation fed to the classifier.
    """
    out = np.asarray(inputs, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError("inputs must be a (batch, features) array")
    activations: list[np.ndarray] = []
    for k, layer in enumerate(model.layers):
        if out.shape[1] != layer.in_width:
            raise ShapeError(
                f"layer {k} expects {layer.in_width} inputs, got {out.shape[1]}"
            )
        out = out @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            out = np.maximum(out, 0.0)
        activations.append(out)
    return activations[-1], activations


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_grad(
    model: Model, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean softmax cross-entropy and its exact gradients.

    Returns ``(loss, grads)`` where ``grads[k]`` is the ``(dW, db)`` pair for
    layer ``k``, shaped like that layer's parameters.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    if inputs.shape[0] == 0:
        raise ValueError("batch is empty")
    if labels.shape[0] != inputs.shape[0]:
        raise ShapeError("inputs and labels disagree on batch size")

    logits, activations = forward(model, inputs)
    batch = inputs.shape[0]
    probs = _softmax(logits)
    picked = probs[np.arange(batch), labels]
    loss = float(-np.mean(np.log(picked)))

    # delta is dLoss/d(pre-activation) of the current layer, walking backwards.
    delta = probs.copy()
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)  # type: ignore[list-item]
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        layer_in = inputs if k == 0 else activations[k - 1]
        grads[k] = (delta.T @ layer_in, delta.sum(axis=0))
        if k > 0:
            delta = delta @ layer.weights
            if model.layers[k - 1].activation == RELU:
                delta = delta * (activations[k - 1] > 0.0)
    return loss, grads


def sgd_step(
    model: Model, grads: list[tuple[np.ndarray, np.ndarray]], lr: float
) -> Model:
    """One plain gradient step ``p - lr * g``; returns a new model."""
    if lr < 0.0:
        raise ValueError(f"learning rate must be nonnegative, got {lr}")
    if len(grads) != len(model.layers):
        raise ShapeError("gradient list does not match layer count")
    layers = []
    for layer, (d_weights, d_bias) in zip(model.layers, grads):
        if d_weights.shape != layer.weights.shape or d_bias.shape != layer.bias.shape:
            raise ShapeError("gradient shapes do not match layer parameters")
        layers.append(
            DenseLayer(
                layer.weights - lr * d_weights,
                layer.bias - lr * d_bias,
                layer.activation,
            )
        )
    return Model(layers)


def local_train(
    model: Model,
    inputs: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
) -> Model:
    """Mini-batch SGD for ``epochs`` full passes with a per-epoch reshuffle.

    Deterministic given (model, data, rng state); the input model is left
    untouched.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    count = inputs.shape[0]
    if count == 0:
        raise ValueError("training set is empty")

    for _ in range(epochs):
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            take = order[start : start + batch_size]
            _, grads = loss_and_grad(model, inputs[take], labels[take])
            model = sgd_step(model, grads, lr)
    return model


def predict(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class index."""
    logits, _ = forward(model, inputs)
    return np.argmax(logits, axis=1)


def mean_loss(model: Model, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy without gradients."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise ValueError("evaluation set is empty")
    logits, _ = forward(model, inputs)
    probs = _softmax(logits)
    picked = probs[np.arange(inputs.shape[0]), np.asarray(labels)]
    return float(-np.mean(np.log(picked)))


def flatten_params(model: Model) -> np.ndarray:
    """Concatenate each layer's weights then bias into one vector.

    The length equals the model's parameter count, the unit used for
    communication accounting.
    """
    parts = []
    for layer in model.layers:
        parts.append(layer.weights.ravel())
        parts.append(layer.bias)
    return np.concatenate(parts)


def unflatten_params(vector: np.ndarray, template: Model) -> Model:
    """Inverse of :func:`flatten_params` against a shape template."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (template.num_params,):
        raise ShapeError(
            f"expected a vector of length {template.num_params}, got {vector.shape}"
        )
    layers = []
    offset = 0
    for layer in template.layers:
        w_size = layer.weights.size
        weights = vector[offset : offset + w_size].reshape(layer.weights.shape)
        offset += w_size
        bias = vector[offset : offset + layer.bias.size]
        offset += layer.bias.size
        layers.append(DenseLayer(weights.copy(), bias.copy(), layer.activation))
    return Model(layers)


def decision_boundaries(classifier: DenseLayer, include_bias: bool = True) -> np.ndarray:
    """Per-class boundary vectors: each classifier row, optionally with its bias.

    Returns a (classes, width) array; ``include_bias`` appends the class bias
    as the last component of every row.
    """
    if include_bias:
        return np.hstack([classifier.weights, classifier.bias[:, None]])
    return classifier.weights.copy()


def models_equal(a: Model, b: Model) -> bool:
    """Exact (bitwise) parameter equality."""
    if len(a.layers) != len(b.layers):
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.weights.shape != lb.weights.shape:
            return False
        if not (la.weights == lb.weights).all() or not (la.bias == lb.bias).all():
            return False
    return True
