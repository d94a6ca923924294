"""Minimal dense feed-forward network with reverse-mode gradients.

The network is a stack of linear layers with leaky-ReLU activations on the
hidden layers and a linear output layer (width 4 by default, feeding the
evidential head). Training-time dropout uses inverted scaling so inference
needs no rescaling. L1/L2 penalties apply to weight matrices only, never to
biases. Everything is plain float64 numpy; training is single-threaded and
deterministic for a fixed seed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError, UsageError

LEAKY_SLOPE = 0.1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    """Knobs for one training run of the evidential model."""

    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    evidential_coef: float = 0.59
    seed: int = 0

    def validate(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.evidential_coef < 0:
            raise ConfigError(f"evidential_coef must be >= 0, got {self.evidential_coef}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")


@dataclass
class Layer:
    weights: np.ndarray  # [fan_in, fan_out]
    bias: np.ndarray  # [fan_out]


@dataclass
class MLP:
    """Dense network state: layers, activation slope, dropout, penalties.

    ``version`` increments on every optimizer step so that stale forward
    caches can be detected in :func:`backward`.
    """

    layers: list[Layer]
    dropout: float = 0.0
    l1: float = 0.0
    l2: float = 0.0
    leaky_slope: float = LEAKY_SLOPE
    version: int = 0

    def __post_init__(self) -> None:
        if not self.layers:
            raise ConfigError("MLP needs at least one layer")
        if not 0.0 <= self.dropout <= 0.5:
            raise ConfigError(f"dropout must be in [0, 0.5], got {self.dropout}")
        if self.l1 < 0 or self.l2 < 0:
            raise ConfigError("l1 and l2 penalties must be >= 0")
        for i, layer in enumerate(self.layers):
            if layer.weights.ndim != 2 or layer.bias.ndim != 1:
                raise DimensionError(f"layer {i}: weights must be 2-D and bias 1-D")
            if layer.weights.shape[1] != layer.bias.shape[0]:
                raise DimensionError(
                    f"layer {i}: bias width {layer.bias.shape[0]} does not match "
                    f"weight fan-out {layer.weights.shape[1]}"
                )
            if i > 0 and self.layers[i - 1].weights.shape[1] != layer.weights.shape[0]:
                raise DimensionError(
                    f"layer {i}: fan-in {layer.weights.shape[0]} does not chain with "
                    f"previous fan-out {self.layers[i - 1].weights.shape[1]}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    @property
    def hidden_sizes(self) -> list[int]:
        return [layer.weights.shape[1] for layer in self.layers[:-1]]

    def copy(self) -> "MLP":
        return copy.deepcopy(self)

    @classmethod
    def create(
        cls,
        input_dim: int,
        hidden_sizes: list[int],
        rng: np.random.Generator,
        dropout: float = 0.0,
        l1: float = 0.0,
        l2: float = 0.0,
        output_dim: int = 4,
    ) -> "MLP":
        """Build a network with fan-in scaled uniform init and zero biases."""
        widths = [input_dim, *hidden_sizes, output_dim]
        layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            layers.append(Layer(weights=weights, bias=np.zeros(fan_out)))
        return cls(layers=layers, dropout=dropout, l1=l1, l2=l2)


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by :func:`backward`."""

    inputs: list[np.ndarray]  # input to each layer
    pre_activations: list[np.ndarray]  # z of each hidden layer
    dropout_masks: list[np.ndarray | None]  # scaled keep-mask per hidden layer
    model_version: int
    batch_size: int


def leaky_relu(z: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def forward(
    model: MLP,
    batch: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on ``batch`` [B x D] and cache intermediates.

    Dropout is applied to hidden activations only when ``train_mode`` is set,
    drawing keep-masks from ``rng``.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2:
        raise DimensionError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != model.input_dim:
        raise DimensionError(
            f"batch width {batch.shape[1]} does not match model input width {model.input_dim}"
        )
    use_dropout = train_mode and model.dropout > 0.0
    if use_dropout and rng is None:
        raise UsageError("train_mode forward with dropout > 0 requires an rng")

    inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    a = batch
    for layer in model.layers[:-1]:
        inputs.append(a)
        z = a @ layer.weights + layer.bias
        pre_acts.append(z)
        a = leaky_relu(z, model.leaky_slope)
        if use_dropout:
            keep = rng.random(a.shape) >= model.dropout
            mask = keep / (1.0 - model.dropout)
            a = a * mask
        else:
            mask = None
        masks.append(mask)
    inputs.append(a)
    out = a @ model.layers[-1].weights + model.layers[-1].bias
    if not np.all(np.isfinite(out)):
        raise NumericError("forward pass produced non-finite outputs")
    cache = ForwardCache(
        inputs=inputs,
        pre_activations=pre_acts,
        dropout_masks=masks,
        model_version=model.version,
        batch_size=batch.shape[0],
    )
    return out, cache


@dataclass
class ParamGrads:
    """Gradients mirroring the layer structure of an :class:`MLP`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def backward(model: MLP, cache: ForwardCache, grad_output: np.ndarray) -> ParamGrads:
    """Backpropagate ``grad_output`` [B x out] to parameter gradients.

    ``grad_output`` must already carry any batch-mean normalization. The L1
    subgradient (0 at exactly 0) and the 2*l2*W term are added to every
    weight gradient; biases carry no penalty.
    """
    if cache is None:
        raise UsageError("backward called without a forward cache")
    if cache.model_version != model.version:
        raise UsageError(
            "stale forward cache: the model was updated after this forward pass"
        )
    grad_output = np.asarray(grad_output, dtype=float)
    if grad_output.shape != (cache.batch_size, model.output_dim):
        raise DimensionError(
            f"grad_output shape {grad_output.shape} does not match "
            f"({cache.batch_size}, {model.output_dim})"
        )

    n_layers = len(model.layers)
    d_weights: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]

    delta = grad_output
    for i in range(n_layers - 1, -1, -1):
        layer = model.layers[i]
        a_in = cache.inputs[i]
        dw = a_in.T @ delta
        if model.l1 > 0:
            dw = dw + model.l1 * np.sign(layer.weights)
        if model.l2 > 0:
            dw = dw + 2.0 * model.l2 * layer.weights
        d_weights[i] = dw
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ layer.weights.T
            mask = cache.dropout_masks[i - 1]
            if mask is not None:
                delta = delta * mask
            z = cache.pre_activations[i - 1]
            delta = delta * np.where(z > 0, 1.0, model.leaky_slope)
    return ParamGrads(weights=d_weights, biases=d_biases)


def penalty_loss(model: MLP) -> float:
    """L1/L2 penalty over weight matrices, matching the backward() terms."""
    total = 0.0
    for layer in model.layers:
        if model.l1 > 0:
            total += model.l1 * float(np.abs(layer.weights).sum())
        if model.l2 > 0:
            total += model.l2 * float((layer.weights**2).sum())
    return total


class Adam:
    """Adam optimizer with bias correction, updating an MLP in place."""

    def __init__(self, learning_rate: float):
        if not learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
        self.learning_rate = learning_rate
        self.step_count = 0
        self._m_w: list[np.ndarray] | None = None
        self._v_w: list[np.ndarray] | None = None
        self._m_b: list[np.ndarray] | None = None
        self._v_b: list[np.ndarray] | None = None

    def _init_state(self, model: MLP) -> None:
        self._m_w = [np.zeros_like(l.weights) for l in model.layers]
        self._v_w = [np.zeros_like(l.weights) for l in model.layers]
        self._m_b = [np.zeros_like(l.bias) for l in model.layers]
        self._v_b = [np.zeros_like(l.bias) for l in model.layers]

    def step(self, model: MLP, grads: ParamGrads) -> None:
        if self._m_w is None:
            self._init_state(model)
        if len(grads.weights) != len(model.layers):
            raise DimensionError("gradient layer count does not match model")
        for i, (dw, db) in enumerate(zip(grads.weights, grads.biases)):
            if not np.all(np.isfinite(dw)):
                raise NumericError(f"non-finite weight gradient in layer {i}")
            if not np.all(np.isfinite(db)):
                raise NumericError(f"non-finite bias gradient in layer {i}")

        self.step_count += 1
        t = self.step_count
        correct1 = 1.0 - ADAM_BETA1**t
        correct2 = 1.0 - ADAM_BETA2**t
        for i, layer in enumerate(model.layers):
            for param, grad, m, v in (
                (layer.weights, grads.weights[i], self._m_w[i], self._v_w[i]),
                (layer.bias, grads.biases[i], self._m_b[i], self._v_b[i]),
            ):
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * grad
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * grad**2
                update = (self.learning_rate * (m / correct1)) / (
                    np.sqrt(v / correct2) + ADAM_EPS
                )
                param -= update
            if not np.all(np.isfinite(layer.weights)) or not np.all(
                np.isfinite(layer.bias)
            ):
                raise NumericError(f"non-finite parameters in layer {i} after step")
        model.version += 1
