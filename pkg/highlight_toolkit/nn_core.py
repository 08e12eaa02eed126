"""Small NHWC convolutional network engine in float64 numpy.

Provides the layer kinds used by the highlight classifiers (conv2d, maxpool2d,
flatten, dense, relu, sigmoid, softmax), backpropagation, minibatch SGD with
momentum and early stopping, and the FTA1 weight archive.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._errors import ConfigurationError, FormatError, InvalidInputError, ShapeError, StructureError

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]
PROB_CLIP = 1e-7


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class Layer:
    """Base layer. Inputs and outputs are batched arrays (batch first)."""

    kind = ""
    param_names: Tuple[str, ...] = ()

    def __init__(self, trainable: bool = True):
        self.trainable = trainable

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.param_names}

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache, need_input_grad: bool = True):
        """Return (dx or None, {param_name: gradient})."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "trainable": self.trainable}


class Conv2D(Layer):
    """2-D convolution; weight is filters x kernel_h x kernel_w x in_channels."""

    kind = "conv2d"
    param_names = ("weight", "bias")

    def __init__(self, weight: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0,
                 trainable: bool = True):
        super().__init__(trainable)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 4 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"Bad conv2d parameter shapes {self.weight.shape} / {self.bias.shape}")
        if stride < 1 or padding < 0:
            raise ConfigurationError(f"Bad conv2d stride={stride} padding={padding}")
        self.stride = stride
        self.padding = padding

    @classmethod
    def create(cls, in_channels: int, filters: int, kernel: int, rng: np.random.Generator,
               stride: int = 1, padding: int = 0) -> "Conv2D":
        fan_in = kernel * kernel * in_channels
        limit = math.sqrt(6.0 / fan_in)
        weight = rng.uniform(-limit, limit, size=(filters, kernel, kernel, in_channels))
        return cls(weight, np.zeros(filters), stride, padding)

    @property
    def in_channels(self) -> int:
        return self.weight.shape[3]

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[2] != self.in_channels:
            raise ShapeError(f"conv2d expects (h, w, {self.in_channels}), got {input_shape}")
        _, m, n, _ = self.weight.shape
        h = (input_shape[0] + 2 * self.padding - m) // self.stride + 1
        w = (input_shape[1] + 2 * self.padding - n) // self.stride + 1
        if h < 1 or w < 1:
            raise ShapeError(f"conv2d kernel {m}x{n} larger than input {input_shape}")
        return h, w, self.weight.shape[0]

    def _pad(self, x: np.ndarray) -> np.ndarray:
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))

    def forward(self, x, keep_cache=False):
        filters, m, n, c = self.weight.shape
        xp = self._pad(x)
        windows = sliding_window_view(xp, (m, n), axis=(1, 2))[:, ::self.stride, ::self.stride]
        batch, out_h, out_w = windows.shape[:3]
        cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(batch * out_h * out_w, m * n * c)
        y = cols @ self.weight.reshape(filters, -1).T + self.bias
        cache = (cols, x.shape, (batch, out_h, out_w)) if keep_cache else None
        return y.reshape(batch, out_h, out_w, filters), cache

    def backward(self, dy, cache, need_input_grad=True):
        cols, x_shape, (batch, out_h, out_w) = cache
        filters, m, n, c = self.weight.shape
        dy2 = dy.reshape(-1, filters)
        grads = {
            "weight": (dy2.T @ cols).reshape(self.weight.shape),
            "bias": dy2.sum(axis=0),
        }
        if not need_input_grad:
            return None, grads

        dcols = (dy2 @ self.weight.reshape(filters, -1)).reshape(batch, out_h, out_w, m, n, c)
        p, s = self.padding, self.stride
        dxp = np.zeros((x_shape[0], x_shape[1] + 2 * p, x_shape[2] + 2 * p, x_shape[3]))
        for i in range(m):
            for j in range(n):
                dxp[:, i:i + s * (out_h - 1) + 1:s, j:j + s * (out_w - 1) + 1:s, :] += dcols[:, :, :, i, j, :]
        if p:
            dxp = dxp[:, p:-p, p:-p, :]
        return dxp, grads

    def describe(self):
        return {**super().describe(), "stride": self.stride, "padding": self.padding}


class MaxPool2D(Layer):
    """Non-overlapping size x size max pooling; trailing rows/columns are dropped."""

    kind = "maxpool2d"

    def __init__(self, size: int = 2, trainable: bool = True):
        super().__init__(trainable)
        if size < 1:
            raise ConfigurationError(f"Pool size must be >= 1, got {size}")
        self.size = size

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"maxpool2d expects (h, w, c), got {input_shape}")
        h, w = input_shape[0] // self.size, input_shape[1] // self.size
        if h < 1 or w < 1:
            raise ShapeError(f"maxpool2d size {self.size} larger than input {input_shape}")
        return h, w, input_shape[2]

    def forward(self, x, keep_cache=False):
        k = self.size
        batch, h, w, c = x.shape
        out_h, out_w = h // k, w // k
        blocks = (x[:, :out_h * k, :out_w * k]
                  .reshape(batch, out_h, k, out_w, k, c)
                  .transpose(0, 1, 3, 5, 2, 4)
                  .reshape(batch, out_h, out_w, c, k * k))
        argmax = np.argmax(blocks, axis=-1)
        y = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
        return y, ((argmax, x.shape) if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        if not need_input_grad:
            return None, {}
        argmax, x_shape = cache
        k = self.size
        batch, out_h, out_w, c = dy.shape
        blocks = np.zeros((batch, out_h, out_w, c, k * k))
        np.put_along_axis(blocks, argmax[..., None], dy[..., None], axis=-1)
        dx = np.zeros(x_shape)
        dx[:, :out_h * k, :out_w * k] = (blocks
                                         .reshape(batch, out_h, out_w, c, k, k)
                                         .transpose(0, 1, 4, 2, 5, 3)
                                         .reshape(batch, out_h * k, out_w * k, c))
        return dx, {}

    def describe(self):
        return {**super().describe(), "size": self.size}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, keep_cache=False):
        return x.reshape(x.shape[0], -1), (x.shape if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        return (dy.reshape(cache) if need_input_grad else None), {}


class Dense(Layer):
    """Fully-connected layer; weight is in_features x out_features."""

    kind = "dense"
    param_names = ("weight", "bias")

    def __init__(self, weight: np.ndarray, bias: np.ndarray, trainable: bool = True):
        super().__init__(trainable)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"Bad dense parameter shapes {self.weight.shape} / {self.bias.shape}")

    @classmethod
    def create(cls, in_features: int, out_features: int, rng: np.random.Generator) -> "Dense":
        limit = math.sqrt(6.0 / in_features)
        return cls(rng.uniform(-limit, limit, size=(in_features, out_features)), np.zeros(out_features))

    @property
    def units(self) -> int:
        return self.weight.shape[1]

    def output_shape(self, input_shape):
        if input_shape != (self.weight.shape[0],):
            raise ShapeError(f"dense expects ({self.weight.shape[0]},), got {input_shape}")
        return (self.units,)

    def forward(self, x, keep_cache=False):
        return x @ self.weight + self.bias, (x if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        grads = {"weight": cache.T @ dy, "bias": dy.sum(axis=0)}
        return (dy @ self.weight.T if need_input_grad else None), grads


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, keep_cache=False):
        mask = x > 0
        return x * mask, (mask if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        return (dy * cache if need_input_grad else None), {}


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, keep_cache=False):
        y = sigmoid(x)
        return y, (y if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        return (dy * cache * (1.0 - cache) if need_input_grad else None), {}


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, keep_cache=False):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=1, keepdims=True)
        return y, (y if keep_cache else None)

    def backward(self, dy, cache, need_input_grad=True):
        if not need_input_grad:
            return None, {}
        inner = (dy * cache).sum(axis=1, keepdims=True)
        return cache * (dy - inner), {}


LAYER_KINDS = {
    cls.kind: cls for cls in (Conv2D, MaxPool2D, Flatten, Dense, ReLU, Sigmoid, Softmax)
}
HEAD_ACTIVATIONS = (Sigmoid, Softmax)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # kept strictly inside (0, 1) so scores never saturate
    return np.clip(np.exp(-np.logaddexp(0.0, -z)), PROB_CLIP, 1.0 - PROB_CLIP)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class Model:
    """Sequential classifier ending in dense + sigmoid (binary) or dense + softmax (multi-class)."""

    def __init__(self, layers: Sequence[Layer], input_shape: Shape):
        self.layers: List[Layer] = list(layers)
        self.input_shape: Shape = tuple(int(d) for d in input_shape)
        self._check_chain()

    def _check_chain(self) -> None:
        if len(self.layers) < 2:
            raise StructureError("A model needs at least a dense layer and a head activation")
        head, last_dense = self.layers[-1], self.layers[-2]
        if not isinstance(head, HEAD_ACTIVATIONS) or not isinstance(last_dense, Dense):
            raise StructureError("A model must end with dense followed by sigmoid or softmax")
        if isinstance(head, Sigmoid) and last_dense.units != 1:
            raise StructureError(f"A sigmoid head needs dense(1), got dense({last_dense.units})")
        for layer in self.layers[:-1]:
            if isinstance(layer, HEAD_ACTIVATIONS):
                raise StructureError(f"{layer.kind} is only allowed as the final activation")

        shape = self.input_shape
        for layer in self.layers:
            shape = tuple(layer.output_shape(shape))

    @property
    def is_binary(self) -> bool:
        return isinstance(self.layers[-1], Sigmoid)

    def parameters(self, trainable_only: bool = False) -> Dict[str, np.ndarray]:
        """Parameter arrays keyed layer{i}.{name}; the arrays are the live layer buffers."""
        params = {}
        for i, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            for name, value in layer.params().items():
                params[f"layer{i}.{name}"] = value
        return params

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def copy(self) -> "Model":
        return copy.deepcopy(self)

    def check_input(self, x: np.ndarray) -> None:
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"Model expects inputs of shape {self.input_shape}, got {tuple(x.shape[1:])}")

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Head activations for a batch: shape (N,) for sigmoid heads, (N, C) for softmax."""
        x = np.asarray(x, dtype=np.float64)
        self.check_input(x)
        for layer in self.layers:
            x, _ = layer.forward(x)
        return x[:, 0] if self.is_binary else x

    def __repr__(self):
        kinds = " -> ".join(layer.kind for layer in self.layers)
        return f"Model(input_shape={self.input_shape}, layers={kinds})"


def build_classifier(input_shape: Shape, seed: int, filters: Tuple[int, int] = (16, 32),
                     kernel: int = 3, hidden: int = 64) -> Model:
    """Reference binary classifier: two conv/relu/pool blocks, dense(hidden)+relu, dense(1)+sigmoid."""
    return _conv_spine(input_shape, seed, filters, kernel, hidden, head_units=1, head=Sigmoid())


def build_source_model(input_shape: Shape, num_classes: int, seed: int,
                       filters: Tuple[int, int] = (16, 32), kernel: int = 3, hidden: int = 64) -> Model:
    """Multi-class image classifier with a dense+softmax head, used as a transfer source."""
    if num_classes < 2:
        raise ConfigurationError(f"A softmax head needs >= 2 classes, got {num_classes}")
    return _conv_spine(input_shape, seed, filters, kernel, hidden, head_units=num_classes, head=Softmax())


def _conv_spine(input_shape, seed, filters, kernel, hidden, head_units, head) -> Model:
    rng = np.random.default_rng(seed)
    h, w, c = input_shape
    layers: List[Layer] = []
    shape = (h, w, c)
    for count in filters:
        conv = Conv2D.create(shape[2], count, kernel, rng)
        pool = MaxPool2D(2)
        layers += [conv, ReLU(), pool]
        shape = pool.output_shape(conv.output_shape(shape))
    flat = int(np.prod(shape))
    layers += [Flatten(), Dense.create(flat, hidden, rng), ReLU(), Dense.create(hidden, head_units, rng), head]
    return Model(layers, input_shape)


def model_forward(model: Model, input: np.ndarray) -> float:
    """Highlight score of a single (h, w, c) input."""
    x = np.asarray(input, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ShapeError(f"Model expects input of shape {model.input_shape}, got {x.shape}")
    if not model.is_binary:
        raise StructureError("model_forward needs a binary (sigmoid) classifier")
    return float(model.forward_batch(x[None])[0])


def predict(model: Model, inputs: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Head activations for many inputs, evaluated in fixed-size groups."""
    outputs = [model.forward_batch(np.asarray(inputs[i:i + batch_size], dtype=np.float64))
               for i in range(0, len(inputs), batch_size)]
    return np.concatenate(outputs, axis=0)


# ---------------------------------------------------------------------------
# Losses and gradients
# ---------------------------------------------------------------------------

def bce_loss(prediction, label):
    """Binary cross-entropy with predictions clipped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(prediction, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(label, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(loss) if loss.ndim == 0 else loss


def _mean_loss(model: Model, outputs: np.ndarray, labels: np.ndarray) -> float:
    if model.is_binary:
        return float(np.mean(bce_loss(outputs, labels)))
    picked = outputs[np.arange(len(labels)), labels.astype(np.int64)]
    return float(np.mean(-np.log(np.clip(picked, PROB_CLIP, 1.0))))


def _head_delta(model: Model, outputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean loss w.r.t. the pre-activation of the head."""
    n = len(labels)
    if model.is_binary:
        return ((outputs - labels.astype(np.float64)) / n)[:, None]
    target = np.zeros_like(outputs)
    target[np.arange(n), labels.astype(np.int64)] = 1.0
    return (outputs - target) / n


def _first_trainable(model: Model) -> Optional[int]:
    for i, layer in enumerate(model.layers):
        if layer.trainable and layer.param_names:
            return i
    return None


def batch_gradients(model: Model, inputs: np.ndarray, labels: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean loss over the batch and its gradients for every trainable parameter."""
    x = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    if len(x) == 0:
        raise InvalidInputError("Cannot compute gradients of an empty batch")
    model.check_input(x)

    stop = _first_trainable(model)
    caches = []
    for i, layer in enumerate(model.layers):
        x, cache = layer.forward(x, keep_cache=stop is not None and i >= stop)
        caches.append(cache)
    outputs = x[:, 0] if model.is_binary else x
    loss = _mean_loss(model, outputs, labels)
    if stop is None:
        return loss, {}

    grads: Dict[str, np.ndarray] = {}
    # the head activation is folded into the loss gradient
    delta = _head_delta(model, outputs, labels)
    for i in range(len(model.layers) - 2, stop - 1, -1):
        layer = model.layers[i]
        delta, layer_grads = layer.backward(delta, caches[i], need_input_grad=i > stop)
        if layer.trainable:
            for name, g in layer_grads.items():
                grads[f"layer{i}.{name}"] = g
    return loss, grads


def compute_gradients(model: Model, batch: Sequence[Tuple[np.ndarray, int]]) -> Dict[str, np.ndarray]:
    """Gradients of the mean loss over (input, label) pairs; frozen layers get no entries."""
    if len(batch) == 0:
        raise InvalidInputError("Cannot compute gradients of an empty batch")
    inputs = np.stack([np.asarray(x, dtype=np.float64) for x, _ in batch])
    labels = np.array([y for _, y in batch])
    return batch_gradients(model, inputs, labels)[1]


def finite_difference_gradients(model: Model, inputs: np.ndarray, labels: np.ndarray,
                                step: float = 1e-5) -> Dict[str, np.ndarray]:
    """Central finite-difference gradients of the mean loss for every trainable parameter."""
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    grads = {}
    for name, param in model.parameters(trainable_only=True).items():
        grad = np.zeros_like(param)
        flat, flat_grad = param.reshape(-1), grad.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + step
            plus = _mean_loss(model, model.forward_batch(inputs), labels)
            flat[j] = original - step
            minus = _mean_loss(model, model.forward_batch(inputs), labels)
            flat[j] = original
            flat_grad[j] = (plus - minus) / (2.0 * step)
        grads[name] = grad
    return grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 16
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def batch_size_for(train_size: int, fraction: float) -> int:
    """Minibatch size as a fraction of the training-set cardinality (at least 1)."""
    return max(1, int(round(train_size * fraction)))


def _as_arrays(dataset) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple):
        inputs, labels = dataset
    else:
        inputs, labels = dataset.inputs, dataset.labels
    if len(inputs) == 0:
        raise InvalidInputError("Training and validation datasets must be non-empty")
    return inputs, np.asarray(labels)


def _accuracy(model: Model, outputs: np.ndarray, labels: np.ndarray) -> float:
    predicted = (outputs > 0.5).astype(np.int64) if model.is_binary else np.argmax(outputs, axis=1)
    return float(np.mean(predicted == labels))


def train_model(model: Model, train, val, config: TrainConfig) -> Tuple[Model, List[EpochRecord]]:
    """Minibatch SGD with momentum and early stopping on validation loss.

    ``train`` and ``val`` are LabeledDatasets or (inputs, labels) tuples. The input
    model is left untouched; the returned copy holds the best-validation weights.
    """
    x_train, y_train = _as_arrays(train)
    x_val, y_val = _as_arrays(val)
    model = model.copy()
    rng = np.random.default_rng(config.seed)

    params = model.parameters(trainable_only=True)
    velocity = {name: np.zeros_like(p) for name, p in params.items()}
    best_loss, best_epoch = math.inf, 0
    best_params = {name: p.copy() for name, p in params.items()}
    history: List[EpochRecord] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_train))
        losses, weights = [], []
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = batch_gradients(model, x_train[idx], y_train[idx])
            for name, g in grads.items():
                velocity[name] *= config.momentum
                velocity[name] -= config.learning_rate * g
                params[name] += velocity[name]
            losses.append(loss)
            weights.append(len(idx))

        val_out = predict(model, x_val)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.average(losses, weights=weights)),
            val_loss=_mean_loss(model, val_out, y_val),
            val_accuracy=_accuracy(model, val_out, y_val),
        )
        history.append(record)
        logger.info(
            f"epoch {epoch}: train_loss={record.train_loss:.4f} "
            f"val_loss={record.val_loss:.4f} val_acc={record.val_accuracy:.3f}"
        )

        if record.val_loss < best_loss:
            best_loss, best_epoch = record.val_loss, epoch
            best_params = {name: p.copy() for name, p in params.items()}
        elif epoch - best_epoch >= config.patience:
            logger.info(f"Early stopping at epoch {epoch}; best epoch {best_epoch} (val_loss={best_loss:.4f})")
            break

    for name, value in best_params.items():
        params[name][...] = value
    return model, history


# ---------------------------------------------------------------------------
# FTA1 weight archive
# ---------------------------------------------------------------------------

MAGIC = b"FTA1"


def save_model(model: Model, path: Union[str, Path]) -> None:
    """Write the FTA1 archive: tensors in layer order, then a JSON footer and its u32 length."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = model.parameters()
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    footer = json.dumps(
        {"input_shape": list(model.input_shape), "layers": [layer.describe() for layer in model.layers]},
        sort_keys=True,
    ).encode("utf-8")
    chunks += [footer, struct.pack("<I", len(footer))]
    path.write_bytes(b"".join(chunks))
    logger.info(f"Saved model with {model.parameter_count()} parameters to {path}")


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise FormatError(f"{self.path}: archive truncated at byte {self.pos}")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_archive(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], dict]:
    """Tensors (in archive order) and the footer metadata of an FTA1 file."""
    path = Path(path)
    data = path.read_bytes()
    reader = _Reader(data, path)
    if reader.take(4) != MAGIC:
        raise FormatError(f"{path}: not an FTA1 weight archive")
    (count,) = reader.unpack("<I")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{path}: bad tensor name") from e
        (ndim,) = reader.unpack("<B")
        dims = reader.unpack(f"<{ndim}I")
        size = int(np.prod(dims)) if ndim else 1
        payload = reader.take(8 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)

    if len(data) - reader.pos < 4:
        raise FormatError(f"{path}: missing footer")
    (footer_len,) = struct.unpack("<I", data[-4:])
    if reader.pos + footer_len + 4 != len(data):
        raise FormatError(f"{path}: footer length does not match archive size")
    try:
        meta = json.loads(reader.take(footer_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable footer: {e}") from e
    return tensors, meta


def load_model(path: Union[str, Path]) -> Model:
    tensors, meta = read_archive(path)
    try:
        layers = []
        for i, spec in enumerate(meta["layers"]):
            kind = spec["kind"]
            trainable = bool(spec["trainable"])
            if kind == "conv2d":
                layer = Conv2D(tensors[f"layer{i}.weight"], tensors[f"layer{i}.bias"],
                               stride=spec["stride"], padding=spec["padding"], trainable=trainable)
            elif kind == "dense":
                layer = Dense(tensors[f"layer{i}.weight"], tensors[f"layer{i}.bias"], trainable=trainable)
            elif kind == "maxpool2d":
                layer = MaxPool2D(spec["size"], trainable=trainable)
            elif kind in LAYER_KINDS:
                layer = LAYER_KINDS[kind](trainable=trainable)
            else:
                raise FormatError(f"{path}: unknown layer kind {kind!r}")
            layers.append(layer)
        return Model(layers, tuple(meta["input_shape"]))
    except KeyError as e:
        raise FormatError(f"{path}: archive is missing {e}") from e
