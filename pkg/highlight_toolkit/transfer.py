"""Turn a pretrained RGB image classifier into a stacked-grayscale video-chunk classifier.

The first convolution's filters are averaged over their 3 colour channels and
replicated over the fps * k frame channels; the multi-class head is replaced
by a single sigmoid unit; the convolutional block is frozen and the dense
block is re-initialized for training from scratch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ._errors import InvalidInputError, StructureError
from .nn_core import (
    Conv2D,
    Dense,
    EpochRecord,
    Layer,
    MaxPool2D,
    Model,
    Sigmoid,
    Softmax,
    TrainConfig,
    build_source_model,
    train_model,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceFilterBank:
    """First-layer filters of an RGB model: L x m x n x 3, with L biases."""
    filters: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        filters = np.asarray(self.filters, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if filters.ndim != 4 or filters.shape[3] != 3:
            raise InvalidInputError(f"Source filters must be L x m x n x 3, got {filters.shape}")
        if biases.shape != (filters.shape[0],):
            raise InvalidInputError(f"Expected {filters.shape[0]} biases, got shape {biases.shape}")
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "biases", biases)

    @classmethod
    def from_conv(cls, conv: Conv2D) -> "SourceFilterBank":
        if conv.in_channels != 3:
            raise InvalidInputError(f"Source convolution has {conv.in_channels} input channels, expected 3")
        return cls(conv.weight, conv.bias)


@dataclass(frozen=True)
class AdaptedFilterBank:
    """Filters of shape L x m x n x channels whose channels are identical copies."""
    filters: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        filters = np.asarray(self.filters, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if filters.ndim != 4 or filters.shape[3] < 1:
            raise InvalidInputError(f"Adapted filters must be L x m x n x channels, got {filters.shape}")
        if biases.shape != (filters.shape[0],):
            raise InvalidInputError(f"Expected {filters.shape[0]} biases, got shape {biases.shape}")
        if not np.array_equal(filters, np.broadcast_to(filters[..., :1], filters.shape)):
            raise InvalidInputError("Adapted filter channels must be identical copies")
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "biases", biases)

    @property
    def channels(self) -> int:
        return self.filters.shape[3]


def adapt_first_conv(source: SourceFilterBank, channels: int) -> AdaptedFilterBank:
    """Average each filter over its depth and repeat the mean over ``channels`` channels."""
    if source.filters.ndim != 4 or source.filters.shape[3] != 3:
        raise InvalidInputError(f"Source filters must have 3 channels, got {source.filters.shape}")
    if channels < 1:
        raise InvalidInputError(f"channels must be >= 1, got {channels}")
    mean = source.filters.mean(axis=3, keepdims=True)
    filters = np.repeat(mean, channels, axis=3)
    return AdaptedFilterBank(filters, source.biases.copy())


def adapt_for_binary(source_model: Model, input_channels: int, seed: int = 0) -> Model:
    """Binary video classifier derived from a multi-class RGB model.

    Convolution and pooling layers are frozen; every dense layer is re-initialized
    and trainable, and the output head becomes dense(1) + sigmoid.
    """
    layers = source_model.layers
    if not layers or not isinstance(layers[0], Conv2D):
        raise StructureError("Source model must start with a conv2d layer")
    if layers[0].in_channels != 3:
        raise StructureError(f"Source model's first conv2d has {layers[0].in_channels} channels, expected 3")
    if not isinstance(layers[-1], Softmax) or not isinstance(layers[-2], Dense):
        raise StructureError("Source model must end with a dense + softmax head")

    rng = np.random.default_rng(seed)
    adapted = adapt_first_conv(SourceFilterBank.from_conv(layers[0]), input_channels)
    first = layers[0]
    new_layers: List[Layer] = [
        Conv2D(adapted.filters, adapted.biases, stride=first.stride, padding=first.padding, trainable=False)
    ]
    head_index = len(layers) - 2
    for i, layer in enumerate(layers[1:-1], start=1):
        if isinstance(layer, Conv2D):
            new_layers.append(Conv2D(layer.weight.copy(), layer.bias.copy(), stride=layer.stride,
                                     padding=layer.padding, trainable=False))
        elif isinstance(layer, Dense):
            out_units = 1 if i == head_index else layer.units
            new_layers.append(Dense.create(layer.weight.shape[0], out_units, rng))
        elif isinstance(layer, MaxPool2D):
            new_layers.append(MaxPool2D(layer.size, trainable=False))
        else:
            new_layers.append(type(layer)(trainable=False))
    new_layers.append(Sigmoid())

    h, w, _ = source_model.input_shape
    model = Model(new_layers, (h, w, input_channels))
    logger.info(
        f"Adapted source model to {input_channels} input channels; "
        f"{sum(p.size for p in model.parameters(trainable_only=True).values())} trainable parameters"
    )
    return model


# ---------------------------------------------------------------------------
# Pretrained source model
# ---------------------------------------------------------------------------

def make_shape_images(count: int, size: Tuple[int, int], num_classes: int,
                      rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Coloured synthetic images whose class is the pattern drawn on them.

    Classes cycle through horizontal stripes, vertical stripes, a disc and a
    diagonal band; colours, positions and noise are random.
    """
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w]
    images = np.empty((count, h, w, 3))
    labels = np.arange(count) % num_classes
    rng.shuffle(labels)
    for index, label in enumerate(labels):
        colour = rng.uniform(0.5, 1.0, size=3)
        background = rng.uniform(0.0, 0.3, size=3)
        pattern = label % 4
        period = rng.integers(6, 14)
        phase = rng.integers(0, period)
        if pattern == 0:
            mask = ((yy + phase) // (period // 2)) % 2 == 0
        elif pattern == 1:
            mask = ((xx + phase) // (period // 2)) % 2 == 0
        elif pattern == 2:
            cy, cx = rng.uniform(0.3, 0.7) * h, rng.uniform(0.3, 0.7) * w
            radius = rng.uniform(0.15, 0.3) * min(h, w)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
        else:
            mask = np.abs((yy - xx) - (phase - period)) <= period
        image = np.where(mask[..., None], colour, background)
        images[index] = np.clip(image + rng.normal(0.0, 0.03, size=image.shape), 0.0, 1.0)
    return images, labels


def pretrain_source_model(input_shape: Tuple[int, int, int] = (112, 112, 3), num_classes: int = 4,
                          samples: int = 400, config: TrainConfig = TrainConfig(learning_rate=0.01),
                          seed: int = 0) -> Tuple[Model, List[EpochRecord]]:
    """Train a multi-class RGB classifier on synthetic shapes to serve as a transfer source."""
    rng = np.random.default_rng(seed)
    size = input_shape[:2]
    images, labels = make_shape_images(samples, size, num_classes, rng)
    n_val = max(num_classes, int(math.ceil(0.2 * samples)))
    train = (images[n_val:], labels[n_val:])
    val = (images[:n_val], labels[:n_val])
    model = build_source_model(input_shape, num_classes, seed)
    logger.info(f"Pretraining source model on {samples} synthetic {size[0]}x{size[1]} images")
    return train_model(model, train, val, config)
