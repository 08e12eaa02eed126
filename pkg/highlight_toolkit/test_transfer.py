"""Tests for first-layer filter adaptation and the binary transfer model."""

import numpy as np
import pytest

from ._errors import InvalidInputError, StructureError
from .nn_core import Conv2D, Dense, TrainConfig, build_classifier, build_source_model, train_model
from .transfer import AdaptedFilterBank, SourceFilterBank, adapt_first_conv, adapt_for_binary, make_shape_images


def random_bank(rng, L=4, m=3, n=3):
    return SourceFilterBank(rng.normal(size=(L, m, n, 3)), rng.normal(size=L))


def conv_response(filters, image):
    conv = Conv2D(filters, np.zeros(filters.shape[0]))
    return conv.forward(image[None])[0][0]


def test_mean_filter_example():
    bank = SourceFilterBank(np.array([1.0, 2.0, 3.0]).reshape(1, 1, 1, 3), np.array([0.5]))
    adapted = adapt_first_conv(bank, 25)
    assert adapted.filters.shape == (1, 1, 1, 25)
    assert adapted.channels == 25
    assert np.all(adapted.filters == 2.0)
    assert adapted.biases.tolist() == [0.5]


def test_adapted_bank_invariants():
    rng = np.random.default_rng(0)
    for _ in range(100):
        channels = int(rng.integers(1, 30))
        a, b = random_bank(rng), random_bank(rng)
        alpha, beta = rng.normal(size=2)
        adapted = adapt_first_conv(a, channels)
        assert adapted.filters.shape == a.filters.shape[:3] + (channels,)
        # every channel is an exact copy
        assert np.all(adapted.filters == adapted.filters[..., :1])
        np.testing.assert_allclose(adapted.filters.mean(axis=3), a.filters.mean(axis=3), atol=1e-12)

        combined = SourceFilterBank(alpha * a.filters + beta * b.filters, alpha * a.biases + beta * b.biases)
        expected = alpha * adapted.filters + beta * adapt_first_conv(b, channels).filters
        np.testing.assert_allclose(adapt_first_conv(combined, channels).filters, expected, atol=1e-12)


def test_gray_response_identity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        bank = random_bank(rng)
        channels = int(rng.integers(1, 30))
        gray = rng.random((9, 9))
        adapted = adapt_first_conv(bank, channels)
        stacked = np.repeat(gray[..., None], channels, axis=2)
        rgb = np.repeat(gray[..., None], 3, axis=2)
        np.testing.assert_allclose(
            conv_response(adapted.filters, stacked),
            channels / 3.0 * conv_response(bank.filters, rgb),
            rtol=1e-9, atol=1e-12,
        )


def test_source_bank_needs_three_channels():
    with pytest.raises(InvalidInputError):
        SourceFilterBank(np.zeros((2, 3, 3, 4)), np.zeros(2))
    with pytest.raises(InvalidInputError):
        adapt_first_conv(random_bank(np.random.default_rng(2)), 0)


def test_adapt_for_binary_structure():
    source = build_source_model((16, 16, 3), num_classes=4, seed=3, filters=(4, 8), hidden=12)
    model = adapt_for_binary(source, input_channels=25, seed=3)

    assert model.input_shape == (16, 16, 25)
    assert model.is_binary
    head = model.layers[-2]
    assert isinstance(head, Dense) and head.weight.shape == (12, 1)

    expected = adapt_first_conv(SourceFilterBank.from_conv(source.layers[0]), 25)
    assert np.array_equal(model.layers[0].weight, expected.filters)
    assert np.array_equal(model.layers[0].bias, expected.biases)
    assert np.array_equal(model.layers[3].weight, source.layers[3].weight)
    for layer in model.layers:
        if layer.param_names:
            assert layer.trainable == isinstance(layer, Dense)


def test_training_changes_only_dense_layers():
    rng = np.random.default_rng(4)
    source = build_source_model((12, 12, 3), num_classes=3, seed=4, filters=(2, 4), hidden=6)
    model = adapt_for_binary(source, input_channels=5, seed=4)
    inputs = rng.random((10, 12, 12, 5))
    labels = np.arange(10) % 2
    config = TrainConfig(learning_rate=0.05, batch_size=2, max_epochs=1, patience=5, seed=0)
    trained, _ = train_model(model, (inputs, labels), (inputs, labels), config)

    for before, after in zip(model.layers, trained.layers):
        for name, value in before.params().items():
            changed = not np.array_equal(value, after.params()[name])
            assert changed == isinstance(before, Dense), (before.kind, name)


def test_adapt_for_binary_rejects_unsuitable_sources():
    binary = build_classifier((12, 12, 3), seed=0, filters=(2, 2), hidden=4)
    with pytest.raises(StructureError):
        adapt_for_binary(binary, 5)
    gray_source = build_source_model((12, 12, 1), num_classes=3, seed=0, filters=(2, 2), hidden=4)
    with pytest.raises(StructureError):
        adapt_for_binary(gray_source, 5)


def test_shape_images_are_balanced_and_in_range():
    images, labels = make_shape_images(40, (16, 16), 4, np.random.default_rng(5))
    assert images.shape == (40, 16, 16, 3)
    assert images.min() >= 0.0 and images.max() <= 1.0
    assert np.bincount(labels).tolist() == [10, 10, 10, 10]


def test_adapted_filter_bank_validation():
    filters = np.ones((2, 3, 3, 4))
    assert AdaptedFilterBank(filters, np.zeros(2)).channels == 4
    uneven = filters.copy()
    uneven[0, 0, 0, 3] = 2.0
    with pytest.raises(InvalidInputError):
        AdaptedFilterBank(uneven, np.zeros(2))
    with pytest.raises(InvalidInputError):
        AdaptedFilterBank(filters, np.zeros(3))
    with pytest.raises(InvalidInputError):
        AdaptedFilterBank(np.ones((2, 3, 3)), np.zeros(2))
