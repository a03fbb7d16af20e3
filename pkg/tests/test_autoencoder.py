"""Tests for dense layers and the autoencoder."""
import numpy as np
import pytest

from learners.autoencoder import (
    AutoencoderModel, ae_gradient, ae_loss, ae_train, build_autoencoder, encode, reconstruct,
    reconstruction_errors,
)
from learners.layers import (
    DenseLayer, check_chain, flatten_params, forward_stack, init_layer, unflatten_params,
)
from shared.config import AeConfig
from shared.data import Dataset
from shared.errors import ConfigError, ShapeError
from shared.numerics import LEAKY_RELU, LINEAR, finite_diff_grad


def test_dense_layer_forward():
    layer = DenseLayer(np.array([[1.0, 2.0], [0.0, -1.0]]), np.array([0.5, 0.0]), LINEAR)
    z, a = layer.forward(np.array([[1.0, 1.0]]))
    assert np.array_equal(z, [[3.5, -1.0]])
    assert np.array_equal(a, z)
    with pytest.raises(ShapeError):
        layer.forward(np.ones((1, 3)))


def test_check_chain():
    a = init_layer(4, 3, LEAKY_RELU, 0, "a")
    b = init_layer(3, 2, LEAKY_RELU, 0, "b")
    assert check_chain([a, b], 4) == 2
    with pytest.raises(ShapeError):
        check_chain([b, a], 4)


def test_flatten_unflatten_round_trip():
    layers = [init_layer(4, 3, LEAKY_RELU, 0, "a"), init_layer(3, 2, LINEAR, 0, "b", with_bias=False)]
    theta = flatten_params(layers)
    assert theta.size == 4 * 3 + 3 + 3 * 2
    rebuilt = unflatten_params(layers, theta)
    assert np.array_equal(flatten_params(rebuilt), theta)
    assert rebuilt[1].bias is None
    with pytest.raises(ShapeError):
        unflatten_params(layers, theta[:-1])
    with pytest.raises(ShapeError):
        unflatten_params(layers, np.append(theta, 0.0))
    with pytest.raises(ShapeError):
        unflatten_params(layers, theta.reshape(1, -1))


def test_build_autoencoder_mirrors_encoder():
    model = build_autoencoder([8, 4, 2], AeConfig())
    assert [l.out_dim for l in model.encoder_layers] == [4, 2]
    assert [l.out_dim for l in model.decoder_layers] == [4, 8]
    assert model.decoder_layers[-1].activation == LINEAR
    assert model.validate() == []


def test_build_autoencoder_rejects_bad_arch():
    with pytest.raises(ConfigError):
        build_autoencoder([8], AeConfig())
    with pytest.raises(ConfigError):
        build_autoencoder([8, 0], AeConfig())


@pytest.mark.parametrize("seed", range(5))
def test_ae_gradient_matches_finite_difference(seed):
    model = build_autoencoder([4, 2], AeConfig(seed=seed))
    X = np.random.default_rng(seed).normal(size=(6, 4))
    n_enc = len(model.encoder_layers)

    def loss(theta):
        layers = unflatten_params(model.layers, theta)
        return ae_loss(AutoencoderModel(layers[:n_enc], layers[n_enc:]), X)

    analytic = ae_gradient(model, X)
    numeric = finite_diff_grad(loss, flatten_params(model.layers))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    assert np.all(np.abs(analytic - numeric) / denom <= 1e-4)


def _blob(seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset(rng.uniform(0.0, 1.0, size=(64, 8)))


def test_ae_train_reduces_loss_and_is_deterministic():
    cfg = AeConfig(epochs=20, seed=3)
    model, losses = ae_train(_blob(), [8, 4], cfg)
    again, losses_again = ae_train(_blob(), [8, 4], cfg)
    assert len(losses) == 20
    assert losses[-1] < losses[0]
    assert losses == losses_again
    assert np.array_equal(flatten_params(model.layers), flatten_params(again.layers))


def test_ae_train_checks_input_width():
    with pytest.raises(ShapeError):
        ae_train(_blob(), [6, 3], AeConfig(epochs=1))
    with pytest.raises(ConfigError):
        ae_train(Dataset(np.empty((0, 8))), [8, 4], AeConfig(epochs=1))


def test_encode_and_reconstruction_errors():
    model = build_autoencoder([8, 4, 2], AeConfig(seed=1))
    data = _blob(1)
    codes = encode(model, data)
    assert codes.shape == (64, 2)
    out = reconstruct(model, data)
    errors = reconstruction_errors(model, data)
    assert np.allclose(errors, np.sum((out - data.X) ** 2, axis=1))
    assert reconstruction_errors(model, Dataset(np.empty((0, 8)))).shape == (0,)
    h, caches = forward_stack(model.encoder_layers, data.X)
    assert np.array_equal(h, codes)
    assert len(caches) == 2


def test_linear_autoencoder_learns_identity():
    data = Dataset(np.random.default_rng(5).uniform(0.0, 1.0, size=(50, 4)))
    model, losses = ae_train(data, [4, 4], AeConfig(epochs=200, seed=2, hidden_activation=LINEAR))
    assert losses[-1] <= 1e-3
    assert float(np.mean(reconstruction_errors(model, data))) / 4 <= 1e-3
