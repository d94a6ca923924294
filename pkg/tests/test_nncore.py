import numpy as np
import pytest

from gustuq import nncore
from gustuq.errors import ConfigError, DimensionError, NumericError, UsageError
from gustuq.nncore import MLP, Adam, Layer, TrainConfig


def small_model(rng, input_dim=3, hidden=(4,), dropout=0.0, l1=0.0, l2=0.0):
    return MLP.create(input_dim, list(hidden), rng, dropout=dropout, l1=l1, l2=l2)


def quadratic_loss(model, batch):
    """0.5 * mean(out^2) + penalties; analytic upstream grad is out / out.size."""
    out, cache = nncore.forward(model, batch, train_mode=False)
    loss = 0.5 * float(np.mean(out**2)) + nncore.penalty_loss(model)
    grad_out = out / out.size
    return loss, cache, grad_out


def numeric_grads(model, batch, h=1e-4):
    """Central finite differences of quadratic_loss over every parameter."""
    grads_w, grads_b = [], []
    for layer in model.layers:
        gw = np.zeros_like(layer.weights)
        for idx in np.ndindex(layer.weights.shape):
            orig = layer.weights[idx]
            layer.weights[idx] = orig + h
            up, _, _ = quadratic_loss(model, batch)
            layer.weights[idx] = orig - h
            down, _, _ = quadratic_loss(model, batch)
            layer.weights[idx] = orig
            gw[idx] = (up - down) / (2 * h)
        gb = np.zeros_like(layer.bias)
        for idx in np.ndindex(layer.bias.shape):
            orig = layer.bias[idx]
            layer.bias[idx] = orig + h
            up, _, _ = quadratic_loss(model, batch)
            layer.bias[idx] = orig - h
            down, _, _ = quadratic_loss(model, batch)
            layer.bias[idx] = orig
            gb[idx] = (up - down) / (2 * h)
        grads_w.append(gw)
        grads_b.append(gb)
    return grads_w, grads_b


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b))


# ---------------------------------------------------------------------------
# forward


def test_forward_zero_weights_returns_bias():
    layers = [Layer(weights=np.zeros((3, 4)), bias=np.array([1.0, -2.0, 0.5, 3.0]))]
    model = MLP(layers=layers)
    out, _ = nncore.forward(model, np.random.default_rng(0).normal(size=(6, 3)))
    assert np.array_equal(out, np.tile(model.layers[0].bias, (6, 1)))


def test_forward_identity_single_layer():
    model = MLP(layers=[Layer(weights=np.eye(5), bias=np.zeros(5))])
    batch = np.random.default_rng(1).normal(size=(7, 5))
    out, _ = nncore.forward(model, batch)
    assert np.array_equal(out, batch)


def test_forward_train_mode_deterministic_given_rng_state():
    rng = np.random.default_rng(3)
    model = small_model(rng, dropout=0.3)
    batch = rng.normal(size=(5, 3))
    out1, _ = nncore.forward(model, batch, train_mode=True, rng=np.random.default_rng(42))
    out2, _ = nncore.forward(model, batch, train_mode=True, rng=np.random.default_rng(42))
    assert np.array_equal(out1, out2)


def test_forward_shape_mismatch():
    model = small_model(np.random.default_rng(0), input_dim=3)
    with pytest.raises(DimensionError):
        nncore.forward(model, np.zeros((2, 5)))


def test_forward_dropout_without_rng_is_usage_error():
    model = small_model(np.random.default_rng(0), dropout=0.2)
    with pytest.raises(UsageError):
        nncore.forward(model, np.zeros((2, 3)), train_mode=True)


def test_dropout_rate_bounds():
    with pytest.raises(ConfigError):
        small_model(np.random.default_rng(0), dropout=0.6)


# ---------------------------------------------------------------------------
# backward


def test_backward_zero_upstream_zero_grads():
    rng = np.random.default_rng(5)
    model = small_model(rng)
    batch = rng.normal(size=(4, 3))
    out, cache = nncore.forward(model, batch)
    grads = nncore.backward(model, cache, np.zeros_like(out))
    for dw, db in zip(grads.weights, grads.biases):
        assert np.all(dw == 0.0)
        assert np.all(db == 0.0)


def test_backward_l2_only_gradient_is_2_l2_w():
    rng = np.random.default_rng(6)
    model = small_model(rng, l2=0.01)
    batch = rng.normal(size=(4, 3))
    out, cache = nncore.forward(model, batch)
    grads = nncore.backward(model, cache, np.zeros_like(out))
    for layer, dw in zip(model.layers, grads.weights):
        assert np.allclose(dw, 2 * 0.01 * layer.weights)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    model = small_model(rng, input_dim=3, hidden=(6, 4), l1=1e-3, l2=1e-3)
    batch = rng.normal(size=(5, 3))
    loss, cache, grad_out = quadratic_loss(model, batch)
    analytic = nncore.backward(model, cache, grad_out)
    numeric_w, numeric_b = numeric_grads(model, batch)
    for aw, nw in zip(analytic.weights, numeric_w):
        assert rel_err(aw, nw).max() <= 1e-3
    for ab, nb in zip(analytic.biases, numeric_b):
        assert rel_err(ab, nb).max() <= 1e-3


def test_backward_stale_cache_is_usage_error():
    rng = np.random.default_rng(8)
    model = small_model(rng)
    batch = rng.normal(size=(4, 3))
    out, cache = nncore.forward(model, batch)
    grads = nncore.backward(model, cache, out / 4)
    Adam(1e-3).step(model, grads)  # bumps model.version
    with pytest.raises(UsageError):
        nncore.backward(model, cache, out / 4)
    with pytest.raises(UsageError):
        nncore.backward(model, None, out / 4)


# ---------------------------------------------------------------------------
# optimizer


def test_adam_zero_gradients_leave_parameters_unchanged():
    rng = np.random.default_rng(9)
    model = small_model(rng)
    before = [layer.weights.copy() for layer in model.layers]
    grads = nncore.ParamGrads(
        weights=[np.zeros_like(l.weights) for l in model.layers],
        biases=[np.zeros_like(l.bias) for l in model.layers],
    )
    Adam(1e-2).step(model, grads)
    for b, layer in zip(before, model.layers):
        assert np.array_equal(b, layer.weights)


def test_adam_constant_positive_gradient_decreases_parameter():
    model = MLP(layers=[Layer(weights=np.array([[1.0]]), bias=np.zeros(1))])
    opt = Adam(1e-2)
    history = [model.layers[0].weights[0, 0]]
    grads = nncore.ParamGrads(weights=[np.array([[0.5]])], biases=[np.zeros(1)])
    for _ in range(50):
        opt.step(model, grads)
        history.append(model.layers[0].weights[0, 0])
    assert all(b < a for a, b in zip(history, history[1:]))


def test_adam_first_step_magnitude_matches_hand_recurrence():
    # one step from zero moments: m_hat = g, v_hat = g^2, so the update is
    # lr * g / (|g| + eps) ~ lr * sign(g)
    g = 0.37
    lr = 1e-3
    model = MLP(layers=[Layer(weights=np.array([[0.0]]), bias=np.zeros(1))])
    Adam(lr).step(
        model, nncore.ParamGrads(weights=[np.array([[g]])], biases=[np.zeros(1)])
    )
    delta = -model.layers[0].weights[0, 0]
    expected = lr * g / (abs(g) + nncore.ADAM_EPS)
    assert delta == pytest.approx(expected, rel=1e-12)
    assert delta == pytest.approx(lr, rel=1e-4)


def test_adam_multi_step_matches_hand_recurrence():
    lr, b1, b2, eps = 2e-3, nncore.ADAM_BETA1, nncore.ADAM_BETA2, nncore.ADAM_EPS
    rng = np.random.default_rng(11)
    gs = rng.normal(size=6)
    model = MLP(layers=[Layer(weights=np.array([[0.2]]), bias=np.zeros(1))])
    opt = Adam(lr)
    p = 0.2
    m = v = 0.0
    for t, g in enumerate(gs, start=1):
        opt.step(model, nncore.ParamGrads(weights=[np.array([[g]])], biases=[np.zeros(1)]))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        assert model.layers[0].weights[0, 0] == pytest.approx(p, rel=1e-12)


def test_adam_nonfinite_gradient_names_layer():
    rng = np.random.default_rng(12)
    model = small_model(rng, hidden=(4, 4))
    grads = nncore.ParamGrads(
        weights=[np.zeros_like(l.weights) for l in model.layers],
        biases=[np.zeros_like(l.bias) for l in model.layers],
    )
    grads.weights[1][0, 0] = np.nan
    with pytest.raises(NumericError, match="layer 1"):
        Adam(1e-3).step(model, grads)


def test_shape_chain_validation():
    with pytest.raises(DimensionError):
        MLP(
            layers=[
                Layer(weights=np.zeros((3, 4)), bias=np.zeros(4)),
                Layer(weights=np.zeros((5, 2)), bias=np.zeros(2)),
            ]
        )


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(evidential_coef=-0.1).validate()
    TrainConfig().validate()
