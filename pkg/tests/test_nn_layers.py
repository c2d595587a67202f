import numpy as np
import pytest

from stutterkit import nn


def brute_force_conv(x, kernel, bias, stride):
    """Quadruple-loop cross-correlation oracle."""
    h, w, c_in = x.shape
    kh, kw, _, c_out = kernel.shape
    sh, sw = stride
    out_h = (h - kh) // sh + 1
    out_w = (w - kw) // sw + 1
    out = np.zeros((out_h, out_w, c_out))
    for i in range(out_h):
        for j in range(out_w):
            for o in range(c_out):
                acc = bias[o]
                for a in range(kh):
                    for b in range(kw):
                        for c in range(c_in):
                            acc += x[i * sh + a, j * sw + b, c] * kernel[a, b, c, o]
                out[i, j, o] = acc
    return out


class TestConv2D:
    def test_ones_kernel(self):
        x = np.ones((3, 3, 1))
        kernel = np.ones((2, 2, 1, 1))
        out = nn.conv2d_forward(x, kernel, np.zeros(1), stride=(1, 1))
        assert out.shape == (2, 2, 1)
        np.testing.assert_allclose(out, 4.0)

    def test_reference_geometry_and_params(self):
        layer = nn.Conv2D(1, 5, 32, 1, 2)
        assert layer.build((2, 44, 1)) == (2, 20, 32)
        assert layer.param_count() == 192

    def test_matches_brute_force(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=(4, 9, 2))
        kernel = rng.normal(size=(2, 3, 2, 3))
        bias = rng.normal(size=3)
        out = nn.conv2d_forward(x, kernel, bias, stride=(2, 2))
        expected = brute_force_conv(x, kernel, bias, (2, 2))
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_kernel_too_large(self):
        with pytest.raises(nn.ShapeMismatch):
            nn.Conv2D(5, 5, 4).build((3, 44, 1))

    def test_channel_mismatch(self):
        with pytest.raises(nn.ShapeMismatch):
            nn.conv2d_forward(np.ones((4, 4, 2)), np.ones((2, 2, 3, 1)), np.zeros(1))


class TestGru:
    def test_param_count_32_in_32(self):
        layer = nn.GRU(32, return_sequences=True)
        layer.build((16, 32))
        assert layer.param_count() == 6240  # 3*(32*32 + 32*32 + 32)

    def test_param_count_64_in_32(self):
        layer = nn.GRU(32, return_sequences=True)
        layer.build((27, 64))
        assert layer.param_count() == 9312

    def test_zero_weights_zero_states(self):
        t, f, u = 5, 3, 4
        out = nn.gru_forward(
            np.random.default_rng(0).normal(size=(t, f)),
            np.zeros((f, 3 * u)), np.zeros((u, 3 * u)), np.zeros(3 * u),
            return_sequences=True,
        )
        np.testing.assert_array_equal(out, np.zeros((t, u)))

    def test_last_state_matches_sequence_tail(self):
        rng = np.random.default_rng(4)
        t, f, u = 6, 3, 4
        W = rng.normal(size=(f, 3 * u)) * 0.3
        U = rng.normal(size=(u, 3 * u)) * 0.3
        b = rng.normal(size=3 * u) * 0.1
        x = rng.normal(size=(t, f))
        seq = nn.gru_forward(x, W, U, b, return_sequences=True)
        last = nn.gru_forward(x, W, U, b, return_sequences=False)
        np.testing.assert_allclose(last, seq[-1])

    def test_step_recurrence_oracle(self):
        # one python-scalar reimplementation of the gate equations
        rng = np.random.default_rng(9)
        f, u = 2, 3
        W = rng.normal(size=(f, 3 * u)) * 0.4
        U = rng.normal(size=(u, 3 * u)) * 0.4
        b = rng.normal(size=3 * u) * 0.2
        x = rng.normal(size=(3, f))

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        h = np.zeros(u)
        for step in range(3):
            gx = x[step] @ W + b
            z = sig(gx[:u] + h @ U[:, :u])
            r = sig(gx[u : 2 * u] + h @ U[:, u : 2 * u])
            h_tilde = np.tanh(gx[2 * u :] + (r * h) @ U[:, 2 * u :])
            h = (1 - z) * h + z * h_tilde
        out = nn.gru_forward(x, W, U, b, return_sequences=False)
        np.testing.assert_allclose(out, h, atol=1e-12)


class TestDense:
    def test_param_count(self):
        layer = nn.Dense(1)
        layer.build((32,))
        assert layer.param_count() == 33

    def test_zero_weights_sigmoid_half(self):
        out = nn.dense_forward(np.ones(8), np.zeros((8, 1)), np.zeros(1), activation="sigmoid")
        np.testing.assert_allclose(out, 0.5)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=7)
        W = rng.normal(size=(7, 3))
        b = rng.normal(size=3)
        expected = np.array([sum(x[i] * W[i, j] for i in range(7)) + b[j] for j in range(3)])
        out = nn.dense_forward(x, W, b)
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(nn.ShapeMismatch):
            nn.dense_forward(np.ones(5), np.zeros((4, 2)), np.zeros(2))


class TestReshapeDropout:
    def test_reshape_round_trip(self):
        layer = nn.Reshape((16, 32))
        layer.build((2, 8, 32))
        x = np.random.default_rng(0).normal(size=(3, 2, 8, 32))
        y = layer.forward(x)
        assert y.shape == (3, 16, 32)
        np.testing.assert_array_equal(layer.backward(y), x)

    def test_reshape_rejects_bad_size(self):
        with pytest.raises(nn.ShapeMismatch):
            nn.Reshape((10, 10)).build((2, 8, 32))

    def test_dropout_identity_at_inference(self):
        layer = nn.Dropout(0.5)
        layer.build((10,))
        x = np.random.default_rng(0).normal(size=(4, 10))
        np.testing.assert_array_equal(layer.forward(x, training=False), x)

    def test_dropout_is_inverted(self):
        layer = nn.Dropout(0.5)
        layer.build((1000,))
        x = np.ones((1, 1000))
        y = layer.forward(x, training=True, rng=np.random.default_rng(1))
        kept = y[y != 0]
        np.testing.assert_allclose(kept, 2.0)  # scaled by 1/(1-rate)
        assert 0.35 < len(kept) / 1000 < 0.65


def tiny_model_for(kind: str) -> nn.ModelGraph:
    """Smallest model exercising one layer kind inside a sigmoid/BCE head."""
    if kind == "Conv2D":
        layers = [nn.Conv2D(2, 3, 2, 1, 2), nn.Reshape((8,)), nn.Dense(1), nn.Activation("sigmoid")]
        return nn.ModelGraph((3, 6, 1), layers)
    if kind == "GRU":
        layers = [nn.GRU(3, return_sequences=True), nn.GRU(2), nn.Dense(1), nn.Activation("sigmoid")]
        return nn.ModelGraph((4, 2), layers)
    if kind == "Activation":
        layers = [nn.Dense(4), nn.Activation("relu"), nn.Dense(3), nn.Activation("tanh"),
                  nn.Dense(1), nn.Activation("sigmoid")]
        return nn.ModelGraph((5,), layers)
    if kind == "Dropout":
        layers = [nn.Dense(6), nn.Dropout(0.4), nn.Dense(1), nn.Activation("sigmoid")]
        return nn.ModelGraph((4,), layers)
    if kind == "Reshape":
        layers = [nn.Conv2D(1, 2, 2), nn.Reshape((6, 2)), nn.GRU(2), nn.Dense(1), nn.Activation("sigmoid")]
        return nn.ModelGraph((2, 4, 1), layers)
    layers = [nn.Dense(3), nn.Activation("sigmoid"), nn.Dense(1), nn.Activation("sigmoid")]
    return nn.ModelGraph((4,), layers)


@pytest.mark.parametrize("kind", ["Conv2D", "GRU", "Activation", "Dropout", "Reshape", "Dense"])
def test_gradient_check_per_layer_kind(kind):
    for seed in range(5):
        model = tiny_model_for(kind)
        rng = np.random.default_rng(seed)
        model.init_params(rng)
        x = rng.normal(size=(3,) + model.input_shape)
        y = rng.integers(0, 2, size=3).astype(float)
        training = kind == "Dropout"
        dropout_seed = 100 + seed if training else None
        analytic = nn.analytic_gradients(model, x, y, training=training, dropout_seed=dropout_seed)
        numeric = nn.finite_difference_gradients(
            model, x, y, step=1e-5, training=training, dropout_seed=dropout_seed
        )
        assert nn.max_relative_error(analytic, numeric) < 1e-4


def test_backward_nan_detection():
    model = nn.ModelGraph((3,), [nn.Dense(1), nn.Activation("sigmoid")])
    model.init_params(np.random.default_rng(0))
    out = model.forward(np.ones((2, 3)))
    model.zero_grads()
    bad = np.full(out.shape, np.nan)
    with pytest.raises(nn.NaNDetected):
        model.backward(bad)


def test_layer_spec_round_trip():
    model = nn.ModelGraph(
        (2, 44, 1),
        [nn.Conv2D(1, 5, 32, 1, 2), nn.Activation("relu"), nn.Reshape((40, 32)),
         nn.GRU(8, return_sequences=True), nn.GRU(8), nn.Dropout(0.2), nn.Dense(1),
         nn.Activation("sigmoid")],
    )
    rebuilt = nn.ModelGraph.from_specs(model.input_shape, model.layer_specs())
    assert rebuilt.layer_specs() == model.layer_specs()
    assert rebuilt.shape_trace() == model.shape_trace()


def test_empty_model():
    model = nn.ModelGraph((4, 4, 1), [])
    assert model.param_count() == 0
    assert model.shape_trace() == [(4, 4, 1)]
