"""Layer zoo for the dysfluency detectors: Conv2D, Activation, Reshape, GRU, Dropout, Dense.

Every layer works on batched float64 arrays (leading batch axis), caches
what its backward pass needs, and accumulates parameter gradients into
``grads``. Shapes are inferred statically via ``build`` before any data
flows, so bad architectures fail at construction time.
"""

from __future__ import annotations

import numpy as np

from ..errors import StutterKitError


class ShapeMismatch(StutterKitError):
    """Layer cannot accept its input shape (or parameter shapes disagree)."""


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": np.tanh,
}


class Layer:
    """Base class; concrete layers override build/forward/backward/spec."""

    kind = "Layer"

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.in_shape: tuple[int, ...] | None = None
        self.out_shape: tuple[int, ...] | None = None

    def build(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError

    def zero_grads(self) -> None:
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _check_input(self, x: np.ndarray) -> None:
        if tuple(x.shape[1:]) != self.in_shape:
            raise ShapeMismatch(
                f"{self.kind} built for {self.in_shape}, got input {tuple(x.shape[1:])}"
            )


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    """Valid-padding cross-correlation (no kernel flip), strided."""

    kind = "Conv2D"

    def __init__(self, kernel_h: int, kernel_w: int, filters: int, stride_h: int = 1, stride_w: int = 1):
        super().__init__()
        if kernel_h < 1 or kernel_w < 1 or filters < 1 or stride_h < 1 or stride_w < 1:
            raise ValueError("kernel, filters and stride must be positive")
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.filters = filters
        self.stride_h = stride_h
        self.stride_w = stride_w
        self._x = None

    def build(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"Conv2D needs (h, w, c) input, got {in_shape}")
        h, w, c_in = in_shape
        if h < self.kernel_h or w < self.kernel_w:
            raise ShapeMismatch(f"kernel ({self.kernel_h},{self.kernel_w}) larger than input ({h},{w})")
        out_h = (h - self.kernel_h) // self.stride_h + 1
        out_w = (w - self.kernel_w) // self.stride_w + 1
        self.in_shape = tuple(in_shape)
        self.out_shape = (out_h, out_w, self.filters)
        self.params = {
            "kernel": np.zeros((self.kernel_h, self.kernel_w, c_in, self.filters)),
            "bias": np.zeros(self.filters),
        }
        self.zero_grads()
        return self.out_shape

    def init_params(self, rng):
        kh, kw, c_in, c_out = self.params["kernel"].shape
        fan_in = kh * kw * c_in
        fan_out = kh * kw * c_out
        self.params["kernel"] = _glorot_uniform(rng, (kh, kw, c_in, c_out), fan_in, fan_out)
        self.params["bias"] = np.zeros(c_out)

    def _window(self, x, a, b, out_h, out_w):
        sh, sw = self.stride_h, self.stride_w
        return x[:, a : a + sh * (out_h - 1) + 1 : sh, b : b + sw * (out_w - 1) + 1 : sw, :]

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        kernel, bias = self.params["kernel"], self.params["bias"]
        out_h, out_w, _ = self.out_shape
        out = np.tile(bias, (x.shape[0], out_h, out_w, 1))
        for a in range(self.kernel_h):
            for b in range(self.kernel_w):
                out += self._window(x, a, b, out_h, out_w) @ kernel[a, b]
        self._x = x
        return out

    def backward(self, dout):
        x = self._x
        kernel = self.params["kernel"]
        out_h, out_w, _ = self.out_shape
        self.grads["bias"] += dout.sum(axis=(0, 1, 2))
        dx = np.zeros_like(x)
        sh, sw = self.stride_h, self.stride_w
        for a in range(self.kernel_h):
            for b in range(self.kernel_w):
                window = self._window(x, a, b, out_h, out_w)
                self.grads["kernel"][a, b] += np.tensordot(window, dout, axes=([0, 1, 2], [0, 1, 2]))
                dx[:, a : a + sh * (out_h - 1) + 1 : sh, b : b + sw * (out_w - 1) + 1 : sw, :] += (
                    dout @ kernel[a, b].T
                )
        return dx

    def spec(self):
        return {
            "kind": "Conv2D",
            "kernel": [self.kernel_h, self.kernel_w],
            "stride": [self.stride_h, self.stride_w],
            "filters": self.filters,
        }


class Activation(Layer):
    """Elementwise relu / sigmoid / tanh."""

    kind = "Activation"

    def __init__(self, name: str):
        super().__init__()
        if name not in ACTIVATIONS:
            raise ValueError(f"unknown activation {name!r}")
        self.name = name
        self._cache = None

    def build(self, in_shape):
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(in_shape)
        return self.out_shape

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        y = ACTIVATIONS[self.name](x)
        self._cache = x if self.name == "relu" else y
        return y

    def backward(self, dout):
        if self.name == "relu":
            return dout * (self._cache > 0)
        y = self._cache
        if self.name == "sigmoid":
            return dout * y * (1.0 - y)
        return dout * (1.0 - y * y)  # tanh

    def spec(self):
        return {"kind": "Activation", "name": self.name}


class Reshape(Layer):
    """Row-major per-example reshape (batch axis untouched)."""

    kind = "Reshape"

    def __init__(self, target: tuple[int, ...]):
        super().__init__()
        self.target = tuple(int(t) for t in target)
        if any(t < 1 for t in self.target):
            raise ValueError("target dims must be positive")

    def build(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.target)):
            raise ShapeMismatch(f"cannot reshape {in_shape} to {self.target}")
        self.in_shape = tuple(in_shape)
        self.out_shape = self.target
        return self.out_shape

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, dout):
        return dout.reshape((dout.shape[0],) + self.in_shape)

    def spec(self):
        return {"kind": "Reshape", "target": list(self.target)}


class GRU(Layer):
    """Gated recurrent unit, zero initial state, single bias per gate.

    Gate order in the packed parameters is (update z, reset r, candidate h):
        z = sigmoid(x W_z + h U_z + b_z)
        r = sigmoid(x W_r + h U_r + b_r)
        h~ = tanh(x W_h + (r * h) U_h + b_h)
        h' = (1 - z) * h + z * h~
    """

    kind = "GRU"

    def __init__(self, units: int, return_sequences: bool = False):
        super().__init__()
        if units < 1:
            raise ValueError("units must be positive")
        self.units = units
        self.return_sequences = return_sequences
        self._cache = None

    def build(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeMismatch(f"GRU needs (t, features) input, got {in_shape}")
        t, f = in_shape
        u = self.units
        self.in_shape = tuple(in_shape)
        self.out_shape = (t, u) if self.return_sequences else (u,)
        self.params = {
            "W": np.zeros((f, 3 * u)),
            "U": np.zeros((u, 3 * u)),
            "b": np.zeros(3 * u),
        }
        self.zero_grads()
        return self.out_shape

    def init_params(self, rng):
        f = self.params["W"].shape[0]
        u = self.units
        self.params["W"] = _glorot_uniform(rng, (f, 3 * u), f, u)
        self.params["U"] = rng.uniform(-1.0, 1.0, size=(u, 3 * u)) / np.sqrt(u)
        self.params["b"] = np.zeros(3 * u)

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        u = self.units
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        n, t, _ = x.shape
        gx = x @ W + b  # (n, t, 3u)
        h = np.zeros((n, u))
        steps = []
        outputs = np.empty((n, t, u))
        for step in range(t):
            a_z = gx[:, step, :u] + h @ U[:, :u]
            z = sigmoid(a_z)
            a_r = gx[:, step, u : 2 * u] + h @ U[:, u : 2 * u]
            r = sigmoid(a_r)
            a_c = gx[:, step, 2 * u :] + (r * h) @ U[:, 2 * u :]
            h_tilde = np.tanh(a_c)
            h_new = (1.0 - z) * h + z * h_tilde
            steps.append((h, z, r, h_tilde))
            outputs[:, step] = h_new
            h = h_new
        self._cache = (x, steps)
        return outputs if self.return_sequences else h

    def backward(self, dout):
        x, steps = self._cache
        u = self.units
        W, U = self.params["W"], self.params["U"]
        U_z, U_r, U_c = U[:, :u], U[:, u : 2 * u], U[:, 2 * u :]
        n, t, _ = x.shape

        if self.return_sequences:
            d_outputs = dout
        else:
            d_outputs = np.zeros((n, t, u))
            d_outputs[:, -1] = dout

        d_gx = np.zeros((n, t, 3 * u))
        dU = self.grads["U"]
        dh = np.zeros((n, u))
        for step in range(t - 1, -1, -1):
            h_prev, z, r, h_tilde = steps[step]
            dh_total = dh + d_outputs[:, step]
            dh_tilde = dh_total * z
            dz = dh_total * (h_tilde - h_prev)
            dh_prev = dh_total * (1.0 - z)

            da_c = dh_tilde * (1.0 - h_tilde * h_tilde)
            d_gx[:, step, 2 * u :] = da_c
            dU[:, 2 * u :] += (r * h_prev).T @ da_c
            drh = da_c @ U_c.T
            dr = drh * h_prev
            dh_prev += drh * r

            da_z = dz * z * (1.0 - z)
            d_gx[:, step, :u] = da_z
            dU[:, :u] += h_prev.T @ da_z
            dh_prev += da_z @ U_z.T

            da_r = dr * r * (1.0 - r)
            d_gx[:, step, u : 2 * u] = da_r
            dU[:, u : 2 * u] += h_prev.T @ da_r
            dh_prev += da_r @ U_r.T

            dh = dh_prev

        self.grads["W"] += np.einsum("ntf,ntg->fg", x, d_gx)
        self.grads["b"] += d_gx.sum(axis=(0, 1))
        return d_gx @ W.T

    def spec(self):
        return {"kind": "GRU", "units": self.units, "return_sequences": self.return_sequences}


class Dropout(Layer):
    """Inverted dropout: active only while training, identity at inference."""

    kind = "Dropout"

    def __init__(self, rate: float = 0.2):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("rate must be in [0, 1)")
        self.rate = rate
        self._mask = None

    def build(self, in_shape):
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(in_shape)
        return self.out_shape

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            rng = np.random.default_rng()
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask

    def spec(self):
        return {"kind": "Dropout", "rate": self.rate}


class Dense(Layer):
    """Fully connected x @ W + b (activation is its own layer)."""

    kind = "Dense"

    def __init__(self, units: int):
        super().__init__()
        if units < 1:
            raise ValueError("units must be positive")
        self.units = units
        self._x = None

    def build(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeMismatch(f"Dense needs flat input, got {in_shape}")
        (f,) = in_shape
        self.in_shape = (f,)
        self.out_shape = (self.units,)
        self.params = {"W": np.zeros((f, self.units)), "b": np.zeros(self.units)}
        self.zero_grads()
        return self.out_shape

    def init_params(self, rng):
        f = self.params["W"].shape[0]
        self.params["W"] = _glorot_uniform(rng, (f, self.units), f, self.units)
        self.params["b"] = np.zeros(self.units)

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] += self._x.T @ dout
        self.grads["b"] += dout.sum(axis=0)
        return dout @ self.params["W"].T

    def spec(self):
        return {"kind": "Dense", "units": self.units}


_LAYER_KINDS = {"Conv2D": Conv2D, "Activation": Activation, "Reshape": Reshape,
                "GRU": GRU, "Dropout": Dropout, "Dense": Dense}


def layer_from_spec(spec: dict) -> Layer:
    kind = spec.get("kind")
    if kind == "Conv2D":
        return Conv2D(spec["kernel"][0], spec["kernel"][1], spec["filters"],
                      spec["stride"][0], spec["stride"][1])
    if kind == "Activation":
        return Activation(spec["name"])
    if kind == "Reshape":
        return Reshape(tuple(spec["target"]))
    if kind == "GRU":
        return GRU(spec["units"], spec["return_sequences"])
    if kind == "Dropout":
        return Dropout(spec["rate"])
    if kind == "Dense":
        return Dense(spec["units"])
    raise ValueError(f"unknown layer kind {kind!r}")


def _as_batch(x, expected_rank: int):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != expected_rank:
        raise ShapeMismatch(f"expected rank-{expected_rank} input, got shape {x.shape}")
    return x[None]


def conv2d_forward(x, kernel, bias, stride=(1, 1)) -> np.ndarray:
    """One unbatched conv: x (h,w,c_in), kernel (kh,kw,c_in,c_out), bias (c_out,)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 4:
        raise ShapeMismatch(f"kernel must be rank 4, got shape {kernel.shape}")
    xb = _as_batch(x, 3)
    if xb.shape[3] != kernel.shape[2]:
        raise ShapeMismatch(f"input channels {xb.shape[3]} != kernel channels {kernel.shape[2]}")
    layer = Conv2D(kernel.shape[0], kernel.shape[1], kernel.shape[3], stride[0], stride[1])
    layer.build(xb.shape[1:])
    layer.params["kernel"] = kernel
    layer.params["bias"] = np.asarray(bias, dtype=np.float64)
    return layer.forward(xb)[0]


def gru_forward(x, W, U, b, return_sequences=False) -> np.ndarray:
    """One unbatched GRU run: x (t,f), W (f,3u), U (u,3u), b (3u,)."""
    W = np.asarray(W, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    units = U.shape[0]
    if W.shape[1] != 3 * units or U.shape[1] != 3 * units:
        raise ShapeMismatch("gate parameters must pack 3 gates")
    xb = _as_batch(x, 2)
    if xb.shape[2] != W.shape[0]:
        raise ShapeMismatch(f"input features {xb.shape[2]} != W rows {W.shape[0]}")
    layer = GRU(units, return_sequences)
    layer.build(xb.shape[1:])
    layer.params["W"] = W
    layer.params["U"] = U
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    return layer.forward(xb)[0]


def dense_forward(x, W, b, activation: str | None = None) -> np.ndarray:
    """One unbatched dense application, optionally through an activation."""
    W = np.asarray(W, dtype=np.float64)
    xb = _as_batch(x, 1)
    if xb.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"input features {xb.shape[1]} != W rows {W.shape[0]}")
    layer = Dense(W.shape[1])
    layer.build(xb.shape[1:])
    layer.params["W"] = W
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    out = layer.forward(xb)[0]
    if activation is not None:
        out = ACTIVATIONS[activation](out)
    return out
