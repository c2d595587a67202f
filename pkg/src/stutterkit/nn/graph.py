"""ModelGraph: an ordered layer stack with static shape inference.

Shape inference runs at construction, so ``param_count`` and
``shape_trace`` need no data and a bad architecture cannot be built.
Parameters are allocated zero-filled; call ``init_params`` for a seeded
random initialization.
"""

from __future__ import annotations

import numpy as np

from .layers import Layer, layer_from_spec
from ..errors import StutterKitError


class NaNDetected(StutterKitError):
    """A non-finite value appeared in a gradient or loss."""


class ModelGraph:
    def __init__(self, input_shape: tuple[int, ...], layers: list[Layer]):
        self.input_shape = tuple(int(d) for d in input_shape)
        self.layers = list(layers)
        shape = self.input_shape
        self._trace = [shape]
        for layer in self.layers:
            shape = layer.build(shape)
            self._trace.append(tuple(shape))
        self.output_shape = shape

    @classmethod
    def from_specs(cls, input_shape, specs: list[dict]) -> "ModelGraph":
        return cls(tuple(input_shape), [layer_from_spec(s) for s in specs])

    def layer_specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    def init_params(self, seed_or_rng) -> None:
        rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
        for layer in self.layers:
            layer.init_params(rng)

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out, training=training, rng=rng)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        grad = dout
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        for key, g in self.gradients():
            if not np.all(np.isfinite(g)):
                raise NaNDetected(f"non-finite gradient in {key}")
        return grad

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def parameters(self):
        """Yield (key, array) pairs; arrays are live (mutating updates them)."""
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"layer{i}.{name}", p

    def gradients(self):
        for i, layer in enumerate(self.layers):
            for name, g in layer.grads.items():
                yield f"layer{i}.{name}", g

    def set_parameter(self, key: str, value: np.ndarray) -> None:
        prefix, name = key.split(".", 1)
        layer = self.layers[int(prefix.removeprefix("layer"))]
        if layer.params[name].shape != value.shape:
            raise ValueError(f"{key}: shape {value.shape} != expected {layer.params[name].shape}")
        layer.params[name] = np.asarray(value, dtype=np.float64)

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def shape_trace(self) -> list[tuple[int, ...]]:
        """Input shape followed by every layer's output shape."""
        return [tuple(s) for s in self._trace]


def param_count(model: ModelGraph) -> int:
    return model.param_count()


def shape_trace(model: ModelGraph) -> list[tuple[int, ...]]:
    return model.shape_trace()
