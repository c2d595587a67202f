"""Gradient verification: analytic backprop vs central finite differences.

The finite-difference side only ever calls the forward pass, so it is an
independent check of every backward implementation. With a dropout seed
the masks are frozen per loss evaluation, which makes the dropout path
itself checkable.
"""

from __future__ import annotations

import numpy as np

from .graph import ModelGraph
from .train import bce_grad, bce_loss


def _loss(model: ModelGraph, x, y, training: bool, dropout_seed) -> float:
    rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    p = model.forward(x, training=training, rng=rng).ravel()
    return bce_loss(p, y)


def analytic_gradients(model: ModelGraph, x, y, training: bool = False, dropout_seed=None) -> dict:
    rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    model.zero_grads()
    out = model.forward(x, training=training, rng=rng)
    model.backward(bce_grad(out.ravel(), y).reshape(out.shape))
    return {key: g.copy() for key, g in model.gradients()}


def finite_difference_gradients(
    model: ModelGraph, x, y, step: float = 1e-5, training: bool = False, dropout_seed=None
) -> dict:
    """Central differences of the mean-BCE loss w.r.t. every parameter entry."""
    result = {}
    for key, param in model.parameters():
        grad = np.zeros_like(param)
        flat_p = param.ravel()
        flat_g = grad.ravel()
        for i in range(flat_p.size):
            original = flat_p[i]
            flat_p[i] = original + step
            up = _loss(model, x, y, training, dropout_seed)
            flat_p[i] = original - step
            down = _loss(model, x, y, training, dropout_seed)
            flat_p[i] = original
            flat_g[i] = (up - down) / (2.0 * step)
        result[key] = grad
    return result


def max_relative_error(analytic: dict, numeric: dict, denom_floor: float = 1e-4) -> float:
    """max over entries of |a - n| / max(|a| + |n|, denom_floor).

    The floor turns the comparison absolute for near-zero gradients,
    where finite differences bottom out on round-off.
    """
    worst = 0.0
    for key in analytic:
        a = analytic[key]
        n = numeric[key]
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), denom_floor)
        worst = max(worst, float(rel.max()) if rel.size else 0.0)
    return worst
