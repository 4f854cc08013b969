"""Reverse-mode differentiation of the affine/ReLU/tanh dense stack.

Gradients are exact for the contraction sum(upstream * output); the
finite-difference tests in the suite are the independent check.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from ..policy import DenseNet


def forward_cache(net: DenseNet, x: np.ndarray):
    """Forward pass keeping every intermediate needed by backprop.

    Returns (output, cache); input may be (in,) or (batch, in).
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != net.in_dim:
        raise ShapeMismatch(f"input dim {h.shape[1]} != expected {net.in_dim}")
    activations = [h]          # inputs to each layer
    masks = []                 # ReLU pass-through masks per hidden layer
    for layer in net.layers[:-1]:
        z = h @ layer.w.T
        z += layer.b
        mask = z > 0.0
        np.maximum(z, 0.0, out=z)
        h = z
        activations.append(h)
        masks.append(mask)
    z = h @ net.layers[-1].w.T
    z += net.layers[-1].b
    if net.head == "tanh":
        t = np.tanh(z)
        out = t * net.action_scale if net.action_scale is not None else t
    else:
        t = None
        out = z
    cache = (activations, masks, t, z, squeeze)
    return (out[0] if squeeze else out), cache


def backprop_from_cache(net: DenseNet, cache, upstream: np.ndarray,
                        prehead_extra: np.ndarray | None = None):
    """Gradients of sum(upstream * output) w.r.t. weights and input.

    ``prehead_extra`` adds a gradient directly on the last affine output
    (before the head); the trainer uses it for pre-activation
    regularization of tanh actors.
    """
    activations, masks, t, z_last, squeeze = cache
    g = np.asarray(upstream, dtype=float)
    if squeeze:
        g = g[None, :]
    if g.shape[1] != net.out_dim:
        raise ShapeMismatch(f"upstream dim {g.shape[1]} != {net.out_dim}")

    if net.head == "tanh":
        if net.action_scale is not None:
            g = g * net.action_scale
        g = g * (1.0 - t * t)
    if prehead_extra is not None:
        g = g + prehead_extra

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    dz = g
    for k in range(len(net.layers) - 1, -1, -1):
        a_in = activations[k]
        grads[k] = (dz.T @ a_in, dz.sum(axis=0))
        da = dz @ net.layers[k].w
        if k > 0:
            da *= masks[k - 1]  # fresh array: safe to reuse in place
            dz = da
    dx = da
    return grads, (dx[0] if squeeze else dx)


def backprop(net: DenseNet, x: np.ndarray, upstream: np.ndarray):
    """Convenience wrapper: forward then reverse pass in one call."""
    _, cache = forward_cache(net, x)
    return backprop_from_cache(net, cache, upstream)
