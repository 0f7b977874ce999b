"""Composition of layer primitives into a full network for one ArchSpec."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..arch import ArchSpec, Conv, Dropout, FullyConnected, MaxPool
from . import layers as L
from .params import LayerParams, parameterized_layers


class Network:
    """Forward/backward engine over an :class:`ArchSpec` and its parameters.

    The final softmax is not part of the layer stack; :meth:`forward` returns
    classifier logits and the loss module supplies the softmax gradient.
    """

    def __init__(self, arch: ArchSpec, params: Sequence[LayerParams]):
        expected = len(parameterized_layers(arch))
        if len(params) != expected:
            raise ValueError(f"expected {expected} parameter sets, got {len(params)}")
        self.arch = arch
        self.params = list(params)

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None):
        """Run the whole stack; returns ``(logits, caches)``."""
        out, caches, _ = self._run(x, train=train, rng=rng, stop_after=None)
        return out, caches

    def activations_at(self, x, layer_index: int):
        """Eval-mode activations after ``layers[layer_index]`` (nonlinearity included)."""
        if not 0 <= layer_index < len(self.arch.layers):
            raise IndexError(f"layer index {layer_index} out of range")
        out, _, _ = self._run(x, train=False, rng=None, stop_after=layer_index)
        return out

    def _run(self, x, train, rng, stop_after):
        mode = "train" if train else "eval"
        out = np.asarray(x)
        caches = []
        pi = 0
        for i, layer in enumerate(self.arch.layers):
            if isinstance(layer, Conv):
                p = self.params[pi]
                out, c = L.conv2d(out, p.weights, p.biases, layer.padding)
                rc = None
                if layer.relu:
                    out, rc = L.relu(out)
                caches.append(("conv", c, rc))
                pi += 1
            elif isinstance(layer, MaxPool):
                out, c = L.maxpool(out, layer.window, layer.stride)
                caches.append(("pool", c, None))
            elif isinstance(layer, FullyConnected):
                p = self.params[pi]
                out, c = L.fully_connected(out, p.weights, p.biases)
                rc = None
                if layer.relu:
                    out, rc = L.relu(out)
                caches.append(("fc", c, rc))
                pi += 1
            else:  # Dropout
                out, c = L.dropout(out, layer.p, mode, rng)
                caches.append(("dropout", c, None))
            if stop_after is not None and i == stop_after:
                return out, caches, pi
        return out, caches, pi

    def backward(self, grad_logits, caches) -> list[LayerParams]:
        """Backpropagate through the stack; returns per-layer parameter grads."""
        grads: list[LayerParams] = []
        g = np.asarray(grad_logits)
        for kind, cache, relu_mask in reversed(caches):
            if relu_mask is not None:
                g = L.relu_backward(g, relu_mask)
            if kind == "conv":
                g, gw, gb = L.conv2d_backward(g, cache)
                grads.append(LayerParams(gw, gb))
            elif kind == "pool":
                g = L.maxpool_backward(g, cache)
            elif kind == "fc":
                g, gw, gb = L.fully_connected_backward(g, cache)
                grads.append(LayerParams(gw, gb))
            else:  # dropout
                g = L.dropout_backward(g, cache)
        grads.reverse()
        return grads
