"""Parameter containers and Gaussian initialization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..arch import ArchSpec, Conv, FullyConnected, infer_shapes


@dataclass
class LayerParams:
    """Weights and biases of one parameterized layer.

    Convolutions store weights as ``(out_c, in_c, k, k)``, fully connected
    layers as ``(out, in)``; biases are 1-d with one entry per output map or
    unit.
    """

    weights: np.ndarray
    biases: np.ndarray


def parameterized_layers(arch: ArchSpec) -> list[int]:
    """Indices of layers that own parameters, in declaration order."""
    return [i for i, l in enumerate(arch.layers) if isinstance(l, (Conv, FullyConnected))]


def param_shapes(arch: ArchSpec) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(weights shape, biases shape) for each parameterized layer."""
    infos = infer_shapes(arch)
    shapes = []
    in_shape: tuple[int, ...] = arch.input_shape
    for i, layer in enumerate(arch.layers):
        if isinstance(layer, Conv):
            shapes.append(((layer.filters, in_shape[0], layer.kernel, layer.kernel), (layer.filters,)))
        elif isinstance(layer, FullyConnected):
            in_dim = int(np.prod(in_shape))
            shapes.append(((layer.units, in_dim), (layer.units,)))
        in_shape = infos[i].out_shape
    return shapes


def init_params(
    arch: ArchSpec,
    sigmas: float | Sequence[float],
    seed: int,
    dtype=np.float64,
) -> list[LayerParams]:
    """Zero-mean Gaussian weights, zero biases, deterministic in ``seed``.

    ``sigmas`` is either one standard deviation per parameterized layer
    (shallow to deep) or a single value applied to all of them.
    """
    shapes = param_shapes(arch)
    if np.isscalar(sigmas):
        sigma_list = [float(sigmas)] * len(shapes)
    else:
        sigma_list = [float(s) for s in sigmas]
        if len(sigma_list) != len(shapes):
            raise ValueError(
                f"got {len(sigma_list)} sigmas for {len(shapes)} parameterized layers"
            )
    rng = np.random.default_rng(seed)
    params = []
    for (w_shape, b_shape), sigma in zip(shapes, sigma_list):
        weights = rng.normal(0.0, sigma, size=w_shape).astype(dtype, copy=False)
        params.append(LayerParams(weights, np.zeros(b_shape, dtype=dtype)))
    return params


def zeros_like_params(params: Sequence[LayerParams]) -> list[LayerParams]:
    return [LayerParams(np.zeros_like(p.weights), np.zeros_like(p.biases)) for p in params]
