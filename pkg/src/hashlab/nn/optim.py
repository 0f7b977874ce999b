"""SGD with classical momentum and weight decay."""

from __future__ import annotations

from typing import Sequence

from .params import LayerParams


def sgd_step(
    params: Sequence[LayerParams],
    grads: Sequence[LayerParams],
    velocity: Sequence[LayerParams],
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
):
    """One in-place update ``v <- momentum*v - lr*(g + wd*w); w <- w + v``.

    Weight decay applies to weights only; biases are exempt.  Returns the
    (mutated) ``params`` and ``velocity`` for convenience.
    """
    if not (len(params) == len(grads) == len(velocity)):
        raise ValueError("params, grads and velocity must have equal length")
    for p, g, v in zip(params, grads, velocity):
        if p.weights.shape != g.weights.shape or p.biases.shape != g.biases.shape:
            raise ValueError(
                f"gradient shape {g.weights.shape}/{g.biases.shape} does not match "
                f"parameter shape {p.weights.shape}/{p.biases.shape}"
            )
        v.weights *= momentum
        v.weights -= lr * (g.weights + weight_decay * p.weights)
        p.weights += v.weights
        v.biases *= momentum
        v.biases -= lr * g.biases
        p.biases += v.biases
    return params, velocity
