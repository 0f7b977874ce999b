"""Forward/backward primitives for every layer kind.

All operations are pure functions.  A forward call returns ``(output,
cache)``; the matching backward call consumes the upstream gradient and the
cache and returns exact analytic gradients.  Image tensors are channel-major
``(C, H, W)``; every operation also accepts a leading batch axis ``(N, C, H,
W)`` and preserves whichever form it was given.
"""

from __future__ import annotations

import numpy as np


def _as_batch_images(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected a (C,H,W) or (N,C,H,W) tensor, got shape {x.shape}")


def _im2col(xp: np.ndarray, k: int) -> np.ndarray:
    """Stride-1 patch matrix of shape (N, C*k*k, out_h*out_w)."""
    n, c, hp, wp = xp.shape
    oh, ow = hp - k + 1, wp - k + 1
    cols = np.empty((n, c, k, k, oh, ow), dtype=xp.dtype)
    for p in range(k):
        for q in range(k):
            cols[:, :, p, q] = xp[:, :, p : p + oh, q : q + ow]
    return cols.reshape(n, c * k * k, oh * ow)


def _col2im(dcols: np.ndarray, padded_shape: tuple[int, ...], k: int) -> np.ndarray:
    """Scatter-add inverse of :func:`_im2col`."""
    n, c, hp, wp = padded_shape
    oh, ow = hp - k + 1, wp - k + 1
    d6 = dcols.reshape(n, c, k, k, oh, ow)
    dxp = np.zeros(padded_shape, dtype=dcols.dtype)
    for p in range(k):
        for q in range(k):
            dxp[:, :, p : p + oh, q : q + ow] += d6[:, :, p, q]
    return dxp


def conv2d(x, weights: np.ndarray, biases: np.ndarray, padding: int = 0):
    """Stride-1 2-d convolution with zero padding.

    ``weights`` has shape ``(out_c, in_c, k, k)``; ``biases`` shape
    ``(out_c,)`` (one shared bias per output feature map).  Output pixel
    ``(i, j)`` of map ``m`` is ``sum_{n,p,q} w[m,n,p,q] * x[n, i+p, j+q] +
    b[m]`` with kernel offsets running over ``0..k-1``.
    """
    x4, single = _as_batch_images(x)
    n, c, h, w = x4.shape
    out_c, in_c, k, k2 = weights.shape
    if k != k2:
        raise ValueError("convolution kernels must be square")
    if c != in_c:
        raise ValueError(f"input has {c} channels but weights expect {in_c}")
    if padding < 0:
        raise ValueError("padding must be >= 0")
    oh = h + 2 * padding - k + 1
    ow = w + 2 * padding - k + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"convolution output side {min(oh, ow)} < 1")

    xp = np.pad(x4, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x4
    cols = _im2col(xp, k)
    w2 = weights.reshape(out_c, -1)
    out = (np.matmul(w2, cols) + biases[:, None]).reshape(n, out_c, oh, ow)
    cache = (cols, x4.shape, weights, padding, single)
    return (out[0] if single else out), cache


def conv2d_backward(grad_out, cache):
    """Gradients of :func:`conv2d`: ``(grad_input, grad_weights, grad_biases)``."""
    cols, x_shape, weights, padding, single = cache
    g4 = np.asarray(grad_out)
    if single:
        g4 = g4[None]
    n, c, h, w = x_shape
    out_c = weights.shape[0]
    k = weights.shape[2]
    g2 = g4.reshape(n, out_c, -1)

    grad_b = g4.sum(axis=(0, 2, 3))
    grad_w = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)
    dcols = np.matmul(weights.reshape(out_c, -1).T, g2)
    dxp = _col2im(dcols, (n, c, h + 2 * padding, w + 2 * padding), k)
    dx = dxp[:, :, padding : padding + h, padding : padding + w] if padding else dxp
    return (dx[0] if single else dx), grad_w, grad_b


def maxpool(x, window: int, stride: int):
    """Max pooling over ``window x window`` patches placed at multiples of ``stride``.

    Windows that would overflow the input are dropped (floor sizing), so the
    output side is ``floor((in - window) / stride) + 1``.  The cache records
    each window's argmax (ties resolve to the first position in row-major
    window order) for exact gradient routing.
    """
    if window < 1 or stride < 1:
        raise ValueError("pooling window and stride must be >= 1")
    x4, single = _as_batch_images(x)
    n, c, h, w = x4.shape
    if window > h or window > w:
        raise ValueError("pooling window exceeds input side")
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1

    sn, sc, sh, sw = x4.strides
    view = np.lib.stride_tricks.as_strided(
        x4, (n, c, oh, ow, window, window), (sn, sc, sh * stride, sw * stride, sh, sw)
    )
    win = view.reshape(n, c, oh, ow, window * window)
    local = win.argmax(axis=-1)
    out = np.take_along_axis(win, local[..., None], axis=-1)[..., 0]

    rows = local // window + (np.arange(oh) * stride)[None, None, :, None]
    cols = local % window + (np.arange(ow) * stride)[None, None, None, :]
    cache = (rows * w + cols, x4.shape, single)
    return (out[0] if single else out), cache


def maxpool_backward(grad_out, cache):
    """Routes each output gradient to its recorded argmax position."""
    flat, x_shape, single = cache
    g4 = np.asarray(grad_out)
    if single:
        g4 = g4[None]
    n, c, h, w = x_shape
    dx = np.zeros((n, c, h * w), dtype=g4.dtype)
    n_i = np.arange(n)[:, None, None, None]
    c_i = np.arange(c)[None, :, None, None]
    np.add.at(dx, (n_i, c_i, flat), g4)
    dx = dx.reshape(x_shape)
    return dx[0] if single else dx


def relu(x):
    """Elementwise ``max(0, x)``; the subgradient at 0 is taken as 0."""
    x = np.asarray(x)
    mask = x > 0
    return x * mask, mask


def relu_backward(grad_out, mask):
    return np.asarray(grad_out) * mask


def fully_connected(x, weights: np.ndarray, biases: np.ndarray):
    """Affine map ``W @ flatten(x) + b``; ``weights`` has shape (out, in)."""
    x = np.asarray(x)
    single = x.ndim in (1, 3)
    x2 = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    if x2.shape[1] != weights.shape[1]:
        raise ValueError(
            f"flattened input length {x2.shape[1]} does not match weight in-dimension {weights.shape[1]}"
        )
    out = x2 @ weights.T + biases
    cache = (x2, weights, x.shape, single)
    return (out[0] if single else out), cache


def fully_connected_backward(grad_out, cache):
    x2, weights, x_shape, single = cache
    g2 = np.asarray(grad_out)
    if single:
        g2 = g2[None]
    grad_w = g2.T @ x2
    grad_b = g2.sum(axis=0)
    dx = (g2 @ weights).reshape(x_shape)
    return dx, grad_w, grad_b


def dropout(x, p_drop: float, mode: str = "eval", rng: np.random.Generator | None = None):
    """Inverted dropout.

    In ``"train"`` mode each element is zeroed independently with probability
    ``p_drop`` and survivors are scaled by ``1/(1-p_drop)``, so the output
    equals the ``"eval"`` output (the identity) in expectation.
    """
    if not 0.0 <= p_drop < 1.0:
        raise ValueError("p_drop must lie in [0, 1)")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x)
    if mode == "eval":
        return x, (None, 1.0)
    if rng is None:
        rng = np.random.default_rng()
    keep = 1.0 - p_drop
    mask = rng.random(x.shape) >= p_drop
    return x * mask / keep, (mask, keep)


def dropout_backward(grad_out, cache):
    mask, keep = cache
    g = np.asarray(grad_out)
    if mask is None:
        return g
    return g * mask / keep


def softmax_nll(logits, label: int):
    """Negative log likelihood of ``label`` under a softmax over ``logits``.

    Computed with max subtraction for stability.  Returns ``(loss,
    grad_logits)`` where ``grad = softmax(logits) - onehot(label)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("softmax_nll expects a 1-d logit vector")
    if not 0 <= label < z.shape[0]:
        raise ValueError(f"label {label} out of range for {z.shape[0]} classes")
    zs = z - z.max()
    lse = np.log(np.exp(zs).sum())
    loss = float(lse - zs[label])
    grad = np.exp(zs - lse)
    grad[label] -= 1.0
    return loss, grad


def softmax_nll_batch(logits: np.ndarray, labels: np.ndarray):
    """Mean NLL over a batch and the gradient of that mean w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = z.shape
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("label out of range")
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1))
    loss = float(np.mean(lse - zs[np.arange(n), labels]))
    grad = np.exp(zs - lse[:, None])
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
