"""Numpy building blocks for the classifier: forward and backward passes.

All activations are laid out NHWC. Convolutions are 3x3, stride 1, zero
padded to keep the spatial size; pooling is 2x2 max with stride 2. Each
backward routine consumes the cache its forward produced.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Extract k x k patches of a padded NHWC tensor as rows.

    Returns shape (B*H*W, k*k*C) with patch layout (ky, kx, channel).
    """
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (B,H,W,C,k,k)
    b, h, w = x.shape[:3]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, -1)
    return np.ascontiguousarray(cols)


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Same-padding cross-correlation. ``w`` has shape (k, k, Cin, Cout)."""
    k = w.shape[0]
    cols = _im2col(x, k)
    y = cols @ w.reshape(-1, w.shape[-1]) + b
    y = y.reshape(*x.shape[:3], w.shape[-1])
    return y, (cols, x.shape, w)


def conv2d_backward(
    dy: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cols, x_shape, w = cache
    k, _, c_in, c_out = w.shape
    dy2 = dy.reshape(-1, c_out)
    dw = (cols.T @ dy2).reshape(w.shape)
    db = dy2.sum(axis=0)
    # Input gradient is a same-padding correlation of dy with the kernel
    # rotated 180 degrees and its channel axes swapped.
    w_rot = w[::-1, ::-1].transpose(0, 1, 3, 2)
    dcols = _im2col(dy, k)
    dx = (dcols @ w_rot.reshape(-1, c_in)).reshape(x_shape)
    return dx, dw, db


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """2x2 stride-2 max pooling; requires even spatial dims."""
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"spatial dims must be even for 2x2 pooling, got {h}x{w}")
    xr = (
        x.reshape(b, h // 2, 2, w // 2, 2, c)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(b, h // 2, w // 2, c, 4)
    )
    # argmax keeps the first maximum, so ties route to exactly one slot
    idx = xr.argmax(axis=-1)
    y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return y, (idx, x.shape)


def maxpool_backward(dy: np.ndarray, cache: tuple) -> np.ndarray:
    idx, x_shape = cache
    b, h, w, c = x_shape
    g = np.zeros((b, h // 2, w // 2, c, 4), dtype=dy.dtype)
    np.put_along_axis(g, idx[..., None], dy[..., None], axis=-1)
    return (
        g.reshape(b, h // 2, w // 2, c, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(x_shape)
    )


def dense_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, tuple]:
    return x @ w + b, (x, w)


def dense_backward(
    dy: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, onehot: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross entropy over the batch, probabilities, and dlogits."""
    z = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_probs = z - log_norm
    loss = float(-(onehot * log_probs).sum() / logits.shape[0])
    probs = np.exp(log_probs)
    dlogits = (probs - onehot) / logits.shape[0]
    return loss, probs, dlogits.astype(logits.dtype, copy=False)
