"""Network primitives built on :mod:`proxymotion.nn.tensor`."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import (Tensor, as_tensor, clamp_min, concat, log, matmul, rodrigues_coefficients,
                     softmax, sqrt, stack, tsum, where_const)


def receptive_length(kernel_size: int, dilation: int) -> int:
    return dilation * (kernel_size - 1) + 1


def _windows(x: np.ndarray, kernel_size: int, dilation: int) -> np.ndarray:
    span = receptive_length(kernel_size, dilation)
    return sliding_window_view(x, span, axis=-1)[..., ::dilation]


def _conv_raw(x: Tensor, weight: Tensor, dilation: int) -> Tensor:
    """Valid-mode dilated convolution without bias on (B, C_in, L) input."""
    x, weight = as_tensor(x), as_tensor(weight)
    c_out, c_in, k = weight.shape
    if x.ndim != 3 or x.shape[1] != c_in:
        raise ValueError(f"expected input (B, {c_in}, L), got {x.shape}")
    span = receptive_length(k, dilation)
    length = x.shape[2]
    if length < span:
        raise ValueError(f"input length {length} is shorter than the minimum {span} for kernel "
                         f"{k} at dilation {dilation}")
    win = _windows(x.data, k, dilation)                    # B, C_in, L', K
    l_out = win.shape[2]
    cols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(x.shape[0], l_out, c_in * k)
    wmat = weight.data.reshape(c_out, c_in * k)
    out = np.matmul(cols, wmat.T).transpose(0, 2, 1)       # B, C_out, L'

    def back(g):
        gw = np.einsum("blc,bol->oc", cols, g).reshape(weight.shape)
        gx = np.zeros_like(x.data)
        for j in range(k):
            gx[:, :, j * dilation:j * dilation + l_out] += np.matmul(weight.data[:, :, j].T, g)
        return gx, gw

    return Tensor._make(np.ascontiguousarray(out), (x, weight), back)


def _batched(x):
    x = as_tensor(x)
    if x.ndim == 2:
        return x.reshape(1, *x.shape), True
    return x, False


def conv1d_dilated(x, weight, bias=None, dilation: int = 1) -> Tensor:
    """Valid dilated 1D convolution.

    x is (C_in, L) or (B, C_in, L); weight is (C_out, C_in, K); the output
    length is ``L - dilation * (K - 1)``.
    """
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    xb, squeeze = _batched(x)
    out = _conv_raw(xb, weight, dilation)
    if bias is not None:
        out = out + as_tensor(bias).reshape(1, -1, 1)
    return out.reshape(*out.shape[1:]) if squeeze else out


def partial_conv1d(x, mask, weight, bias=None, dilation: int = 1):
    """Mask-renormalized dilated convolution with mask propagation.

    Each output position convolves only the valid inputs of its window,
    rescales by (window size)/(valid count), adds the bias, and is zeroed
    where the window has no valid input. Returns ``(y, new_mask)`` with
    new_mask of shape (B, C_out, L') (or unbatched to match x).
    """
    xb, squeeze = _batched(x)
    m = np.asarray(mask, dtype=bool)
    if m.ndim == 2:
        m = m[None]
    if m.shape != xb.shape:
        raise ValueError(f"mask shape {m.shape} does not match input {xb.shape}")
    weight = as_tensor(weight)
    c_out, c_in, k = weight.shape
    win = _windows(m.astype(xb.data.dtype), k, dilation)
    count = win.sum(axis=(1, 3))                            # B, L'
    valid = count > 0
    ratio = np.where(valid, (c_in * k) / np.where(valid, count, 1.0), 0.0)[:, None, :]
    raw = _conv_raw(where_const(m, xb), weight, dilation)
    y = raw * ratio.astype(xb.data.dtype)
    if bias is not None:
        y = y + as_tensor(bias).reshape(1, -1, 1)
    new_mask = np.broadcast_to(valid[:, None, :], y.shape).copy()
    y = where_const(new_mask, y)
    if squeeze:
        return y.reshape(*y.shape[1:]), new_mask[0]
    return y, new_mask


def linear(x, weight, bias=None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else out + bias


def attention_weights(q, k, d_k: int) -> Tensor:
    return softmax(matmul(q, as_tensor(k).T) * (1.0 / np.sqrt(d_k)), axis=-1)


def cross_attention(own, other, w_q, w_k, w_v, residual: str = "value", return_weights: bool = False):
    """Update the `own` token stream from the `other` stream.

    Queries come from `other`, keys and values from `own`::

        own' = V_own + Softmax(Q_other K_own^T / sqrt(d_k)) V_own

    ``residual="query"`` adds the other stream's input instead of V_own.
    Token counts of both streams must match.
    """
    own, other = as_tensor(own), as_tensor(other)
    w_q, w_k, w_v = as_tensor(w_q), as_tensor(w_k), as_tensor(w_v)
    if own.shape[-1] != w_k.shape[0] or other.shape[-1] != w_q.shape[0]:
        raise ValueError(f"feature sizes {own.shape[-1]}/{other.shape[-1]} do not match the projections "
                         f"({w_k.shape[0]}/{w_q.shape[0]})")
    if own.shape[-2] != other.shape[-2]:
        raise ValueError(f"token counts differ: {own.shape[-2]} vs {other.shape[-2]}")
    d_k = w_k.shape[1]
    q = matmul(other, w_q)
    k = matmul(own, w_k)
    v = matmul(own, w_v)
    attn = attention_weights(q, k, d_k)
    mixed = matmul(attn, v)
    if residual == "value":
        out = v + mixed
    elif residual == "query":
        if other.shape[-1] != v.shape[-1]:
            raise ValueError("query residual needs d_model == d_k")
        out = other + mixed
    else:
        raise ValueError(f"unknown residual mode {residual!r}")
    return (out, attn) if return_weights else out


# -- geometry ---------------------------------------------------------------------
# aa (N, 3) @ _SKEW -> flattened skew matrices (N, 9)
_SKEW = np.zeros((3, 9))
_SKEW[0, 5], _SKEW[0, 7] = -1.0, 1.0   # K[1,2] = -x, K[2,1] = x
_SKEW[1, 2], _SKEW[1, 6] = 1.0, -1.0   # K[0,2] = y, K[2,0] = -y
_SKEW[2, 1], _SKEW[2, 3] = -1.0, 1.0   # K[0,1] = -z, K[1,0] = z


def axis_angle_to_matrix(aa) -> Tensor:
    """Differentiable Rodrigues map (..., 3) -> (..., 3, 3)."""
    aa = as_tensor(aa)
    lead = aa.shape[:-1]
    K = matmul(aa.reshape(-1, 3), Tensor(_SKEW.astype(aa.data.dtype))).reshape(*lead, 3, 3)
    s = tsum(aa * aa, axis=-1)
    A, B = rodrigues_coefficients(s)
    eye = np.broadcast_to(np.eye(3, dtype=aa.data.dtype), lead + (3, 3))
    return K * A.reshape(*lead, 1, 1) + matmul(K, K) * B.reshape(*lead, 1, 1) + eye


def cross(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def normalize(v, eps: float = 1e-12) -> Tensor:
    v = as_tensor(v)
    n = sqrt(tsum(v * v, axis=-1, keepdims=True) + eps)
    return v / n


def rot6d_to_matrix(r6) -> Tensor:
    """Gram-Schmidt on the two stored columns; (..., 6) -> (..., 3, 3)."""
    r6 = as_tensor(r6)
    a1, a2 = r6[..., 0:3], r6[..., 3:6]
    b1 = normalize(a1)
    b2 = normalize(a2 - tsum(b1 * a2, axis=-1, keepdims=True) * b1)
    b3 = cross(b1, b2)
    return stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(R) -> Tensor:
    R = as_tensor(R)
    return concat([R[..., :, 0], R[..., :, 1]], axis=-1)


def project_normalized(points, R, T, min_depth: float = 1e-2) -> tuple:
    """Pinhole projection to focal-normalized image coordinates.

    points (..., N, 3), R (..., 3, 3), T (..., 3). Depth is clamped at
    `min_depth`; the boolean mask of points in front of the camera (with
    the unclamped depth) is returned alongside.
    """
    points, R, T = as_tensor(points), as_tensor(R), as_tensor(T)
    cam = matmul(points, R.T) + T.reshape(*T.shape[:-1], 1, 3)
    z = cam[..., 2]
    valid = z.data > 0
    xy = cam[..., 0:2] / clamp_min(z, min_depth).reshape(*z.shape, 1)
    return xy, valid


def binary_cross_entropy(p, target, eps: float = 1e-12) -> Tensor:
    p = as_tensor(p)
    target = as_tensor(target)
    return -(target * log(p + eps) + (1.0 - target) * log(1.0 - p + eps))


def smooth_norm(v, eps: float = 0.0) -> Tensor:
    """Euclidean norm over the last axis; eps > 0 smooths the kink at 0."""
    v = as_tensor(v)
    return sqrt(tsum(v * v, axis=-1) + eps)


__all__ = [
    "axis_angle_to_matrix", "binary_cross_entropy", "conv1d_dilated", "cross", "cross_attention",
    "linear", "matrix_to_rot6d", "normalize", "partial_conv1d", "project_normalized", "receptive_length",
    "rot6d_to_matrix", "smooth_norm", "attention_weights",
]
