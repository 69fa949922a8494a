"""Differentiable operations on :class:`~attnmorph.engine.tensor.Tensor`.

Each op computes its forward value with numpy and attaches a closure mapping
the output gradient to one gradient per input (``None`` for inputs that need
none). Shapes are checked explicitly; the only implicit broadcast is adding a
per-channel bias.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InputError
from .tensor import Tensor, as_tensor


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise InputError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "add")
    return Tensor._result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "sub")
    return Tensor._result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    """Elementwise product of two same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "mul")
    return Tensor._result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def scale(a, factor):
    factor = float(factor)
    return Tensor._result(a.data * factor, (a,), lambda g: (g * factor,), "scale")


def total(a):
    """Sum of all elements, as a 0-d tensor."""
    return Tensor._result(np.asarray(a.data.sum()), (a,), lambda g: (np.full_like(a.data, g),), "sum")


def mean(a):
    n = a.data.size
    return Tensor._result(np.asarray(a.data.mean()), (a,), lambda g: (np.full_like(a.data, g / n),), "mean")


def reshape(a, shape):
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise InputError(f"cannot reshape {a.shape} to {shape}") from exc
    return Tensor._result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes):
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise InputError(f"transpose: {axes} is not a permutation of {a.ndim} axes")
    inverse = tuple(np.argsort(axes))
    return Tensor._result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def relu(a):
    mask = a.data > 0
    return Tensor._result(np.where(mask, a.data, 0.0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def concat(inputs, axis):
    inputs = [as_tensor(t) for t in inputs]
    if not inputs:
        raise InputError("concat needs at least one tensor")
    ndim = inputs[0].ndim
    if not -ndim <= axis < ndim:
        raise InputError(f"concat axis {axis} out of range for {ndim}-d tensors")
    axis %= ndim
    for t in inputs[1:]:
        if t.ndim != ndim or any(t.shape[k] != inputs[0].shape[k] for k in range(ndim) if k != axis):
            raise InputError(f"concat: ragged shapes {[t.shape for t in inputs]} along axis {axis}")
    bounds = np.cumsum([t.shape[axis] for t in inputs])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._result(np.concatenate([t.data for t in inputs], axis=axis), inputs, backward, "concat")


def inner_product(a, b):
    """``<a, b>`` for two vectors of equal length, as a 0-d tensor."""
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise InputError(f"inner_product needs two equal-length vectors, got {a.shape} and {b.shape}")
    return Tensor._result(np.asarray(a.data @ b.data), (a, b), lambda g: (g * b.data, g * a.data), "inner")


def bmm(a, b):
    """Batched matrix product ``[B, n, k] @ [B, k, m] -> [B, n, m]``."""
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise InputError(f"bmm: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        return g @ b.data.transpose(0, 2, 1), a.data.transpose(0, 2, 1) @ g

    return Tensor._result(a.data @ b.data, (a, b), backward, "bmm")


def dense(x, weight, bias=None):
    """Affine map ``x @ weight.T + bias`` applied to every row of ``x [N, D_in]``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise InputError(f"dense: input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise InputError(f"dense: bias shape {bias.shape} != ({weight.shape[0]},)")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        grads = (g @ weight.data, g.T @ x.data)
        return grads + ((g.sum(axis=0),) if bias is not None else ())

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return Tensor._result(out, parents, backward, "dense")


def _conv_out_extent(size, k, stride, padding, axis):
    span = size + 2 * padding - k
    if span < 0:
        raise InputError(f"conv2d: kernel extent {k} exceeds padded input extent {size + 2 * padding} on {axis}")
    if span % stride:
        raise InputError(f"conv2d: ({size} + 2*{padding} - {k}) is not divisible by stride {stride} on {axis}")
    return span // stride + 1


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """2-D cross-correlation of ``x [N, C, H, W]`` with ``kernel [F, C, kh, kw]``.

    Output extent is ``(H + 2*padding - kh) / stride + 1``; the division must be
    exact. Zero padding.
    """
    if stride < 1 or padding < 0:
        raise InputError(f"conv2d: stride must be >= 1 and padding >= 0, got {stride}, {padding}")
    if x.ndim != 4 or kernel.ndim != 4:
        raise InputError(f"conv2d: need 4-d input and kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise InputError(f"conv2d: input has {c} channels, kernel expects {kc}")
    if bias is not None and bias.shape != (f,):
        raise InputError(f"conv2d: bias shape {bias.shape} != ({f},)")
    ho = _conv_out_extent(h, kh, stride, padding, "height")
    wo = _conv_out_extent(w, kw, stride, padding, "width")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    # windows: [N, C, Ho, Wo, kh, kw]
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3]))  # [N, Ho, Wo, F]
    out = out.transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def backward(g):
        # g: [N, F, Ho, Wo]
        gk = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))  # [F, C, kh, kw]
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(kernel.data[:, :, i, j], g, axes=([0], [1]))  # [C, N, Ho, Wo]
                gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib.transpose(1, 0, 2, 3)
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        grads = (gx, gk)
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads

    parents = (x, kernel) + ((bias,) if bias is not None else ())
    return Tensor._result(out, parents, backward, "conv2d")


def maxpool2d(x, window, stride=None):
    """Max pooling over ``window x window`` patches; ties route gradient to the first maximum."""
    stride = window if stride is None else stride
    if x.ndim != 4 or window < 1 or stride < 1:
        raise InputError(f"maxpool2d: bad arguments for input {x.shape}, window {window}, stride {stride}")
    n, c, h, w = x.shape
    ho = _conv_out_extent(h, window, stride, 0, "height")
    wo = _conv_out_extent(w, window, stride, 0, "width")
    windows = sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = windows.reshape(n, c, ho, wo, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.data)
        di, dj = np.divmod(arg, window)
        rows = np.arange(ho)[None, None, :, None] * stride + di
        cols = np.arange(wo)[None, None, None, :] * stride + dj
        nn = np.arange(n)[:, None, None, None]
        cc = np.arange(c)[None, :, None, None]
        np.add.at(gx, (nn, cc, rows, cols), g)
        return (gx,)

    return Tensor._result(out, (x,), backward, "maxpool2d")


def global_avg_pool(x):
    """Mean over the spatial axes: ``[N, C, H, W] -> [N, C]``."""
    if x.ndim != 4:
        raise InputError(f"global_avg_pool needs a 4-d input, got {x.shape}")
    hw = x.shape[2] * x.shape[3]

    def backward(g):
        return (np.broadcast_to(g[:, :, None, None] / hw, x.shape).copy(),)

    return Tensor._result(x.data.mean(axis=(2, 3)), (x,), backward, "gap")


def _softmax_array(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x):
    """Softmax along the last axis, computed after subtracting the row maximum."""
    if x.ndim < 1:
        raise InputError("softmax needs at least one axis")
    if not np.all(np.isfinite(x.data)):
        raise InputError("softmax input must be finite")
    s = _softmax_array(x.data)

    def backward(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor._result(s, (x,), backward, "softmax")


def log_softmax(x):
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    s = np.exp(out)

    def backward(g):
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return Tensor._result(out, (x,), backward, "log_softmax")


def cross_entropy_loss(logits, labels):
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``.

    ``logits`` is ``[N, K]``; ``labels`` holds N class indices in ``[0, K)``.
    """
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise InputError(f"cross_entropy_loss needs [N, K] logits with N >= 1, got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise InputError(f"expected {logits.shape[0]} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise InputError(f"labels must be integers in [0, {logits.shape[1]}), got {labels.tolist()}")
    n = logits.shape[0]
    logp = log_softmax(logits)
    picked = logp.data[np.arange(n), labels]

    def backward(g):
        gl = np.zeros_like(logp.data)
        gl[np.arange(n), labels] = -g / n
        return (gl,)

    return Tensor._result(np.asarray(-picked.mean()), (logp,), backward, "xent")
