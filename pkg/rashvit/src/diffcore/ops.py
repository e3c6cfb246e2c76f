"""
Differentiable Ops

Every op computes its forward result with numpy and hands a backward rule
(upstream gradient -> one gradient per input) to emit(). All ops take the
batch dimension explicitly; image ops work on (B, C, H, W).

Op families:
    - Elementwise arithmetic with numpy broadcasting
    - Shape ops (reshape, transpose, concat, slice)
    - matmul / linear
    - conv2d (grouped, strided, zero-padded cross-correlation)
    - batch_norm (train / eval)
    - relu, sigmoid, softmax
    - pooling (spatial, channel, global)
    - dropout (inverted)
    - min_max_norm (per-sample)
    - cross_entropy
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from rashvit.src.diffcore.tensor import Tensor, emit
from rashvit.src.errors import ShapeError

ArrayLike = Union[Tensor, np.ndarray, float, int]

POOL_KINDS = ("spatial_avg", "spatial_max", "channel_avg", "channel_max", "global_avg")


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    """Lift constants to (non-differentiable) tensors, matching `like`'s dtype."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return as_tensor(a, like), as_tensor(b, like)


# =============================================================================
# ELEMENTWISE ARITHMETIC
# =============================================================================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return emit("add", (a, b), a.data + b.data,
                lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return emit("sub", (a, b), a.data - b.data,
                lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return emit("mul", (a, b), a.data * b.data,
                lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)

    def rule(g):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / np.square(b.data), b.shape),
        )

    return emit("div", (a, b), a.data / b.data, rule)


def neg(a: Tensor) -> Tensor:
    return emit("neg", (a,), -a.data, lambda g: (-g,))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return emit("sum", (x,), out, rule)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.size // max(1, np.asarray(out).size)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape),)

    return emit("mean", (x,), out, rule)


# =============================================================================
# SHAPE OPS
# =============================================================================

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return emit("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return emit("transpose", (x,), np.transpose(x.data, axes), lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = tuple(tensors)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return emit("concat", tensors, np.concatenate([t.data for t in tensors], axis=axis),
                lambda g: tuple(np.split(g, cuts, axis=axis)))


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """x[..., start:stop, ...] along one axis."""
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def rule(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return emit("slice", (x,), x.data[index], rule)


# =============================================================================
# LINEAR ALGEBRA
# =============================================================================

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes."""
    a, b = _pair(a, b)

    def rule(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return emit("matmul", (a, b), np.matmul(a.data, b.data), rule)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    y = x W^T + b over arbitrary leading dims.

    weight is (out_features, in_features), bias is (out_features,).
    """
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input features {x.shape[-1]} != weight {weight.shape}")
    out = np.matmul(x.data, weight.data.T)
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def rule(g):
        flat_g = g.reshape(-1, g.shape[-1])
        flat_x = x.data.reshape(-1, x.shape[-1])
        grads = [np.matmul(g, weight.data), flat_g.T @ flat_x]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    return emit("linear", inputs, out, rule)


# =============================================================================
# CONVOLUTION
# =============================================================================

def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """
    2-D cross-correlation on (B, C_in, H, W) with weight (C_out, C_in/groups, kH, kW).

    A 3-D (C, H, W) input is treated as a batch of one and returned 3-D.
    Depthwise convolution is groups == C_in == C_out.

    Raises:
        ShapeError: On channel/group mismatch or nonpositive output size
    """
    if x.ndim == 3:
        out = conv2d(reshape(x, (1, *x.shape)), weight, bias, stride, padding, groups)
        return reshape(out, out.shape[1:])
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects (B,C,H,W) input and 4-D weight, got {x.shape}, {weight.shape}")

    batch, c_in, height, width = x.shape
    c_out, c_group, kh, kw = weight.shape
    if c_in % groups or c_out % groups or c_group != c_in // groups:
        raise ShapeError(
            f"conv2d: input channels {c_in}, weight {weight.shape} incompatible with groups={groups}"
        )
    h_out = _conv_out(height, kh, stride, padding)
    w_out = _conv_out(width, kw, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d: nonpositive output size ({h_out}, {w_out}) for input {x.shape}")

    o_group = c_out // groups
    w_g = weight.data.reshape(groups, o_group, c_group, kh, kw)

    if kh == 1 and kw == 1 and stride == 1 and padding == 0:
        # Pointwise fast path
        x_g = x.data.reshape(batch, groups, c_group, height, width)
        out = np.einsum("bgchw,goc->bgohw", x_g, w_g[..., 0, 0], optimize=True)
        out = out.reshape(batch, c_out, height, width)

        def pointwise_rule(g):
            g_g = g.reshape(batch, groups, o_group, height, width)
            gx = np.einsum("bgohw,goc->bgchw", g_g, w_g[..., 0, 0], optimize=True)
            gw = np.einsum("bgohw,bgchw->goc", g_g, x_g, optimize=True)
            grads = [gx.reshape(x.shape), gw.reshape(weight.shape)]
            if bias is not None:
                grads.append(g.sum(axis=(0, 2, 3)))
            return grads

        rule = pointwise_rule
    else:
        padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(2, 3))
        cols = windows[:, :, ::stride, ::stride][:, :, :h_out, :w_out]
        cols_g = cols.reshape(batch, groups, c_group, h_out, w_out, kh, kw)
        out = np.einsum("bgchwij,gocij->bgohw", cols_g, w_g, optimize=True)
        out = out.reshape(batch, c_out, h_out, w_out)

        def window_rule(g):
            g_g = g.reshape(batch, groups, o_group, h_out, w_out)
            gw = np.einsum("bgohw,bgchwij->gocij", g_g, cols_g, optimize=True)
            gcols = np.einsum("bgohw,gocij->bgchwij", g_g, w_g, optimize=True)
            gcols = gcols.reshape(batch, c_in, h_out, w_out, kh, kw)
            gpad = np.zeros_like(padded)
            h_span = stride * (h_out - 1) + 1
            w_span = stride * (w_out - 1) + 1
            for i in range(kh):
                for j in range(kw):
                    gpad[:, :, i:i + h_span:stride, j:j + w_span:stride] += gcols[..., i, j]
            gx = gpad[:, :, padding:padding + height, padding:padding + width]
            grads = [gx, gw.reshape(weight.shape)]
            if bias is not None:
                grads.append(g.sum(axis=(0, 2, 3)))
            return grads

        rule = window_rule

    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return emit("conv2d", inputs, out, rule)


# =============================================================================
# NORMALIZATION
# =============================================================================

def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Per-channel batch normalization of (B, C, H, W).

    Train mode normalizes with the batch mean and biased batch variance and
    updates the running buffers in place:
        running = (1 - momentum) * running + momentum * batch_stat
    Eval mode normalizes with the running buffers.

    Raises:
        ShapeError: Train mode with a batch of one
    """
    if x.ndim != 4:
        raise ShapeError(f"batch_norm expects (B,C,H,W), got {x.shape}")
    axes = (0, 2, 3)
    shape = (1, x.shape[1], 1, 1)

    if training:
        if x.shape[0] < 2:
            raise ShapeError("batch_norm in train mode needs a batch of at least 2")
        mu = x.data.mean(axis=axes)
        var = np.square(x.data - mu.reshape(shape)).mean(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(shape)) * inv_std.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
    count = x.size // x.shape[1]

    def rule(g):
        g_gamma = (g * xhat).sum(axis=axes)
        g_beta = g.sum(axis=axes)
        g_xhat = g * gamma.data.reshape(shape)
        if training:
            gx = (inv_std.reshape(shape) / count) * (
                count * g_xhat
                - g_xhat.sum(axis=axes, keepdims=True)
                - xhat * (g_xhat * xhat).sum(axis=axes, keepdims=True)
            )
        else:
            gx = g_xhat * inv_std.reshape(shape)
        return gx, g_gamma, g_beta

    return emit("batch_norm", (x, gamma, beta), out, rule)


def min_max_norm(x: Tensor, eps: float = 1e-6) -> Tensor:
    """
    Per-sample (x - min) / (max - min + eps) over all non-batch elements.

    A 1-D input is one sample. Constant samples map to zeros; with eps = 0 a
    constant sample uses a unit denominator.
    """
    batch = x.shape[0] if x.ndim >= 2 else 1
    flat = x.data.reshape(batch, -1)
    lo_idx = np.argmin(flat, axis=1)
    hi_idx = np.argmax(flat, axis=1)
    rows = np.arange(batch)
    lo = flat[rows, lo_idx][:, None]
    hi = flat[rows, hi_idx][:, None]
    denom = hi - lo + eps
    denom = np.where(denom == 0, 1.0, denom).astype(flat.dtype)
    shifted = flat - lo
    out = shifted / denom

    def rule(g):
        g = g.reshape(batch, -1)
        g_shift = g / denom
        g_denom = -(g * shifted).sum(axis=1, keepdims=True) / np.square(denom)
        gx = g_shift.copy()
        g_lo = -g_shift.sum(axis=1) - g_denom[:, 0]
        g_hi = g_denom[:, 0]
        # A constant row has lo_idx == hi_idx and no dependence on the range
        live = hi[:, 0] > lo[:, 0]
        np.add.at(gx, (rows, lo_idx), np.where(live, g_lo, -g_shift.sum(axis=1)))
        np.add.at(gx, (rows, hi_idx), np.where(live, g_hi, 0.0))
        return (gx.reshape(x.shape),)

    return emit("min_max_norm", (x,), out.reshape(x.shape), rule)


# =============================================================================
# ACTIVATIONS
# =============================================================================

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return emit("relu", (x,), np.where(mask, x.data, 0), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is overflow-free for large |x|
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return emit("sigmoid", (x,), y, lambda g: (g * y * (1.0 - y),))


ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r} (expected one of {sorted(ACTIVATIONS)})")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    return emit("softmax", (x,), y,
                lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


# =============================================================================
# POOLING
# =============================================================================

def pool(x: Tensor, kind: str) -> Tensor:
    """
    Reductions over a (B, C, H, W) map.

    spatial_avg / spatial_max -> (B, C, 1, 1)
    channel_avg / channel_max -> (B, 1, H, W)
    global_avg                -> (B, C)

    Max gradients go to the first maximal element.
    """
    if kind not in POOL_KINDS:
        raise ValueError(f"unknown pool kind {kind!r} (expected one of {POOL_KINDS})")
    if x.ndim != 4 or 0 in x.shape:
        raise ShapeError(f"pool expects a non-empty (B,C,H,W) map, got {x.shape}")
    batch, channels, height, width = x.shape

    if kind in ("spatial_avg", "global_avg"):
        out = x.data.mean(axis=(2, 3), keepdims=True)
        scale = 1.0 / (height * width)

        def avg_rule(g):
            return (np.broadcast_to(g.reshape(batch, channels, 1, 1) * scale, x.shape),)

        if kind == "global_avg":
            out = out.reshape(batch, channels)
        return emit(kind, (x,), out, avg_rule)

    if kind == "channel_avg":
        out = x.data.mean(axis=1, keepdims=True)
        return emit(kind, (x,), out, lambda g: (np.broadcast_to(g / channels, x.shape),))

    if kind == "spatial_max":
        flat = x.data.reshape(batch, channels, -1)
        idx = np.argmax(flat, axis=2)[..., None]
        out = np.take_along_axis(flat, idx, axis=2).reshape(batch, channels, 1, 1)

        def smax_rule(g):
            grad = np.zeros_like(flat)
            np.put_along_axis(grad, idx, g.reshape(batch, channels, 1), axis=2)
            return (grad.reshape(x.shape),)

        return emit(kind, (x,), out, smax_rule)

    idx = np.argmax(x.data, axis=1)[:, None]
    out = np.take_along_axis(x.data, idx, axis=1)

    def cmax_rule(g):
        grad = np.zeros_like(x.data)
        np.put_along_axis(grad, idx, g, axis=1)
        return (grad,)

    return emit(kind, (x,), out, cmax_rule)


# =============================================================================
# REGULARIZATION AND LOSS
# =============================================================================

def dropout(
    x: Tensor,
    p: float,
    training: bool,
    rng: Union[np.random.Generator, int, None] = None,
) -> Tensor:
    """
    Inverted dropout: zero each entry with probability p and scale survivors
    by 1/(1-p). Identity in eval mode or when p == 0.

    `rng` may be a Generator or an integer seed.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.PCG64(0 if rng is None else int(rng)))
    keep = rng.random(x.shape) >= p
    mask = (keep / (1.0 - p)).astype(x.dtype)
    return emit("dropout", (x,), x.data * mask, lambda g: (g * mask,))


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """
    Mean over the batch of -log softmax(logits)[label].

    Raises:
        ShapeError: If logits are not (B, K)
        ValueError: On labels outside [0, K)
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (B, K) logits, got {logits.shape}")
    batch, classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != batch:
        raise ShapeError(f"{labels.shape[0]} labels for a batch of {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(batch)
    loss = -log_probs[rows, labels].mean()

    def rule(g):
        probs = np.exp(log_probs)
        probs[rows, labels] -= 1.0
        return (probs * (g / batch),)

    return emit("cross_entropy", (logits,), np.asarray(loss), rule)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a Python constant."""
    factor = float(factor)
    return emit("scale", (x,), x.data * factor, lambda g: (g * factor,))
