"""
Attention Modules

ChannelAttention / SpatialAttention:
    CBAM-style gates. The channel gate runs spatially pooled descriptors
    (avg and max) through a shared two-layer 1x1 MLP; the spatial gate runs
    channel-pooled maps through a 7x7 conv. Both end in a sigmoid, so gates
    lie in (0, 1).

AHAB (adaptive hybrid attention):
    Channel and spatial branches in parallel on the same input F:
        F_c = channel_gate(F) * F
        F_s = spatial_gate(F) * F
        out = alpha * minmax(F_c) + beta * minmax(F_s)
    Each branch is min-max normalized before its learnable slope is
    applied; scaling first would be cancelled by the normalization.

SHSA (single-head self-attention on a channel subset):
    The first C_p channels attend over spatial tokens; the remaining
    channels pass through untouched and are concatenated back before the
    1x1 output projection.
"""

import math
from typing import Tuple

import numpy as np

from rashvit.src.diffcore import ops
from rashvit.src.diffcore.tensor import Tensor
from rashvit.src.model.layers import Conv2d, ForwardContext, Module, trunc_normal


class ChannelAttention(Module):
    """Per-channel gate (B, C, 1, 1); hidden width max(1, C // reduction)."""

    def __init__(self, channels: int, reduction: int, rng, dtype, act: str = "relu"):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.hidden = hidden
        self.add_module("fc1", Conv2d(channels, hidden, 1, rng, dtype, bias=False))
        self.add_module("fc2", Conv2d(hidden, channels, 1, rng, dtype, bias=False))
        self.act = ops.activation(act)

    def _mlp(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return self.fc2(self.act(self.fc1(x, ctx)), ctx)

    def forward(self, x, ctx):
        avg = self._mlp(ops.pool(x, "spatial_avg"), ctx)
        peak = self._mlp(ops.pool(x, "spatial_max"), ctx)
        return ops.sigmoid(avg + peak)


class SpatialAttention(Module):
    """Per-position gate (B, 1, H, W) from a 7x7 conv over [avg; max] channel maps."""

    def __init__(self, rng, dtype, kernel: int = 7):
        super().__init__()
        self.add_module("conv", Conv2d(2, 1, kernel, rng, dtype, padding=kernel // 2, bias=False))

    def forward(self, x, ctx):
        pooled = ops.concat([ops.pool(x, "channel_avg"), ops.pool(x, "channel_max")], axis=1)
        return ops.sigmoid(self.conv(pooled, ctx))


class AHAB(Module):
    """Adaptive hybrid attention block; shape preserving."""

    def __init__(self, channels: int, reduction: int, rng, dtype, eps: float = 1e-6, act: str = "relu"):
        super().__init__()
        self.eps = eps
        self.add_module("channel", ChannelAttention(channels, reduction, rng, dtype, act))
        self.add_module("spatial", SpatialAttention(rng, dtype))
        self.add_param("alpha", np.ones(1), dtype)
        self.add_param("beta", np.ones(1), dtype)

    def branches(self, x: Tensor, ctx: ForwardContext) -> Tuple[Tensor, Tensor]:
        """Gated features (F_c, F_s) before normalization."""
        return x * self.channel(x, ctx), x * self.spatial(x, ctx)

    def forward(self, x, ctx):
        f_c, f_s = self.branches(x, ctx)
        return (
            self.alpha * ops.min_max_norm(f_c, self.eps)
            + self.beta * ops.min_max_norm(f_s, self.eps)
        )


class SHSA(Module):
    """
    Single-head self-attention over the first C_p channels.

    Parameters:
        Wq, Wk: (d_qk, C_p) projections; Wv: (C_p, C_p)
        Wo: 1x1 conv C -> C with bias, applied to [attended; X_res]
    """

    def __init__(self, channels: int, partial: int, qk_dim: int, rng, dtype):
        super().__init__()
        self.channels, self.partial, self.qk_dim = channels, partial, qk_dim
        self.add_param("Wq", trunc_normal(rng, (qk_dim, partial)), dtype)
        self.add_param("Wk", trunc_normal(rng, (qk_dim, partial)), dtype)
        self.add_param("Wv", trunc_normal(rng, (partial, partial)), dtype)
        self.add_module("Wo", Conv2d(channels, channels, 1, rng, dtype, bias=True))

    def attend(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        """
        Concatenated [attended; X_res] before the output projection, plus
        the (B, N, N) attention matrix.
        """
        batch, channels, height, width = x.shape
        tokens_n = height * width
        x_att = ops.slice_axis(x, 1, 0, self.partial)
        x_res = ops.slice_axis(x, 1, self.partial, channels)

        tokens = ops.transpose(ops.reshape(x_att, (batch, self.partial, tokens_n)), (0, 2, 1))
        q = ops.linear(tokens, self.Wq)
        k = ops.linear(tokens, self.Wk)
        v = ops.linear(tokens, self.Wv)

        scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(self.qk_dim))
        attn = ops.softmax(scores, axis=-1)
        attended = ops.matmul(attn, v)
        attended = ops.reshape(ops.transpose(attended, (0, 2, 1)), (batch, self.partial, height, width))
        return ops.concat([attended, x_res], axis=1), attn

    def forward(self, x, ctx):
        joined, _ = self.attend(x)
        return self.Wo(joined, ctx)
