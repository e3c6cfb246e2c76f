"""
Parameter and FLOP Accounting

Closed-form walk over the architecture a ModelConfig describes; nothing is
instantiated and no randomness is involved. FLOPs are reported as
multiply-accumulates (MACs) per sample:

    conv:       kH * kW * (C_in / groups) * C_out * H' * W'
    linear:     d_in * d_out (per token)
    attention:  N * N * d_qk  (Q K^T)  +  N * N * C_p  (A V)

Norms, activations, pooling and elementwise ops count zero MACs.

Reference figures for the published network: 19.46 M parameters and
6.01 MFLOPs. The stage depths behind them are unpublished, so the default
depths (1, 2, 3) are not expected to match.
"""

from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import polars as pl

from rashvit import config
from rashvit.src.db.models import LAYER_SCHEMA
from rashvit.src.model.config import ModelConfig

Shape = Tuple[int, int, int]


@dataclass
class LayerInfo:
    """One row of the layer table."""
    name: str
    kind: str
    in_shape: Shape
    out_shape: Shape
    params: int
    macs: int

    def to_dict(self) -> dict:
        row = asdict(self)
        row["in_shape"] = "x".join(map(str, self.in_shape))
        row["out_shape"] = "x".join(map(str, self.out_shape))
        return row


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d_params(c_in: int, c_out: int, kernel: int, groups: int = 1, bias: bool = True) -> int:
    return kernel * kernel * (c_in // groups) * c_out + (c_out if bias else 0)


def conv2d_macs(c_in: int, c_out: int, kernel: int, h_out: int, w_out: int, groups: int = 1) -> int:
    return kernel * kernel * (c_in // groups) * c_out * h_out * w_out


class _Tracer:
    """Accumulates LayerInfo rows while walking the architecture."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.rows: List[LayerInfo] = []
        self.norm = cfg.norm == "batch"

    def conv(self, name, shape: Shape, c_out, kernel, stride=1, padding=0, groups=1, bias=True) -> Shape:
        c_in, h, w = shape
        h_out = conv_out_size(h, kernel, stride, padding)
        w_out = conv_out_size(w, kernel, stride, padding)
        out = (c_out, h_out, w_out)
        self.rows.append(LayerInfo(
            name, "conv", shape, out,
            conv2d_params(c_in, c_out, kernel, groups, bias),
            conv2d_macs(c_in, c_out, kernel, h_out, w_out, groups),
        ))
        return out

    def conv_bn(self, name, shape: Shape, c_out, kernel, stride=1, padding=0, groups=1) -> Shape:
        out = self.conv(f"{name}.conv", shape, c_out, kernel, stride, padding, groups, bias=not self.norm)
        if self.norm:
            self.rows.append(LayerInfo(f"{name}.bn", "batch_norm", out, out, 2 * c_out, 0))
        return out

    def shsa(self, name, shape: Shape, stage: int) -> Shape:
        c, h, w = shape
        n = h * w
        cp, dqk = self.cfg.partial(stage), self.cfg.qk_dim
        params = 2 * dqk * cp + cp * cp
        macs = n * cp * (2 * dqk + cp) + n * n * dqk + n * n * cp
        self.rows.append(LayerInfo(f"{name}.attention", "shsa", shape, shape, params, macs))
        self.conv(f"{name}.Wo", shape, c, 1, bias=True)
        return shape

    def ffn(self, name, shape: Shape) -> Shape:
        c = shape[0]
        hidden = self.conv_bn(f"{name}.W1", shape, c * self.cfg.ffn_expansion, 1)
        return self.conv(f"{name}.W2", hidden, c, 1, bias=True)

    def ahab(self, name, shape: Shape) -> Shape:
        c, h, w = shape
        hidden = max(1, c // self.cfg.ahab_reduction)
        # Shared MLP runs on both the avg and the max descriptor
        mlp_params = 2 * c * hidden
        self.rows.append(LayerInfo(f"{name}.channel", "channel_attention", shape, (c, 1, 1),
                                   mlp_params, 2 * mlp_params))
        self.rows.append(LayerInfo(f"{name}.spatial", "spatial_attention", shape, (1, h, w),
                                   conv2d_params(2, 1, 7, bias=False), conv2d_macs(2, 1, 7, h, w)))
        self.rows.append(LayerInfo(f"{name}.slopes", "scalars", shape, shape, 2, 0))
        return shape

    def block(self, name, shape: Shape, stage: int, with_ahab: bool) -> Shape:
        c = shape[0]
        self.conv_bn(f"{name}.dwconv", shape, c, 3, padding=1, groups=c)
        if stage > 1:
            self.shsa(f"{name}.shsa", shape, stage)
        self.ffn(f"{name}.ffn", shape)
        if with_ahab:
            self.ahab(f"{name}.ahab", shape)
        return shape

    def downsample(self, name, shape: Shape, c_out: int) -> Shape:
        with_ahab = self.cfg.use_ahab and self.cfg.ahab_placement == "block"
        c = shape[0]
        shape = self.block(f"{name}.pre", shape, 1, with_ahab)
        shape = self.conv_bn(f"{name}.reduce.expand", shape, 2 * c, 1)
        shape = self.conv_bn(f"{name}.reduce.dw", shape, 2 * c, 3, stride=2, padding=1, groups=2 * c)
        shape = self.conv_bn(f"{name}.reduce.project", shape, c_out, 1)
        return self.block(f"{name}.post", shape, 1, with_ahab)

    def network(self, input_hw: Tuple[int, int]) -> None:
        cfg = self.cfg
        shape: Shape = (cfg.in_channels, *input_hw)
        for i, (c_out, stride) in enumerate(zip(cfg.stem_channels(), cfg.stem_strides)):
            shape = self.conv_bn(f"stem.conv{i}", shape, c_out, 3, stride=stride, padding=1)
        stem_shape = shape

        for stage in (1, 2, 3):
            if stage > 1:
                shape = self.downsample(f"downsample{stage - 1}", shape, cfg.embed_dims[stage - 1])
            depth = cfg.depths[stage - 1]
            for i in range(depth):
                shape = self.block(f"stage{stage}.block{i}", shape, stage, cfg.ahab_in(depth, i))

        if cfg.use_long_skip:
            self.conv("long_skip", stem_shape, cfg.embed_dims[2], 1, bias=True)

        width = cfg.embed_dims[2]
        for i, d_out in enumerate((*cfg.head_hidden, cfg.num_classes)):
            self.rows.append(LayerInfo(f"head{i}", "linear", (width, 1, 1), (d_out, 1, 1),
                                       width * d_out + d_out, width * d_out))
            width = d_out


def trace_layers(cfg: ModelConfig, input_hw: Optional[Tuple[int, int]] = None) -> List[LayerInfo]:
    """Per-layer kind, shapes, parameter count and MACs, in forward order."""
    tracer = _Tracer(cfg)
    tracer.network(input_hw or cfg.input_hw)
    return tracer.rows


def count_params(cfg: ModelConfig) -> int:
    return sum(row.params for row in trace_layers(cfg))


def estimate_flops(cfg: ModelConfig, input_hw: Optional[Tuple[int, int]] = None) -> int:
    """MACs per sample."""
    return sum(row.macs for row in trace_layers(cfg, input_hw))


def layer_table(cfg: ModelConfig, input_hw: Optional[Tuple[int, int]] = None) -> pl.DataFrame:
    rows = [row.to_dict() for row in trace_layers(cfg, input_hw)]
    return pl.DataFrame(rows, schema=LAYER_SCHEMA)


def reference_comparison(cfg: ModelConfig) -> dict:
    """Counts of `cfg` next to the published reference figures."""
    params = count_params(cfg)
    macs = estimate_flops(cfg)
    return {
        "params": params,
        "params_m": params / 1e6,
        "mflops": macs / 1e6,
        "reference_params_m": config.REFERENCE_PARAMS_M,
        "reference_mflops": config.REFERENCE_MFLOPS,
        "depths": list(cfg.depths),
    }
