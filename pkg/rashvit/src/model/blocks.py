"""
Network Blocks

    PatchEmbed        four 3x3 convs (stride configurable), E/8 -> E/4 -> E/2 -> E
    ResFFN            1x1 expand -> norm -> act -> drop -> 1x1 project -> drop (+ X)
    RAShViTBlock      DWConv residual, SHSA residual (stages 2-3), ResFFN, AHAB
    InvertedResidual  1x1 expand x2 -> 3x3 depthwise stride 2 -> 1x1 project
    Downsample        block(C_i) -> InvertedResidual -> block(C_{i+1})
    Stage             L blocks at one width
"""

from typing import List

from rashvit.src.diffcore.tensor import Tensor
from rashvit.src.errors import ConfigError, ShapeError
from rashvit.src.model.attention import AHAB, SHSA
from rashvit.src.model.config import ModelConfig
from rashvit.src.model.layers import Conv2d, ConvBN, Dropout, ForwardContext, Module


def _norm_kwargs(cfg: ModelConfig) -> dict:
    return {"norm": cfg.norm, "momentum": cfg.bn_momentum, "eps": cfg.bn_eps}


class PatchEmbed(Module):
    def __init__(self, cfg: ModelConfig, rng, dtype):
        super().__init__()
        c_in = cfg.in_channels
        for i, (c_out, stride) in enumerate(zip(cfg.stem_channels(), cfg.stem_strides)):
            self.add_module(f"conv{i}", ConvBN(c_in, c_out, 3, rng, dtype, stride=stride, padding=1,
                                               act=cfg.activation, **_norm_kwargs(cfg)))
            c_in = c_out

    def forward(self, x, ctx):
        if x.shape[1] != self.conv0.conv.weight.shape[1]:
            raise ShapeError(f"stem expects {self.conv0.conv.weight.shape[1]} input channels, got {x.shape[1]}")
        for i in range(4):
            x = getattr(self, f"conv{i}")(x, ctx)
        return x


class ResFFN(Module):
    """Pointwise feed-forward; residual=False gives the plain-FFN ablation."""

    def __init__(self, channels: int, cfg: ModelConfig, rng, dtype, residual: bool = True):
        super().__init__()
        self.residual = residual
        hidden = channels * cfg.ffn_expansion
        self.add_module("W1", ConvBN(channels, hidden, 1, rng, dtype, act=cfg.activation, **_norm_kwargs(cfg)))
        self.add_module("drop1", Dropout(cfg.dropout_p))
        self.add_module("W2", Conv2d(hidden, channels, 1, rng, dtype, bias=True))
        self.add_module("drop2", Dropout(cfg.dropout_p))

    def forward(self, x, ctx):
        y = self.drop2(self.W2(self.drop1(self.W1(x, ctx), ctx), ctx), ctx)
        return x + y if self.residual else y


class RAShViTBlock(Module):
    """
    X1 = X + DWConv(X)
    X2 = X1 + SHSA(X1)            (stages 2 and 3)
    X3 = FFN(X2)
    Y  = AHAB(X3) + X  if the block carries an AHAB, else X3
    """

    def __init__(self, channels: int, stage: int, cfg: ModelConfig, rng, dtype, with_ahab: bool):
        super().__init__()
        if stage not in (1, 2, 3):
            raise ConfigError(f"stage must be 1, 2 or 3, got {stage}")
        self.stage = stage
        self.add_module("dwconv", ConvBN(channels, channels, 3, rng, dtype, padding=1, groups=channels,
                                         **_norm_kwargs(cfg)))
        self.shsa = None
        if stage > 1:
            partial = cfg.partial(stage)
            self.add_module("shsa", SHSA(channels, partial, cfg.qk_dim, rng, dtype))
        self.add_module("ffn", ResFFN(channels, cfg, rng, dtype, residual=cfg.use_res_ffn))
        self.ahab = None
        if with_ahab:
            self.add_module("ahab", AHAB(channels, cfg.ahab_reduction, rng, dtype, cfg.ahab_eps, cfg.activation))

    def forward(self, x, ctx):
        x1 = x + self.dwconv(x, ctx)
        x2 = x1 + self.shsa(x1, ctx) if self.shsa is not None else x1
        x3 = self.ffn(x2, ctx)
        if self.ahab is None:
            return x3
        return self.ahab(x3, ctx) + x


class InvertedResidual(Module):
    def __init__(self, c_in: int, c_out: int, cfg: ModelConfig, rng, dtype, expansion: int = 2):
        super().__init__()
        hidden = c_in * expansion
        kw = _norm_kwargs(cfg)
        self.add_module("expand", ConvBN(c_in, hidden, 1, rng, dtype, act=cfg.activation, **kw))
        self.add_module("dw", ConvBN(hidden, hidden, 3, rng, dtype, stride=2, padding=1, groups=hidden,
                                     act=cfg.activation, **kw))
        self.add_module("project", ConvBN(hidden, c_out, 1, rng, dtype, **kw))

    def forward(self, x, ctx):
        return self.project(self.dw(self.expand(x, ctx), ctx), ctx)


class Downsample(Module):
    """Halves H and W (ceiling, minimum 1) and moves C_i -> C_{i+1}."""

    def __init__(self, c_in: int, c_out: int, cfg: ModelConfig, rng, dtype):
        super().__init__()
        with_ahab = cfg.use_ahab and cfg.ahab_placement == "block"
        self.add_module("pre", RAShViTBlock(c_in, 1, cfg, rng, dtype, with_ahab))
        self.add_module("reduce", InvertedResidual(c_in, c_out, cfg, rng, dtype))
        self.add_module("post", RAShViTBlock(c_out, 1, cfg, rng, dtype, with_ahab))

    def forward(self, x, ctx):
        return self.post(self.reduce(self.pre(x, ctx), ctx), ctx)


class Stage(Module):
    def __init__(self, stage: int, cfg: ModelConfig, rng, dtype):
        super().__init__()
        depth = cfg.depths[stage - 1]
        channels = cfg.embed_dims[stage - 1]
        self.blocks: List[RAShViTBlock] = []
        for i in range(depth):
            block = RAShViTBlock(channels, stage, cfg, rng, dtype, cfg.ahab_in(depth, i))
            self.blocks.append(self.add_module(f"block{i}", block))

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        for block in self.blocks:
            x = block(x, ctx)
        return x
