"""
Model Configuration

ModelConfig fully determines the parameter set of a RAShViTNet. It is
serialized into every checkpoint header and run record.
"""

import math
from typing import Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def partial_channels(channels: int, ratio: float) -> int:
    """C_p = floor(r * C); the tiny offset absorbs float error on exact products."""
    return int(math.floor(ratio * channels + 1e-9))


class ModelConfig(BaseModel):
    """Architecture hyperparameters and ablation switches."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    embed_dims: Tuple[int, int, int] = Field(default=(128, 224, 320), description="Channels of stages 1-3")
    depths: Tuple[int, int, int] = Field(default=(1, 2, 3), description="Blocks per stage (L1, L2, L3)")
    partial_ratio: float = Field(default=1 / 4.67, gt=0.0, lt=1.0, description="SHSA partial channel ratio r")
    qk_dim: int = Field(default=16, ge=1, description="Query/key dimension d_qk")
    ffn_expansion: int = Field(default=2, ge=1, description="Res-FFN hidden expansion")
    num_classes: int = Field(default=10, ge=2, description="Number of output classes")
    in_channels: int = Field(default=2, ge=1, description="Input image channels")
    input_hw: Tuple[int, int] = Field(default=(64, 32), description="Input image height, width")
    dropout_p: float = Field(default=0.1, ge=0.0, lt=1.0, description="Dropout probability")

    use_ahab: bool = Field(default=True, description="Include the hybrid attention block")
    use_res_ffn: bool = Field(default=True, description="Residual FFN (False = plain FFN)")
    use_long_skip: bool = Field(default=True, description="Stem-to-head long skip connection")
    ahab_placement: Literal["block", "stage"] = Field(
        default="block", description="AHAB in every block, or only the last block of each stage"
    )
    ahab_reduction: int = Field(default=8, ge=1, description="Channel-attention MLP reduction ratio")
    ahab_eps: float = Field(default=1e-6, ge=0.0, description="Min-max normalization epsilon")

    stem_strides: Tuple[int, int, int, int] = Field(default=(2, 2, 2, 2), description="Strides of the stem convs")
    norm: Literal["batch", "none"] = Field(default="batch", description="Intra-block normalization")
    activation: Literal["relu", "sigmoid"] = Field(default="relu", description="Hidden activation")
    bn_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    bn_eps: float = Field(default=1e-5, gt=0.0)
    head_hidden: Tuple[int, ...] = Field(default=(), description="Hidden widths of the MLP head")

    @field_validator("embed_dims", "depths", "input_hw", "stem_strides", "head_hidden")
    @classmethod
    def _positive(cls, value):
        if any(v < 1 for v in value):
            raise ValueError(f"all entries must be >= 1, got {value}")
        return value

    @model_validator(mode="after")
    def _partial_channels_nonempty(self):
        for stage, channels in enumerate(self.embed_dims, start=1):
            if partial_channels(channels, self.partial_ratio) < 1:
                raise ValueError(
                    f"stage {stage}: floor({self.partial_ratio:.4f} * {channels}) < 1 partial channels"
                )
        return self

    # ------------------------------------------------------------------
    # derived quantities
    # ------------------------------------------------------------------

    def partial(self, stage: int) -> int:
        """SHSA attention channels C_p for a stage (1-based)."""
        return partial_channels(self.embed_dims[stage - 1], self.partial_ratio)

    def stem_channels(self) -> Tuple[int, int, int, int]:
        """E/8, E/4, E/2, E for E = embed_dims[0]."""
        e = self.embed_dims[0]
        return (max(1, e // 8), max(1, e // 4), max(1, e // 2), e)

    def ahab_in(self, stage_depth: int, index: int) -> bool:
        """Whether block `index` of a stage with `stage_depth` blocks carries an AHAB."""
        if not self.use_ahab:
            return False
        return self.ahab_placement == "block" or index == stage_depth - 1

    # ------------------------------------------------------------------
    # presets
    # ------------------------------------------------------------------

    @classmethod
    def cwru(cls, **overrides) -> "ModelConfig":
        return cls(**{"num_classes": 10, **overrides})

    @classmethod
    def pu(cls, **overrides) -> "ModelConfig":
        return cls(**{"num_classes": 14, **overrides})

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Desk-scale variant used by quick experiments."""
        return cls(**{"embed_dims": (32, 48, 64), "depths": (1, 1, 1), **overrides})

    @classmethod
    def gradcheck(cls, **overrides) -> "ModelConfig":
        """Smallest config exercising every module; 8x8 input, kink-free activations."""
        base = {
            "embed_dims": (8, 12, 16),
            "depths": (1, 1, 1),
            "input_hw": (8, 8),
            "stem_strides": (1, 1, 1, 1),
            "num_classes": 3,
            "dropout_p": 0.0,
            "activation": "sigmoid",
        }
        return cls(**{**base, **overrides})
