"""
Model Package

RAShViTNet and its building blocks, architecture accounting and the
checkpoint format.
"""

from rashvit.src.model.config import ModelConfig, partial_channels
from rashvit.src.model.layers import ForwardContext, Module
from rashvit.src.model.attention import AHAB, SHSA, ChannelAttention, SpatialAttention
from rashvit.src.model.blocks import Downsample, PatchEmbed, RAShViTBlock, ResFFN
from rashvit.src.model.network import RAShViTNet
from rashvit.src.model.accounting import count_params, estimate_flops, trace_layers
from rashvit.src.model.checkpoint import Checkpoint, load_model, save_checkpoint
from rashvit.src.model import gradcases  # noqa: F401  (registers module-level checks)

__all__ = [
    "ModelConfig",
    "partial_channels",
    "ForwardContext",
    "Module",
    "AHAB",
    "SHSA",
    "ChannelAttention",
    "SpatialAttention",
    "Downsample",
    "PatchEmbed",
    "RAShViTBlock",
    "ResFFN",
    "RAShViTNet",
    "count_params",
    "estimate_flops",
    "trace_layers",
    "Checkpoint",
    "load_model",
    "save_checkpoint",
]
