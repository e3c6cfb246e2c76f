"""
RAShViTNet

    stem -> stage1 -> downsample1 -> stage2 -> downsample2 -> stage3
         -> global average pool (+ long skip from the stem) -> MLP head -> logits

The long skip projects the stem feature map to the stage-3 width with a
1x1 conv, pools it and adds it to the pooled stage-3 vector.

Example:
    >>> net = RAShViTNet(ModelConfig.cwru(), seed=0)
    >>> logits = net(images)                  # (B, 10)
    >>> probs = net.predict_proba(images)
"""

import logging
from typing import List, Optional, Tuple, Union

import numpy as np

from rashvit.src.diffcore import ops
from rashvit.src.diffcore.tensor import Tensor
from rashvit.src.errors import ShapeError
from rashvit.src.model.blocks import Downsample, PatchEmbed, Stage
from rashvit.src.model.config import ModelConfig
from rashvit.src.model.layers import Conv2d, ForwardContext, Linear, Module

logger = logging.getLogger(__name__)


class RAShViTNet(Module):
    """
    Full classifier.

    Args:
        cfg: Architecture configuration
        seed: Seed of the parameter initializer
        dtype: np.float32 for training, np.float64 for verification
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.Generator(np.random.PCG64(seed))
        dims = cfg.embed_dims

        self.add_module("stem", PatchEmbed(cfg, rng, dtype))
        self.add_module("stage1", Stage(1, cfg, rng, dtype))
        self.add_module("downsample1", Downsample(dims[0], dims[1], cfg, rng, dtype))
        self.add_module("stage2", Stage(2, cfg, rng, dtype))
        self.add_module("downsample2", Downsample(dims[1], dims[2], cfg, rng, dtype))
        self.add_module("stage3", Stage(3, cfg, rng, dtype))
        self.long_skip = None
        if cfg.use_long_skip:
            self.add_module("long_skip", Conv2d(dims[0], dims[2], 1, rng, dtype, bias=True))

        self.head: List[Linear] = []
        width = dims[2]
        for i, hidden in enumerate((*cfg.head_hidden, cfg.num_classes)):
            self.head.append(self.add_module(f"head{i}", Linear(width, hidden, rng, dtype)))
            width = hidden

        logger.debug(f"Built RAShViTNet with {self.num_parameters():,} parameters")

    def _as_input(self, images: Union[Tensor, np.ndarray]) -> Tensor:
        x = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=self.dtype))
        if x.ndim != 4:
            raise ShapeError(f"expected (B, C, H, W) images, got shape {x.shape}")
        return x

    def features(
        self,
        images: Union[Tensor, np.ndarray],
        ctx: Optional[ForwardContext] = None,
        trace: Optional[List[Tuple[str, Tuple[int, ...]]]] = None,
    ) -> Tensor:
        """
        Pooled (B, C3) feature vector feeding the head.

        If `trace` is a list, (stage name, output shape) pairs are appended.
        """
        ctx = ctx or ForwardContext()
        x = self._as_input(images)
        stem = self.stem(x, ctx)
        h = stem
        if trace is not None:
            trace.append(("stem", stem.shape))
        for name in ("stage1", "downsample1", "stage2", "downsample2", "stage3"):
            h = getattr(self, name)(h, ctx)
            if trace is not None:
                trace.append((name, h.shape))

        pooled = ops.pool(h, "global_avg")
        if self.long_skip is not None:
            pooled = pooled + ops.pool(self.long_skip(stem, ctx), "global_avg")
        return pooled

    def forward(self, x, ctx=None):
        ctx = ctx or ForwardContext()
        h = self.features(x, ctx)
        for i, layer in enumerate(self.head):
            h = layer(h, ctx)
            if i < len(self.head) - 1:
                h = ops.activation(self.cfg.activation)(h)
        return h

    def predict_proba(self, images, batch_size: int = 64) -> np.ndarray:
        """Eval-mode class probabilities, (B, num_classes)."""
        data = np.asarray(images, dtype=self.dtype)
        chunks = []
        for start in range(0, data.shape[0], batch_size):
            logits = self.forward(Tensor(data[start:start + batch_size]), ForwardContext.eval())
            chunks.append(ops.softmax(logits, axis=-1).data)
        if not chunks:
            return np.zeros((0, self.cfg.num_classes), dtype=self.dtype)
        return np.concatenate(chunks, axis=0)

    def predict(self, images, batch_size: int = 64) -> np.ndarray:
        return np.argmax(self.predict_proba(images, batch_size), axis=1)

    def embed(self, images, batch_size: int = 64) -> np.ndarray:
        """Eval-mode pooled features, (B, C3)."""
        data = np.asarray(images, dtype=self.dtype)
        chunks = [
            self.features(Tensor(data[s:s + batch_size]), ForwardContext.eval()).data
            for s in range(0, data.shape[0], batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.cfg.embed_dims[2]), dtype=self.dtype)
        return np.concatenate(chunks, axis=0)
