"""
Module-level gradient checks

Registers the network modules (SHSA, AHAB, Res-FFN, a stage-2 block and the
whole gradcheck-sized network) with the finite-difference registry, next
to the single-op cases. All run in float64 with sigmoid hidden activations
so no relu kink sits inside a finite-difference step.
"""

import numpy as np

from rashvit.src.diffcore.gradcheck import register
from rashvit.src.diffcore.tensor import Tensor
from rashvit.src.model.attention import AHAB, SHSA
from rashvit.src.model.blocks import RAShViTBlock, ResFFN
from rashvit.src.model.config import ModelConfig
from rashvit.src.model.layers import ForwardContext, Module
from rashvit.src.model.network import RAShViTNet

_TRAIN = ForwardContext(training=True)


def _module_case(module: Module, rng: np.random.Generator, shape):
    """(fn, inputs) differentiating w.r.t. the input map and every parameter."""
    x = Tensor(rng.standard_normal(shape), requires_grad=True, dtype=np.float64)
    params = [t for _, t in module.named_parameters()]
    for tensor in params:
        # Move off symmetric inits (zeros / ones) so every path is exercised
        tensor.data = tensor.data + 0.1 * rng.standard_normal(tensor.shape)

    def fn(x_, *_):
        return module(x_, _TRAIN)

    return fn, (x, *params)


@register("shsa")
def _shsa_case(rng):
    return _module_case(SHSA(8, 3, 4, rng, np.float64), rng, (2, 8, 2, 3))


@register("ahab")
def _ahab_case(rng):
    return _module_case(AHAB(6, 2, rng, np.float64, eps=1e-6, act="sigmoid"), rng, (2, 6, 3, 3))


@register("res_ffn")
def _ffn_case(rng):
    cfg = ModelConfig.gradcheck()
    return _module_case(ResFFN(4, cfg, rng, np.float64), rng, (2, 4, 3, 2))


@register("block_stage2")
def _block_case(rng):
    cfg = ModelConfig.gradcheck()
    block = RAShViTBlock(12, 2, cfg, rng, np.float64, with_ahab=True)
    return _module_case(block, rng, (2, 12, 2, 2))


@register("full_model", tolerance=1e-5, max_coords=6)
def _model_case(rng):
    net = RAShViTNet(ModelConfig.gradcheck(), seed=int(rng.integers(0, 2 ** 31)), dtype=np.float64)
    return _module_case(net, rng, (2, 2, 8, 8))
