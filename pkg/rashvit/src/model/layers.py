"""
Module System and Basic Layers

A small Module tree in the usual style: modules own named parameters
(Tensors with requires_grad), buffers (plain arrays such as batch-norm
running statistics) and child modules. Parameter paths are dotted,
e.g. "stage2.block0.shsa.Wq".

Every forward takes a ForwardContext carrying the mode (train / eval) and
the dropout generator, so a pass is deterministic given its inputs.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from rashvit.src.diffcore import ops
from rashvit.src.diffcore.tensor import Tensor


@dataclass
class ForwardContext:
    """Mode and randomness for one forward pass."""
    training: bool = False
    rng: Optional[np.random.Generator] = None

    @classmethod
    def eval(cls) -> "ForwardContext":
        return cls(training=False)

    @classmethod
    def train(cls, seed: int) -> "ForwardContext":
        return cls(training=True, rng=np.random.Generator(np.random.PCG64(seed)))


# =============================================================================
# INITIALIZATION
# =============================================================================

def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) resampled until every entry lies within two std."""
    values = rng.standard_normal(shape) * std
    outside = np.abs(values) > 2 * std
    while outside.any():
        values[outside] = rng.standard_normal(int(outside.sum())) * std
        outside = np.abs(values) > 2 * std
    return values


def fan_out_normal(rng: np.random.Generator, shape, groups: int = 1) -> np.ndarray:
    """He-normal scaled by fan-out: std = sqrt(2 / (k*k*C_out/groups))."""
    c_out, _, kh, kw = shape
    return rng.standard_normal(shape) * np.sqrt(2.0 * groups / (kh * kw * c_out))


# =============================================================================
# MODULE BASE
# =============================================================================

class Module:
    """Container of parameters, buffers and children."""

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._buffers: Dict[str, np.ndarray] = {}
        self._children: Dict[str, "Module"] = {}

    def add_param(self, name: str, data: np.ndarray, dtype) -> Tensor:
        tensor = Tensor(np.asarray(data, dtype=dtype), requires_grad=True, name=name)
        self._params[name] = tensor
        setattr(self, name, tensor)
        return tensor

    def add_buffer(self, name: str, data: np.ndarray, dtype) -> np.ndarray:
        array = np.array(data, dtype=dtype)
        self._buffers[name] = array
        setattr(self, name, array)
        return array

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        setattr(self, name, module)
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield prefix + name, tensor
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, array in self._buffers.items():
            yield prefix + name, array
        for name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix.rstrip("."), self
        for name, child in self._children.items():
            yield from child.named_modules(f"{prefix}{name}.")

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def buffers(self) -> Dict[str, np.ndarray]:
        return dict(self.named_buffers())

    def num_parameters(self) -> int:
        return sum(t.size for _, t in self.named_parameters())

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor, ctx: Optional[ForwardContext] = None) -> Tensor:
        return self.forward(x, ctx or ForwardContext())


# =============================================================================
# LAYERS
# =============================================================================

class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, dtype,
                 stride: int = 1, padding: int = 0, groups: int = 1, bias: bool = True):
        super().__init__()
        self.stride, self.padding, self.groups = stride, padding, groups
        shape = (c_out, c_in // groups, kernel, kernel)
        self.add_param("weight", fan_out_normal(rng, shape, groups), dtype)
        self.bias = self.add_param("bias", np.zeros(c_out), dtype) if bias else None

    def forward(self, x, ctx):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class BatchNorm2d(Module):
    def __init__(self, channels: int, dtype, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.add_param("weight", np.ones(channels), dtype)
        self.add_param("bias", np.zeros(channels), dtype)
        self.add_buffer("running_mean", np.zeros(channels), dtype)
        self.add_buffer("running_var", np.ones(channels), dtype)

    def forward(self, x, ctx):
        return ops.batch_norm(
            x, self.weight, self.bias, self.running_mean, self.running_var,
            ctx.training, self.momentum, self.eps,
        )


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype, bias: bool = True):
        super().__init__()
        self.add_param("weight", trunc_normal(rng, (d_out, d_in)), dtype)
        self.bias = self.add_param("bias", np.zeros(d_out), dtype) if bias else None

    def forward(self, x, ctx):
        return ops.linear(x, self.weight, self.bias)


class Dropout(Module):
    def __init__(self, p: float):
        super().__init__()
        self.p = p

    def forward(self, x, ctx):
        return ops.dropout(x, self.p, ctx.training, ctx.rng)


class ConvBN(Module):
    """
    Conv -> (batch norm) -> (activation).

    With norm "none" the conv carries its own bias instead of the norm.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int, rng, dtype, *,
                 stride: int = 1, padding: int = 0, groups: int = 1,
                 norm: str = "batch", act: Optional[str] = None,
                 momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        use_norm = norm == "batch"
        self.add_module("conv", Conv2d(c_in, c_out, kernel, rng, dtype, stride, padding, groups,
                                       bias=not use_norm))
        self.bn = self.add_module("bn", BatchNorm2d(c_out, dtype, momentum, eps)) if use_norm else None
        self.act = ops.activation(act) if act else None

    def forward(self, x, ctx):
        y = self.conv(x, ctx)
        if self.bn is not None:
            y = self.bn(y, ctx)
        if self.act is not None:
            y = self.act(y)
        return y
