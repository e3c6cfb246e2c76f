"""
Finite-Difference Gradient Check

Compares tape gradients against central differences. The op output is
reduced to a scalar with a fixed random projection, so one backward pass
covers every output element:

    L(x) = sum(op(x) * P)
    error = max_i |dL/dx_i (tape) - (L(x+h e_i) - L(x-h e_i)) / 2h| / max(1, |dL/dx_i|)

Run in double precision; 1e-6 is the passing threshold for single ops.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from rashvit.src.diffcore import ops
from rashvit.src.diffcore.tensor import Tape, Tensor, backward

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-6


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = DEFAULT_STEP,
    seed: int = 0,
    max_coords: Optional[int] = None,
) -> float:
    """
    Max relative error between analytic and central-difference gradients.

    Args:
        fn: Op under test; called as fn(*inputs) and must be deterministic
        inputs: Tensors (float64); those with requires_grad are checked
        h: Finite-difference step
        seed: Seed for the output projection and coordinate sampling
        max_coords: Check at most this many coordinates per input (all if None)

    Returns:
        Max relative error over the checked coordinates
    """
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise TypeError(f"grad_check needs float64 inputs, got {tensor.dtype}")
        tensor.data = np.ascontiguousarray(tensor.data)

    checked = [t for t in inputs if t.requires_grad]
    rng = np.random.Generator(np.random.PCG64(seed))
    projection = rng.standard_normal(fn(*inputs).shape)

    def objective() -> float:
        return float(np.sum(fn(*inputs).data * projection))

    with Tape() as tape:
        loss = ops.sum(ops.mul(fn(*inputs), Tensor(projection)))
    analytic = backward(loss, tape, wrt=checked)

    worst = 0.0
    for tensor, grad in zip(checked, analytic):
        flat = tensor.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            original = flat[i]
            flat[i] = original + h
            plus = objective()
            flat[i] = original - h
            minus = objective()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            a = float(flat_grad[i])
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst


# =============================================================================
# CHECK REGISTRY
# =============================================================================

@dataclass
class GradCheckCase:
    """One registered check: build() returns (fn, inputs)."""
    name: str
    build: Callable[[np.random.Generator], tuple]
    tolerance: float = DEFAULT_TOLERANCE
    max_coords: Optional[int] = None


_REGISTRY: Dict[str, GradCheckCase] = {}


def register(name: str, tolerance: float = DEFAULT_TOLERANCE, max_coords: Optional[int] = None):
    """Decorator adding a case builder to the registry."""
    def wrap(build):
        _REGISTRY[name] = GradCheckCase(name, build, tolerance, max_coords)
        return build
    return wrap


def registered_cases() -> List[GradCheckCase]:
    return [_REGISTRY[name] for name in sorted(_REGISTRY)]


def _param(rng: np.random.Generator, *shape, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True, dtype=np.float64)


@register("linear", tolerance=1e-9)
def _linear_case(rng):
    x, w, b = _param(rng, 3, 4), _param(rng, 5, 4), _param(rng, 5)
    return ops.linear, (x, w, b)


@register("matmul")
def _matmul_case(rng):
    return ops.matmul, (_param(rng, 2, 3, 4), _param(rng, 2, 4, 3))


@register("conv2d")
def _conv_case(rng):
    x, w, b = _param(rng, 2, 4, 5, 5), _param(rng, 6, 2, 3, 3), _param(rng, 6)
    return (lambda x_, w_, b_: ops.conv2d(x_, w_, b_, stride=2, padding=1, groups=2)), (x, w, b)


@register("conv2d_depthwise")
def _dwconv_case(rng):
    x, w = _param(rng, 2, 3, 4, 3), _param(rng, 3, 1, 3, 3)
    return (lambda x_, w_: ops.conv2d(x_, w_, None, stride=1, padding=1, groups=3)), (x, w)


@register("conv2d_pointwise")
def _pwconv_case(rng):
    x, w, b = _param(rng, 2, 4, 3, 2), _param(rng, 5, 4, 1, 1), _param(rng, 5)
    return (lambda x_, w_, b_: ops.conv2d(x_, w_, b_)), (x, w, b)


@register("batch_norm_train")
def _bn_case(rng):
    x, gamma, beta = _param(rng, 3, 2, 3, 2), _param(rng, 2), _param(rng, 2)

    def fn(x_, g_, b_):
        return ops.batch_norm(x_, g_, b_, np.zeros(2), np.ones(2), training=True)

    return fn, (x, gamma, beta)


@register("batch_norm_eval")
def _bn_eval_case(rng):
    x, gamma, beta = _param(rng, 2, 3, 2, 2), _param(rng, 3), _param(rng, 3)
    mean, var = rng.uniform(-0.5, 0.5, 3), rng.uniform(0.5, 2.0, 3)

    def fn(x_, g_, b_):
        return ops.batch_norm(x_, g_, b_, mean.copy(), var.copy(), training=False)

    return fn, (x, gamma, beta)


@register("softmax")
def _softmax_case(rng):
    return (lambda x_: ops.softmax(x_, axis=-1)), (_param(rng, 3, 5, low=-3, high=3),)


@register("sigmoid")
def _sigmoid_case(rng):
    return ops.sigmoid, (_param(rng, 4, 5, low=-4, high=4),)


@register("relu")
def _relu_case(rng):
    # Keep inputs away from the kink at 0
    magnitude = rng.uniform(0.1 + 1e-3, 2.0, size=(4, 5))
    sign = np.where(rng.random((4, 5)) < 0.5, -1.0, 1.0)
    return ops.relu, (Tensor(magnitude * sign, requires_grad=True, dtype=np.float64),)


@register("pooling")
def _pool_case(rng):
    x = _param(rng, 2, 3, 3, 2)

    def fn(x_):
        parts = [ops.reshape(ops.pool(x_, kind), (2, -1)) for kind in ops.POOL_KINDS]
        return ops.concat(parts, axis=1)

    return fn, (x,)


@register("min_max_norm")
def _mmn_case(rng):
    return ops.min_max_norm, (_param(rng, 2, 3, 2, 2),)


@register("cross_entropy")
def _ce_case(rng):
    labels = rng.integers(0, 4, size=5)
    return (lambda z: ops.cross_entropy(z, labels)), (_param(rng, 5, 4, low=-2, high=2),)


@register("dropout_train")
def _dropout_case(rng):
    return (lambda x_: ops.dropout(x_, 0.3, training=True, rng=7)), (_param(rng, 4, 6),)


@register("shape_ops")
def _shape_case(rng):
    a, b = _param(rng, 2, 3, 4), _param(rng, 2, 2, 4)

    def fn(a_, b_):
        joined = ops.concat([a_, b_], axis=1)
        moved = ops.transpose(joined, (0, 2, 1))
        cut = ops.slice_axis(moved, 2, 1, 4)
        total = a_.sum()
        return ops.div(ops.mean(cut * cut, axis=0) - cut.sum(axis=0), 3.0 + total * total)

    return fn, (a, b)


def run_registered(
    names: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """Run registered checks (all by default); returns name -> max error."""
    results: Dict[str, float] = {}
    for case in registered_cases():
        if names and case.name not in names:
            continue
        rng = np.random.Generator(np.random.PCG64(seed))
        fn, inputs = case.build(rng)
        error = grad_check(fn, inputs, seed=seed, max_coords=case.max_coords)
        results[case.name] = error
        level = logging.INFO if error < case.tolerance else logging.ERROR
        logger.log(level, f"gradcheck {case.name}: max rel error {error:.3e} (tol {case.tolerance:.0e})")
    return results


def tolerance_of(name: str) -> float:
    return _REGISTRY[name].tolerance
