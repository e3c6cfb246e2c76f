#!/usr/bin/env python3
"""
Test: Differentiable Core

Tests the tensor ops, the tape, AdamW and the gradient checker:
- conv2d / batch_norm / pool / softmax / dropout / cross_entropy values
- backward on simple graphs
- every registered op against central differences
- a corrupted backward rule is caught and named
- AdamW recurrences

Usage:
    python rashvit/tests/test_diffcore.py
"""

import math
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import numpy as np
import pytest

from rashvit.src import model  # noqa: F401
from rashvit.src.diffcore import OptimizerState, Tape, Tensor, adamw_step, backward, ops
from rashvit.src.diffcore import gradcheck
from rashvit.src.diffcore.tensor import emit
from rashvit.src.errors import NonScalarLossError, ShapeError
from rashvit.tests.harness import banner, run_suite


def _t(values, grad: bool = False) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=grad, dtype=np.float64)


def test_conv2d():
    """Identity, window-count and depthwise shape cases."""
    banner("TEST 1: conv2d")

    rng = np.random.Generator(np.random.PCG64(0))
    x = _t(rng.standard_normal((3, 4, 5)))
    eye = _t(np.eye(3).reshape(3, 3, 1, 1))
    out = ops.conv2d(x, eye)
    assert out.shape == (3, 4, 5) and np.allclose(out.data, x.data), "1x1 identity conv"

    ones = ops.conv2d(_t(np.ones((1, 5, 5))), _t(np.ones((1, 1, 3, 3))), padding=1)
    assert ones.data[0, 2, 2] == 9.0 and ones.data[0, 0, 0] == 4.0 and ones.data[0, 0, 2] == 6.0
    print("  ✓ identity 1x1; all-ones 3x3 -> center 9, corner 4, edge 6")

    dw = ops.conv2d(_t(np.ones((128, 4, 2))), _t(np.ones((128, 1, 3, 3))), padding=1, groups=128)
    assert dw.shape == (128, 4, 2), f"depthwise shape {dw.shape}"

    # Depthwise touches each channel independently
    x2 = np.zeros((1, 3, 4, 4))
    x2[0, 1] = 1.0
    dw2 = ops.conv2d(_t(x2), _t(np.ones((3, 1, 3, 3))), padding=1, groups=3)
    assert not dw2.data[0, 0].any() and not dw2.data[0, 2].any() and dw2.data[0, 1].any()
    print("  ✓ depthwise (128,4,2) keeps shape; channels stay independent")

    with pytest.raises(ShapeError):
        ops.conv2d(_t(np.ones((1, 3, 2, 2))), _t(np.ones((1, 3, 3, 3))))


def test_batch_norm():
    """Train statistics, affine collapse, momentum-1 eval agreement, B=1."""
    banner("TEST 2: batch_norm")

    rng = np.random.Generator(np.random.PCG64(1))
    x = _t(rng.normal(3.0, 2.0, (4, 3, 5, 5)))
    gamma, beta = _t(np.ones(3)), _t(np.zeros(3))
    rm, rv = np.zeros(3), np.ones(3)
    out = ops.batch_norm(x, gamma, beta, rm, rv, training=True)
    assert np.max(np.abs(out.data.mean(axis=(0, 2, 3)))) < 1e-5
    assert np.max(np.abs(out.data.var(axis=(0, 2, 3)) - 1.0)) < 1e-5
    print("  ✓ train mode: per-channel mean 0, variance 1")

    collapsed = ops.batch_norm(x, _t(np.zeros(3)), _t([0.5, -1.0, 2.0]), np.zeros(3), np.ones(3), True)
    assert np.allclose(collapsed.data, np.array([0.5, -1.0, 2.0]).reshape(1, 3, 1, 1))
    print("  ✓ gamma = 0 -> beta broadcast")

    rm, rv = np.zeros(3), np.ones(3)
    train_out = ops.batch_norm(x, gamma, beta, rm, rv, training=True, momentum=1.0)
    eval_out = ops.batch_norm(x, gamma, beta, rm, rv, training=False, momentum=1.0)
    assert np.max(np.abs(train_out.data - eval_out.data)) < 1e-4
    print("  ✓ momentum 1: eval output matches train output")

    with pytest.raises(ShapeError):
        ops.batch_norm(_t(np.ones((1, 3, 2, 2))), gamma, beta, np.zeros(3), np.ones(3), training=True)


def test_activations_softmax():
    """relu, sigmoid and softmax values."""
    banner("TEST 3: Activations and Softmax")

    assert np.array_equal(ops.relu(_t([-3.0, 2.0])).data, [0.0, 2.0])
    s = ops.sigmoid(_t([0.0, 20.0, -20.0])).data
    assert abs(s[0] - 0.5) < 1e-15 and abs(s[1] - 1.0) < 1e-8 and abs(s[2]) < 1e-8

    assert np.allclose(ops.softmax(_t([0.0, 0.0, 0.0])).data, 1 / 3)
    assert np.allclose(ops.softmax(_t([1000.0, 1000.0])).data, 0.5)
    ref = ops.softmax(_t([1.0, 2.0, 3.0])).data
    assert np.max(np.abs(ref - [0.0900, 0.2447, 0.6652])) < 1e-4, f"softmax {ref}"
    shifted = ops.softmax(_t([101.0, 102.0, 103.0])).data
    assert np.max(np.abs(shifted - ref)) < 1e-12
    rows = ops.softmax(_t(np.random.Generator(np.random.PCG64(2)).normal(0, 30, (6, 9))), axis=1).data
    assert (rows >= 0).all() and np.max(np.abs(rows.sum(axis=1) - 1.0)) < 1e-6
    print(f"  ✓ relu/sigmoid closed forms; softmax [1,2,3] -> {np.round(ref, 4)}")


def test_pool_dropout():
    """Pool reductions and inverted dropout."""
    banner("TEST 4: Pooling and Dropout")

    const = _t(np.full((1, 3, 4, 4), 2.5))
    for kind in ops.POOL_KINDS:
        assert np.allclose(ops.pool(const, kind).data, 2.5), f"{kind} on a constant map"

    pix = _t(np.array([1.0, 5.0, 3.0]).reshape(1, 3, 1, 1))
    assert ops.pool(pix, "channel_max").data.item() == 5.0
    ramp = ops.pool(_t(np.arange(8.0).reshape(1, 2, 2, 2)), "spatial_avg").data.ravel()
    assert np.array_equal(ramp, [1.5, 5.5])
    assert ops.pool(const, "global_avg").shape == (1, 3)
    print("  ✓ constant map, channel max 5, ramp means [1.5, 5.5]")

    x = _t(np.ones(100_000))
    assert ops.dropout(x, 0.0, training=True) is x
    assert ops.dropout(x, 0.7, training=False) is x
    dropped = ops.dropout(x, 0.5, training=True, rng=3).data
    assert abs(dropped.mean() - 1.0) < 0.02 and set(np.unique(dropped)) <= {0.0, 2.0}
    assert np.array_equal(dropped, ops.dropout(x, 0.5, training=True, rng=3).data)
    print(f"  ✓ dropout p=0.5 mean {dropped.mean():.4f}, deterministic per seed")

    with pytest.raises(ValueError):
        ops.dropout(x, 1.0, training=True)


def test_cross_entropy():
    """Uniform, saturated and hand-computed losses."""
    banner("TEST 5: Cross Entropy")

    uniform = ops.cross_entropy(_t(np.zeros((3, 10))), [0, 4, 9]).item()
    assert abs(uniform - math.log(10)) < 1e-12
    sat = np.zeros((1, 5))
    sat[0, 2] = 20.0
    assert ops.cross_entropy(_t(sat), [2]).item() < 1e-8

    hand = 0.5 * (math.log(1 + math.exp(-1.0)) + math.log(1 + math.exp(-3.0)))
    got = ops.cross_entropy(_t([[1.0, 2.0], [3.0, 0.0]]), [1, 0]).item()
    assert abs(got - hand) < 1e-6, f"expected {hand}, got {got}"
    print(f"  ✓ uniform ln10, saturated < 1e-8, hand case {got:.6f}")

    with pytest.raises(ValueError):
        ops.cross_entropy(_t(np.zeros((1, 3))), [3])


def test_backward():
    """Quadratic gradient, unused parameters, non-scalar loss."""
    banner("TEST 6: Backward")

    x = _t([1.0, -2.0, 3.5], grad=True)
    theta = _t([4.0, 5.0], grad=True)
    with Tape() as tape:
        loss = (x * x).sum()
    grads = backward(loss, tape, wrt=[x, theta])
    assert np.array_equal(grads[0], 2 * x.data), "grad of sum x^2 is 2x"
    assert np.array_equal(grads[1], np.zeros(2)), "unused parameter gets zero"

    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(NonScalarLossError):
        backward(y, tape)

    with Tape() as tape:
        shared = x * x
        loss = (shared + shared * 3.0).sum()
    assert np.allclose(backward(loss, tape, wrt=[x])[0], 8 * x.data)
    print("  ✓ 2x exact, unused -> 0, fan-out accumulates, non-scalar rejected")

    outside = x * x
    assert not outside.requires_grad, "nothing is recorded outside a tape"


def test_registered_gradients():
    """Every registered op passes the finite-difference check."""
    banner("TEST 7: Gradient Check (all ops)")

    results = gradcheck.run_registered(seed=0)
    for name in ("linear", "conv2d", "batch_norm_train", "softmax", "sigmoid", "relu", "shsa", "ahab", "res_ffn"):
        assert name in results, f"{name} is not registered"
    failures = {n: e for n, e in results.items() if e >= gradcheck.tolerance_of(n)}
    assert not failures, f"gradient check failures: {failures}"
    assert results["linear"] < 1e-9
    print(f"  ✓ {len(results)} ops pass; worst {max(results.values()):.2e}")

    for seed in range(1, 5):
        more = gradcheck.run_registered(["conv2d", "softmax", "batch_norm_train"], seed=seed)
        assert all(e < 1e-6 for e in more.values()), f"seed {seed}: {more}"
    print("  ✓ conv2d/softmax/batch_norm pass for 4 more seeds")


def test_corrupted_rule_detected():
    """A wrong backward rule fails the check, named by its case."""
    banner("TEST 8: Corrupted Rule")

    def bad_square(x):
        return emit("bad_square", (x,), x.data ** 2, lambda g: (g * x.data,))  # should be 2x

    @gradcheck.register("corrupted_square")
    def _case(rng):
        return bad_square, (_t(rng.uniform(0.5, 1.5, 6), grad=True),)

    try:
        results = gradcheck.run_registered(["corrupted_square"])
        assert results["corrupted_square"] > 1e-2, f"corrupted rule passed: {results}"
        print(f"  ✓ corrupted_square error {results['corrupted_square']:.2e}")
    finally:
        gradcheck._REGISTRY.pop("corrupted_square", None)


def test_adamw():
    """Identity cases, decoupled decay and the constant-gradient limit."""
    banner("TEST 9: AdamW")

    p = {"w": _t([1.0, -2.0])}
    adamw_step(p, {"w": np.zeros(2)}, OptimizerState(weight_decay=0.0))
    assert np.array_equal(p["w"].data, [1.0, -2.0]), "zero grad, zero decay -> unchanged"

    frozen = OptimizerState(lr=0.0)
    adamw_step(p, {"w": np.array([3.0, 3.0])}, frozen)
    assert np.array_equal(p["w"].data, [1.0, -2.0]) and frozen.step == 1, "lr = 0 -> identity"

    state = OptimizerState(lr=0.01, weight_decay=0.1)
    for _ in range(3):
        adamw_step(p, {}, state)
    assert np.allclose(p["w"].data, np.array([1.0, -2.0]) * (1 - 0.001) ** 3)
    print("  ✓ zero grad fixed; lr 0 identity; decay shrinks by (1 - lr*wd) per step")

    q = {"w": _t([0.0])}
    state = OptimizerState(lr=1e-3, weight_decay=0.0)
    before = 0.0
    for _ in range(200):
        before = float(q["w"].data[0])
        adamw_step(q, {"w": np.array([0.37])}, state)
    step = before - float(q["w"].data[0])
    assert abs(step - 1e-3) < 1e-6, f"step magnitude {step}"
    assert state.step == 200 and state.m["w"].shape == (1,)
    print(f"  ✓ constant gradient: step -> lr ({step:.6e})")

    with pytest.raises(ShapeError):
        adamw_step(q, {"w": np.zeros(3)}, state)


def main():
    return run_suite(
        "DIFFERENTIABLE CORE TEST SUITE",
        [
            test_conv2d,
            test_batch_norm,
            test_activations_softmax,
            test_pool_dropout,
            test_cross_entropy,
            test_backward,
            test_registered_gradients,
            test_corrupted_rule_detected,
            test_adamw,
        ],
    )


if __name__ == "__main__":
    sys.exit(main())
