#!/usr/bin/env python3
"""
Test: RA-SHViT Model

Tests the architecture, its accounting and the checkpoint format:
- partial channel counts and config validation
- attention gates, min-max normalization, AHAB identities
- SHSA split/concat contract
- block identity, stage-1 and ablation parameter audits
- stage shape trace and logits
- closed-form parameter/MAC counts against the instantiated network
- checkpoint byte identity

Usage:
    python rashvit/tests/test_model.py
"""

import sys
import tempfile
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import numpy as np
import pytest
from pydantic import ValidationError

from rashvit.src.diffcore import Tape, Tensor, backward, ops
from rashvit.src.errors import CheckpointFormatError, ConfigError, ShapeError
from rashvit.src.model import (
    AHAB,
    SHSA,
    Checkpoint,
    ChannelAttention,
    ForwardContext,
    ModelConfig,
    RAShViTBlock,
    RAShViTNet,
    ResFFN,
    SpatialAttention,
    count_params,
    estimate_flops,
    load_model,
    save_checkpoint,
    trace_layers,
)
from rashvit.src.model.accounting import conv2d_macs, conv2d_params, layer_table
from rashvit.src.model.checkpoint import read_checkpoint, restore
from rashvit.tests.harness import banner, run_suite

EVAL = ForwardContext.eval()


def _rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _x(shape, seed: int = 0, dtype=np.float64) -> Tensor:
    return Tensor(_rng(seed).standard_normal(shape), dtype=dtype)


def _zero(module) -> None:
    for _, tensor in module.named_parameters():
        tensor.data[...] = 0.0


def test_config():
    """Partial channels and validation."""
    banner("TEST 1: ModelConfig")

    cfg = ModelConfig()
    partials = [cfg.partial(s) for s in (1, 2, 3)]
    assert partials == [27, 47, 68], f"C_p = {partials}"
    print(f"  ✓ C_p for (128, 224, 320) = {partials}")

    assert ModelConfig.cwru().num_classes == 10 and ModelConfig.pu().num_classes == 14
    with pytest.raises(ValidationError):
        ModelConfig(embed_dims=(4, 224, 320))
    with pytest.raises(ValidationError):
        ModelConfig(qk_dim=0)
    with pytest.raises(ValidationError):
        ModelConfig(unknown_key=1)
    print("  ✓ C_p < 1, d_qk < 1 and unknown keys rejected")


def test_attention_gates():
    """Channel and spatial gates."""
    banner("TEST 2: Attention Gates")

    ca = ChannelAttention(128, 8, _rng(), np.float64)
    gate = ca(_x((2, 128, 4, 2)), EVAL).data
    assert gate.shape == (2, 128, 1, 1) and ((gate > 0) & (gate < 1)).all()
    _zero(ca)
    assert np.all(ca(_x((2, 128, 4, 2)), EVAL).data == 0.5), "zero MLP -> gate 0.5"
    assert ChannelAttention(4, 8, _rng(), np.float64).hidden == 1, "reduction clamps to 1"

    ca2 = ChannelAttention(6, 2, _rng(1), np.float64)
    const = Tensor(np.full((1, 6, 3, 3), 0.7))
    expected = ops.sigmoid(ca2._mlp(Tensor(np.full((1, 6, 1, 1), 0.7)), EVAL) * 2.0).data
    assert np.allclose(ca2(const, EVAL).data, expected), "constant input: avg == max"
    print("  ✓ channel gate in (0,1); zero MLP -> 0.5; constant -> sigmoid(2 MLP(c))")

    sa = SpatialAttention(_rng(), np.float64)
    g = sa(_x((1, 128, 4, 2)), EVAL).data
    assert g.shape == (1, 1, 4, 2) and ((g > 0) & (g < 1)).all()
    assert sa(_x((3, 5, 1, 1)), EVAL).shape == (3, 1, 1, 1)
    _zero(sa)
    assert np.all(sa(_x((1, 8, 4, 2)), EVAL).data == 0.5)
    print("  ✓ spatial gate shape (1,1,4,2) in (0,1); 1x1 map; zero conv -> 0.5")


def test_min_max_norm():
    """Per-sample min-max normalization."""
    banner("TEST 3: Min-Max Norm")

    eps = 1e-6
    out = ops.min_max_norm(Tensor(np.array([1.0, 2.0, 3.0])), eps).data
    assert np.allclose(out, [0.0, 1 / (2 + eps), 2 / (2 + eps)], atol=0, rtol=1e-12)
    out = ops.min_max_norm(Tensor(np.array([-1.0, 0.0, 3.0])), eps).data
    assert np.allclose(out, [0.0, 1 / (4 + eps), 4 / (4 + eps)], atol=0, rtol=1e-12)
    assert not ops.min_max_norm(Tensor(np.full(5, 2.0)), eps).data.any()
    batch = ops.min_max_norm(_x((3, 2, 2, 2)), eps).data
    assert (batch >= 0).all() and (batch <= 1).all()
    print("  ✓ [1,2,3], [-1,0,3] closed forms; constant -> zeros; range [0,1]")


def test_ahab():
    """Slope annihilation, zero-gate identity and scale invariance."""
    banner("TEST 4: AHAB")

    f = _x((2, 16, 4, 2), seed=3)
    block = AHAB(16, 8, _rng(), np.float64)
    out = block(f, EVAL).data
    assert out.shape == f.shape and np.isfinite(out).all()

    block.alpha.data[...] = 0.0
    block.beta.data[...] = 0.0
    assert not block(f, EVAL).data.any(), "alpha = beta = 0 -> zeros"

    gated = AHAB(16, 8, _rng(), np.float64)
    _zero(gated)
    gated.alpha.data[...] = 0.75
    gated.beta.data[...] = 1.5
    expected = 2.25 * ops.min_max_norm(Tensor(0.5 * f.data), gated.eps).data
    assert np.allclose(gated(f, EVAL).data, expected, rtol=0, atol=1e-12)
    print("  ✓ shape kept; alpha=beta=0 -> 0; zero gates -> (alpha+beta) minmax(F/2)")

    exact = AHAB(16, 8, _rng(), np.float64, eps=0.0)
    _zero(exact)
    exact.alpha.data[...] = 1.0
    exact.beta.data[...] = 1.0
    base = exact(f, EVAL).data
    for c in (0.01, 3.0, 250.0):
        scaled = exact(Tensor(c * f.data), EVAL).data
        assert np.max(np.abs(scaled - base)) < 1e-12, f"scale {c} changed the output"
    print("  ✓ eps = 0: output invariant under positive rescaling of F")


def test_shsa():
    """Split/concat fidelity and degenerate token sets."""
    banner("TEST 5: SHSA")

    shsa = SHSA(12, 3, 4, _rng(), np.float64)
    x = _x((2, 12, 2, 3), seed=4)
    joined, attn = shsa.attend(x)
    assert np.array_equal(joined.data[:, 3:], x.data[:, 3:]), "X_res passes bit-exactly"
    assert (attn.data >= 0).all() and np.max(np.abs(attn.data.sum(axis=-1) - 1.0)) < 1e-6
    assert shsa(x, EVAL).shape == x.shape

    single = _x((1, 12, 1, 1), seed=5)
    joined, attn = shsa.attend(single)
    assert attn.data.shape == (1, 1, 1) and attn.data.item() == 1.0
    v = single.data[0, :3, 0, 0] @ shsa.Wv.data.T
    assert np.allclose(joined.data[0, :3, 0, 0], v, rtol=0, atol=1e-14), "single token -> V"

    same = Tensor(np.broadcast_to(_x((1, 12, 1, 1), 6).data, (1, 12, 2, 2)).copy())
    joined, attn = shsa.attend(same)
    assert np.allclose(attn.data, 0.25)
    assert np.allclose(joined.data[0, :3], joined.data[0, :3, :1, :1])
    print("  ✓ residual channels exact; rows sum to 1; single token -> V; identical tokens -> uniform")


def test_blocks():
    """Residual identities and parameter-name audits."""
    banner("TEST 6: Blocks")

    cfg = ModelConfig.tiny()
    ffn = ResFFN(48, cfg, _rng(), np.float64)
    ffn.W2.weight.data[...] = 0.0
    x = _x((1, 48, 2, 1))
    assert np.array_equal(ffn(x, EVAL).data, x.data), "zero W2 -> identity"

    off = ModelConfig.tiny(use_ahab=False)
    for stage, c in ((1, 32), (2, 48)):
        block = RAShViTBlock(c, stage, off, _rng(), np.float64, with_ahab=False)
        _zero(block)
        xb = _x((2, c, 2, 2), seed=stage)
        assert np.array_equal(block(xb, EVAL).data, xb.data), f"stage {stage} zero block is not identity"
    print("  ✓ zero W2 FFN and zero-branch blocks (AHAB off) are the identity")

    stage1 = RAShViTBlock(128, 1, ModelConfig(), _rng(), np.float32, with_ahab=True)
    names = [n for n, _ in stage1.named_parameters()]
    assert not any("shsa" in n for n in names) and any("ahab" in n for n in names)
    assert stage1(_x((1, 128, 4, 2), dtype=np.float32), EVAL).shape == (1, 128, 4, 2)

    net_names = [n for n, _ in RAShViTNet(ModelConfig.tiny(use_ahab=False)).named_parameters()]
    assert not any(".ahab." in n for n in net_names), "use_ahab=False still builds AHAB"
    assert not any(n.startswith("stage1.") and ".shsa." in n for n in net_names)
    plain = RAShViTNet(ModelConfig.tiny(use_res_ffn=False))
    assert all(not m.residual for n, m in plain.named_modules() if isinstance(m, ResFFN))
    staged = RAShViTNet(ModelConfig.tiny(depths=(2, 2, 2), ahab_placement="stage"))
    ahab_blocks = {n.rsplit(".ahab.", 1)[0] for n, _ in staged.named_parameters() if ".ahab." in n}
    assert ahab_blocks == {"stage1.block1", "stage2.block1", "stage3.block1"}, ahab_blocks
    print("  ✓ stage-1 has no SHSA; ablation flags remove AHAB / FFN residual; stage placement")

    with pytest.raises(ConfigError) as exc:
        RAShViTBlock(8, 4, cfg, _rng(), np.float64, with_ahab=False)
    assert exc.value.exit_code == 1
    print("  ✓ stage 4 rejected with ConfigError (exit code 1)")


def test_forward_shapes():
    """Stage trace and logits for both presets."""
    banner("TEST 7: Forward Shapes")

    images = _rng(7).standard_normal((2, 2, 64, 32)).astype(np.float32)
    net = RAShViTNet(ModelConfig.cwru(), seed=0)
    trace = []
    net.features(images, EVAL, trace)
    shapes = dict(trace)
    assert shapes["stem"] == (2, 128, 4, 2)
    assert shapes["stage1"] == (2, 128, 4, 2)
    assert shapes["downsample1"] == (2, 224, 2, 1)
    assert shapes["downsample2"] == (2, 320, 1, 1)
    assert shapes["stage3"] == (2, 320, 1, 1)
    for name, shape in trace:
        print(f"    {name:<12} {shape}")

    logits = net(images)
    assert logits.shape == (2, 10) and np.isfinite(logits.data).all()
    probs = net.predict_proba(images)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) < 1e-6
    assert np.array_equal(net(images).data, logits.data), "eval forward is deterministic"

    pu = RAShViTNet(ModelConfig.pu(embed_dims=(32, 48, 64), depths=(1, 1, 1)))
    assert pu(_rng(8).standard_normal((8, 2, 64, 32)).astype(np.float32)).shape == (8, 14)
    assert net.embed(images).shape == (2, 320)
    print("  ✓ CWRU logits (2, 10), PU logits (8, 14), probabilities sum to 1")

    with pytest.raises(ShapeError):
        net(np.zeros((1, 3, 64, 32), dtype=np.float32))


def test_gradient_flow():
    """Every downsample parameter receives a nonzero gradient."""
    banner("TEST 8: Gradient Flow")

    net = RAShViTNet(ModelConfig.tiny(activation="sigmoid", dropout_p=0.0), seed=1, dtype=np.float64)
    images = _rng(9).standard_normal((4, 2, 64, 32))
    params = net.parameters()
    with Tape() as tape:
        loss = ops.cross_entropy(net(Tensor(images), ForwardContext(training=True)), [0, 3, 5, 9])
    grads = dict(zip(params, backward(loss, tape, wrt=list(params.values()))))
    dead = [n for n, g in grads.items() if n.startswith("downsample") and not np.any(g)]
    assert not dead, f"zero gradient for {dead}"
    print(f"  ✓ {sum(n.startswith('downsample') for n in grads)} downsample parameters get gradient")


def test_accounting():
    """Closed-form counts against the instantiated network."""
    banner("TEST 9: Parameter / FLOP Accounting")

    assert conv2d_macs(2, 16, 3, 32, 16) == 147456
    assert conv2d_params(40, 40, 1, bias=True) == 40 * 40 + 40

    cfg = ModelConfig()
    rows = trace_layers(cfg)
    stem = sum(r.params for r in rows if r.name.startswith("stem."))
    hand = sum(co * ci * 9 + 2 * co for ci, co in ((2, 16), (16, 32), (32, 64), (64, 128)))
    assert stem == hand == 97536, f"stem params {stem} vs {hand}"

    variants = [
        cfg,
        ModelConfig.tiny(),
        ModelConfig.tiny(use_ahab=False, use_res_ffn=False),
        ModelConfig.tiny(depths=(2, 1, 2), ahab_placement="stage", head_hidden=(16,)),
        ModelConfig.gradcheck(),
        ModelConfig.tiny(use_long_skip=False, stem_strides=(2, 2, 2, 1)),
    ]
    for variant in variants:
        built = RAShViTNet(variant).num_parameters()
        assert count_params(variant) == built, f"{variant.embed_dims}/{variant.depths}: {count_params(variant)} != {built}"
    total, macs = count_params(cfg), estimate_flops(cfg)
    assert macs > 0
    table = layer_table(cfg)
    assert table["params"].sum() == total
    print(f"  ✓ stem {stem:,}; counts match {len(variants)} built networks; default {total:,} params, {macs:,} MACs")


def test_checkpoint_roundtrip():
    """Save/load is bit-identical; corrupt files are rejected."""
    banner("TEST 10: Checkpoint Format")

    net = RAShViTNet(ModelConfig.tiny(), seed=4)
    images = _rng(10).standard_normal((4, 2, 64, 32)).astype(np.float32)
    net(images, ForwardContext(training=True, rng=_rng(1)))  # move batch-norm buffers

    with tempfile.TemporaryDirectory() as tmpdir:
        path = save_checkpoint(Path(tmpdir) / "model.ckpt", net, {"epoch": 3, "val_acc": 0.5})
        blob = path.read_bytes()
        assert blob[:8] == b"RASHVIT1"
        assert read_checkpoint(path).to_bytes() == blob, "re-serialization differs"

        loaded, metadata = load_model(path)
        assert metadata == {"epoch": 3, "val_acc": 0.5}
        for name, tensor in net.named_parameters():
            assert np.array_equal(loaded.parameters()[name].data, tensor.data), name
        for name, array in net.named_buffers():
            assert np.array_equal(loaded.buffers()[name], array), name
        assert np.array_equal(loaded.predict_proba(images), net.predict_proba(images))
        print(f"  ✓ {len(blob):,} bytes round-trip bit-exactly; predictions identical")

        with pytest.raises(CheckpointFormatError):
            Checkpoint.from_bytes(b"NOTACKPT" + blob[8:])
        with pytest.raises(CheckpointFormatError):
            Checkpoint.from_bytes(blob[:-16])
        with pytest.raises(CheckpointFormatError):
            restore(RAShViTNet(ModelConfig.tiny(use_ahab=False)), read_checkpoint(path))
        print("  ✓ bad magic, truncation and mismatched architecture rejected")

    snapshot = Checkpoint.from_model(net)
    net.head[0].weight.data[...] += 1.0
    assert not np.array_equal(snapshot.tensors["head0.weight"][1], net.head[0].weight.data)
    print("  ✓ snapshots do not alias live parameters")


def main():
    return run_suite(
        "RA-SHVIT MODEL TEST SUITE",
        [
            test_config,
            test_attention_gates,
            test_min_max_norm,
            test_ahab,
            test_shsa,
            test_blocks,
            test_forward_shapes,
            test_gradient_flow,
            test_accounting,
            test_checkpoint_roundtrip,
        ],
    )


if __name__ == "__main__":
    sys.exit(main())
