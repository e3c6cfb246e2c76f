#!/usr/bin/env python3
"""
Test: Command-Line Interface

Drives main() in-process and checks exit codes and artifacts:
- synth archives are reproducible and malformed specs are named
- train / eval / sweep / export on a tiny synthetic config
- error taxonomy: usage 1, data 2, numeric 3

Usage:
    python rashvit/tests/test_cli.py
"""

import json
import sys
import tempfile
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import polars as pl
import pytest

from rashvit.main import _attach_signed_values, main
from rashvit.src.datasets import load_archive
from rashvit.src.diffcore import gradcheck
from rashvit.src.diffcore.tensor import Tensor, emit
from rashvit.tests.harness import banner, run_suite


def _write_config(root: Path, **train) -> Path:
    doc = {
        "model": {"embed_dims": [32, 48, 64], "depths": [1, 1, 1], "num_classes": 3},
        "train": {"epochs": 1, "batch_size": 4, **train},
        "data": {
            "synth": {"num_classes": 3, "segments_per_class": 8, "seed": 0},
            "split": {"ratios": [0.5, 0.25, 0.25], "seed": 0},
        },
        "out_dir": str(root / "run"),
    }
    path = root / "run.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_synth():
    """Archives load back; a repeated seed gives identical bytes."""
    banner("TEST 1: synth")

    with tempfile.TemporaryDirectory() as tmpdir:
        root = Path(tmpdir)
        spec = root / "spec.json"
        spec.write_text(json.dumps({"num_classes": 4, "segments_per_class": 3}), encoding="utf-8")

        assert main(["synth", "--spec", str(spec), "--out", str(root / "a"), "--seed", "5"]) == 0
        assert main(["synth", "--spec", str(spec), "--out", str(root / "b"), "--seed", "5"]) == 0
        ds = load_archive(root / "a")
        assert len(ds) == 12 and ds.num_classes == 4
        for name in ["manifest.json"] + [f"class_{k:02d}.f32" for k in range(4)]:
            assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes(), name
        print("  ✓ 4-class archive written, loadable and byte-identical for seed 5")

        spec.write_text(json.dumps({"num_classes": 4, "segment_per_class": 3}), encoding="utf-8")
        assert main(["synth", "--spec", str(spec), "--out", str(root / "c")]) == 1
        spec.write_text("{not json", encoding="utf-8")
        assert main(["synth", "--spec", str(spec), "--out", str(root / "c")]) == 1
        print("  ✓ unknown key and malformed JSON exit 1")


def test_usage_errors():
    """argparse failures exit 1, not argparse's default 2."""
    banner("TEST 2: Usage Errors")

    for argv in ([], ["frobnicate"], ["train"], ["eval", "--checkpoint", "x.ckpt"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1, f"{argv} exited {exc.value.code}"
    print("  ✓ missing command, unknown command and missing required flags exit 1")

    with tempfile.TemporaryDirectory() as tmpdir:
        # spaced negative grid parses; the run then stops on the missing data source
        assert main(["sweep", "--snrs", "-10:2:10", "--out", tmpdir]) == 1
        assert main(["sweep", "--snrs=-10:2:10", "--out", tmpdir]) == 1
    assert _attach_signed_values(["sweep", "--snrs", "-10:2:10", "--seeds", "0"]) == [
        "sweep", "--snrs=-10:2:10", "--seeds", "0",
    ]
    assert _attach_signed_values(["eval", "--snr", "clean", "--snrs", "--out"]) == [
        "eval", "--snr", "clean", "--snrs", "--out",
    ]
    print("  ✓ --snrs -10:2:10 accepted like --snrs=-10:2:10")


def test_data_errors():
    """Missing files map to exit 2."""
    banner("TEST 3: Data Errors")

    with tempfile.TemporaryDirectory() as tmpdir:
        root = Path(tmpdir)
        assert main(["train", "--config", str(root / "absent.json")]) == 2
        assert main(["synth", "--spec", str(root / "absent_spec.json"), "--out", str(root / "s")]) == 2
        assert not (root / "s").exists()

        doc = json.loads(_write_config(root).read_text())
        doc["data"] = {"archive": str(root / "nowhere" / "manifest.json")}
        (root / "bad.json").write_text(json.dumps(doc), encoding="utf-8")
        assert main(["train", "--config", str(root / "bad.json"), "--db", str(root / "r.duckdb")]) == 2
        assert main(["ingest", "--files", f"{root / 'gone.f32'}:0", "--out", str(root / "m.json")]) == 2
        assert main(["ingest", "--files", "nolabel.f32", "--out", str(root / "m.json")]) == 1
    print("  ✓ missing config, synth spec, archive and recording exit 2; bad --files exits 1")


def test_gradcheck():
    """Exit 0 on passing ops, 3 on a failing one, 1 on an unknown name."""
    banner("TEST 4: gradcheck")

    assert main(["gradcheck", "--ops", "linear,softmax,sigmoid"]) == 0
    assert main(["gradcheck", "--ops", "no_such_op"]) == 1

    @gradcheck.register("cli_corrupted_square")
    def _case(rng):
        def bad_square(x):
            return emit("bad_square", (x,), x.data ** 2, lambda g: (g * x.data,))
        return bad_square, (Tensor(rng.uniform(0.5, 1.5, 4), requires_grad=True),)

    try:
        assert main(["gradcheck", "--ops", "cli_corrupted_square"]) == 3
    finally:
        gradcheck._REGISTRY.pop("cli_corrupted_square", None)
    print("  ✓ passing ops 0, unknown op 1, corrupted rule 3")


def test_info():
    """Accounting report and JSON dump."""
    banner("TEST 5: info")

    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir) / "info.json"
        assert main(["info", "--preset", "tiny", "--layers", "--json", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["params"] > 0 and doc["config"]["embed_dims"] == [32, 48, 64]
        assert sum(row["params"] for row in doc["layers"]) == doc["params"]
    print(f"  ✓ tiny preset: {doc['params']:,} parameters, layer rows sum to the total")

    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir) / "trace.json"
        assert main(["info", "--preset", "tiny", "--trace", "--dataset", "pu6", "--json", str(out)]) == 0
        doc = json.loads(out.read_text())
        kinds = [row["kind"] for row in doc["layers"]]
        ahabs, attns = kinds.count("spatial_attention"), kinds.count("shsa")
        # each AHAB: two channel-MLP passes of two 1x1 convs plus the spatial conv
        assert doc["ops"]["conv2d"] == kinds.count("conv") + 5 * ahabs, doc["ops"]
        assert doc["ops"]["linear"] == kinds.count("linear") + 3 * attns
        assert doc["ops"]["softmax"] == attns and "cross_entropy" not in doc["ops"]
        assert [c["code"] for c in doc["dataset"]["classes"]] == ["K001", "KA01", "KA03", "KA07", "KI01", "KI03"]
    print(f"  ✓ --trace counts {doc['ops']['conv2d']} conv2d ops; --dataset pu6 lists the six states")


def test_train_eval_sweep_export():
    """End-to-end pipeline on a tiny synthetic config."""
    banner("TEST 6: train / eval / sweep / export")

    with tempfile.TemporaryDirectory() as tmpdir:
        root = Path(tmpdir)
        cfg = _write_config(root)
        db = str(root / "results.duckdb")
        run_dir = root / "run"

        assert main(["train", "--config", str(cfg), "--db", db]) == 0
        for name in ("best.ckpt", "run.json", "timing.json", "history.csv", "histogram.csv",
                     "test_confusion.svg", "test_per_class.csv"):
            assert (run_dir / name).exists(), f"missing {name}"
        print("  ✓ train wrote checkpoint, run.json and reports")

        assert main(["train", "--config", str(cfg), "--lr", "0", "--out", str(root / "flat"), "--db", db]) == 0
        assert json.loads((root / "flat" / "run.json").read_text())["params_changed"] is False
        assert main(["train", "--config", str(cfg), "--epochs", "0", "--db", db]) == 1
        print("  ✓ --lr 0 marks a flat run; --epochs 0 rejected")

        ckpt = str(run_dir / "best.ckpt")
        eval_dir = root / "eval"
        assert main(["eval", "--checkpoint", ckpt, "--config", str(cfg), "--snr", "-6", "--out", str(eval_dir)]) == 0
        metrics = json.loads((eval_dir / "metrics.json").read_text())
        per_class = pl.read_csv(eval_dir / "per_class.csv")
        assert per_class["recall"].to_list() == metrics["recall"]
        assert per_class["precision"].to_list() == metrics["precision"]
        confusion = pl.read_csv(eval_dir / "confusion.csv")["count"].to_list()
        assert confusion == [c for row in metrics["confusion"] for c in row]
        svg = (eval_dir / "confusion.svg").read_text(encoding="utf-8")
        assert svg.count('id="cell-') == 9
        assert main(["eval", "--checkpoint", ckpt, "--config", str(cfg), "--snr", "loud", "--out", str(eval_dir)]) == 1
        print("  ✓ eval CSVs equal metrics.json at full precision; 9 heatmap cells")

        sweep_dir = root / "sweep"
        argv = ["sweep", "--checkpoint", ckpt, "--config", str(cfg), "--snrs", "-10:10:10,clean",
                "--seeds", "0,1", "--out", str(sweep_dir), "--db", db, "--run-id", "cli-sweep"]
        assert main(argv) == 0
        cells = pl.read_csv(sweep_dir / "sweep_cells.csv")
        assert cells.height == 4 * 2
        assert (sweep_dir / "sweep.svg").exists() and (sweep_dir / "sweep_summary.csv").exists()
        print(f"  ✓ sweep: 4 SNRs x 2 seeds -> {cells.height} cells")

        assert main(["results", "--db", db, "--run-id", "cli-sweep"]) == 0

        out_csv = root / "features.csv"
        assert main(["export", "--checkpoint", ckpt, "--config", str(cfg), "--split", "all", "--out", str(out_csv)]) == 0
        features = pl.read_csv(out_csv)
        assert features.height == 24 and features.width == 64 + 2
        print("  ✓ export: 24 rows of 64 features plus label and split")


def main_suite():
    return run_suite(
        "CLI TEST SUITE",
        [
            test_synth,
            test_usage_errors,
            test_data_errors,
            test_gradcheck,
            test_info,
            test_train_eval_sweep_export,
        ],
    )


if __name__ == "__main__":
    sys.exit(main_suite())
