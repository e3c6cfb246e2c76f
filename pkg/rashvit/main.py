#!/usr/bin/env python3
"""
RA-SHViT - Bearing Fault Diagnosis Toolkit

Main entry point.

Usage:
    # Generate the synthetic 10-class archive
    python rashvit/main.py synth --out data/synth

    # Describe raw .f32 recordings with a manifest
    python rashvit/main.py ingest --files normal.f32:9 ir007.f32:3 --preset cwru --out data/cwru/manifest.json

    # Train with a run config
    python rashvit/main.py train --config rashvit/configs/desk.json

    # Evaluate, sweep, ablate
    python rashvit/main.py eval --checkpoint runs/desk/best.ckpt --config rashvit/configs/desk.json --snr -6 --out runs/desk/eval
    python rashvit/main.py sweep --config rashvit/configs/desk.json --snrs -10:2:10 --seeds 0,1,2 --out runs/desk/sweep
    python rashvit/main.py ablate --config rashvit/configs/desk.json --variant ahab=off --variant features=raw --out runs/desk/ablation

    # Verification and bookkeeping
    python rashvit/main.py gradcheck
    python rashvit/main.py info --preset default --trace --dataset cwru
    python rashvit/main.py results

Exit codes: 0 success, 1 usage/validation, 2 data error, 3 numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Ensure the package root is in the Python path
PACKAGE_ROOT = Path(__file__).parent.resolve()
PROJECT_ROOT = PACKAGE_ROOT.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from pydantic import ValidationError

from rashvit import config
from rashvit.src.errors import ConfigError, GradCheckFailure, MissingFileError, RAShViTError

logger = logging.getLogger("rashvit")

# Options whose value may start with "-" (negative dB grids like -10:2:10)
_SIGNED_OPTIONS = ("--snr", "--snrs")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so 2 stays reserved for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def _seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"seeds must be comma-separated integers, got {text!r}")


def _attach_signed_values(argv: List[str]) -> List[str]:
    """Rewrite `--snrs -10:2:10` as `--snrs=-10:2:10`; argparse reads the bare value as a flag."""
    out: List[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if token in _SIGNED_OPTIONS and nxt.startswith("-") and not nxt.startswith("--"):
            out.append(f"{token}={nxt}")
            i += 2
        else:
            out.append(token)
            i += 1
    return out


# =============================================================================
# DATA HELPERS
# =============================================================================

def _run_config(args):
    from rashvit.src.engine.config import RunConfigFile
    return RunConfigFile.read(args.config)


def _dataset(args):
    """Tagged dataset from --config (data section) or --data (archive, default split)."""
    from rashvit.src.engine.config import DataConfig, SplitConfig

    if getattr(args, "config", None):
        return _run_config(args).data.load()
    if getattr(args, "data", None):
        split = SplitConfig(seed=args.split_seed)
        return DataConfig(archive=args.data, split=split).load()
    raise ConfigError("either --config or --data is required")


def _store(args):
    from rashvit.src.db.duckdb_store import ResultsStore
    return ResultsStore(args.db or config.DB_PATH)


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_synth(args) -> None:
    from rashvit.src.datasets import SynthSpec, class_histogram, save_archive, synth_generate
    from rashvit.src.utils.io import read_json

    _banner("Synthetic Archive")
    spec = SynthSpec()
    if args.spec:
        spec_path = Path(args.spec)
        if not spec_path.exists():
            raise MissingFileError(f"spec not found: {spec_path}")
        spec = SynthSpec.model_validate(read_json(spec_path))
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    dataset = synth_generate(spec)
    manifest = save_archive(dataset, args.out)
    print(f"  ✓ {len(dataset)} segments, {dataset.num_classes} classes (seed {spec.seed})")
    print(f"  ✓ Manifest: {manifest}")
    print(class_histogram(dataset))


def cmd_ingest(args) -> None:
    from rashvit.src.datasets import build_manifest, class_histogram, get_preset, load_archive

    _banner("Ingest Recordings")
    files = []
    for item in args.files:
        path, sep, label = item.rpartition(":")
        if not sep or not label.isdigit():
            raise ConfigError(f"--files entries must be <path>:<label>, got {item!r}")
        files.append((path, int(label)))

    classes, rate = args.classes, args.sample_rate
    if args.preset:
        preset = get_preset(args.preset)
        classes = classes or preset.class_names
        rate = rate or preset.sample_rate_hz
    manifest = build_manifest(
        files, args.out, classes=classes,
        sample_rate_hz=rate or config.DEFAULT_SAMPLE_RATE_HZ,
        window=args.window, stride=args.stride,
    )
    dataset = load_archive(args.out)
    print(f"  ✓ {len(manifest.entries)} recordings -> {len(dataset)} segments")
    print(class_histogram(dataset))


def cmd_train(args) -> None:
    from rashvit.src.datasets import class_histogram
    from rashvit.src.engine.config import TrainConfig
    from rashvit.src.engine.trainer import Trainer
    from rashvit.src.utils.io import write_csv
    from rashvit.src.utils.reports import confusion_svg

    doc = _run_config(args)
    updates = {k: v for k, v in (("epochs", args.epochs), ("lr", args.lr), ("seed", args.seed)) if v is not None}
    train_cfg = TrainConfig.model_validate({**doc.train.model_dump(), **updates})
    out_dir = Path(args.out or doc.out_dir)

    _banner(f"Training -> {out_dir}")
    dataset = doc.data.load()
    write_csv(out_dir / "histogram.csv", class_histogram(dataset))
    record = Trainer(doc.model, train_cfg, out_dir).run(dataset)

    if record.test_metrics is not None:
        metrics = record.test_metrics
        write_csv(out_dir / "test_per_class.csv", metrics.class_table())
        write_csv(out_dir / "test_confusion.csv", metrics.confusion_table())
        confusion_svg(metrics.confusion, out_dir / "test_confusion.svg", metrics.names())

    with _store(args) as store:
        store.insert_run(record.summary(str(out_dir)))

    print(f"\n  ✓ {record}")
    if not record.params_changed:
        print("  ! parameters unchanged (flat run)")


def cmd_eval(args) -> None:
    from rashvit.src.engine.config import parse_snr
    from rashvit.src.engine.metrics import evaluate
    from rashvit.src.utils.io import write_csv, write_json
    from rashvit.src.utils.reports import confusion_svg

    try:
        snr = parse_snr(args.snr)
    except ValueError as e:
        raise ConfigError(f"--snr: {e}")
    dataset = _dataset(args)
    out_dir = Path(args.out)
    _banner(f"Evaluate {args.checkpoint}")
    metrics = evaluate(args.checkpoint, dataset, args.split, snr, args.seed)

    write_json(out_dir / "metrics.json", {"split": args.split, "snr_db": args.snr, "seed": args.seed, **metrics.to_dict()})
    write_csv(out_dir / "per_class.csv", metrics.class_table())
    write_csv(out_dir / "confusion.csv", metrics.confusion_table())
    confusion_svg(metrics.confusion, out_dir / "confusion.svg", metrics.names(),
                  title=f"Confusion matrix ({args.snr} dB)")
    print(f"  ✓ accuracy {metrics.accuracy:.4f} over {metrics.total} segments")
    for true, pred, count in metrics.top_confusions(3):
        print(f"    {count:5d} x  label {true} -> {pred}")


def cmd_sweep(args) -> None:
    from rashvit.src.engine.sweep import parse_snr_grid, snr_sweep
    from rashvit.src.utils.reports import sweep_svg

    snrs = parse_snr_grid(args.snrs)
    seeds = _seeds(args.seeds)
    dataset = _dataset(args)
    doc = _run_config(args) if args.config else None
    if doc is None and args.checkpoint is None:
        raise ConfigError("sweep without --checkpoint needs --config to train")

    from rashvit.src.engine.config import TrainConfig
    train_cfg = doc.train if doc else TrainConfig()
    protocol = "clean_train" if args.checkpoint else args.protocol
    out_dir = Path(args.out)

    _banner(f"SNR sweep ({protocol}): {len(snrs)} SNRs x {len(seeds)} seeds")
    result = snr_sweep(
        dataset, doc.model if doc else None, train_cfg, snrs, seeds,
        protocol=protocol, checkpoint=args.checkpoint, run_id=args.run_id, workers=args.workers,
    )
    result.write(out_dir)
    sweep_svg(result.summary, out_dir / "sweep.svg")
    with _store(args) as store:
        store.insert_cells(result.cell_objects())
    print(result.summary)
    print(f"\n  ✓ {result.cells.height} cells written to {out_dir}")


def cmd_ablate(args) -> None:
    from rashvit.src.engine.sweep import AblationVariant, ablate, parse_snr_grid
    from rashvit.src.utils.reports import sweep_svg

    variants = []
    for text in args.variant or []:
        pairs = dict(part.split("=", 1) for part in text.split(",") if "=" in part)
        variants.append(AblationVariant(**pairs))
    doc = _run_config(args)
    dataset = doc.data.load()
    out_dir = Path(args.out)

    _banner(f"Ablation: base + {len(variants)} variant(s)")
    result = ablate(
        dataset, doc.model, doc.train, variants, parse_snr_grid(args.snrs), _seeds(args.seeds),
        protocol=args.protocol, run_id=args.run_id, workers=args.workers,
    )
    result.write(out_dir)
    sweep_svg(result.summary, out_dir / "ablation.svg", title="Ablation accuracy vs SNR")
    with _store(args) as store:
        store.insert_cells(_cells(result.cells))
    print(result.comparison)


def _cells(frame):
    from rashvit.src.db.models import SweepCell
    return [SweepCell(**row) for row in frame.iter_rows(named=True)]


def cmd_gradcheck(args) -> None:
    from rashvit.src import model  # noqa: F401  (registers module-level cases)
    from rashvit.src.diffcore.gradcheck import registered_cases, run_registered, tolerance_of

    _banner("Gradient check (float64 central differences)")
    names = args.ops.split(",") if args.ops else None
    known = {c.name for c in registered_cases()}
    unknown = sorted(set(names or []) - known)
    if unknown:
        raise ConfigError(f"unknown op(s) {unknown}; registered: {sorted(known)}")

    results = run_registered(names, seed=args.seed)
    failures = {}
    for name, error in results.items():
        tol = tolerance_of(name)
        ok = error < tol
        print(f"  {'✓' if ok else '✗'} {name:<18} max rel error {error:.3e}  (tol {tol:.0e})")
        if not ok:
            failures[name] = error
    if failures:
        raise GradCheckFailure(failures)
    print(f"\n  ✓ {len(results)} ops passed")


def cmd_export(args) -> None:
    from rashvit.src.engine.export import export_features

    dataset = _dataset(args)
    _banner(f"Export features ({args.split})")
    frame = export_features(args.checkpoint, dataset, args.split, args.out, seed=args.seed)
    print(f"  ✓ {frame.height} rows x {frame.width - 2} features -> {args.out}")


def _trace_ops(model_cfg) -> dict:
    """Op histogram of one eval-mode forward pass on a zero image."""
    import numpy as np
    from rashvit.src.diffcore.tensor import Tape, Tensor
    from rashvit.src.model.layers import ForwardContext
    from rashvit.src.model.network import RAShViTNet

    net = RAShViTNet(model_cfg, seed=0)
    image = np.zeros((1, model_cfg.in_channels, *model_cfg.input_hw), dtype=np.float32)
    with Tape() as tape:
        net(Tensor(image), ForwardContext.eval())
    return dict(sorted(tape.op_counts().items()))


def cmd_info(args) -> None:
    import polars as pl
    from rashvit.src.model.accounting import layer_table, reference_comparison
    from rashvit.src.model.config import ModelConfig
    from rashvit.src.utils.io import write_json

    if args.config:
        model_cfg = _run_config(args).model
    else:
        presets = {"default": ModelConfig, "cwru": ModelConfig.cwru, "pu": ModelConfig.pu,
                   "tiny": ModelConfig.tiny, "gradcheck": ModelConfig.gradcheck}
        model_cfg = presets[args.preset]()

    table = layer_table(model_cfg)
    ref = reference_comparison(model_cfg)
    extra = {}
    _banner("Architecture")
    if args.layers:
        with pl.Config(tbl_rows=-1, tbl_width_chars=120):
            print(table)
    print(f"  Parameters: {ref['params']:,} ({ref['params_m']:.2f} M)")
    print(f"  MFLOPs (MACs per sample): {ref['mflops']:.2f}")
    print(
        f"  Reference: {ref['reference_params_m']} M params / {ref['reference_mflops']} MFLOPs "
        f"(published figures; stage depths {tuple(ref['depths'])} here are a choice, "
        f"so totals differ)"
    )
    if args.trace:
        extra["ops"] = _trace_ops(model_cfg)
        print(f"  Ops per forward pass: {sum(extra['ops'].values()):,}")
        for op, count in extra["ops"].items():
            print(f"    {op:<14} {count:>5}")
    if args.dataset:
        from rashvit.src.datasets import get_preset

        extra["dataset"] = get_preset(args.dataset).to_dict()
        print(f"  Dataset {extra['dataset']['name']} @ {extra['dataset']['sample_rate_hz']:g} Hz:")
        for row in extra["dataset"]["classes"]:
            print(f"    {row['label']:>2} {row['code']:<8} {row['fault_mode']:<12} {row['description']}")
    if args.json:
        write_json(args.json, {**ref, **extra, "config": model_cfg.model_dump(mode="json"), "layers": table.to_dicts()})
        print(f"  ✓ JSON written to {args.json}")


def cmd_results(args) -> None:
    import polars as pl

    with _store(args) as store:
        stats = store.get_stats()
        _banner(f"Results store: {stats['db_path']}")
        print(f"  Runs: {stats['run_count']}  Sweep cells: {stats['cell_count']}  Sweeps: {stats['sweep_count']}")
        with pl.Config(tbl_rows=args.limit):
            if args.run_id:
                print(store.accuracy_by_snr(args.run_id))
            else:
                print(store.query_runs(limit=args.limit))
                print(store.query_cells(limit=args.limit))


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        description="RA-SHViT - bearing fault diagnosis toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Exit codes: 0 success, 1 usage/validation, 2 data error, 3 numeric failure",
    )
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="DEBUG, INFO, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p, checkpoint: bool = True):
        p.add_argument("--config", help="Run config JSON (its data section is used)")
        p.add_argument("--data", help="Archive manifest or directory (7:1:2 split)")
        p.add_argument("--split-seed", type=int, default=0, help="Split seed with --data (default: 0)")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="Checkpoint file")

    def grid_args(p):
        p.add_argument("--snrs", default="-10:2:10", help="a:step:b inclusive, comma lists, 'clean'")
        p.add_argument("--seeds", default="0,1,2", help="Comma-separated seeds (default: 0,1,2)")
        p.add_argument("--protocol", choices=["per_snr", "clean_train"], default="per_snr")
        p.add_argument("--workers", type=int, default=None, help="Parallel cells (default: RA_SHVIT_THREADS)")
        p.add_argument("--run-id", default="sweep", help="Identifier stored with every cell")
        p.add_argument("--db", default=None, help="Results DuckDB file")

    p = sub.add_parser("synth", help="Generate a synthetic archive")
    p.add_argument("--spec", help="SynthSpec JSON (default: built-in spec)")
    p.add_argument("--out", required=True, help="Archive directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("ingest", help="Write a manifest for raw .f32 recordings")
    p.add_argument("--files", nargs="+", required=True, help="<path>:<label> pairs")
    p.add_argument("--out", required=True, help="manifest.json path")
    p.add_argument("--preset", choices=["cwru", "pu14", "pu6"], help="Class names and sampling rate")
    p.add_argument("--classes", nargs="+", help="Class names in label order")
    p.add_argument("--sample-rate", type=float, default=None)
    p.add_argument("--window", type=int, default=config.WINDOW_SIZE)
    p.add_argument("--stride", type=int, default=config.WINDOW_SIZE)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("train", help="Train from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="Override out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--db", default=None, help="Results DuckDB file")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a checkpoint on one split")
    data_args(p)
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--snr", default="clean", help="dB or 'clean'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="Accuracy over an SNR grid")
    data_args(p, checkpoint=False)
    p.add_argument("--checkpoint", help="Sweep a fixed model (clean_train protocol)")
    grid_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("ablate", help="Single-axis ablations over an SNR grid")
    p.add_argument("--config", required=True)
    p.add_argument("--variant", action="append", help="axis=value (ahab=on|off, ffn=res|plain, features=fft|raw)")
    grid_args(p)
    p.set_defaults(run_id="ablation")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("gradcheck", help="Finite-difference check of every registered op")
    p.add_argument("--ops", help="Comma-separated subset")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("export", help="Export pooled features as CSV")
    data_args(p)
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(handler=cmd_export)

    p = sub.add_parser("info", help="Parameter count, FLOPs and layer table")
    p.add_argument("--config", help="Run config JSON (model section is used)")
    p.add_argument("--preset", default="default", choices=["default", "cwru", "pu", "tiny", "gradcheck"])
    p.add_argument("--layers", action="store_true", help="Print the per-layer table")
    p.add_argument("--trace", action="store_true", help="Count recorded ops of one forward pass")
    p.add_argument("--dataset", choices=["cwru", "pu14", "pu6"], help="Also print a dataset label map")
    p.add_argument("--json", help="Also write the counts as JSON")
    p.set_defaults(handler=cmd_info)

    p = sub.add_parser("results", help="Show runs and sweep cells in the results store")
    p.add_argument("--db", default=None)
    p.add_argument("--run-id", help="Mean accuracy per SNR for one sweep")
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(handler=cmd_results)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_signed_values(argv))
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format=config.LOG_FORMAT,
    )

    try:
        args.handler(args)
    except ValidationError as e:
        print(f"✗ invalid configuration: {e}", file=sys.stderr)
        return 1
    except RAShViTError as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except json.JSONDecodeError as e:
        print(f"✗ malformed JSON: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
