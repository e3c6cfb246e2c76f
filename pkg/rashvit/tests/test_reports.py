#!/usr/bin/env python3
"""
Test: Reports and File Output

Tests the SVG renderers and the atomic writers:
- confusion heatmap has one rectangle per cell
- repeated renders are byte-identical
- sweep plot carries one series per variant and a clean tick

Usage:
    python rashvit/tests/test_reports.py
"""

import math
import re
import sys
import tempfile
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import numpy as np
import polars as pl

from rashvit.src.db.models import SWEEP_SUMMARY_SCHEMA
from rashvit.src.utils.io import atomic_write_text, read_json, write_csv, write_json
from rashvit.src.utils.reports import confusion_svg, sweep_svg
from rashvit.tests.harness import banner, run_suite


def _summary() -> pl.DataFrame:
    rows = []
    for variant, offset in (("base", 0.0), ("features=raw", -0.1)):
        for snr in (math.inf, -10.0, 0.0, 10.0):
            acc = 0.95 + offset if math.isinf(snr) else 0.6 + 0.03 * snr + offset
            rows.append((variant, snr, acc, 0.01, acc - 0.01, acc + 0.01, 3))
    return pl.DataFrame(rows, schema=SWEEP_SUMMARY_SCHEMA, orient="row")


def test_confusion_svg():
    """K*K cell rectangles, raw counts as text, standalone output."""
    banner("TEST 1: Confusion Heatmap")

    confusion = np.array([[5, 1, 0], [0, 6, 0], [2, 0, 4]])
    with tempfile.TemporaryDirectory() as tmpdir:
        path = confusion_svg(confusion, Path(tmpdir) / "confusion.svg", ["B007", "IR007", "NORMAL"])
        svg = path.read_text(encoding="utf-8")

    cells = re.findall(r'id="cell-(\d+)-(\d+)"', svg)
    assert len(cells) == 9, f"expected 9 cells, found {len(cells)}"
    assert {(int(i), int(j)) for i, j in cells} == {(i, j) for i in range(3) for j in range(3)}
    assert "NORMAL" in svg and "<image" not in svg and "xlink:href=\"http" not in svg
    print(f"  ✓ {len(cells)} cells for K=3, labels as text, no external assets")

    with tempfile.TemporaryDirectory() as tmpdir:
        big = confusion_svg(np.eye(10, dtype=np.int64) * 4, Path(tmpdir) / "c10.svg")
        assert len(re.findall(r'id="cell-\d+-\d+"', big.read_text(encoding="utf-8"))) == 100
        empty = confusion_svg(np.zeros((2, 2), dtype=np.int64), Path(tmpdir) / "empty.svg")
        assert empty.exists()
    print("  ✓ K=10 -> 100 cells; all-zero matrix renders")


def test_svg_byte_stable():
    """Two renders of the same input are byte-identical."""
    banner("TEST 2: Byte-Stable SVG")

    confusion = np.array([[3, 1], [2, 4]])
    with tempfile.TemporaryDirectory() as tmpdir:
        a = confusion_svg(confusion, Path(tmpdir) / "a.svg").read_bytes()
        b = confusion_svg(confusion, Path(tmpdir) / "b.svg").read_bytes()
        c = sweep_svg(_summary(), Path(tmpdir) / "c.svg").read_bytes()
        d = sweep_svg(_summary(), Path(tmpdir) / "d.svg").read_bytes()
    assert a == b, "confusion SVG differs between renders"
    assert c == d, "sweep SVG differs between renders"
    print("  ✓ confusion and sweep SVGs identical across renders")


def test_sweep_svg():
    """One polyline per variant and a clean tick label."""
    banner("TEST 3: Sweep Plot")

    with tempfile.TemporaryDirectory() as tmpdir:
        svg = sweep_svg(_summary(), Path(tmpdir) / "sweep.svg").read_text(encoding="utf-8")
    assert 'id="series-base"' in svg and 'id="series-features=raw"' in svg
    assert ">clean<" in svg and ">-10<" in svg
    print("  ✓ series-base, series-features=raw and the clean tick present")


def test_writers():
    """Atomic JSON/CSV writers create parents and round-trip values."""
    banner("TEST 4: Writers")

    with tempfile.TemporaryDirectory() as tmpdir:
        root = Path(tmpdir)
        write_json(root / "deep" / "metrics.json", {"accuracy": 0.1 + 0.2, "snr": "clean"})
        assert read_json(root / "deep" / "metrics.json") == {"accuracy": 0.1 + 0.2, "snr": "clean"}

        frame = pl.DataFrame({"label": [0, 1], "recall": [1 / 3, 2 / 3]})
        write_csv(root / "t" / "per_class.csv", frame)
        back = pl.read_csv(root / "t" / "per_class.csv")
        assert back["recall"].to_list() == [1 / 3, 2 / 3], "CSV must keep full precision"

        atomic_write_text(root / "note.txt", "first")
        atomic_write_text(root / "note.txt", "second")
        assert (root / "note.txt").read_text() == "second"
        assert sorted(p.name for p in root.iterdir()) == ["deep", "note.txt", "t"]
    print("  ✓ parents created, floats kept at full precision, no temp files left")


def main():
    return run_suite(
        "REPORTS TEST SUITE",
        [
            test_confusion_svg,
            test_svg_byte_stable,
            test_sweep_svg,
            test_writers,
        ],
    )


if __name__ == "__main__":
    sys.exit(main())
