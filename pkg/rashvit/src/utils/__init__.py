"""
Utilities Package

Modules:
- io: atomic file writes, deterministic JSON/CSV
- reports: SVG rendering of confusion matrices and sweep curves
"""

from rashvit.src.utils.io import atomic_write_bytes, atomic_write_text, write_json, read_json, write_csv

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_json",
    "read_json",
    "write_csv",
]
