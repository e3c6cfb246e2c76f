"""
RA-SHViT - Bearing Fault Diagnosis Toolkit

Spectral featurization, a single-head attention network with hybrid
attention blocks, and a desk-scale training/evaluation harness for
vibration-based rolling-bearing fault diagnosis.
"""

__version__ = "0.1.0"

from pathlib import Path

# Package root directory
PACKAGE_ROOT = Path(__file__).parent.resolve()
