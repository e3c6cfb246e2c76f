"""
RA-SHViT Source Package

Contains core modules for the bearing fault-diagnosis toolkit:
- sigproc: Segmentation, normalization, noise injection, FFT featurization
- diffcore: Differentiable tensors, tape-based backward, AdamW
- model: The RA-SHViT network, accounting, checkpoints
- datasets: Signal archives, splits, synthetic bearing signals
- engine: Training, evaluation, SNR sweeps, ablations, feature export
- db: Results store and table schemas
- utils: Atomic file IO and SVG reports
"""
