"""
Differentiable Core

Numpy tensors, a per-thread gradient tape, the ops the network needs, the
AdamW update and a finite-difference gradient checker.
"""

from rashvit.src.diffcore.tensor import Tensor, Tape, OpRecord, backward, active_tape
from rashvit.src.diffcore import ops
from rashvit.src.diffcore.optim import OptimizerState, adamw_step
from rashvit.src.diffcore.gradcheck import grad_check, run_registered, register

__all__ = [
    "Tensor",
    "Tape",
    "OpRecord",
    "backward",
    "active_tape",
    "ops",
    "OptimizerState",
    "adamw_step",
    "grad_check",
    "run_registered",
    "register",
]
