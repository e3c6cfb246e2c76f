"""
AdamW

Adam with decoupled weight decay:

    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g^2
    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)

with bias-corrected m_hat = m/(1-b1^t), v_hat = v/(1-b2^t).
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from rashvit.src.diffcore.tensor import Tensor
from rashvit.src.errors import ShapeError


@dataclass
class OptimizerState:
    """Per-parameter moments plus hyperparameters; `step` only ever increases."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def hyperparameters(self) -> Dict[str, float]:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
        }


def adamw_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: OptimizerState,
) -> OptimizerState:
    """
    Apply one AdamW update in place.

    Parameters missing from `grads` (or with a None gradient) are treated as
    having a zero gradient; they still decay.

    Args:
        params: Parameter path -> Tensor (updated in place)
        grads: Parameter path -> gradient array
        state: Moments and hyperparameters (updated in place)

    Returns:
        The same state object, step incremented
    """
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        elif grad.shape != param.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter {param.shape}")

        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        v = state.v[name]

        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(grad)

        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        update = update + state.weight_decay * param.data
        param.data -= state.lr * update

    return state
