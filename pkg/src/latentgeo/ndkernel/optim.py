"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper) -> "AdamState":
        return cls(
            m=[np.zeros(p.shape) for p in params],
            v=[np.zeros(p.shape) for p in params],
            **hyper,
        )


def adam_step(
    params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState, lr: float
) -> AdamState:
    """One Adam update. Parameters are rebound to fresh arrays, never mutated,
    so graphs recorded before the step keep their values."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError("params, grads and optimizer state differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ValueError(f"parameter {i}: shape {p.shape}, grad {g.shape}, moment {state.m[i].shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise FloatingPointError(
                f"adam step {state.step + 1}: {bad} non-finite gradient entries in parameter {i} {p.shape}"
            )

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


@dataclass
class Adam:
    params: list[Tensor]
    lr: float = 5e-4
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState.for_params(self.params)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        adam_step(self.params, grads, self.state, self.lr)
