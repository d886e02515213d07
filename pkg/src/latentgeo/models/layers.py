from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ndkernel as nk

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass
class Posterior:
    """Diagonal Gaussian ``q(z|x)``; ``logvar`` is already clamped."""

    mu: np.ndarray
    logvar: np.ndarray


class ParamSet:
    """Ordered named parameters. Insertion order is the canonical checkpoint order."""

    def __init__(self):
        self.params: dict[str, nk.Tensor] = {}

    def __getitem__(self, name: str) -> nk.Tensor:
        return self.params[name]

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name}")
        self.params[name] = nk.Tensor(value, requires_grad=True)

    def linear(self, rng: np.random.Generator, name: str, fan_in: int, fan_out: int, bias: bool = True) -> None:
        self.add(f"{name}.w", rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        if bias:
            self.add(f"{name}.b", np.zeros(fan_out))

    def apply_linear(self, name: str, x) -> nk.Tensor:
        y = nk.matmul(x, self.params[f"{name}.w"])
        b = self.params.get(f"{name}.b")
        return y if b is None else y + b

    def parameters(self) -> list[nk.Tensor]:
        return list(self.params.values())

    def names(self) -> list[str]:
        return list(self.params)

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            value = np.asarray(state[k], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{k}: expected shape {p.shape}, got {value.shape}")
            p.data = value.copy()


def clamp_logvar(x) -> nk.Tensor:
    return nk.clip(x, LOGVAR_MIN, LOGVAR_MAX)


def kl_std_normal(mu: nk.Tensor, logvar: nk.Tensor, axes) -> nk.Tensor:
    """Closed-form KL to N(0, I), summed over ``axes``."""
    return 0.5 * (mu * mu + nk.exp(logvar) - 1.0 - logvar).sum(axis=axes)


def reparameterize(posterior: Posterior, seed=None, noise: np.ndarray | None = None) -> np.ndarray:
    """``mu + exp(logvar / 2) * eps`` with ``eps`` from the seeded generator (or given)."""
    if noise is None:
        noise = nk.make_rng(seed).standard_normal(posterior.mu.shape)
    return posterior.mu + np.exp(0.5 * posterior.logvar) * noise
