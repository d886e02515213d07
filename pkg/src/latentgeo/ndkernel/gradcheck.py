from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def finite_difference_gradient(
    loss_fn: Callable[[], float], params: Sequence[Tensor], eps: float = 1e-5
) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn()`` w.r.t. every scalar in ``params``.

    ``loss_fn`` must read the current parameter values and be deterministic.
    Parameter values are restored on return.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grads = []
    for p in params:
        original = p.data
        work = original.copy()
        p.data = work
        g = np.zeros(work.shape)
        flat, gflat = work.reshape(-1), g.reshape(-1)
        try:
            for i in range(flat.size):
                v = flat[i]
                flat[i] = v + eps
                up = float(loss_fn())
                flat[i] = v - eps
                down = float(loss_fn())
                flat[i] = v
                gflat[i] = (up - down) / (2.0 * eps)
        finally:
            p.data = original
        grads.append(g)
    return grads


def max_relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray], floor: float = 1e-6) -> float:
    """Elementwise ``|a - n| / max(|a|, floor)``, maximised over all entries."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size == 0:
            continue
        err = np.abs(a - n) / np.maximum(np.abs(a), floor)
        worst = max(worst, float(err.max()))
    return worst
