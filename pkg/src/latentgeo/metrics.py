"""Distance and quality measures for decoded samples and latent codes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ndkernel import make_rng

LOWER_BETTER = "lower-better"
HIGHER_BETTER = "higher-better"

DIRECTIONS = {
    "mse_x": LOWER_BETTER,
    "ssim_x": HIGHER_BETTER,
    "psnr_x": HIGHER_BETTER,
    "bce_x": LOWER_BETTER,
    "eiou_x": HIGHER_BETTER,
    "mse_z": LOWER_BETTER,
    "cosdist_z": LOWER_BETTER,
    "kl": LOWER_BETTER,
}

IMAGE_METRICS = ("mse_x", "ssim_x", "psnr_x", "mse_z", "cosdist_z")
GRAPH_METRICS = ("bce_x", "eiou_x", "mse_z", "cosdist_z")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float

    @property
    def direction(self) -> str:
        return DIRECTIONS[self.name]


def _same_shape(a, b, name: str):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"{name}: shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _same_shape(a, b, "mse")
    d = a - b
    return float(np.mean(d * d))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, data_range: float) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5)."""
    a, b = _same_shape(a, b, "ssim")
    if a.ndim != 2:
        raise ValueError(f"ssim expects a single-channel HxW image, got shape {a.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"ssim: image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def local(x):
        return np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)

    mu_a, mu_b = local(a), local(b)
    var_a = local(a * a) - mu_a * mu_a
    var_b = local(b * b) - mu_b * mu_b
    cov = local(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(a, b, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / err)


def bce(pred, target) -> float:
    p, t = _same_shape(pred, target, "bce")
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("bce: target must be binary")
    p = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def e_iou(pred_adj, true_adj, threshold: float = 0.5) -> float:
    """Edge IoU between ``pred_adj > threshold`` and ``true_adj``, ignoring self-loops.

    Two empty edge sets count as a perfect match.
    """
    p, t = _same_shape(pred_adj, true_adj, "e_iou")
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"e_iou expects square adjacency matrices, got {p.shape}")
    off = ~np.eye(p.shape[0], dtype=bool)
    ep = (p > threshold) & off
    et = (t > 0.5) & off
    union = np.count_nonzero(ep | et)
    if union == 0:
        return 1.0
    return np.count_nonzero(ep & et) / union


def cosine_distance(z1, z2) -> float:
    a, b = _same_shape(z1, z2, "cosine_distance")
    a, b = a.reshape(-1), b.reshape(-1)
    sa, sb = np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0)
    if sa == 0.0 or sb == 0.0:
        raise ValueError("cosine_distance of a zero vector is undefined")
    # rescaling first keeps tiny or huge vectors away from under/overflow
    a, b = a / sa, b / sb
    na, nb = float(a @ a), float(b @ b)
    # sqrt(na * nb) == na exactly when a == b, so identical inputs give 0
    cos = float(a @ b) / math.sqrt(na * nb)
    return min(max(1.0 - cos, 0.0), 2.0)


def kl_gaussian_std(mu, logvar) -> float:
    """KL( N(mu, diag(exp(logvar))) || N(0, I) ), summed over all entries."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar))


def kl_monte_carlo(mu, logvar, n_samples: int = 1_000_000, seed=0, chunk: int = 200_000):
    """Monte-Carlo estimate of the same KL as ``E_q[log q(z) - log p(z)]``.

    Returns ``(estimate, standard_error)``.
    """
    if n_samples < 1000:
        raise ValueError("kl_monte_carlo needs at least 1000 samples")
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    logvar = np.asarray(logvar, dtype=np.float64).reshape(-1)
    rng = make_rng(seed)
    std = np.exp(0.5 * logvar)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        eps = rng.standard_normal((m, mu.size))
        z = mu + std * eps
        # log-normalisers of q and p differ only by -0.5 * logvar
        log_ratio = np.sum(-0.5 * logvar - 0.5 * eps * eps + 0.5 * z * z, axis=1)
        total += log_ratio.sum()
        total_sq += (log_ratio * log_ratio).sum()
        done += m
    est = total / n_samples
    var = max(total_sq / n_samples - est * est, 0.0) * n_samples / (n_samples - 1)
    return float(est), math.sqrt(var / n_samples)
