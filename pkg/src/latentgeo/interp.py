"""Latent-space interpolation functions ``f(z1, z2, lam)``.

All four functions interpolate along the last axis and accept either numpy
arrays or :class:`~latentgeo.ndkernel.Tensor` values (so training losses can
differentiate through them). ``lam`` may be a scalar or an array holding one
weight per leading index.
"""

from __future__ import annotations

import enum

import numpy as np

from . import ndkernel as nk

# below this sin(angle) the great-circle formula is replaced by its limit
PARALLEL_TOL = 1e-7
ANTIPODAL_TOL = 1e-7


class InterpolationKind(str, enum.Enum):
    LINEAR = "linear"
    SLERP = "slerp"
    NORM = "norm"
    SLERP_NORM = "slerp_norm"

    def __str__(self) -> str:
        return self.value


class InterpolationError(ValueError):
    pass


def _values(x) -> np.ndarray:
    return x.data if isinstance(x, nk.Tensor) else np.asarray(x, dtype=np.float64)


def _prepare(z1, z2, lam):
    a, b = _values(z1), _values(z2)
    if a.shape != b.shape:
        raise InterpolationError(f"latent shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 0:
        raise InterpolationError("latent points must be vectors")
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0) or np.any(lam > 1) or not np.all(np.isfinite(lam)):
        raise InterpolationError(f"interpolation weight outside [0, 1]: {lam}")
    # one weight per row -> broadcast along the latent axis
    if lam.ndim > 0:
        lam = lam[..., None]
    return a, b, lam


def _differentiable(*xs) -> bool:
    return any(isinstance(x, nk.Tensor) for x in xs)


def lerp(z1, z2, lam):
    """``(1 - lam) * z1 + lam * z2``."""
    _, _, lam = _prepare(z1, z2, lam)
    return (1.0 - lam) * z1 + lam * z2


def norm_interp(z1, z2, lam):
    """Linear interpolation rescaled by ``1/sqrt((1-lam)^2 + lam^2)``.

    For iid standard-normal endpoints the result is again standard normal.
    """
    _, _, lam = _prepare(z1, z2, lam)
    scale = 1.0 / np.sqrt((1.0 - lam) ** 2 + lam**2)
    return ((1.0 - lam) * z1 + lam * z2) * scale


def _angle_terms(z1, z2, lam):
    """Angle between endpoints and the per-row fallback mask.

    Rows flagged ``parallel`` get a dummy cosine of 0 before ``arccos`` so the
    discarded branch stays finite under differentiation.
    """
    a, b, lam = _prepare(z1, z2, lam)
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise InterpolationError("spherical interpolation of a zero vector is undefined")
    if a.shape[-1] < 2:
        raise InterpolationError("spherical interpolation needs dimension >= 2")
    cos_v = np.clip(np.sum(a * b, axis=-1, keepdims=True) / (na * nb), -1.0, 1.0)
    if np.any(cos_v < -1.0 + ANTIPODAL_TOL):
        raise InterpolationError("antipodal endpoints: great-circle path is not unique")
    parallel = (np.sin(np.arccos(cos_v)) < PARALLEL_TOL) & (cos_v > 0)

    if _differentiable(z1, z2):
        t1, t2 = nk.as_tensor(z1), nk.as_tensor(z2)
        n1 = nk.sqrt((t1 * t1).sum(-1, keepdims=True))
        n2 = nk.sqrt((t2 * t2).sum(-1, keepdims=True))
        cos_t = nk.clip((t1 * t2).sum(-1, keepdims=True) / (n1 * n2), -1.0, 1.0)
        omega = nk.arccos(nk.where(parallel, 0.0, cos_t))
        sin = nk.sin
    else:
        omega = np.arccos(np.where(parallel, 0.0, cos_v))
        sin = np.sin
    return omega, parallel, lam, sin


def slerp(z1, z2, lam):
    """Great-circle interpolation; falls back to :func:`lerp` for (near-)parallel endpoints."""
    omega, parallel, lam, sin = _angle_terms(z1, z2, lam)
    s = sin(omega)
    c1 = sin((1.0 - lam) * omega) / s
    c2 = sin(lam * omega) / s
    if _differentiable(z1, z2):
        c1 = nk.where(parallel, 1.0 - lam, c1)
        c2 = nk.where(parallel, lam, c2)
    else:
        c1 = np.where(parallel, 1.0 - lam, c1)
        c2 = np.where(parallel, lam, c2)
    return c1 * z1 + c2 * z2


def slerp_norm(z1, z2, lam):
    """Spherical weights normalised so their squares sum to one.

    The small-angle limit of this formula is :func:`norm_interp`, which is used
    as the fallback for (near-)parallel endpoints.
    """
    omega, parallel, lam, sin = _angle_terms(z1, z2, lam)
    s1 = sin((1.0 - lam) * omega)
    s2 = sin(lam * omega)
    sq = s1 * s1 + s2 * s2
    denom = nk.sqrt(sq) if _differentiable(z1, z2) else np.sqrt(sq)
    c1 = s1 / denom
    c2 = s2 / denom
    scale = 1.0 / np.sqrt((1.0 - lam) ** 2 + lam**2)
    if _differentiable(z1, z2):
        c1 = nk.where(parallel, (1.0 - lam) * scale, c1)
        c2 = nk.where(parallel, lam * scale, c2)
    else:
        c1 = np.where(parallel, (1.0 - lam) * scale, c1)
        c2 = np.where(parallel, lam * scale, c2)
    return c1 * z1 + c2 * z2


_FUNCS = {
    InterpolationKind.LINEAR: lerp,
    InterpolationKind.SLERP: slerp,
    InterpolationKind.NORM: norm_interp,
    InterpolationKind.SLERP_NORM: slerp_norm,
}


def get_interpolator(kind):
    return _FUNCS[InterpolationKind(kind)]


def interpolate(kind, z1, z2, lam):
    return get_interpolator(kind)(z1, z2, lam)


def lambda_from_times(t1, t2, t3):
    """Interpolation weight placing ``t2`` between ``t1`` (lam=0) and ``t3`` (lam=1).

    Works elementwise on arrays. Requires ``t1 < t2 < t3``.
    """
    t1, t2, t3 = (np.asarray(t, dtype=np.float64) for t in (t1, t2, t3))
    if not (np.all(t1 < t2) and np.all(t2 < t3)):
        raise ValueError(f"attributes must satisfy t1 < t2 < t3, got ({t1}, {t2}, {t3})")
    lam = (t2 - t1) / (t3 - t1)
    return float(lam) if lam.ndim == 0 else lam
