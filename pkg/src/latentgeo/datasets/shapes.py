"""Synthetic rotating-object images: an irregular polygon with an off-centre hole."""

from __future__ import annotations

import numpy as np

from ..ndkernel import derive_seed, make_rng
from .core import Dataset, ImageSequence, SplitSpec, assign_splits

SUPERSAMPLE = 4
# largest vertex distance from the centroid, as a fraction of the image side
EXTENT = 0.44


def points_in_polygon(px: np.ndarray, py: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorised over query points."""
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = vertices[:, 0], vertices[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for ax, ay, bx, by in zip(x0, y0, x1, y1):
        crosses = (ay <= py) != (by <= py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_hit = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < x_hit)
    return inside


def _polygon_centroid(v: np.ndarray) -> np.ndarray:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * area)


def shape_geometry(style_seed: int):
    """Polygon vertices and hole ``(centre, radius)`` in unit coordinates about the centroid."""
    rng = make_rng(style_seed)
    n = int(rng.integers(6, 11))
    step = 2.0 * np.pi / n
    theta = np.arange(n) * step + rng.uniform(-0.3, 0.3, n) * step
    radius = rng.uniform(0.45, 1.0, n)
    verts = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    verts = verts - _polygon_centroid(verts)
    verts = verts / np.max(np.linalg.norm(verts, axis=1))
    # hole sits halfway towards the farthest vertex so the shape has no rotational symmetry
    far = verts[np.argmax(np.linalg.norm(verts, axis=1))]
    return verts, 0.45 * far, 0.16


def render_shape(style_seed: int, angle_degrees: float, size: int = 32) -> np.ndarray:
    """Grayscale raster of the style's shape rotated by ``angle_degrees`` about its centroid.

    Pixel value is ``2 * coverage - 1`` with coverage estimated on a 4x4 subpixel grid.
    """
    if not 0.0 <= angle_degrees <= 180.0:
        raise ValueError(f"angle must lie in [0, 180], got {angle_degrees}")
    if size < 16:
        raise ValueError(f"image size must be >= 16, got {size}")
    verts, hole_c, hole_r = shape_geometry(style_seed)
    a = np.deg2rad(angle_degrees)
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    scale = EXTENT * size
    centre = size / 2.0
    verts = verts @ rot.T * scale + centre
    hole_c = rot @ hole_c * scale + centre
    hole_r = hole_r * scale

    sub = (np.arange(size * SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    px, py = np.meshgrid(sub, sub)
    covered = points_in_polygon(px, py, verts)
    covered &= (px - hole_c[0]) ** 2 + (py - hole_c[1]) ** 2 > hole_r**2
    coverage = covered.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE).mean(axis=(1, 3))
    return 2.0 * coverage - 1.0


def generate_image_dataset(
    n_objects: int = 20,
    n_angles: int = 60,
    master_seed: int = 0,
    size: int = 32,
    split_spec: SplitSpec = SplitSpec(),
) -> Dataset:
    if n_angles < 9:
        raise ValueError("n_angles must be >= 9 so every split is non-empty")
    seqs = []
    for obj in range(n_objects):
        style_seed = derive_seed(master_seed, obj)
        rng = make_rng(derive_seed(master_seed, obj, 1))
        angles = np.sort(rng.uniform(0.0, 180.0, n_angles))
        if np.any(np.diff(angles) == 0):
            raise RuntimeError("duplicate angle drawn; choose another seed")
        images = np.stack([render_shape(style_seed, a, size) for a in angles])
        seqs.append(ImageSequence(obj, style_seed, angles, images))
    ds = Dataset(
        "image",
        seqs,
        meta={"generator": "shapes", "master_seed": master_seed, "size": size, "n_objects": n_objects, "n_angles": n_angles},
    )
    ds.splits = assign_splits(ds, split_spec, master_seed)
    return ds
