"""Reduced light-field shape descriptor.

Binary orthographic silhouettes rasterized from the ten canonical
viewpoints given by dodecahedron vertices (one per antipodal pair),
after normalizing the shape to a unit bounding box. Because input
shapes are pre-aligned, no rotation search is performed: the distance
is the mean per-view Hamming distance. This deliberately makes the
descriptor alignment-sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .shape_model import Shape

DESCRIPTOR_RESOLUTION = 64
# Projected coordinates live in [-_VIEW_HALF_WIDTH, +_VIEW_HALF_WIDTH];
# sqrt(3)/2 is the farthest corner of the normalized unit box.
_VIEW_HALF_WIDTH = 0.9


@lru_cache(maxsize=1)
def view_directions() -> np.ndarray:
    """Ten unit view directions: dodecahedron vertices up to antipody."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    a, b = 1.0 / phi, phi
    verts = []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                verts.append((sx, sy, sz))
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            verts.append((0.0, s1 * a, s2 * b))
            verts.append((s1 * a, s2 * b, 0.0))
            verts.append((s1 * b, 0.0, s2 * a))
    out = []
    for v in verts:
        v = np.asarray(v) / np.linalg.norm(v)
        for kept in out:
            if np.allclose(v, -kept, atol=1e-9) or np.allclose(v, kept, atol=1e-9):
                break
        else:
            out.append(v)
    dirs = np.stack(out)
    assert len(dirs) == 10
    return dirs


def _view_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    up = np.array([0.0, 0.0, 1.0])
    if abs(direction @ up) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    u = np.cross(direction, up)
    u = u / np.linalg.norm(u)
    w = np.cross(direction, u)
    return u, w


@dataclass(frozen=True)
class ShapeDescriptor:
    """Stack of binary silhouettes, one per canonical view."""

    silhouettes: np.ndarray  # (10, res, res) bool


def _rasterize(tri2d: np.ndarray, resolution: int) -> np.ndarray:
    """Fill projected triangles into a binary image (inclusive edges)."""
    img = np.zeros((resolution, resolution), dtype=bool)
    span = 2.0 * _VIEW_HALF_WIDTH
    centers = (np.arange(resolution) + 0.5) / resolution * span - _VIEW_HALF_WIDTH
    for tri in tri2d:
        lo = tri.min(axis=0)
        hi = tri.max(axis=0)
        i0 = int(np.searchsorted(centers, lo[0]) - 1)
        i1 = int(np.searchsorted(centers, hi[0]) + 1)
        j0 = int(np.searchsorted(centers, lo[1]) - 1)
        j1 = int(np.searchsorted(centers, hi[1]) + 1)
        i0, j0 = max(i0, 0), max(j0, 0)
        i1, j1 = min(i1, resolution), min(j1, resolution)
        if i0 >= i1 or j0 >= j1:
            continue
        xs = centers[i0:i1]
        ys = centers[j0:j1]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        a, b, c = tri
        d1 = (gx - b[0]) * (a[1] - b[1]) - (a[0] - b[0]) * (gy - b[1])
        d2 = (gx - c[0]) * (b[1] - c[1]) - (b[0] - c[0]) * (gy - c[1])
        d3 = (gx - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (gy - a[1])
        tol = 1e-12
        neg = (d1 < -tol) | (d2 < -tol) | (d3 < -tol)
        pos = (d1 > tol) | (d2 > tol) | (d3 > tol)
        img[i0:i1, j0:j1] |= ~(neg & pos)
    return img


def descriptor(shape: Shape, resolution: int = DESCRIPTOR_RESOLUTION) -> ShapeDescriptor:
    """Silhouette stack of the shape normalized to the unit bbox."""
    tris = np.concatenate([p.triangles for p in shape.parts])
    bbox_lo = tris.reshape(-1, 3).min(axis=0)
    bbox_hi = tris.reshape(-1, 3).max(axis=0)
    center = (bbox_lo + bbox_hi) / 2.0
    extent = float((bbox_hi - bbox_lo).max())
    if extent <= 0.0:
        extent = 1.0
    normalized = (tris - center) / extent

    images = []
    for direction in view_directions():
        u, w = _view_basis(direction)
        tri2d = np.stack([normalized @ u, normalized @ w], axis=-1)
        images.append(_rasterize(tri2d, resolution))
    return ShapeDescriptor(silhouettes=np.stack(images))


def descriptor_distance(a: ShapeDescriptor, b: ShapeDescriptor) -> float:
    """Mean per-view fraction of differing silhouette pixels."""
    diff = a.silhouettes ^ b.silhouettes
    per_view = diff.reshape(len(diff), -1).mean(axis=1)
    return float(per_view.mean())


def distance_matrix(descriptors: list[ShapeDescriptor]) -> np.ndarray:
    n = len(descriptors)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = descriptor_distance(descriptors[i], descriptors[j])
            out[i, j] = out[j, i] = d
    return out


def thumbnail_image(shape: Shape, resolution: int = DESCRIPTOR_RESOLUTION):
    """2x2 composite of four silhouettes as a PIL image (for the gallery)."""
    from PIL import Image

    desc = descriptor(shape, resolution)
    picks = desc.silhouettes[[0, 3, 6, 9]]
    rows = [np.concatenate([picks[0], picks[1]], axis=1),
            np.concatenate([picks[2], picks[3]], axis=1)]
    grid = np.concatenate(rows, axis=0)
    # Transpose to image convention (x right, y up) and paint white on dark.
    pixels = np.where(grid.T[::-1], 235, 24).astype(np.uint8)
    return Image.fromarray(pixels, mode="L").resize((resolution * 4, resolution * 4),
                                                    Image.NEAREST)
