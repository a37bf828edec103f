"""Validity constraints on partial shapes: stability and functional space.

Connectivity, the third constraint, lives with the relation graph in
the shape model.
"""

from __future__ import annotations

import numpy as np

from ..geometry import (
    convex_hull_2d,
    point_in_convex_polygon,
    point_to_point_set_distance_2d,
    triangles_intersect_aabb,
    union_bbox,
)
from ..shape_model import Shape
from .models import CategoryModel, SurfaceSample, sample_shape

# Sample points within this fraction of the bbox diagonal above the
# lowest point count as ground-touching.
GROUND_BAND_FRACTION = 0.01


def check_stability(shape: Shape, part_ids: frozenset[str] | None = None,
                    sample: SurfaceSample | None = None) -> bool:
    """Static stability of a part subset viewed as a standalone shape.

    The center of mass (average of the parts' bbox centers) must project
    into the convex polygon of the ground-touching sample points. With
    fewer than three non-collinear ground points the subset is unstable
    unless the center projects within 1% of the diagonal of the ground
    point set itself.
    """
    ids = frozenset(part_ids) if part_ids is not None else frozenset(shape.part_ids)
    if not ids:
        return False
    if sample is None:
        sample = sample_shape(shape)
    mask = sample.mask_for(ids)
    if not mask.any():
        return False
    points = sample.points[mask]

    boxes = [p.bbox for p in shape.parts if p.id in ids]
    center_of_mass = np.mean(np.stack([b.center for b in boxes]), axis=0)
    diag = union_bbox(boxes).diagonal

    z_min = float(points[:, 2].min())
    band = GROUND_BAND_FRACTION * diag
    ground = points[points[:, 2] < z_min + band][:, :2]
    com_xy = center_of_mass[:2]

    hull = convex_hull_2d(ground)
    if len(hull) >= 3:
        tol = 1e-9 * max(diag, 1.0)
        return point_in_convex_polygon(com_xy, hull, tol=tol)
    return point_to_point_set_distance_2d(com_xy, ground) <= band


def check_functional_space(shape: Shape, part_ids: frozenset[str],
                           label: str, model: CategoryModel) -> bool:
    """True iff the clearance volume of the labeled patch in the subset
    is free of triangles from every other part of the full shape."""
    if label not in model.functional_space_labels:
        # Probe with a unit box so the model reports the unknown label.
        model.functional_space(label, union_bbox([p.bbox for p in shape.parts]))
    ids = frozenset(part_ids)
    labeled = [p for p in shape.parts if p.id in ids and p.label == label]
    if not labeled:
        return True
    patch_bbox = union_bbox([p.bbox for p in labeled])
    box = model.functional_space(label, patch_bbox)
    owners = {p.id for p in labeled}
    for part in shape.parts:
        if part.id in owners:
            continue
        if triangles_intersect_aabb(part.triangles, box).any():
            return False
    return True


def check_all_functional_spaces(shape: Shape, part_ids: frozenset[str],
                                model: CategoryModel) -> bool:
    """Clearance check over every subset label the model knows about."""
    labels = {p.label for p in shape.parts
              if p.id in part_ids and p.label is not None}
    for label in sorted(labels & model.functional_space_labels):
        if not check_functional_space(shape, part_ids, label, model):
            return False
    return True
