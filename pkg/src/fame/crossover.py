"""Part-group exchange and insertion.

Placement of an incoming group runs in two stages: a bounding-box
alignment (translate centers, uniform scale on the source's longest
axis), then a least-squares refinement over matched contact points.
If any matched contact lands farther than 5% of the host shape's bbox
diagonal from its target, the refinement is reverted. Labeled parts
whose cumulative per-axis scaling becomes too lopsided (beyond a factor
of 3 against x) get that axis restored. Transforms never rotate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (
    AlignmentImpossible,
    DegenerateBBox,
    NoAnchorLabels,
    NoContacts,
)
from .geometry import Aabb, min_distance_between_triangle_sets
from .part_groups import PartGroup, enumerate_part_groups
from .shape_model import (
    ContactPoint,
    Part,
    Provenance,
    Shape,
    bbox_of,
    build_relation_graph,
)

# Revert the refined alignment when any matched contact misses by more
# than this fraction of the host shape's bbox diagonal (boundary keeps
# the refinement).
REVERT_DIAG_FRACTION = 0.05
# Restore a labeled part's axis when its cumulative y/x or z/x scale
# ratio (or the reciprocal) exceeds this factor.
PROPORTION_LIMIT = 3.0
# Insertion treats a location as occupied above this bbox IoU.
OCCUPANCY_IOU = 0.3

_SCALE_SKIP_FRACTION = 1e-6
_MIN_SCALE = 1e-9


class PlacementChoice(Enum):
    REFINED = "refined"
    INITIAL = "initial"


@dataclass(frozen=True)
class SimilarityTransform:
    """Per-axis scale followed by translation; no rotation component."""

    translation: np.ndarray  # (3,)
    scale: np.ndarray        # (3,), all components > 0

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64))
        if np.any(self.scale <= 0.0):
            raise ValueError(f"scale must be positive, got {self.scale}")

    @staticmethod
    def identity() -> "SimilarityTransform":
        return SimilarityTransform(np.zeros(3), np.ones(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.translation

    def after(self, first: "SimilarityTransform") -> "SimilarityTransform":
        """Transform equal to applying ``first`` then ``self``."""
        return SimilarityTransform(
            translation=self.scale * first.translation + self.translation,
            scale=self.scale * first.scale,
        )


@dataclass(frozen=True)
class ContactMatch:
    """The n = min(n_src, n_dst) closest source-to-target contact pairs."""

    src_points: np.ndarray   # (n, 3)
    dst_points: np.ndarray   # (n, 3)
    src_indices: tuple[int, ...]
    dst_indices: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.src_points)

    @property
    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.src_points[i], self.dst_points[i]) for i in range(self.n)]


# ------------------------------------------------------------------
# Placement stages
# ------------------------------------------------------------------

def initial_alignment(src_bbox: Aabb, dst_bbox: Aabb) -> SimilarityTransform:
    """Align bbox centers; scale the source's longest axis to the
    destination's extent on that axis, uniformly on all axes."""
    src_ext = src_bbox.extents
    axis = int(np.argmax(src_ext))
    if src_ext[axis] <= 0.0:
        raise DegenerateBBox("source group bbox has zero extent on its longest axis")
    dst_ext = dst_bbox.extents
    if dst_ext[axis] > 0.0:
        factor = dst_ext[axis] / src_ext[axis]
    else:
        # Destination flat on that axis: fall back to the diagonal ratio.
        factor = dst_bbox.diagonal / src_bbox.diagonal
    factor = max(factor, _MIN_SCALE)
    scale = np.full(3, factor)
    translation = dst_bbox.center - scale * src_bbox.center
    return SimilarityTransform(translation=translation, scale=scale)


def match_contacts(src_points: np.ndarray, dst_points: np.ndarray) -> ContactMatch:
    """Greedy nearest matching, keeping the n closest pairs.

    Each source point maps to its nearest target (targets may repeat);
    ties break by (source index, target index).
    """
    src = np.asarray(src_points, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst_points, dtype=np.float64).reshape(-1, 3)
    if len(src) == 0 or len(dst) == 0:
        raise NoContacts("contact matching needs non-empty point sets on both sides")
    d = np.linalg.norm(src[:, None, :] - dst[None, :, :], axis=2)
    nearest = d.argmin(axis=1)  # first index on ties
    dist = d[np.arange(len(src)), nearest]
    order = sorted(range(len(src)), key=lambda i: (dist[i], i, int(nearest[i])))
    keep = order[:min(len(src), len(dst))]
    return ContactMatch(
        src_points=src[keep],
        dst_points=dst[nearest[keep]],
        src_indices=tuple(keep),
        dst_indices=tuple(int(nearest[i]) for i in keep),
    )


def refined_alignment(match: ContactMatch) -> SimilarityTransform:
    """Least-squares translate+scale bringing matched sources onto targets.

    Translation aligns centroids. The per-axis scale is the average of
    the per-pair scalings about the source centroid, weighted by squared
    source offset — the weighting that minimizes the summed squared
    contact error. Axes where every source offset is negligible keep
    scale 1, so a single pair yields a pure translation.
    """
    src = match.src_points
    dst = match.dst_points
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    x = src - c_src
    y = dst - c_dst
    cloud_diag = float(np.linalg.norm(src.max(axis=0) - src.min(axis=0)))
    threshold = _SCALE_SKIP_FRACTION * cloud_diag

    scale = np.ones(3)
    for axis in range(3):
        mask = np.abs(x[:, axis]) >= threshold if cloud_diag > 0.0 else np.zeros(len(x), dtype=bool)
        if mask.any():
            sx2 = float((x[mask, axis] ** 2).sum())
            sxy = float((x[mask, axis] * y[mask, axis]).sum())
            if sx2 > 0.0:
                scale[axis] = max(sxy / sx2, _MIN_SCALE)
    translation = c_dst - scale * c_src
    return SimilarityTransform(translation=translation, scale=scale)


def placement_residuals(match: ContactMatch, transform: SimilarityTransform) -> np.ndarray:
    return np.linalg.norm(transform.apply(match.src_points) - match.dst_points, axis=1)


def accept_or_revert(match: ContactMatch, refined: SimilarityTransform,
                     shape_bbox_diag: float) -> PlacementChoice:
    """Keep the refinement iff every matched contact lands within
    5% of the shape's bbox diagonal (boundary inclusive)."""
    residuals = placement_residuals(match, refined)
    if residuals.max() <= REVERT_DIAG_FRACTION * shape_bbox_diag:
        return PlacementChoice.REFINED
    return PlacementChoice.INITIAL


def restore_proportions(part: Part, cumulative_scale: np.ndarray) -> Part:
    """Undo lopsided scaling of a labeled part.

    If the cumulative y/x or z/x scale ratio (either direction) exceeds
    the factor-3 limit, that axis is rescaled about the part's bbox
    center until the ratio is 1. Unlabeled parts pass through.
    """
    if part.label is None:
        return part
    scale = np.asarray(cumulative_scale, dtype=np.float64)
    factors = np.ones(3)
    for axis in (1, 2):
        ratio = scale[axis] / scale[0]
        if ratio > PROPORTION_LIMIT or 1.0 / ratio > PROPORTION_LIMIT:
            factors[axis] = 1.0 / ratio
    if np.all(factors == 1.0):
        return part
    center = part.bbox.center
    tri = (part.triangles - center) * factors + center
    return replace(part, triangles=tri)


# ------------------------------------------------------------------
# Boundary contact bookkeeping
# ------------------------------------------------------------------

@dataclass(frozen=True)
class _FlatContact:
    point: np.ndarray
    inside_part: str
    outside_part: str
    kind: str


def _boundary_points(shape: Shape, group_ids: frozenset[str]) -> list[_FlatContact]:
    """Contact points connecting the group to the rest of its shape,
    flattened to individual points in deterministic order."""
    out: list[_FlatContact] = []
    for contact in shape.contacts:
        a_in = contact.part_a in group_ids
        b_in = contact.part_b in group_ids
        if a_in == b_in:
            continue
        inside = contact.part_a if a_in else contact.part_b
        outside = contact.part_b if a_in else contact.part_a
        for pt in contact.points:
            out.append(_FlatContact(point=pt, inside_part=inside,
                                    outside_part=outside, kind=contact.kind))
    return out


def _kind_for_count(count: int) -> str | None:
    return {1: "single", 2: "pair", 4: "quad"}.get(count)


def _nearest_incoming_part(point: np.ndarray, placed: dict[str, Part]) -> str:
    from .geometry import closest_points_on_triangles

    best = (np.inf, "")
    for pid in sorted(placed):
        tris = placed[pid].triangles
        cp = closest_points_on_triangles(tris, np.broadcast_to(point, (len(tris), 3)))
        d = float(np.linalg.norm(cp - point, axis=1).min())
        if d < best[0]:
            best = (d, pid)
    return best[1]


def _rewired_contacts(matched: ContactMatch | None,
                      src_flats: list[_FlatContact],
                      dst_flats: list[_FlatContact],
                      placed_parts: dict[str, Part],
                      incoming_rename: dict[str, str],
                      host_rename: dict[str, str]) -> list[ContactPoint]:
    """Every freed host boundary contact becomes a connection of the
    incoming group, anchored at the freed position.

    Matched pairs connect to the incoming part that owned the matched
    source contact; leftover freed contacts attach to the nearest placed
    incoming part, so the host's structure graph stays intact.
    """
    grouped: dict[tuple[str, str], list[np.ndarray]] = {}
    taken: set[int] = set()
    if matched is not None:
        for si, di in zip(matched.src_indices, matched.dst_indices):
            part_in = incoming_rename[src_flats[si].inside_part]
            part_out = host_rename[dst_flats[di].outside_part]
            grouped.setdefault((part_in, part_out), []).append(dst_flats[di].point)
            taken.add(di)
    for di, flat in enumerate(dst_flats):
        if di in taken:
            continue
        owner = _nearest_incoming_part(flat.point, placed_parts)
        part_in = incoming_rename[owner]
        part_out = host_rename[flat.outside_part]
        grouped.setdefault((part_in, part_out), []).append(flat.point)
    contacts: list[ContactPoint] = []
    for (part_in, part_out), points in sorted(grouped.items()):
        kind = _kind_for_count(len(points))
        if kind is not None:
            contacts.append(ContactPoint(part_a=part_in, part_b=part_out,
                                         kind=kind, points=np.stack(points)))
        else:
            for pt in points:
                contacts.append(ContactPoint(part_a=part_in, part_b=part_out,
                                             kind="single", points=pt[None, :]))
    return contacts


# ------------------------------------------------------------------
# Exchange
# ------------------------------------------------------------------

def _restrict_symmetry(groups: list[frozenset[str]], keep: set[str],
                       rename: dict[str, str]) -> list[frozenset[str]]:
    out = []
    for g in groups:
        kept = frozenset(rename[pid] for pid in g if pid in keep)
        if len(kept) >= 2:
            out.append(kept)
    return out


def _replace_group(host: Shape, removed: PartGroup,
                   donor: Shape, incoming: PartGroup,
                   child_id: str) -> Shape:
    """One offspring: ``incoming`` (from donor) placed where ``removed`` was."""
    removed_ids = removed.part_ids
    incoming_ids = incoming.part_ids
    remaining_ids = [pid for pid in host.part_ids if pid not in removed_ids]

    try:
        src_bbox = bbox_of(incoming_ids, donor)
        dst_bbox = bbox_of(removed_ids, host)
        t_initial = initial_alignment(src_bbox, dst_bbox)
    except DegenerateBBox as exc:
        raise AlignmentImpossible(str(exc)) from exc

    src_flats = _boundary_points(donor, incoming_ids)
    dst_flats = _boundary_points(host, removed_ids)

    matched = None
    final = t_initial
    choice = PlacementChoice.INITIAL
    if src_flats and dst_flats:
        src_pts = t_initial.apply(np.stack([f.point for f in src_flats]))
        dst_pts = np.stack([f.point for f in dst_flats])
        matched = match_contacts(src_pts, dst_pts)
        t_refined = refined_alignment(matched)
        choice = accept_or_revert(matched, t_refined, host.bbox.diagonal)
        if choice is PlacementChoice.REFINED:
            final = t_refined.after(t_initial)

    host_rename = {pid: f"{host.id}/{pid}" for pid in host.part_ids}
    incoming_rename = {pid: f"{donor.id}/{pid}" for pid in donor.part_ids}

    new_parts: list[Part] = []
    for pid in remaining_ids:
        new_parts.append(host.part(pid).renamed(host_rename[pid]))
    placed: dict[str, Part] = {}
    for pid in sorted(incoming_ids):
        part = donor.part(pid).transformed(final.scale, final.translation)
        part = restore_proportions(part, final.scale)
        placed[pid] = part
        new_parts.append(part.renamed(incoming_rename[pid]))

    contacts: list[ContactPoint] = []
    remaining_set = set(remaining_ids)
    for c in host.contacts:
        if c.part_a in remaining_set and c.part_b in remaining_set:
            contacts.append(ContactPoint(part_a=host_rename[c.part_a],
                                         part_b=host_rename[c.part_b],
                                         kind=c.kind, points=c.points))
    for c in donor.contacts:
        if c.part_a in incoming_ids and c.part_b in incoming_ids:
            contacts.append(ContactPoint(part_a=incoming_rename[c.part_a],
                                         part_b=incoming_rename[c.part_b],
                                         kind=c.kind, points=final.apply(c.points)))
    if dst_flats:
        contacts.extend(_rewired_contacts(matched, src_flats, dst_flats, placed,
                                          incoming_rename, host_rename))

    symmetry = _restrict_symmetry(host.symmetry_groups, remaining_set, host_rename)
    symmetry += _restrict_symmetry(donor.symmetry_groups, set(incoming_ids), incoming_rename)

    provenance = Provenance(
        parents=(host.id, donor.id),
        operation="exchange",
        removed_group=tuple(sorted(removed_ids)),
        incoming_group=tuple(sorted(incoming_ids)),
        incoming_origin=incoming.origin,
        host_parts=tuple(host_rename[pid] for pid in remaining_ids),
        incoming_parts=tuple(incoming_rename[pid] for pid in sorted(incoming_ids)),
        placement=choice.value,
    )
    return Shape(id=child_id, parts=new_parts, contacts=contacts,
                 symmetry_groups=symmetry,
                 categories=host.categories | donor.categories,
                 provenance=provenance)


def exchange_into(host: Shape, removed: PartGroup,
                  donor: Shape, incoming: PartGroup,
                  child_id: str | None = None) -> Shape:
    """One-sided exchange: the donor's group replaces ``removed`` on the host."""
    if not removed.part_ids or not incoming.part_ids:
        raise AlignmentImpossible("exchange requires two non-null part groups")
    if child_id is None:
        child_id = f"{host.id}+{donor.id}"
    return _replace_group(host, removed, donor, incoming, child_id)


def exchange(shape_a: Shape, group_a: PartGroup,
             shape_b: Shape, group_b: PartGroup,
             child_ids: tuple[str, str] | None = None) -> tuple[Shape, Shape]:
    """Swap two part groups, producing two offspring.

    The first offspring is ``shape_a`` with ``group_a`` replaced by
    ``group_b``; the second is the mirror. Meshes are never merged.
    """
    if not group_a.part_ids or not group_b.part_ids:
        raise AlignmentImpossible("exchange requires two non-null part groups")
    if child_ids is None:
        child_ids = (f"{shape_a.id}+{shape_b.id}", f"{shape_b.id}+{shape_a.id}")
    first = _replace_group(shape_a, group_a, shape_b, group_b, child_ids[0])
    second = _replace_group(shape_b, group_b, shape_a, group_a, child_ids[1])
    return first, second


# ------------------------------------------------------------------
# Insertion
# ------------------------------------------------------------------

def _part_centroid(shape: Shape, part_id: str) -> np.ndarray:
    return shape.part(part_id).bbox.center


def _group_centroid(shape: Shape, ids: frozenset[str]) -> np.ndarray:
    return bbox_of(ids, shape).center


def anchor_vectors(group: PartGroup, source: Shape) -> dict[str, np.ndarray]:
    """Per-label mean translation vector from the group's centroid to its
    labeled neighbors in the source shape."""
    graph = build_relation_graph(source)
    adj = graph.adjacency()
    neighbors: set[str] = set()
    for pid in group.part_ids:
        neighbors |= adj[pid]
    neighbors -= group.part_ids
    center = _group_centroid(source, group.part_ids)
    per_label: dict[str, list[np.ndarray]] = {}
    for pid in sorted(neighbors):
        label = source.label_of(pid)
        if label is not None:
            per_label.setdefault(label, []).append(_part_centroid(source, pid) - center)
    return {label: np.mean(np.stack(vs), axis=0) for label, vs in sorted(per_label.items())}


def insert(group: PartGroup, source: Shape, host: Shape,
           child_id: str | None = None) -> Shape:
    """Insert a part group into a host at the location whose label context
    best matches the group's context in its source shape.

    If the chosen location overlaps an existing part group of the host
    (bbox IoU > 0.3), a standard exchange with that group happens instead.
    """
    if not group.part_ids:
        raise AlignmentImpossible("cannot insert a null part group")
    if child_id is None:
        child_id = f"{host.id}+{source.id}"

    vectors = anchor_vectors(group, source)
    host_labels = host.labels()
    anchors = sorted(set(vectors) & host_labels)
    if not anchors:
        raise NoAnchorLabels(
            f"host {host.id!r} shares no anchor label with group context "
            f"{sorted(vectors)}")

    source_avg = np.mean(np.stack([vectors[lab] for lab in anchors]), axis=0)
    parts_by_label = {
        lab: [p.id for p in host.parts if p.label == lab] for lab in anchors
    }

    candidates: list[np.ndarray] = []
    for lab in anchors:
        for pid in sorted(parts_by_label[lab]):
            candidates.append(_part_centroid(host, pid) - vectors[lab])

    best_cost = np.inf
    best_pos = candidates[0]
    best_anchor_parts: list[str] = []
    for pos in candidates:
        realized = []
        used_parts = []
        for lab in anchors:
            expected = pos + vectors[lab]
            pid = min(parts_by_label[lab],
                      key=lambda p: (float(np.linalg.norm(_part_centroid(host, p) - expected)), p))
            realized.append(_part_centroid(host, pid) - pos)
            used_parts.append(pid)
        cost = float(np.linalg.norm(np.mean(np.stack(realized), axis=0) - source_avg))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_pos = pos
            best_anchor_parts = used_parts

    translation = best_pos - _group_centroid(source, group.part_ids)
    placed_bbox = Aabb(bbox_of(group.part_ids, source).lo + translation,
                       bbox_of(group.part_ids, source).hi + translation)

    occupied = None
    occupied_iou = OCCUPANCY_IOU
    for host_group in enumerate_part_groups(host):
        iou = placed_bbox.intersection_over_union(bbox_of(host_group.part_ids, host))
        if iou > occupied_iou:
            occupied_iou = iou
            occupied = host_group
    if occupied is not None:
        return _replace_group(host, occupied, source, group, child_id)

    host_rename = {pid: f"{host.id}/{pid}" for pid in host.part_ids}
    incoming_rename = {pid: f"{source.id}/{pid}" for pid in source.part_ids}
    transform = SimilarityTransform(translation=translation, scale=np.ones(3))

    new_parts = [host.part(pid).renamed(host_rename[pid]) for pid in host.part_ids]
    for pid in sorted(group.part_ids):
        part = source.part(pid).transformed(transform.scale, transform.translation)
        new_parts.append(part.renamed(incoming_rename[pid]))

    contacts = [ContactPoint(part_a=host_rename[c.part_a], part_b=host_rename[c.part_b],
                             kind=c.kind, points=c.points)
                for c in host.contacts]
    for c in source.contacts:
        if c.part_a in group.part_ids and c.part_b in group.part_ids:
            contacts.append(ContactPoint(part_a=incoming_rename[c.part_a],
                                         part_b=incoming_rename[c.part_b],
                                         kind=c.kind, points=transform.apply(c.points)))
    # Attach the group to each anchor part at their closest surface points.
    placed_parts = {pid: source.part(pid).transformed(transform.scale, transform.translation)
                    for pid in sorted(group.part_ids)}
    for anchor_pid in sorted(set(best_anchor_parts)):
        anchor_part = host.part(anchor_pid)
        best = (np.inf, None, None)
        for pid, placed in placed_parts.items():
            dist, pa, pb = min_distance_between_triangle_sets(placed.triangles,
                                                              anchor_part.triangles)
            if dist < best[0]:
                best = (dist, pid, (pa + pb) / 2.0)
        _, pid, midpoint = best
        contacts.append(ContactPoint(part_a=incoming_rename[pid],
                                     part_b=host_rename[anchor_pid],
                                     kind="single", points=midpoint[None, :]))

    symmetry = _restrict_symmetry(host.symmetry_groups, set(host.part_ids), host_rename)
    symmetry += _restrict_symmetry(source.symmetry_groups, set(group.part_ids), incoming_rename)

    provenance = Provenance(
        parents=(host.id, source.id),
        operation="insert",
        removed_group=(),
        incoming_group=tuple(sorted(group.part_ids)),
        incoming_origin=group.origin,
        host_parts=tuple(host_rename[pid] for pid in host.part_ids),
        incoming_parts=tuple(incoming_rename[pid] for pid in sorted(group.part_ids)),
        placement="translation",
    )
    return Shape(id=child_id, parts=new_parts, contacts=contacts,
                 symmetry_groups=symmetry,
                 categories=host.categories | source.categories,
                 provenance=provenance)
