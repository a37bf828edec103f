"""Category functionality models and part labeling.

A category model exposes proto-patch weight fields over a surface point
sample, a raw functionality score for any part subset viewed as a
standalone shape, per-label clearance volumes, and empirical score
distributions for cross-category normalization.

The shipped reference model is purely geometric: each proto-patch is a
predicate over sample points (height band above the local ground,
normal direction cone), the raw score sums required-patch coverage
weighted by how well the patch sits in its expected height band, and
training distributions come from scoring the shipped fixture corpus.
A learned model can plug into the same interface.
"""

from __future__ import annotations

import abc
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from weakref import WeakKeyDictionary

import numpy as np

from ..errors import NoApplicableModel, UnknownLabel
from ..geometry import Aabb, stable_seed, surface_sample, union_bbox
from ..shape_model import Part, Shape

# Points whose best proto-patch weight share stays below this leave the
# part unlabeled.
LABEL_THRESHOLD = 0.5
SURFACE_SAMPLE_COUNT = 2048

# Weight field label for surface area not claimed by any proto-patch.
BACKGROUND_PATCH = ""


# ------------------------------------------------------------------
# Surface samples
# ------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceSample:
    """Area-uniform point sample of a whole shape, tagged per part."""

    points: np.ndarray        # (n, 3)
    normals: np.ndarray       # (n, 3)
    part_index: np.ndarray    # (n,) indices into part_ids
    part_ids: tuple[str, ...]

    def mask_for(self, subset: frozenset[str] | set[str]) -> np.ndarray:
        wanted = np.array([pid in subset for pid in self.part_ids])
        return wanted[self.part_index]


_sample_cache: "WeakKeyDictionary[Shape, dict[int, SurfaceSample]]" = WeakKeyDictionary()


def sample_shape(shape: Shape, count: int = SURFACE_SAMPLE_COUNT) -> SurfaceSample:
    """Deterministic area-uniform sample of the shape's surface."""
    per_shape = _sample_cache.setdefault(shape, {})
    if count in per_shape:
        return per_shape[count]
    tris = np.concatenate([p.triangles for p in shape.parts])
    owner = np.concatenate([np.full(len(p.triangles), i) for i, p in enumerate(shape.parts)])
    rng = np.random.default_rng(stable_seed(shape.id, "surface-sample", count))
    points, normals, tri_idx = surface_sample(tris, count, rng)
    sample = SurfaceSample(points=points, normals=normals,
                           part_index=owner[tri_idx],
                           part_ids=tuple(p.id for p in shape.parts))
    per_shape[count] = sample
    return sample


# ------------------------------------------------------------------
# Weight fields and score distributions
# ------------------------------------------------------------------

@dataclass(frozen=True)
class WeightField:
    """Per-sample-point membership weights of one proto-patch."""

    patch_label: str
    weights: np.ndarray  # (n,) in [0, 1]


@dataclass(frozen=True)
class ScoreDistributions:
    """Empirical score CDFs of training shapes inside/outside a category."""

    inside_scores: np.ndarray
    outside_scores: np.ndarray
    inside_weight: float
    outside_weight: float

    def __post_init__(self):
        object.__setattr__(self, "inside_scores",
                           np.sort(np.asarray(self.inside_scores, dtype=np.float64)))
        object.__setattr__(self, "outside_scores",
                           np.sort(np.asarray(self.outside_scores, dtype=np.float64)))
        if len(self.inside_scores) == 0 or len(self.outside_scores) == 0:
            raise ValueError("score distributions need non-empty train score lists")
        if not math.isclose(self.inside_weight + self.outside_weight, 1.0, rel_tol=1e-9):
            raise ValueError("inside and outside weights must sum to 1")

    @staticmethod
    def from_scores(inside: list[float], outside: list[float]) -> "ScoreDistributions":
        total = len(inside) + len(outside)
        return ScoreDistributions(
            inside_scores=np.asarray(inside), outside_scores=np.asarray(outside),
            inside_weight=len(inside) / total, outside_weight=len(outside) / total)


def normalize_score(dist: ScoreDistributions, raw: float) -> float:
    """Weighted empirical-CDF normalization: inclusive P(train <= raw)
    against the inside and outside distributions."""
    p_inside = float(np.searchsorted(dist.inside_scores, raw, side="right")) / len(dist.inside_scores)
    p_outside = float(np.searchsorted(dist.outside_scores, raw, side="right")) / len(dist.outside_scores)
    return dist.inside_weight * p_inside + dist.outside_weight * p_outside


# ------------------------------------------------------------------
# Model interface
# ------------------------------------------------------------------

class CategoryModel(abc.ABC):
    """Functionality scorer for one shape category."""

    category: str
    distributions: ScoreDistributions | None

    @property
    @abc.abstractmethod
    def proto_patch_labels(self) -> tuple[str, ...]:
        """Proto-patch labels in evaluation order (no background)."""

    @abc.abstractmethod
    def patch_affinities(self, points: np.ndarray, normals: np.ndarray,
                         z_floor: float) -> np.ndarray:
        """(n_patches, n_points) membership in [0, 1], rows matching
        proto_patch_labels. Heights are measured from z_floor."""

    @abc.abstractmethod
    def raw_score_points(self, points: np.ndarray, normals: np.ndarray,
                         z_floor: float) -> float:
        """Raw functionality score of a point set viewed as one shape."""

    @property
    @abc.abstractmethod
    def functional_space_labels(self) -> frozenset[str]:
        """Labels for which this model defines a clearance volume."""

    @abc.abstractmethod
    def functional_space(self, label: str, patch_bbox: Aabb) -> Aabb:
        """Clearance box required by a functional patch with that bbox."""

    def normalized_score(self, raw: float) -> float:
        if self.distributions is None:
            raise ValueError(f"model {self.category!r} has no fitted distributions")
        return normalize_score(self.distributions, raw)


# ------------------------------------------------------------------
# Reference geometric model
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ProtoPatchSpec:
    """Geometric predicate defining one proto-patch."""

    label: str
    height_band: tuple[float, float]       # world units above the local ground
    normal_axis: tuple[float, float, float]
    max_angle_deg: float
    min_angle_deg: float = 0.0
    area_range: tuple[float, float] = (0.05, 0.5)
    required: bool = True

    def membership(self, points: np.ndarray, normals: np.ndarray,
                   z_floor: float) -> np.ndarray:
        h = points[:, 2] - z_floor
        in_band = (h >= self.height_band[0]) & (h <= self.height_band[1])
        axis = np.asarray(self.normal_axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        cos = normals @ axis
        cos = np.clip(cos, -1.0, 1.0)
        angle = np.degrees(np.arccos(cos))
        in_cone = (angle >= self.min_angle_deg) & (angle <= self.max_angle_deg)
        return (in_band & in_cone).astype(np.float64)


@dataclass(frozen=True)
class ClearanceSpec:
    """Axis-aligned clearance box extruded above a functional patch."""

    height_factor: float     # box height = factor * mean horizontal patch extent
    footprint_scale: float   # patch footprint shrink before extrusion
    gap_fraction: float      # gap below the box, as a fraction of its height

    def box_above(self, patch_bbox: Aabb) -> Aabb:
        ext = patch_bbox.extents
        width = float((ext[0] + ext[1]) / 2.0)
        height = max(self.height_factor * width, 1e-9)
        center = patch_bbox.center
        half = ext[:2] * self.footprint_scale / 2.0
        z0 = patch_bbox.hi[2] + self.gap_fraction * height
        lo = np.array([center[0] - half[0], center[1] - half[1], z0])
        hi = np.array([center[0] + half[0], center[1] + half[1], z0 + height])
        return Aabb(lo, hi)


class ReferenceCategoryModel(CategoryModel):
    """Deterministic geometric stand-in for a learned category model."""

    def __init__(self, config: dict):
        self.category = config["category"]
        self.patches = tuple(
            ProtoPatchSpec(
                label=p["label"],
                height_band=tuple(p["height_band"]),
                normal_axis=tuple(p["normal_axis"]),
                max_angle_deg=float(p["max_angle_deg"]),
                min_angle_deg=float(p.get("min_angle_deg", 0.0)),
                area_range=tuple(p["area_range"]),
                required=bool(p.get("required", True)),
            )
            for p in config["proto_patches"]
        )
        self.clearances = {
            label: ClearanceSpec(
                height_factor=float(spec["height_factor"]),
                footprint_scale=float(spec["footprint_scale"]),
                gap_fraction=float(spec.get("gap_fraction", 0.02)),
            )
            for label, spec in config.get("functional_spaces", {}).items()
        }
        self.fixtures_inside = tuple(config.get("fixtures_inside", ()))
        self.fixtures_outside = tuple(config.get("fixtures_outside", ()))
        self.distributions: ScoreDistributions | None = None

    @property
    def proto_patch_labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.patches)

    @property
    def required_labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.patches if p.required)

    def patch_affinities(self, points, normals, z_floor):
        return np.stack([p.membership(points, normals, z_floor) for p in self.patches])

    def raw_score_points(self, points, normals, z_floor) -> float:
        if len(points) == 0:
            return 0.0
        score = 0.0
        for patch in self.patches:
            if not patch.required:
                continue
            member = patch.membership(points, normals, z_floor)
            fraction = float(member.mean())
            if fraction <= 0.0:
                continue
            lo, hi = patch.area_range
            if fraction <= hi:
                coverage = min(1.0, fraction / lo)
            else:
                coverage = max(0.0, 1.0 - (fraction - hi) / hi)
            heights = points[member > 0.0, 2] - z_floor
            band_center = (patch.height_band[0] + patch.height_band[1]) / 2.0
            halfwidth = (patch.height_band[1] - patch.height_band[0]) / 2.0
            if halfwidth > 0.0:
                centering = 1.0 - min(1.0, abs(float(heights.mean()) - band_center) / halfwidth)
            else:
                centering = 1.0
            score += coverage * (0.5 + 0.5 * centering)
        return score

    @property
    def functional_space_labels(self) -> frozenset[str]:
        return frozenset(self.clearances)

    def functional_space(self, label: str, patch_bbox: Aabb) -> Aabb:
        if label not in self.clearances:
            raise UnknownLabel(
                f"model {self.category!r} defines no functional space for {label!r}")
        return self.clearances[label].box_above(patch_bbox)

    def fit(self, corpus: dict[str, Shape]) -> "ReferenceCategoryModel":
        """Derive the normalization distributions by scoring fixtures."""
        inside = [raw_functionality_score(self, corpus[sid]) for sid in self.fixtures_inside]
        outside = [raw_functionality_score(self, corpus[sid]) for sid in self.fixtures_outside]
        self.distributions = ScoreDistributions.from_scores(inside, outside)
        return self


# ------------------------------------------------------------------
# Prediction, labeling, scoring
# ------------------------------------------------------------------

def subset_frame(shape: Shape, part_ids: frozenset[str] | None = None) -> tuple[Aabb, float]:
    """Bounding box and ground height of a part subset viewed standalone."""
    ids = frozenset(part_ids) if part_ids is not None else frozenset(shape.part_ids)
    boxes = [p.bbox for p in shape.parts if p.id in ids]
    box = union_bbox(boxes)
    return box, float(box.lo[2])


def predict_proto_patches(model: CategoryModel, shape: Shape,
                          n_points: int = SURFACE_SAMPLE_COUNT) -> list[WeightField]:
    """Proto-patch weight fields over a fresh surface sample of the shape.

    Per point, patch weights plus an explicit background field sum to 1.
    A patch whose surface-area share falls below half its plausible
    minimum is treated as absent (all-zero field) so that slivers of
    band overlap cannot claim labels.
    """
    if n_points < 256:
        raise ValueError("n_points must be at least 256")
    sample = sample_shape(shape, n_points)
    _, z_floor = subset_frame(shape)
    affinity = model.patch_affinities(sample.points, sample.normals, z_floor)
    if hasattr(model, "patches"):
        for i, patch in enumerate(model.patches):
            if affinity[i].mean() < 0.5 * patch.area_range[0]:
                affinity[i] = 0.0
    total = affinity.sum(axis=0)
    over = total > 1.0
    weights = np.where(over[None, :], affinity / np.where(over, total, 1.0)[None, :], affinity)
    background = np.where(over, 0.0, 1.0 - total)
    fields = [WeightField(patch_label=label, weights=weights[i])
              for i, label in enumerate(model.proto_patch_labels)]
    fields.append(WeightField(patch_label=BACKGROUND_PATCH, weights=background))
    return fields


def label_parts(shape: Shape, fields: list[WeightField],
                n_points: int = SURFACE_SAMPLE_COUNT) -> Shape:
    """Assign each part the label of the proto-patch holding the largest
    share of the patch's weight mass; below the 0.5 threshold the part
    stays unlabeled.

    Share ties (a part owning two whole patches) break toward the patch
    covering more of the part's surface, then by label name.
    """
    sample = sample_shape(shape, n_points)
    new_parts: list[Part] = []
    for i, part in enumerate(shape.parts):
        mask = sample.part_index == i
        n_in_part = max(int(mask.sum()), 1)
        candidates: list[tuple[float, float, str]] = []
        for field in fields:
            if field.patch_label == BACKGROUND_PATCH:
                continue
            total = float(field.weights.sum())
            if total <= 1e-12:
                continue
            in_part = float(field.weights[mask].sum())
            share = round(in_part / total, 9)
            coverage = in_part / n_in_part
            candidates.append((share, coverage, field.patch_label))
        label: str | None = None
        if candidates:
            share, _, name = max(candidates,
                                 key=lambda c: (c[0], c[1], [-ord(ch) for ch in c[2]]))
            if share >= LABEL_THRESHOLD:
                label = name
        new_parts.append(Part(id=part.id, triangles=part.triangles, label=label))
    return Shape(id=shape.id, parts=new_parts, contacts=shape.contacts,
                 symmetry_groups=shape.symmetry_groups,
                 categories=shape.categories, provenance=shape.provenance)


def raw_functionality_score(model: CategoryModel, shape: Shape,
                            part_ids: frozenset[str] | None = None,
                            sample: SurfaceSample | None = None) -> float:
    """Raw score of a part subset evaluated as an individual shape."""
    ids = frozenset(part_ids) if part_ids is not None else frozenset(shape.part_ids)
    if not ids:
        return 0.0
    if sample is None:
        sample = sample_shape(shape)
    mask = sample.mask_for(ids)
    if not mask.any():
        return 0.0
    _, z_floor = subset_frame(shape, ids)
    return model.raw_score_points(sample.points[mask], sample.normals[mask], z_floor)


# ------------------------------------------------------------------
# Model loading
# ------------------------------------------------------------------

def _config_paths(models_dir: Path | None) -> list[Path]:
    if models_dir is not None:
        return sorted(Path(models_dir).glob("*.json"))
    root = resources.files("fame").joinpath("data/models")
    return sorted((Path(str(root)) / name.name for name in root.iterdir()
                   if name.name.endswith(".json")), key=lambda p: p.name)


@lru_cache(maxsize=8)
def _load_models_cached(key: str | None) -> tuple[ReferenceCategoryModel, ...]:
    from ..fixtures import build_corpus

    corpus = {s.id: s for s in build_corpus()}
    models = []
    for path in _config_paths(Path(key) if key else None):
        config = json.loads(Path(path).read_text(encoding="utf-8"))
        models.append(ReferenceCategoryModel(config).fit(corpus))
    return tuple(models)


def load_models(models_dir: Path | str | None = None) -> list[ReferenceCategoryModel]:
    """Load and fit the reference models (shipped configs by default)."""
    return list(_load_models_cached(str(models_dir) if models_dir else None))


def models_for(shape: Shape, models: list[CategoryModel]) -> list[CategoryModel]:
    """Models applicable to a shape via its category set."""
    chosen = [m for m in models if m.category in shape.categories]
    if not chosen:
        raise NoApplicableModel(
            f"shape {shape.id!r} categories {sorted(shape.categories)} match no model")
    return chosen
