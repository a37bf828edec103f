"""Functionality models, part labeling, and partial matching."""

from .constraints import (
    GROUND_BAND_FRACTION,
    check_all_functional_spaces,
    check_functional_space,
    check_stability,
)
from .matching import (
    DEFAULT_BEAM_WIDTH,
    MULTI_FUNCTION_THRESHOLD,
    CandidateEvaluation,
    PartialMatchResult,
    SimplifiedMatchResult,
    SubsetScorer,
    multi_functionality_score,
    partial_match,
    plausibility_score,
    provenance_subsets,
    simplified_partial_match,
)
from .models import (
    BACKGROUND_PATCH,
    LABEL_THRESHOLD,
    SURFACE_SAMPLE_COUNT,
    CategoryModel,
    ClearanceSpec,
    ProtoPatchSpec,
    ReferenceCategoryModel,
    ScoreDistributions,
    SurfaceSample,
    WeightField,
    label_parts,
    load_models,
    models_for,
    normalize_score,
    predict_proto_patches,
    raw_functionality_score,
    sample_shape,
    subset_frame,
)

__all__ = [
    "BACKGROUND_PATCH",
    "DEFAULT_BEAM_WIDTH",
    "GROUND_BAND_FRACTION",
    "LABEL_THRESHOLD",
    "MULTI_FUNCTION_THRESHOLD",
    "SURFACE_SAMPLE_COUNT",
    "CandidateEvaluation",
    "CategoryModel",
    "ClearanceSpec",
    "PartialMatchResult",
    "ProtoPatchSpec",
    "ReferenceCategoryModel",
    "ScoreDistributions",
    "SimplifiedMatchResult",
    "SubsetScorer",
    "SurfaceSample",
    "WeightField",
    "check_all_functional_spaces",
    "check_functional_space",
    "check_stability",
    "label_parts",
    "load_models",
    "models_for",
    "multi_functionality_score",
    "normalize_score",
    "partial_match",
    "plausibility_score",
    "predict_proto_patches",
    "provenance_subsets",
    "raw_functionality_score",
    "sample_shape",
    "simplified_partial_match",
    "subset_frame",
]
