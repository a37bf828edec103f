"""Functionality partial matching.

The best-supporting part subset of a shape is found with a reverse beam
search: start from the full part set and evaluate subsets obtained by
removing one part at a time. All first-level removals are expanded;
afterwards only the top-w subsets per level are, with w = 2 by default.
Candidate subsets must stay connected and keep their functional spaces
clear; stability may lapse mid-search, so the best fully valid subset
seen anywhere is tracked and returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MissingProvenance
from ..shape_model import RelationGraph, Shape, build_relation_graph, is_connected
from .constraints import check_all_functional_spaces, check_stability
from .models import (
    CategoryModel,
    SurfaceSample,
    models_for,
    raw_functionality_score,
    sample_shape,
)

DEFAULT_BEAM_WIDTH = 2
# A category counts toward the multi-functionality score only above this
# normalized-score threshold.
MULTI_FUNCTION_THRESHOLD = 0.9


@dataclass(frozen=True)
class PartialMatchResult:
    """Best valid part subset for one category model."""

    best_subset: frozenset[str]
    raw_score: float
    normalized_score: float
    category: str


@dataclass(frozen=True)
class CandidateEvaluation:
    name: str
    category: str
    part_ids: frozenset[str]
    valid: bool
    normalized_score: float


@dataclass(frozen=True)
class SimplifiedMatchResult:
    score: float
    evaluations: tuple[CandidateEvaluation, ...]


class SubsetScorer:
    """Caches subset scores and validity checks for one (shape, model)."""

    def __init__(self, shape: Shape, model: CategoryModel,
                 sample: SurfaceSample | None = None,
                 graph: RelationGraph | None = None):
        self.shape = shape
        self.model = model
        self.sample = sample if sample is not None else sample_shape(shape)
        self.graph = graph if graph is not None else build_relation_graph(shape)
        self._raw: dict[frozenset[str], float] = {}
        self._stable: dict[frozenset[str], bool] = {}
        self._admissible: dict[frozenset[str], bool] = {}

    def raw(self, subset: frozenset[str]) -> float:
        if subset not in self._raw:
            self._raw[subset] = raw_functionality_score(
                self.model, self.shape, subset, self.sample)
        return self._raw[subset]

    def normalized(self, subset: frozenset[str]) -> float:
        return self.model.normalized_score(self.raw(subset))

    def stable(self, subset: frozenset[str]) -> bool:
        if subset not in self._stable:
            self._stable[subset] = check_stability(self.shape, subset, self.sample)
        return self._stable[subset]

    def admissible(self, subset: frozenset[str]) -> bool:
        """Connected with clear functional spaces (stability deferred)."""
        if subset not in self._admissible:
            self._admissible[subset] = (
                is_connected(self.graph, subset)
                and check_all_functional_spaces(self.shape, subset, self.model))
        return self._admissible[subset]

    def valid(self, subset: frozenset[str]) -> bool:
        return self.admissible(subset) and self.stable(subset)


def _subset_key(subset: frozenset[str]) -> tuple[str, ...]:
    return tuple(sorted(subset))


def partial_match(shape: Shape, model: CategoryModel,
                  beam_width: int = DEFAULT_BEAM_WIDTH,
                  scorer: SubsetScorer | None = None) -> PartialMatchResult:
    """Reverse beam search for the subset with the best normalized score.

    Ties prefer the lexicographically smaller part-id set. Returns an
    empty subset with score 0 when no subset passes all three checks.
    """
    if scorer is None:
        scorer = SubsetScorer(shape, model)
    full = frozenset(shape.part_ids)

    best_valid: frozenset[str] | None = None
    best_valid_score = -np.inf

    def offer(subset: frozenset[str], score: float) -> None:
        nonlocal best_valid, best_valid_score
        if scorer.stable(subset):
            if score > best_valid_score or (
                    score == best_valid_score and best_valid is not None
                    and _subset_key(subset) < _subset_key(best_valid)):
                best_valid = subset
                best_valid_score = score

    def rank_key(item: tuple[frozenset[str], float]) -> tuple:
        subset, score = item
        return (-score, _subset_key(subset))

    scored: dict[frozenset[str], float] = {}

    def evaluate(subset: frozenset[str]) -> float:
        if subset not in scored:
            scored[subset] = scorer.normalized(subset)
            offer(subset, scored[subset])
        return scored[subset]

    root_admissible = scorer.admissible(full)
    if root_admissible:
        evaluate(full)

    # First level: expand the root unconditionally.
    level = []
    for pid in sorted(full):
        child = full - {pid}
        if child and scorer.admissible(child):
            level.append((child, evaluate(child)))
    level.sort(key=rank_key)

    beam = level[:max(beam_width, 1)]
    while beam:
        children: dict[frozenset[str], float] = {}
        improved = False
        for parent, parent_score in beam:
            for pid in sorted(parent):
                child = parent - {pid}
                if not child or child in children:
                    continue
                if not scorer.admissible(child):
                    continue
                score = evaluate(child)
                children[child] = score
                if score > parent_score:
                    improved = True
        if not children or not improved:
            break
        beam = sorted(children.items(), key=rank_key)[:max(beam_width, 1)]

    if best_valid is None:
        return PartialMatchResult(best_subset=frozenset(), raw_score=0.0,
                                  normalized_score=0.0, category=model.category)
    return PartialMatchResult(
        best_subset=best_valid,
        raw_score=scorer.raw(best_valid),
        normalized_score=best_valid_score,
        category=model.category,
    )


# ------------------------------------------------------------------
# Simplified matching and aggregate scores
# ------------------------------------------------------------------

def provenance_subsets(shape: Shape) -> dict[str, frozenset[str]]:
    """The three candidate subsets of an offspring: whole shape and the
    part sets inherited from each parent."""
    if shape.provenance is None:
        raise MissingProvenance(f"shape {shape.id!r} has no recorded provenance")
    current = frozenset(shape.part_ids)
    return {
        "whole": current,
        "parent_a": frozenset(shape.provenance.host_parts) & current,
        "parent_b": frozenset(shape.provenance.incoming_parts) & current,
    }


def simplified_partial_match(shape: Shape, models: list[CategoryModel],
                             subsets: dict[str, frozenset[str]] | None = None) -> SimplifiedMatchResult:
    """Score only three part sets per model: the whole shape and the two
    parent-derived groups, each gated by the full validity checks."""
    if subsets is None:
        subsets = provenance_subsets(shape)
    evaluations: list[CandidateEvaluation] = []
    best = 0.0
    for model in models:
        scorer = SubsetScorer(shape, model)
        for name in ("whole", "parent_a", "parent_b"):
            subset = subsets[name]
            valid = bool(subset) and scorer.valid(subset)
            score = scorer.normalized(subset) if valid else 0.0
            evaluations.append(CandidateEvaluation(
                name=name, category=model.category, part_ids=subset,
                valid=valid, normalized_score=score))
            if valid and score > best:
                best = score
    return SimplifiedMatchResult(score=best, evaluations=tuple(evaluations))


def plausibility_score(shape: Shape, models: list[CategoryModel],
                       beam_width: int = DEFAULT_BEAM_WIDTH) -> float:
    """Maximum partial-matching score across the shape's category models."""
    applicable = models_for(shape, models)
    return max(partial_match(shape, m, beam_width).normalized_score
               for m in applicable)


def multi_functionality_score(shape: Shape, models: list[CategoryModel],
                              threshold: float = MULTI_FUNCTION_THRESHOLD,
                              beam_width: int = DEFAULT_BEAM_WIDTH) -> int:
    """Number of categories whose partial-matching score exceeds the
    threshold (strictly)."""
    if not models:
        raise ValueError("multi_functionality_score needs at least one model")
    return sum(1 for m in models
               if partial_match(shape, m, beam_width).normalized_score > threshold)
