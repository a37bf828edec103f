"""Generation loop: crossovers over all parent pairs, constraint repair,
diversity selection, scoring, ranking, and parent selection.

For every ordered parent pair (A, B): when A already carries all the
user-required labels, every group of A that has no required label is
exchanged against every group of B; when labels are missing, groups of
B carrying a missing label are added to A (exchange with a free group,
falling back to insertion), and any labels still missing afterwards are
repaired from the pool of all parents' groups. Candidates that cannot
reach the full label set are discarded. Survivors pass through
farthest-point diversity selection before the (expensive) scoring.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .crossover import exchange_into, insert
from .descriptor import ShapeDescriptor, descriptor, distance_matrix
from .errors import AlignmentImpossible, EmptyGeneration, NoAnchorLabels, NoContacts
from .functionality.matching import (
    DEFAULT_BEAM_WIDTH,
    MULTI_FUNCTION_THRESHOLD,
    SubsetScorer,
    partial_match,
    provenance_subsets,
)
from .functionality.models import CategoryModel, load_models
from .part_groups import PartGroup, enumerate_part_groups
from .shape_model import Shape

DIVERSITY_KEEP_FRACTION = 0.5

RANK_PLAUSIBILITY = "plausibility"
RANK_MULTI_FUNCTIONALITY = "multi_functionality"
MODE_FULL = "full"
MODE_SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class EvolutionConfig:
    user_labels: tuple[str, ...] = ()
    max_generations: int = 1
    rng_seed: int = 0
    diversity_keep_fraction: float = DIVERSITY_KEEP_FRACTION
    ranking: str = RANK_PLAUSIBILITY
    scoring_mode: str = MODE_SIMPLIFIED
    top_k: int = 8
    max_pair_offspring: int = 32
    max_generation_size: int = 128
    beam_width: int = DEFAULT_BEAM_WIDTH
    # Geometric-similarity backend; only the alignment-free silhouette
    # descriptor is implemented.
    descriptor: str = "reduced-lfd"

    def __post_init__(self):
        object.__setattr__(self, "user_labels", tuple(sorted(self.user_labels)))
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if not (0.0 < self.diversity_keep_fraction <= 1.0):
            raise ValueError("diversity_keep_fraction must be in (0, 1]")
        if self.ranking not in (RANK_PLAUSIBILITY, RANK_MULTI_FUNCTIONALITY):
            raise ValueError(f"unknown ranking {self.ranking!r}")
        if self.scoring_mode not in (MODE_FULL, MODE_SIMPLIFIED):
            raise ValueError(f"unknown scoring mode {self.scoring_mode!r}")

    def to_dict(self) -> dict:
        return {
            "user_labels": list(self.user_labels),
            "max_generations": self.max_generations,
            "rng_seed": self.rng_seed,
            "diversity_keep_fraction": self.diversity_keep_fraction,
            "ranking": self.ranking,
            "scoring_mode": self.scoring_mode,
            "top_k": self.top_k,
            "max_pair_offspring": self.max_pair_offspring,
            "max_generation_size": self.max_generation_size,
            "beam_width": self.beam_width,
            "descriptor": self.descriptor,
        }

    @staticmethod
    def from_dict(d: dict) -> "EvolutionConfig":
        return EvolutionConfig(
            user_labels=tuple(d.get("user_labels", ())),
            max_generations=int(d.get("max_generations", 1)),
            rng_seed=int(d.get("rng_seed", 0)),
            diversity_keep_fraction=float(d.get("diversity_keep_fraction", DIVERSITY_KEEP_FRACTION)),
            ranking=d.get("ranking", RANK_PLAUSIBILITY),
            scoring_mode=d.get("scoring_mode", MODE_SIMPLIFIED),
            top_k=int(d.get("top_k", 8)),
            max_pair_offspring=int(d.get("max_pair_offspring", 32)),
            max_generation_size=int(d.get("max_generation_size", 128)),
            beam_width=int(d.get("beam_width", DEFAULT_BEAM_WIDTH)),
            descriptor=d.get("descriptor", "reduced-lfd"),
        )


@dataclass
class Generation:
    """A ranked population plus the subset chosen to parent the next one."""

    index: int
    shapes: list[Shape]
    scores: list[float]
    multi_counts: list[int]
    selected: list[str] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "index": self.index,
            "shapes": [
                {
                    "id": s.id,
                    "rank": i,
                    "score": self.scores[i],
                    "multi_functionality": self.multi_counts[i],
                    "labels": sorted(s.labels()),
                    "categories": sorted(s.categories),
                    "part_count": len(s.parts),
                    "provenance": s.provenance.to_dict() if s.provenance else None,
                }
                for i, s in enumerate(self.shapes)
            ],
            "selected": list(self.selected),
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True, indent=2)


Selector = Callable[[Generation], Sequence[str]]


def top_k_selector(k: int) -> Selector:
    """Headless stand-in for interactive selection: keep the k best."""

    def select(generation: Generation) -> Sequence[str]:
        return [s.id for s in generation.shapes[:k]]

    return select


# ------------------------------------------------------------------
# Diversity selection
# ------------------------------------------------------------------

def diversity_selection(shapes: list[Shape],
                        keep_fraction: float = DIVERSITY_KEEP_FRACTION,
                        descriptors: list[ShapeDescriptor] | None = None) -> list[Shape]:
    """Farthest-point sampling on descriptor distances.

    Seeded at the most distant pair; returns ceil(keep_fraction * n)
    shapes in selection order, breaking ties by shape id.
    """
    n = len(shapes)
    if n == 0:
        return []
    keep = math.ceil(keep_fraction * n)
    if n == 1 or keep >= n:
        return list(shapes[:keep]) if keep < n else list(shapes)
    if descriptors is None:
        descriptors = [descriptor(s) for s in shapes]
    dist = distance_matrix(descriptors)

    ids = [s.id for s in shapes]
    best_pair = None
    best_pair_key: tuple[str, str] | None = None
    best_d = -1.0
    for i in range(n):
        for j in range(i + 1, n):
            key = tuple(sorted((ids[i], ids[j])))
            if dist[i, j] > best_d or (dist[i, j] == best_d and key < best_pair_key):
                best_d = dist[i, j]
                best_pair = (i, j) if ids[i] <= ids[j] else (j, i)
                best_pair_key = key

    selected = [best_pair[0], best_pair[1]]
    chosen = set(selected)
    while len(selected) < keep:
        best_idx = None
        best_min = -1.0
        for i in range(n):
            if i in chosen:
                continue
            dmin = min(dist[i, j] for j in selected)
            if dmin > best_min or (dmin == best_min and ids[i] < ids[best_idx]):
                best_min = dmin
                best_idx = i
        selected.append(best_idx)
        chosen.add(best_idx)
    return [shapes[i] for i in selected[:keep]]


# ------------------------------------------------------------------
# Scoring and ranking
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ShapeScoreReport:
    per_model: dict[str, float]
    plausibility: float
    multi_count: int


def score_shape(shape: Shape, models: list[CategoryModel], mode: str,
                beam_width: int = DEFAULT_BEAM_WIDTH) -> ShapeScoreReport:
    """Per-model normalized scores plus the two aggregate measures.

    Full mode runs the beam search per model; simplified mode scores the
    three provenance subsets (whole shape and the two parent sides).
    """
    per_model: dict[str, float] = {}
    if mode == MODE_FULL or shape.provenance is None:
        for model in models:
            per_model[model.category] = partial_match(shape, model, beam_width).normalized_score
    else:
        subsets = provenance_subsets(shape)
        for model in models:
            scorer = SubsetScorer(shape, model)
            best = 0.0
            for subset in subsets.values():
                if subset and scorer.valid(subset):
                    best = max(best, scorer.normalized(subset))
            per_model[model.category] = best
    applicable = [per_model[m.category] for m in models if m.category in shape.categories]
    plausibility = max(applicable) if applicable else 0.0
    multi = sum(1 for v in per_model.values() if v > MULTI_FUNCTION_THRESHOLD)
    return ShapeScoreReport(per_model=per_model, plausibility=plausibility, multi_count=multi)


def rank(shapes: list[Shape], scores: list[float], multi_counts: list[int],
         mode: str = RANK_PLAUSIBILITY) -> list[int]:
    """Indices in rank order: plausibility descending, or lexicographic
    (multi-functionality, plausibility) descending; ties by shape id."""
    idx = list(range(len(shapes)))
    if mode == RANK_MULTI_FUNCTIONALITY:
        idx.sort(key=lambda i: (-multi_counts[i], -scores[i], shapes[i].id))
    else:
        idx.sort(key=lambda i: (-scores[i], shapes[i].id))
    return idx


# ------------------------------------------------------------------
# Offspring construction
# ------------------------------------------------------------------

def _free_groups(groups: list[PartGroup], user_labels: set[str]) -> list[PartGroup]:
    return [g for g in groups if not (set(g.labels) & user_labels)]


def _try_add_group(candidate: Shape, group: PartGroup, donor: Shape,
                   user_labels: set[str], groups_of: dict[str, list[PartGroup]],
                   rng: np.random.Generator, child_id: str) -> Shape | None:
    """Add a donor group to a candidate: exchange with a free group,
    else insert; None when neither works."""
    free = _free_groups(groups_of_shape(candidate, groups_of), user_labels)
    if free:
        order = rng.permutation(len(free))
        for k in order:
            try:
                return exchange_into(candidate, free[int(k)], donor, group, child_id)
            except (AlignmentImpossible, NoContacts):
                continue
    try:
        return insert(group, donor, candidate, child_id)
    except (NoAnchorLabels, AlignmentImpossible):
        return None


def groups_of_shape(shape: Shape, cache: dict[str, list[PartGroup]]) -> list[PartGroup]:
    if shape.id not in cache:
        cache[shape.id] = enumerate_part_groups(shape)
    return cache[shape.id]


def insert_missing(candidate: Shape, missing: set[str],
                   pool: list[tuple[PartGroup, Shape]],
                   user_labels: set[str],
                   groups_of: dict[str, list[PartGroup]],
                   rng: np.random.Generator,
                   id_prefix: str) -> Shape | None:
    """Repair a candidate by adding one carrying group per missing label,
    drawn from the pool; None (discard) when a label cannot be added."""
    current = candidate
    for step, label in enumerate(sorted(missing)):
        if label in current.labels():
            continue
        carriers = [(g, src) for g, src in pool if label in g.labels]
        if not carriers:
            return None
        order = rng.permutation(len(carriers))
        repaired = None
        for k in order:
            group, source = carriers[int(k)]
            repaired = _try_add_group(current, group, source, user_labels,
                                      groups_of, rng, f"{id_prefix}r{step}")
            if repaired is not None:
                break
        if repaired is None:
            return None
        current = repaired
    return current


def _pair_offspring(parent_a: Shape, parent_b: Shape,
                    config: EvolutionConfig,
                    pool: list[tuple[PartGroup, Shape]],
                    groups_of: dict[str, list[PartGroup]],
                    rng: np.random.Generator,
                    id_base: str) -> list[Shape]:
    """Candidates from one ordered parent pair, capped by seeded subsample."""
    user_labels = set(config.user_labels)
    missing = user_labels - parent_a.labels()
    groups_a = groups_of_shape(parent_a, groups_of)
    groups_b = groups_of_shape(parent_b, groups_of)

    offspring: list[Shape] = []
    if not missing:
        combos = [(ga, gb) for ga in groups_a if not (set(ga.labels) & user_labels)
                  for gb in groups_b]
        if len(combos) > config.max_pair_offspring:
            picks = sorted(rng.choice(len(combos), size=config.max_pair_offspring,
                                      replace=False).tolist())
            combos = [combos[i] for i in picks]
        for k, (ga, gb) in enumerate(combos):
            try:
                child = exchange_into(parent_a, ga, parent_b, gb, f"{id_base}x{k:03d}")
            except (AlignmentImpossible, NoContacts):
                continue
            offspring.append(child)
    else:
        carriers = [g for g in groups_b if set(g.labels) & missing]
        if len(carriers) > config.max_pair_offspring:
            picks = sorted(rng.choice(len(carriers), size=config.max_pair_offspring,
                                      replace=False).tolist())
            carriers = [carriers[i] for i in picks]
        for k, group in enumerate(carriers):
            child = _try_add_group(parent_a, group, parent_b, user_labels,
                                   groups_of, rng, f"{id_base}m{k:03d}")
            if child is None:
                continue
            still_missing = user_labels - child.labels()
            if still_missing:
                child = insert_missing(child, still_missing, pool, user_labels,
                                       groups_of, rng, f"{id_base}m{k:03d}")
            if child is not None:
                offspring.append(child)
    return offspring


def evolve_one_generation(parents: list[Shape], config: EvolutionConfig,
                          gen_index: int, models: list[CategoryModel],
                          rng: np.random.Generator) -> Generation:
    """One iteration of the loop: breed, audit, diversify, score, rank."""
    user_labels = set(config.user_labels)
    groups_of: dict[str, list[PartGroup]] = {}
    parents = sorted(parents, key=lambda s: s.id)
    pool: list[tuple[PartGroup, Shape]] = []
    for parent in parents:
        for group in groups_of_shape(parent, groups_of):
            pool.append((group, parent))

    candidates: list[Shape] = []
    pair_idx = 0
    for a in parents:
        for b in parents:
            if a.id == b.id:
                continue
            id_base = f"g{gen_index}p{pair_idx:02d}"
            candidates.extend(_pair_offspring(a, b, config, pool, groups_of,
                                              rng, id_base))
            pair_idx += 1

    # Constraint audit and de-duplication by part-id set.
    audited: list[Shape] = []
    seen: set[tuple[str, ...]] = set()
    for child in candidates:
        if user_labels - child.labels():
            continue
        key = tuple(sorted(child.part_ids))
        if key in seen:
            continue
        seen.add(key)
        audited.append(child)

    if len(audited) > config.max_generation_size:
        picks = sorted(rng.choice(len(audited), size=config.max_generation_size,
                                  replace=False).tolist())
        audited = [audited[i] for i in picks]

    if not audited:
        raise EmptyGeneration(f"generation {gen_index}: no surviving offspring")

    survivors = diversity_selection(audited, config.diversity_keep_fraction)

    reports = [score_shape(s, models, config.scoring_mode, config.beam_width)
               for s in survivors]
    scores = [r.plausibility for r in reports]
    multi = [r.multi_count for r in reports]
    order = rank(survivors, scores, multi, config.ranking)
    return Generation(
        index=gen_index,
        shapes=[survivors[i] for i in order],
        scores=[scores[i] for i in order],
        multi_counts=[multi[i] for i in order],
    )


def evolve(population: list[Shape], config: EvolutionConfig,
           selector: Selector | None = None,
           models: list[CategoryModel] | None = None) -> list[Generation]:
    """Run the full loop for config.max_generations iterations.

    Returns one Generation per iteration; generation 0 (the input) is
    not included. All stochastic choices derive from config.rng_seed.
    """
    if len(population) < 2:
        raise EmptyGeneration("need at least two parent shapes")
    if models is None:
        models = load_models()
    if selector is None:
        selector = top_k_selector(config.top_k)

    generations: list[Generation] = []
    parents = list(population)
    for i in range(1, config.max_generations + 1):
        rng = np.random.default_rng([config.rng_seed, i])
        generation = evolve_one_generation(parents, config, i, models, rng)
        chosen = list(selector(generation))
        known = {s.id for s in generation.shapes}
        unknown = [c for c in chosen if c not in known]
        if unknown:
            raise EmptyGeneration(f"selector returned unknown shape ids {unknown}")
        generation.selected = chosen
        generations.append(generation)
        parents = [s for s in generation.shapes if s.id in set(chosen)]
        if len(parents) < 2 and i < config.max_generations:
            raise EmptyGeneration(
                f"generation {i}: fewer than two parents selected, cannot continue")
    return generations
