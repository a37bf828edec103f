"""Candidate part-group enumeration.

Base groups are maximal connected runs of same-labeled parts, plus
symmetry sets sharing a label, plus one singleton per symmetric part
(the entry point for structure breaking). Each base group is expanded
by one adjacency ring: any non-empty frontier subset whose parts are
all unlabeled or all share one label yields an expanded group, keeping
every group at no more than two distinct labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .shape_model import RelationGraph, Shape, build_relation_graph

DEFAULT_MAX_GROUPS = 64
# Expansion bounds: one adjacency ring, frontier subsets up to this size,
# oversized frontier classes truncated to the nearest parts first.
MAX_FRONTIER_SUBSET = 4
MAX_FRONTIER_CLASS = 8

ORIGIN_BASE = "base"
ORIGIN_EXPANDED = "expanded"
ORIGIN_SYMMETRY_SET = "symmetry_set"
ORIGIN_SYMMETRY_SINGLETON = "symmetry_singleton"
ORIGIN_NULL = "null"


@dataclass(frozen=True)
class PartGroup:
    """A subset of one shape's parts used as the atomic crossover unit."""

    shape_id: str
    part_ids: frozenset[str]
    labels: frozenset[str]
    origin: str
    base: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        if len(self.labels) > 2:
            raise ValueError(f"part group {sorted(self.part_ids)}: more than two labels")
        if (self.origin == ORIGIN_NULL) != (len(self.part_ids) == 0):
            raise ValueError("null origin iff empty part set")

    @staticmethod
    def null(shape_id: str) -> "PartGroup":
        return PartGroup(shape_id=shape_id, part_ids=frozenset(),
                         labels=frozenset(), origin=ORIGIN_NULL)

    @property
    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.part_ids))

    def to_dict(self) -> dict:
        return {
            "shape_id": self.shape_id,
            "part_ids": sorted(self.part_ids),
            "labels": sorted(self.labels),
            "origin": self.origin,
        }


def _group_labels(shape: Shape, part_ids: frozenset[str]) -> frozenset[str]:
    return frozenset(lab for pid in part_ids
                     if (lab := shape.label_of(pid)) is not None)


def form_base_groups(shape: Shape) -> list[PartGroup]:
    """Base groups: per-label connected components, shared-label symmetry
    sets, and one singleton per symmetry-group member."""
    graph = build_relation_graph(shape)
    adj = graph.adjacency()

    groups: list[PartGroup] = []
    seen: set[frozenset[str]] = set()

    def emit(ids: frozenset[str], origin: str) -> None:
        if ids in seen:
            return
        seen.add(ids)
        groups.append(PartGroup(shape_id=shape.id, part_ids=ids,
                                labels=_group_labels(shape, ids),
                                origin=origin, base=ids))

    symmetric = shape.symmetric_part_ids()

    # Maximal connected components of same-labeled parts. Singleton
    # components of symmetric parts are left to the symmetry pass so
    # they carry the structure-breaking origin tag.
    for label in sorted(shape.labels()):
        members = {p.id for p in shape.parts if p.label == label}
        remaining = set(members)
        while remaining:
            start = min(remaining)
            component = {start}
            stack = [start]
            while stack:
                node = stack.pop()
                for nbr in adj[node]:
                    if nbr in members and nbr not in component:
                        component.add(nbr)
                        stack.append(nbr)
            remaining -= component
            if len(component) == 1 and start in symmetric:
                continue
            emit(frozenset(component), ORIGIN_BASE)

    # Symmetry sets whose members all share one label (may be disconnected).
    for sym in sorted(shape.symmetry_groups, key=sorted):
        labels = {shape.label_of(pid) for pid in sym}
        if len(labels) == 1 and None not in labels:
            emit(frozenset(sym), ORIGIN_SYMMETRY_SET)

    # Individual symmetric parts: the structure-breaking entry point.
    for pid in sorted(shape.symmetric_part_ids()):
        emit(frozenset([pid]), ORIGIN_SYMMETRY_SINGLETON)

    return groups


def _frontier_of(group: frozenset[str], adj: dict[str, set[str]]) -> set[str]:
    frontier: set[str] = set()
    for pid in group:
        frontier |= adj[pid]
    return frontier - group


def _expansion_subsets(shape: Shape, base: PartGroup,
                       graph: RelationGraph) -> list[frozenset[str]]:
    """Admissible frontier subsets: all unlabeled, or all one label."""
    adj = graph.adjacency()
    frontier = sorted(_frontier_of(base.part_ids, adj))

    classes: dict[str | None, list[str]] = {}
    for pid in frontier:
        classes.setdefault(shape.label_of(pid), []).append(pid)

    base_center = None
    if len(frontier) > 0:
        base_center = _selection_center(shape, base.part_ids)

    subsets: list[frozenset[str]] = []
    for label in sorted(classes, key=lambda v: (v is not None, v or "")):
        members = classes[label]
        if len(members) > MAX_FRONTIER_CLASS:
            members = sorted(members, key=lambda pid: (
                float(np.linalg.norm(shape.part(pid).bbox.center - base_center)), pid))
            members = sorted(members[:MAX_FRONTIER_CLASS])
        for size in range(1, min(len(members), MAX_FRONTIER_SUBSET) + 1):
            for combo in combinations(members, size):
                combined_labels = base.labels | ({label} if label is not None else set())
                if len(combined_labels) <= 2:
                    subsets.append(frozenset(combo))
    return subsets


def _selection_center(shape: Shape, part_ids: frozenset[str]) -> np.ndarray:
    centers = [shape.part(pid).bbox.center for pid in sorted(part_ids)]
    return np.mean(np.stack(centers), axis=0)


def enumerate_part_groups(shape: Shape, max_groups: int = DEFAULT_MAX_GROUPS) -> list[PartGroup]:
    """All candidate part groups of a shape, deterministic and de-duplicated.

    Every base group is always retained; expansions fill the remaining
    budget in (size, lexicographic) order.
    """
    graph = build_relation_graph(shape)
    bases = form_base_groups(shape)

    by_ids: dict[frozenset[str], PartGroup] = {}
    for base in bases:
        by_ids.setdefault(base.part_ids, base)

    expansions: list[PartGroup] = []
    for base in bases:
        for ext in _expansion_subsets(shape, base, graph):
            ids = base.part_ids | ext
            if ids in by_ids:
                continue
            group = PartGroup(shape_id=shape.id, part_ids=ids,
                              labels=_group_labels(shape, ids),
                              origin=ORIGIN_EXPANDED, base=base.part_ids)
            by_ids[ids] = group
            expansions.append(group)

    def order_key(g: PartGroup) -> tuple:
        return (len(g.part_ids), g.sorted_ids)

    base_groups = sorted((by_ids[b.part_ids] for b in bases
                          if by_ids[b.part_ids].origin != ORIGIN_EXPANDED),
                         key=order_key)
    base_set = {g.part_ids for g in base_groups}
    expansions = sorted((g for g in by_ids.values() if g.part_ids not in base_set),
                        key=order_key)

    budget = max(0, max_groups - len(base_groups))
    selected = base_groups + expansions[:budget]
    return sorted(selected, key=order_key)
