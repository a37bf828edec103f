from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from fame.fixtures import box_part
from fame.part_groups import (
    ORIGIN_BASE,
    ORIGIN_EXPANDED,
    ORIGIN_NULL,
    ORIGIN_SYMMETRY_SET,
    ORIGIN_SYMMETRY_SINGLETON,
    PartGroup,
    enumerate_part_groups,
    form_base_groups,
)
from fame.shape_model import ContactPoint, Shape, build_relation_graph


def chain_shape(labels: list[str | None], symmetry=(), shape_id="chain") -> Shape:
    """Parts in a row, each touching the next (a path graph)."""
    parts = [box_part(f"p{i}", (i, 0, 0), (i + 1, 1, 1), label)
             for i, label in enumerate(labels)]
    contacts = [ContactPoint(f"p{i}", f"p{i+1}", "single",
                             np.array([[i + 1.0, 0.5, 0.5]]))
                for i in range(len(labels) - 1)]
    return Shape(id=shape_id, parts=parts, contacts=contacts,
                 symmetry_groups=[frozenset(g) for g in symmetry])


def star_shape(center_label: str | None, leaf_labels: list[str | None],
               symmetry=(), shape_id="star") -> Shape:
    """A hub part touching every leaf part."""
    parts = [box_part("hub", (0, 0, 0), (1, 1, 1), center_label)]
    contacts = []
    for i, label in enumerate(leaf_labels):
        pid = f"leaf{i}"
        parts.append(box_part(pid, (2 + i, 0, 0), (3 + i, 1, 1), label))
        contacts.append(ContactPoint("hub", pid, "single",
                                     np.array([[1.0, 0.5, 0.5]])))
    return Shape(id=shape_id, parts=parts, contacts=contacts,
                 symmetry_groups=[frozenset(g) for g in symmetry])


class TestFormBaseGroups:
    def test_symmetry_set_and_singletons(self, chair):
        groups = form_base_groups(chair)
        by_origin = {}
        for g in groups:
            by_origin.setdefault(g.origin, []).append(g)
        legs = frozenset({"leg1", "leg2", "leg3", "leg4"})
        sym_sets = [g for g in by_origin.get(ORIGIN_SYMMETRY_SET, [])]
        assert any(g.part_ids == legs for g in sym_sets)
        singles = {tuple(g.part_ids)[0] for g in by_origin.get(ORIGIN_SYMMETRY_SINGLETON, [])}
        assert singles == {"leg1", "leg2", "leg3", "leg4"}

    def test_all_unlabeled_yields_only_symmetry_groups(self):
        shape = chain_shape([None, None, None], symmetry=[("p0", "p2")])
        groups = form_base_groups(shape)
        assert {g.origin for g in groups} == {ORIGIN_SYMMETRY_SINGLETON}
        assert {tuple(g.part_ids)[0] for g in groups} == {"p0", "p2"}
        # An unlabeled symmetry set does not form a set group.
        assert not any(len(g.part_ids) == 2 for g in groups)

    def test_label_components_match_bfs_oracle(self):
        shape = chain_shape(["a", "a", None, "a", "b", "b"])
        groups = [g for g in form_base_groups(shape) if g.origin == ORIGIN_BASE]
        got = {g.part_ids for g in groups}
        # Oracle: per-label connected components by brute-force closure.
        graph = build_relation_graph(shape)
        expected = set()
        for label in shape.labels():
            members = {p.id for p in shape.parts if p.label == label}
            for size in range(len(members), 0, -1):
                for combo in combinations(sorted(members), size):
                    subset = frozenset(combo)
                    if subset & {m for c in expected for m in c}:
                        continue
                    from oracles import connectivity_oracle
                    if connectivity_oracle(sorted(graph.nodes),
                                           set(graph.edges), subset):
                        expected.add(subset)
        # Maximality: remove non-maximal entries.
        expected = {s for s in expected
                    if not any(s < t for t in expected)}
        assert got == expected

    def test_shared_label_symmetry_set(self):
        shape = star_shape("sitting", ["support", "support"],
                           symmetry=[("leaf0", "leaf1")])
        groups = form_base_groups(shape)
        sets = [g for g in groups if g.origin == ORIGIN_SYMMETRY_SET]
        assert len(sets) == 1 and sets[0].part_ids == frozenset({"leaf0", "leaf1"})

    def test_mixed_label_symmetry_set_not_formed(self):
        shape = star_shape("sitting", ["support", "leaning"],
                           symmetry=[("leaf0", "leaf1")])
        groups = form_base_groups(shape)
        assert not any(g.origin == ORIGIN_SYMMETRY_SET for g in groups)


class TestEnumeratePartGroups:
    def test_spec_frontier_rule(self):
        # hub=seat labeled, leaves: one labeled differently, two unlabeled.
        shape = star_shape("sitting", ["leaning", None, None])
        groups = enumerate_part_groups(shape)
        sets = {g.part_ids for g in groups}
        assert frozenset({"hub"}) in sets
        assert frozenset({"hub", "leaf0"}) in sets
        assert frozenset({"hub", "leaf1"}) in sets
        assert frozenset({"hub", "leaf2"}) in sets
        assert frozenset({"hub", "leaf1", "leaf2"}) in sets
        # Mixed frontier (labeled + unlabeled) is rejected.
        assert frozenset({"hub", "leaf0", "leaf1"}) not in sets
        assert frozenset({"hub", "leaf0", "leaf1", "leaf2"}) not in sets

    def test_empty_frontier_base_only(self):
        shape = chain_shape(["a"], shape_id="lone")
        groups = enumerate_part_groups(shape)
        assert [g.part_ids for g in groups] == [frozenset({"p0"})]

    def test_exhaustive_frontier_oracle(self):
        shape = chain_shape(["a", "a", None, "b", None, "b", "c"])
        groups = enumerate_part_groups(shape, max_groups=512)
        got = {g.part_ids for g in groups}

        # Oracle: independent enumeration over all frontier subsets.
        graph = build_relation_graph(shape)
        adj = graph.adjacency()
        label_of = {p.id: p.label for p in shape.parts}
        bases = {g.part_ids for g in form_base_groups(shape)}
        expected = set(bases)
        for base in bases:
            frontier = sorted({n for pid in base for n in adj[pid]} - base)
            for size in range(1, len(frontier) + 1):
                for combo in combinations(frontier, size):
                    labs = {label_of[p] for p in combo}
                    if len(labs) > 1:
                        continue
                    combined = {label_of[p] for p in base | set(combo)} - {None}
                    if len(combined) > 2:
                        continue
                    expected.add(base | frozenset(combo))
        assert got == expected

    def test_label_cap(self, corpus):
        for shape in corpus:
            for g in enumerate_part_groups(shape):
                assert len(g.labels) <= 2

    def test_every_base_group_in_output(self, corpus):
        for shape in corpus:
            bases = {g.part_ids for g in form_base_groups(shape)}
            out = {g.part_ids for g in enumerate_part_groups(shape)}
            assert bases <= out

    def test_deterministic(self, chair):
        a = enumerate_part_groups(chair)
        b = enumerate_part_groups(chair)
        assert [(g.sorted_ids, g.origin) for g in a] == [(g.sorted_ids, g.origin) for g in b]

    def test_expanded_contains_its_base(self, corpus):
        for shape in corpus:
            for g in enumerate_part_groups(shape):
                if g.origin == ORIGIN_EXPANDED:
                    assert g.base < g.part_ids

    def test_truncation_keeps_bases(self, chair):
        bases = {g.part_ids for g in form_base_groups(chair)}
        out = enumerate_part_groups(chair, max_groups=len(bases))
        assert {g.part_ids for g in out} == bases


class TestPartGroupType:
    def test_null_group(self):
        g = PartGroup.null("s")
        assert g.origin == ORIGIN_NULL and not g.part_ids

    def test_null_origin_requires_empty(self):
        with pytest.raises(ValueError):
            PartGroup(shape_id="s", part_ids=frozenset({"a"}),
                      labels=frozenset(), origin=ORIGIN_NULL)

    def test_label_invariant(self):
        with pytest.raises(ValueError):
            PartGroup(shape_id="s", part_ids=frozenset({"a"}),
                      labels=frozenset({"x", "y", "z"}), origin=ORIGIN_BASE)
