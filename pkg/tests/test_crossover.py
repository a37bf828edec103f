from __future__ import annotations

import numpy as np
import pytest

from fame.crossover import (
    ContactMatch,
    PlacementChoice,
    SimilarityTransform,
    accept_or_revert,
    exchange,
    exchange_into,
    initial_alignment,
    insert,
    match_contacts,
    placement_residuals,
    refined_alignment,
    restore_proportions,
)
from fame.errors import (
    AlignmentImpossible,
    DegenerateBBox,
    NoAnchorLabels,
    NoContacts,
)
from fame.fixtures import box_part, fixture
from fame.geometry import Aabb
from fame.part_groups import PartGroup, enumerate_part_groups
from fame.shape_model import ContactPoint, Shape, bbox_of, build_relation_graph
from oracles import grid_search_sse


def group_of(shape: Shape, *part_ids: str) -> PartGroup:
    wanted = frozenset(part_ids)
    for g in enumerate_part_groups(shape, max_groups=512):
        if g.part_ids == wanted:
            return g
    labels = frozenset(l for p in part_ids
                       if (l := shape.label_of(p)) is not None)
    return PartGroup(shape_id=shape.id, part_ids=wanted, labels=labels, origin="base")


class TestInitialAlignment:
    def test_identity(self):
        box = Aabb(np.zeros(3), np.ones(3))
        t = initial_alignment(box, box)
        np.testing.assert_allclose(t.translation, 0.0, atol=1e-12)
        np.testing.assert_allclose(t.scale, 1.0, atol=1e-12)

    def test_analytic_case(self):
        src = Aabb(np.array([-1.0, -0.5, -0.5]), np.array([1.0, 0.5, 0.5]))
        dst = Aabb(np.array([-1.0, -0.5, -0.5]), np.array([3.0, 0.5, 0.5]))
        t = initial_alignment(src, dst)
        np.testing.assert_allclose(t.scale, 2.0, atol=1e-12)
        np.testing.assert_allclose(t.translation, [1.0, 0.0, 0.0], atol=1e-12)

    def test_random_pairs_center_and_longest_axis(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            lo = rng.uniform(-2, 0, 3)
            src = Aabb(lo, lo + rng.uniform(0.2, 2.0, 3))
            lo2 = rng.uniform(-2, 0, 3)
            dst = Aabb(lo2, lo2 + rng.uniform(0.2, 2.0, 3))
            t = initial_alignment(src, dst)
            moved_lo = t.apply(src.lo)
            moved_hi = t.apply(src.hi)
            center = (moved_lo + moved_hi) / 2
            np.testing.assert_allclose(center, dst.center, atol=1e-9)
            axis = int(np.argmax(src.extents))
            assert (moved_hi - moved_lo)[axis] == pytest.approx(dst.extents[axis], abs=1e-9)
            # Aspect ratio preserved: uniform scale.
            assert t.scale[0] == t.scale[1] == t.scale[2]

    def test_degenerate_source(self):
        flat = Aabb(np.zeros(3), np.zeros(3))
        with pytest.raises(DegenerateBBox):
            initial_alignment(flat, Aabb(np.zeros(3), np.ones(3)))


class TestMatchContacts:
    def test_min_rule(self):
        src = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
        dst = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        match = match_contacts(src, dst)
        assert match.n == 2

    def test_coincident_zero_distance(self):
        pts = np.random.default_rng(0).random((4, 3))
        match = match_contacts(pts, pts.copy())
        assert placement_residuals(match, SimilarityTransform.identity()).max() == 0.0

    def test_random_sets_match_bruteforce(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            src = rng.random((5, 3))
            dst = rng.random((5, 3))
            match = match_contacts(src, dst)
            # Oracle: each source to nearest target, retain the 5 smallest.
            pairs = []
            for i in range(len(src)):
                d = np.linalg.norm(src[i] - dst, axis=1)
                j = int(np.argmin(d))
                pairs.append((float(d[j]), i, j))
            pairs.sort()
            keep = pairs[:min(len(src), len(dst))]
            assert match.src_indices == tuple(i for _, i, _ in keep)
            assert match.dst_indices == tuple(j for _, _, j in keep)

    def test_empty_raises(self):
        with pytest.raises(NoContacts):
            match_contacts(np.zeros((0, 3)), np.ones((2, 3)))


class TestRefinedAlignment:
    def test_identity_when_aligned(self):
        pts = np.random.default_rng(1).random((4, 3))
        match = ContactMatch(src_points=pts, dst_points=pts.copy(),
                             src_indices=(0, 1, 2, 3), dst_indices=(0, 1, 2, 3))
        t = refined_alignment(match)
        np.testing.assert_allclose(t.translation, 0.0, atol=1e-12)
        np.testing.assert_allclose(t.scale, 1.0, atol=1e-12)

    def test_single_pair_pure_translation(self):
        match = ContactMatch(src_points=np.array([[1.0, 0, 0]]),
                             dst_points=np.array([[2.0, 0, 0]]),
                             src_indices=(0,), dst_indices=(0,))
        t = refined_alignment(match)
        np.testing.assert_allclose(t.scale, 1.0, atol=1e-12)
        np.testing.assert_allclose(t.translation, [1.0, 0, 0], atol=1e-12)

    def test_beats_grid_search(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            src = rng.random((n, 3)) * 2 - 1
            scale = rng.uniform(0.5, 2.0, 3)
            shift = rng.uniform(-1, 1, 3)
            noise = rng.normal(0, 0.05, (n, 3))
            dst = src * scale + shift + noise
            match = match_contacts(src, dst)
            t = refined_alignment(match)
            ours = float((placement_residuals(match, t) ** 2).sum())
            grid = grid_search_sse(match.src_points, match.dst_points,
                                   t.translation, t.scale, span=0.25)
            assert ours <= grid * (1 + 1e-6) + 1e-12

    def test_never_worse_than_identity(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            src = rng.random((4, 3))
            dst = rng.random((4, 3))
            match = match_contacts(src, dst)
            t = refined_alignment(match)
            ours = float((placement_residuals(match, t) ** 2).sum())
            ident = float((placement_residuals(match, SimilarityTransform.identity()) ** 2).sum())
            assert ours <= ident + 1e-12


class TestAcceptOrRevert:
    def make_match(self, residual_x: float) -> ContactMatch:
        # The offending point sits at the origin so the residual is the
        # exact float given (no cancellation error).
        src = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        dst = np.array([[residual_x, 0, 0], [1.0, 0, 0]])
        return ContactMatch(src_points=src, dst_points=dst,
                            src_indices=(0, 1), dst_indices=(0, 1))

    def test_zero_residuals_refined(self):
        match = self.make_match(0.0)
        assert accept_or_revert(match, SimilarityTransform.identity(), 2.0) \
            is PlacementChoice.REFINED

    def test_six_percent_reverts(self):
        match = self.make_match(0.06 * 2.0)
        assert accept_or_revert(match, SimilarityTransform.identity(), 2.0) \
            is PlacementChoice.INITIAL

    def test_exact_boundary_inclusive(self):
        # residual exactly 0.05 * diag: 0.05 * 2.0 == 0.1 exactly in floats.
        match = self.make_match(0.1)
        assert accept_or_revert(match, SimilarityTransform.identity(), 2.0) \
            is PlacementChoice.REFINED


class TestRestoreProportions:
    def test_uniform_unchanged(self):
        part = box_part("p", (0, 0, 0), (1, 1, 1), "sitting")
        out = restore_proportions(part, np.ones(3))
        np.testing.assert_array_equal(out.triangles, part.triangles)

    def test_factor_four_restored(self):
        part = box_part("p", (0, 0, 0), (1, 4, 1), "sitting")
        out = restore_proportions(part, np.array([1.0, 4.0, 1.0]))
        box = out.bbox
        np.testing.assert_allclose(box.extents, [1.0, 1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(box.center, part.bbox.center, atol=1e-12)

    def test_below_threshold_unchanged(self):
        part = box_part("p", (0, 0, 0), (1, 2.9, 1), "sitting")
        out = restore_proportions(part, np.array([1.0, 2.9, 1.0]))
        np.testing.assert_array_equal(out.triangles, part.triangles)

    def test_exact_factor_three_unchanged(self):
        part = box_part("p", (0, 0, 0), (1, 3, 1), "sitting")
        out = restore_proportions(part, np.array([1.0, 3.0, 1.0]))
        np.testing.assert_array_equal(out.triangles, part.triangles)

    def test_unlabeled_never_restored(self):
        part = box_part("p", (0, 0, 0), (1, 9, 1))
        out = restore_proportions(part, np.array([1.0, 9.0, 1.0]))
        np.testing.assert_array_equal(out.triangles, part.triangles)

    def test_reciprocal_direction(self):
        part = box_part("p", (0, 0, 0), (1, 1, 0.2), "sitting")
        out = restore_proportions(part, np.array([1.0, 1.0, 0.2]))
        assert out.bbox.extents[2] == pytest.approx(1.0, abs=1e-12)

    def test_idempotent(self):
        part = box_part("p", (0, 0, 0), (1, 4, 1), "sitting")
        scale = np.array([1.0, 4.0, 1.0])
        once = restore_proportions(part, scale)
        # After restoring, the part's effective cumulative scale is even.
        twice = restore_proportions(once, np.ones(3))
        np.testing.assert_array_equal(once.triangles, twice.triangles)


class TestExchange:
    def test_self_exchange_identity(self, chair):
        twin = Shape(id="chair_twin", parts=chair.parts, contacts=chair.contacts,
                     symmetry_groups=chair.symmetry_groups, categories=chair.categories)
        g_a = group_of(chair, "seat")
        g_b = group_of(twin, "seat")
        off_a, off_b = exchange(chair, g_a, twin, g_b)
        for off, parent, donor in ((off_a, chair, "chair_twin"), (off_b, twin, "chair_basic")):
            for part in off.parts:
                src_shape, src_part = part.id.split("/", 1)
                original = (chair if src_shape in ("chair_basic",) else twin).part(src_part)
                np.testing.assert_allclose(part.triangles, original.triangles, atol=1e-6)

    def test_two_offspring_categories_union(self, chair, cart):
        g_a = group_of(chair, "seat")
        g_b = group_of(cart, "deck")
        off_a, off_b = exchange(chair, g_a, cart, g_b)
        assert off_a.categories == off_b.categories == frozenset({"chair", "cart"})
        assert off_a.provenance.parents == ("chair_basic", "cart_basic")
        assert off_b.provenance.parents == ("cart_basic", "chair_basic")
        assert off_a.provenance.placement in ("refined", "initial")

    def test_offspring_connected_on_non_symmetry_parts(self, chair):
        # All non-symmetry parts must share one component of the full
        # relation graph (symmetric sets alone may dangle by design).
        shelf = fixture("shelf_3board")
        g_a = group_of(chair, "seat")
        g_b = group_of(shelf, "board2")
        off_a, off_b = exchange(chair, g_a, shelf, g_b)
        for off in (off_a, off_b):
            graph = build_relation_graph(off)
            adj = graph.adjacency()
            core = sorted(frozenset(off.part_ids) - off.symmetric_part_ids())
            start = core[0]
            seen = {start}
            stack = [start]
            while stack:
                for nbr in adj[stack.pop()]:
                    if nbr not in seen:
                        seen.add(nbr)
                        stack.append(nbr)
            assert set(core) <= seen, (sorted(core), sorted(seen))

    def test_revert_on_distant_contacts(self):
        # Host posts form a sheared pattern no axis-aligned scale can fit:
        # the least-squares y-scale collapses to zero and every matched
        # contact misses by 0.5, beyond 5% of the host diagonal (~0.28).
        def posts(shape_prefix, slab_y1, corners):
            slab = box_part("slab", (0, 0, 0), (2.0, slab_y1, 0.4))
            parts = [slab]
            contacts = []
            for i, (cx, cy) in enumerate(corners):
                pid = f"post{i}"
                x0 = min(max(cx - 0.15, 0.0), 1.7)
                y0 = min(max(cy - 0.15, 0.0), slab_y1 - 0.3)
                parts.append(box_part(pid, (x0, y0, 0.4), (x0 + 0.3, y0 + 0.3, 1.2)))
                contacts.append(ContactPoint("slab", pid, "single",
                                             np.array([[cx, cy, 0.4]])))
            return Shape(id=shape_prefix, parts=parts, contacts=contacts)

        host = posts("host", 5.0, [(0, 0), (2, 3), (0, 2), (2, 5)])
        donor = posts("donor", 2.0, [(0, 0), (2, 0), (0, 2), (2, 2)])
        g_host = group_of(host, "slab")
        g_donor = group_of(donor, "slab")
        off = exchange_into(host, g_host, donor, g_donor)
        assert off.provenance.placement == "initial"
        # Initial alignment wins: the donor slab lands on the removed
        # slab's bbox (centers align, x-extent preserved by scale 1).
        slab = off.part("donor/slab")
        np.testing.assert_allclose(slab.bbox.center,
                                   bbox_of({"slab"}, host).center, atol=1e-9)

    def test_null_group_rejected(self, chair, cart):
        with pytest.raises(AlignmentImpossible):
            exchange(chair, PartGroup.null(chair.id), cart, group_of(cart, "deck"))

    def test_deterministic(self, chair, cart):
        g_a = group_of(chair, "seat")
        g_b = group_of(cart, "deck")
        one = exchange(chair, g_a, cart, g_b)
        two = exchange(chair, g_a, cart, g_b)
        for s1, s2 in zip(one, two):
            assert s1.part_ids == s2.part_ids
            for p1, p2 in zip(s1.parts, s2.parts):
                np.testing.assert_array_equal(p1.triangles, p2.triangles)

    def test_no_rotation_axis_aligned_preserved(self, chair, cart):
        # Axis-aligned boxes stay axis-aligned under scale+translate.
        g_a = group_of(chair, "seat")
        g_b = group_of(cart, "deck")
        off_a, _ = exchange(chair, g_a, cart, g_b)
        deck = off_a.part("cart_basic/deck")
        verts = deck.triangles.reshape(-1, 3)
        for axis in range(3):
            assert len(np.unique(np.round(verts[:, axis], 9))) == 2


class TestInsert:
    def test_no_anchor_labels(self, chair, cart):
        wheels = group_of(cart, "wheel1", "wheel2", "wheel3", "wheel4")
        # Wheels' context in the cart is the deck ("placement"); chairs
        # have no placement-labeled part.
        with pytest.raises(NoAnchorLabels):
            insert(wheels, cart, chair)

    def test_two_anchor_synthetic_argmin(self):
        # Donor: a payload part whose labeled neighbors sit at known offsets.
        payload = box_part("payload", (0, 0, 0), (1, 1, 1))
        anchor1 = box_part("a1", (2, 0, 0), (3, 1, 1), "alpha")
        anchor2 = box_part("a2", (0, 2, 0), (1, 3, 1), "beta")
        donor = Shape(id="donor", parts=[payload, anchor1, anchor2], contacts=[
            ContactPoint("payload", "a1", "single", np.array([[2.0, 0.5, 0.5]])),
            ContactPoint("payload", "a2", "single", np.array([[0.5, 2.0, 0.5]])),
        ])
        # Host: matching labels at two sites; one reproduces the donor's
        # relative geometry exactly, the other is skewed.
        h1 = box_part("h_alpha", (12, 10, 0), (13, 11, 1), "alpha")
        h2 = box_part("h_beta", (10, 12, 0), (11, 13, 1), "beta")
        far = box_part("h_alpha2", (30, 10, 0), (31, 11, 1), "alpha")
        hb = box_part("h_base", (10, 10, 2), (13, 13, 3))
        host = Shape(id="host", parts=[h1, h2, far, hb], contacts=[
            ContactPoint("h_alpha", "h_base", "single", np.array([[12.5, 10.5, 2.0]])),
            ContactPoint("h_beta", "h_base", "single", np.array([[10.5, 12.5, 2.0]])),
            ContactPoint("h_alpha2", "h_base", "single", np.array([[30.5, 10.5, 2.0]])),
        ])
        group = PartGroup(shape_id="donor", part_ids=frozenset({"payload"}),
                          labels=frozenset(), origin="base")
        off = insert(group, donor, host)
        placed = off.part("donor/payload")
        # Hand-computed: candidates are anchor-centroid - vector; the
        # (10.5, 10.5) site matches the donor context average exactly.
        np.testing.assert_allclose(placed.bbox.center, [10.5, 10.5, 0.5], atol=1e-9)
        assert off.provenance.operation == "insert"

    def test_wheels_under_platform_context(self, cart):
        # Donor context: wheels sit below the deck (placement anchor).
        table = fixture("table_basic")
        # Give the table a placement anchor comparable to the cart deck.
        wheels = group_of(cart, "wheel1", "wheel2", "wheel3", "wheel4")
        off = insert(wheels, cart, table)
        placed_z = [off.part(f"cart_basic/wheel{i}").bbox.center[2] for i in range(1, 5)]
        top_z = table.part("top").bbox.center[2]
        assert all(z < top_z for z in placed_z)
