from __future__ import annotations

import numpy as np
import pytest

from fame.errors import UnknownLabel
from fame.fixtures import box_part, fixture
from fame.functionality import (
    BACKGROUND_PATCH,
    LABEL_THRESHOLD,
    ScoreDistributions,
    check_functional_space,
    check_stability,
    label_parts,
    normalize_score,
    predict_proto_patches,
    raw_functionality_score,
    sample_shape,
)
from fame.shape_model import Part, Shape
from oracles import stability_oracle


def slab_shape(shape_id="slab", z=0.42, size=0.5) -> Shape:
    return Shape(id=shape_id, parts=[
        box_part("slab", (0, 0, z), (size, size, z + 0.05)),
        box_part("foot", (size / 2 - 0.03, size / 2 - 0.03, 0),
                 (size / 2 + 0.03, size / 2 + 0.03, z)),
    ])


class TestPredictProtoPatches:
    def test_sitting_weight_on_slab_top(self, models_by_category):
        shape = slab_shape()
        fields = predict_proto_patches(models_by_category["chair"], shape)
        sample = sample_shape(shape)
        sitting = next(f for f in fields if f.patch_label == "sitting")
        on_top = (sample.part_index == 0) & (sample.normals[:, 2] > 0.9)
        assert on_top.sum() > 10
        assert np.all(sitting.weights[on_top] > 0.5)

    def test_single_triangle_part_sums_to_one(self, models_by_category):
        tri = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float)
        shape = Shape(id="tri", parts=[Part(id="only", triangles=tri)])
        fields = predict_proto_patches(models_by_category["chair"], shape)
        total = np.sum([f.weights for f in fields], axis=0)
        np.testing.assert_allclose(total, 1.0, atol=1e-9)

    def test_weight_sums_all_models(self, corpus, models):
        for shape in corpus[:6]:
            for model in models:
                fields = predict_proto_patches(model, shape)
                total = np.sum([f.weights for f in fields], axis=0)
                np.testing.assert_allclose(total, 1.0, atol=1e-9)
                assert any(f.patch_label == BACKGROUND_PATCH for f in fields)

    def test_minimum_points(self, chair, models):
        with pytest.raises(ValueError):
            predict_proto_patches(models[0], chair, n_points=64)


class TestLabelParts:
    def test_dominant_patch_label(self, models_by_category):
        shape = slab_shape()
        fields = predict_proto_patches(models_by_category["chair"], shape)
        labeled = label_parts(shape, fields)
        assert labeled.part("slab").label == "sitting"

    def test_below_threshold_unlabeled(self, models_by_category):
        # A slab too low for any chair patch: every share stays below 0.5.
        shape = Shape(id="low", parts=[
            box_part("slab", (0, 0, 1.8), (0.5, 0.5, 1.85)),
            box_part("foot", (0.2, 0.2, 1.0), (0.3, 0.3, 1.8)),
            box_part("base", (0.0, 0.0, 0.0), (0.5, 0.5, 1.0)),
        ])
        fields = predict_proto_patches(models_by_category["chair"], shape)
        labeled = label_parts(shape, fields)
        assert labeled.part("slab").label is None

    def test_fixture_matches_share_oracle(self, chair, models_by_category):
        model = models_by_category["chair"]
        bare = Shape(id=chair.id, parts=[Part(id=p.id, triangles=p.triangles)
                                         for p in chair.parts])
        fields = predict_proto_patches(model, bare)
        labeled = label_parts(bare, fields)
        sample = sample_shape(bare)
        for i, part in enumerate(bare.parts):
            mask = sample.part_index == i
            best, best_share = None, -1.0
            for f in fields:
                if f.patch_label == BACKGROUND_PATCH:
                    continue
                total = f.weights.sum()
                if total <= 1e-12:
                    continue
                share = float(f.weights[mask].sum() / total)
                if share > best_share:
                    best, best_share = f.patch_label, share
            expected = best if best_share >= LABEL_THRESHOLD else None
            assert labeled.part(part.id).label == expected

    def test_seat_and_legs_recovered(self, chair, models_by_category):
        bare = Shape(id=chair.id, parts=[Part(id=p.id, triangles=p.triangles)
                                         for p in chair.parts])
        fields = predict_proto_patches(models_by_category["chair"], bare)
        labeled = label_parts(bare, fields)
        assert labeled.part("seat").label == "sitting"


class TestRawScore:
    def test_zero_weight_scores_zero(self, models_by_category):
        # Points high above every height band carry no patch affinity.
        model = models_by_category["chair"]
        rng = np.random.default_rng(2)
        points = rng.random((256, 3)) + np.array([0, 0, 5.0])
        normals = np.tile([0.0, 0.0, 1.0], (256, 1))
        assert model.raw_score_points(points, normals, z_floor=0.0) == 0.0
        affinity = model.patch_affinities(points, normals, 0.0)
        assert np.all(affinity == 0.0)

    def test_category_archetype_beats_median(self, corpus, models):
        by_id = {s.id: s for s in corpus}
        for model in models:
            scores = sorted(raw_functionality_score(model, by_id[sid])
                            for sid in model.fixtures_inside)
            median = scores[len(scores) // 2]
            best = max(raw_functionality_score(model, by_id[sid])
                       for sid in model.fixtures_inside)
            assert best >= median

    def test_full_chair_beats_seatless(self, chair, models_by_category):
        model = models_by_category["chair"]
        full = raw_functionality_score(model, chair)
        seatless = raw_functionality_score(
            model, chair, frozenset(pid for pid in chair.part_ids if pid != "seat"))
        assert full > seatless


class TestNormalizeScore:
    def dist(self) -> ScoreDistributions:
        return ScoreDistributions(inside_scores=np.array([1.0, 2.0, 3.0, 4.0]),
                                  outside_scores=np.array([0.0, 1.0]),
                                  inside_weight=4 / 6, outside_weight=2 / 6)

    def test_hand_computed_example(self):
        # raw 2.5: p_inside = 2/4, p_outside = 2/2 -> 4/6*0.5 + 2/6*1 = 2/3.
        assert normalize_score(self.dist(), 2.5) == pytest.approx(2 / 3, abs=1e-12)

    def test_above_everything_is_one(self):
        assert normalize_score(self.dist(), 100.0) == 1.0
        assert normalize_score(self.dist(), 4.0) == 1.0

    def test_below_everything_is_zero(self):
        assert normalize_score(self.dist(), -5.0) == 0.0

    def test_monotone(self):
        rng = np.random.default_rng(17)
        d = self.dist()
        raws = np.sort(rng.uniform(-1, 5, 1000))
        values = [normalize_score(d, r) for r in raws]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_one_only_at_max_of_both(self):
        d = self.dist()
        assert normalize_score(d, 3.9999) < 1.0

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            ScoreDistributions(inside_scores=np.array([1.0]),
                               outside_scores=np.array([2.0]),
                               inside_weight=0.7, outside_weight=0.7)


class TestCheckStability:
    def test_box_on_ground_stable(self):
        shape = Shape(id="box", parts=[box_part("b", (0, 0, 0), (1, 1, 1))])
        assert check_stability(shape)

    def test_cantilever_unstable(self):
        # Long seat far beyond a single thin off-center leg.
        shape = Shape(id="cant", parts=[
            box_part("seat", (0, 0, 0.4), (2.0, 0.4, 0.5)),
            box_part("leg", (0.0, 0.0, 0.0), (0.08, 0.08, 0.4)),
        ])
        assert not check_stability(shape)

    def test_random_subsets_match_oracle(self, corpus):
        rng = np.random.default_rng(99)
        checked = 0
        disagreements = []
        while checked < 200:
            shape = corpus[int(rng.integers(len(corpus)))]
            ids = shape.part_ids
            size = int(rng.integers(1, len(ids) + 1))
            subset = frozenset(rng.choice(ids, size=size, replace=False).tolist())
            got = check_stability(shape, subset)
            want = stability_oracle(shape, subset)
            if got != want:
                disagreements.append((shape.id, sorted(subset), got, want))
            checked += 1
        assert not disagreements, disagreements[:5]

    def test_translation_invariant_xy(self, chair):
        moved = Shape(id=chair.id, parts=[
            Part(id=p.id, triangles=p.triangles + np.array([7.0, -3.0, 0.0]),
                 label=p.label) for p in chair.parts])
        for subset in (frozenset(chair.part_ids), frozenset({"seat", "leg1"})):
            assert check_stability(chair, subset) == check_stability(moved, subset)

    def test_rotation_invariant_xy(self, chair):
        theta = np.radians(30.0)
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0],
                        [0, 0, 1.0]])
        rotated = Shape(id=chair.id, parts=[
            Part(id=p.id, triangles=p.triangles @ rot.T, label=p.label)
            for p in chair.parts])
        assert check_stability(rotated) == check_stability(chair)


class TestCheckFunctionalSpace:
    def test_free_seat_clear(self, chair, models_by_category):
        model = models_by_category["chair"]
        assert check_functional_space(chair, frozenset(chair.part_ids), "sitting", model)

    def test_board_above_seat_blocks(self, models_by_category):
        model = models_by_category["chair"]
        seat = box_part("seat", (0, 0, 0.4), (0.5, 0.5, 0.45), "sitting")
        # Clearance height is 0.8 * 0.5 = 0.4; a board at 10% of that.
        board = box_part("board", (0.1, 0.1, 0.49), (0.4, 0.4, 0.52))
        leg = box_part("leg", (0.2, 0.2, 0.0), (0.3, 0.3, 0.4), "support")
        shape = Shape(id="blocked", parts=[seat, board, leg])
        assert not check_functional_space(shape, frozenset({"seat", "leg"}), "sitting", model)

    def test_unknown_label(self, chair, models_by_category):
        with pytest.raises(UnknownLabel):
            check_functional_space(chair, frozenset(chair.part_ids), "flying",
                                   models_by_category["chair"])

    def test_label_absent_from_subset_is_clear(self, chair, models_by_category):
        model = models_by_category["chair"]
        assert check_functional_space(chair, frozenset({"leg1"}), "sitting", model)
