import numpy as np
import pytest

from crossmax.errors import DataError
from crossmax.scoring import (
    EPS_DISTANCE,
    Gallery,
    LogitsRecord,
    channel_normalize,
    gallery_distances,
    mean_distance,
    nearest_distance,
    normalize_rows,
    open_set_probability,
    refine_logits,
    salient_mask,
    score_sample,
    softmax,
    variant_score,
)


def record(lj, lb, lv, dj, db, dv):
    return LogitsRecord(
        logits_joints=np.asarray(lj, dtype=np.float64),
        logits_bones=np.asarray(lb, dtype=np.float64),
        logits_velocities=np.asarray(lv, dtype=np.float64),
        dist_joints=dj,
        dist_bones=db,
        dist_velocities=dv,
    )


class TestChannelNormalize:
    def test_hand_example(self):
        assert np.allclose(channel_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_unit_vector_unchanged(self):
        v = np.array([0.0, 1.0, 0.0])
        assert np.array_equal(channel_normalize(v), v)

    def test_zero_vector_rejected(self):
        with pytest.raises(DataError):
            channel_normalize([0.0, 0.0])

    def test_rows_normalized_to_unit_norm(self):
        rng = np.random.default_rng(0)
        m = normalize_rows(rng.normal(size=(10, 6)))
        assert np.allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-12)


class TestNearestDistance:
    def test_member_row_gives_zero(self):
        rng = np.random.default_rng(1)
        g = normalize_rows(rng.normal(size=(8, 5)))
        assert nearest_distance(g[3], g) == 0.0

    def test_hand_example(self):
        g = np.array([[1.0, 0.0], [0.0, 1.0]])
        d = nearest_distance(np.array([0.6, 0.8]), g)
        assert d == pytest.approx(np.sqrt(0.4), abs=1e-12)

    def test_antipodal_gives_two(self):
        g = np.array([[1.0, 0.0]])
        assert nearest_distance(np.array([-1.0, 0.0]), g) == pytest.approx(2.0, abs=1e-12)

    def test_range_on_unit_sphere(self):
        rng = np.random.default_rng(2)
        g = normalize_rows(rng.normal(size=(20, 4)))
        for _ in range(100):
            q = channel_normalize(rng.normal(size=4))
            d = nearest_distance(q, g)
            assert 0.0 <= d <= 2.0

    def test_empty_gallery_rejected(self):
        with pytest.raises(DataError):
            nearest_distance(np.array([1.0]), np.zeros((0, 1)))


class TestGallery:
    def test_rows_unit_norm_enforced(self):
        with pytest.raises(DataError):
            Gallery(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)))

    def test_from_embeddings_normalizes(self):
        rng = np.random.default_rng(3)
        g = Gallery.from_embeddings(*[rng.normal(size=(6, 4)) for _ in range(3)])
        for name in ("joints", "bones", "velocities"):
            assert np.allclose(np.linalg.norm(g.modality(name), axis=1), 1.0, atol=1e-12)

    def test_row_count_must_match(self):
        rng = np.random.default_rng(4)
        with pytest.raises(DataError):
            Gallery.from_embeddings(
                rng.normal(size=(5, 3)), rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
            )

    def test_subsample_aligned_and_seeded(self):
        rng = np.random.default_rng(5)
        g = Gallery.from_embeddings(*[rng.normal(size=(30, 4)) for _ in range(3)])
        s1 = g.subsample(10, seed=9)
        s2 = g.subsample(10, seed=9)
        assert s1.num_rows == 10
        assert np.array_equal(s1.joints, s2.joints)
        # subsampled rows keep cross-modality alignment
        full = {tuple(r) for r in np.hstack([g.joints, g.bones, g.velocities])}
        sub = {tuple(r) for r in np.hstack([s1.joints, s1.bones, s1.velocities])}
        assert sub <= full

    def test_gallery_distances_shape_and_self_zero(self):
        rng = np.random.default_rng(6)
        embs = [rng.normal(size=(7, 5)) for _ in range(3)]
        g = Gallery.from_embeddings(*embs)
        d = gallery_distances(g, *embs)
        assert d.shape == (7, 3)
        assert np.max(d) <= 1e-9


class TestMeanDistance:
    def test_zeros(self):
        assert mean_distance(0.0, 0.0, 0.0) == 0.0

    def test_hand_example(self):
        assert mean_distance(0.3, 0.6, 0.9) == pytest.approx(0.6, abs=1e-15)

    def test_permutation_invariant(self):
        assert mean_distance(0.1, 0.5, 0.9) == mean_distance(0.9, 0.1, 0.5)

    def test_negative_rejected(self):
        with pytest.raises(DataError):
            mean_distance(-0.1, 0.2, 0.3)


class TestSalientMask:
    def test_identical_vectors(self):
        lm, pos = salient_mask([1.0, 0.0], [1.0, 0.0], [1.0, 0.0])
        assert np.array_equal(lm, [1.0, 0.0])
        assert pos == 0

    def test_tie_breaks_to_smallest_index(self):
        lm, pos = salient_mask([3.0, 0.0], [0.0, 3.0], [0.0, 0.0])
        assert np.array_equal(lm, [1.0, 1.0])
        assert pos == 0

    def test_shift_invariance_of_argmax(self):
        rng = np.random.default_rng(7)
        vecs = [rng.normal(size=5) for _ in range(3)]
        _, pos = salient_mask(*vecs)
        _, pos_shifted = salient_mask(*[v + 11.5 for v in vecs])
        assert pos == pos_shifted

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            salient_mask([1.0, 2.0], [1.0], [0.0, 0.0])


class TestRefineLogits:
    def test_hand_example_at_half(self):
        refined = refine_logits(np.array([2.0, 1.0, 0.0]), 0, 0.5)
        assert np.allclose(refined, [0.5, 0.25, 0.0], atol=1e-15)

    def test_small_distance_boosts_salient(self):
        refined = refine_logits(np.array([2.0, 1.0, 0.0]), 0, 1e-4)
        p = softmax(refined)[0]
        assert p >= 0.99

    def test_large_distance_suppresses_salient(self):
        refined = refine_logits(np.array([2.0, 1.0, 0.0]), 0, 0.9999)
        p = softmax(refined)[0]
        assert p <= 0.01

    def test_distance_clamped_outside_unit_interval(self):
        lm = np.array([1.0, 0.0])
        hi = refine_logits(lm, 0, 2.0)
        assert np.array_equal(hi, refine_logits(lm, 0, 1.0 - EPS_DISTANCE))
        lo = refine_logits(lm, 0, 0.0)
        assert np.array_equal(lo, refine_logits(lm, 0, EPS_DISTANCE))

    def test_salient_shift_decreasing_in_distance(self):
        # log(1/d - 1) is strictly decreasing on (0, 1)
        ds = [1e-4, 0.1, 0.3, 0.5, 0.7, 0.9, 0.9999]
        shifts = [np.log(1.0 / d - 1.0) for d in ds]
        assert all(b < a for a, b in zip(shifts, shifts[1:]))

    def test_order_preserved_for_small_distance(self):
        rng = np.random.default_rng(8)
        for _ in range(2000)        :
            k = int(rng.integers(2, 8))
            lm = rng.normal(scale=3.0, size=k)
            _, sal = salient_mask(lm, lm, lm)
            d = float(rng.uniform(1e-6, 0.5))
            assert int(np.argmax(refine_logits(lm, sal, d))) == sal


class TestOpenSetProbability:
    def test_uniform_logits(self):
        res = open_set_probability(np.zeros(4))
        assert res.p_prob == pytest.approx(0.25, abs=1e-15)
        assert res.predicted_class == 0
        assert res.novelty == pytest.approx(0.75, abs=1e-15)

    def test_hand_example(self):
        res = open_set_probability(np.array([0.5, 0.25, 0.0]))
        probs = softmax(np.array([0.5, 0.25, 0.0]))
        assert np.allclose(
            probs, [0.4192289516096976, 0.3264958423950701, 0.2542752059952323], atol=1e-12
        )
        assert res.p_prob == pytest.approx(probs[0], abs=1e-15)
        assert res.predicted_class == 0

    def test_shift_invariance(self):
        x = np.array([0.2, -1.0, 3.0])
        a = open_set_probability(x)
        b = open_set_probability(x + 123.0)
        assert a.p_prob == pytest.approx(b.p_prob, rel=1e-12)
        assert a.predicted_class == b.predicted_class

    def test_large_logits_stable(self):
        res = open_set_probability(np.array([1000.0, 999.0]))
        assert np.isfinite(res.p_prob)
        assert res.predicted_class == 0


class TestScoreSample:
    def test_prediction_matches_salient_for_small_distance(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            k = int(rng.integers(2, 6))
            d = rng.uniform(0.0, 0.5, size=3)
            rec = record(
                rng.normal(size=k), rng.normal(size=k), rng.normal(size=k),
                d[0], d[1], d[2],
            )
            _, sal = salient_mask(
                rec.logits_joints, rec.logits_bones, rec.logits_velocities
            )
            assert score_sample(rec).predicted_class == sal

    def test_equal_logits_predict_first_class(self):
        rec = record([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.2, 0.4, 0.6)
        res = score_sample(rec)
        assert res.predicted_class == 0

    def test_disabled_refinement_is_vanilla_bit_for_bit(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            rec = record(
                rng.normal(size=k), rng.normal(size=k), rng.normal(size=k),
                rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
            )
            lm, _ = salient_mask(
                rec.logits_joints, rec.logits_bones, rec.logits_velocities
            )
            vanilla = open_set_probability(lm)
            res = score_sample(rec, refine=False)
            assert res.p_prob == vanilla.p_prob
            assert res.predicted_class == vanilla.predicted_class
            assert np.array_equal(res.refined_logits, vanilla.refined_logits)

    def test_mean_dist_invariant_enforced(self):
        with pytest.raises(DataError):
            LogitsRecord(
                logits_joints=np.array([1.0, 0.0]),
                logits_bones=np.array([1.0, 0.0]),
                logits_velocities=np.array([1.0, 0.0]),
                dist_joints=0.3,
                dist_bones=0.3,
                dist_velocities=0.3,
                mean_dist=0.9,
            )


class TestVariants:
    def test_variant_reductions(self):
        rec = record([2.0, 0.0], [1.0, 1.0], [0.0, 0.5], 0.2, 0.6, 1.3)
        cls, p = variant_score(rec, "cne_only")
        assert p == pytest.approx(1.0 - rec.mean_dist, abs=1e-15)
        _, p_min = variant_score(rec, "dist_min")
        assert p_min == pytest.approx(0.8, abs=1e-15)
        _, p_max = variant_score(rec, "dist_max")
        assert p_max == pytest.approx(0.0, abs=1e-15)  # 1.3 clamps to 1
        _, p_j = variant_score(rec, "dist_joints")
        assert p_j == pytest.approx(0.8, abs=1e-15)
        assert cls == 0

    def test_crossmax_and_vanilla_match_score_sample(self):
        rec = record([2.0, 0.0], [1.0, 1.0], [0.0, 0.5], 0.2, 0.6, 1.3)
        assert variant_score(rec, "crossmax")[1] == score_sample(rec).p_prob
        assert (
            variant_score(rec, "vanilla_softmax")[1]
            == score_sample(rec, refine=False).p_prob
        )

    def test_unknown_variant_rejected(self):
        rec = record([1.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.1, 0.1, 0.1)
        with pytest.raises(DataError):
            variant_score(rec, "nope")
