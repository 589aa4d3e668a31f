import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from crossmax.errors import DataError
from crossmax.metrics import (
    LabeledScore,
    auroc_pairwise_oracle,
    c_acc,
    evaluate,
    o_auroc,
    o_aupr,
    pr_curve,
    roc_curve,
)

from oracles import average_precision_exact


def scores_from(values, labels, preds=None, trues=None):
    preds = preds or [None] * len(values)
    trues = trues or [None] * len(values)
    return [
        LabeledScore(score=float(v), is_seen=bool(l), predicted_class=p, true_class=t)
        for v, l, p, t in zip(values, labels, preds, trues)
    ]


def random_scores(rng, n=None, with_ties=True):
    n = n or int(rng.integers(4, 60))
    while True:
        labels = rng.integers(0, 2, size=n)
        if 0 < labels.sum() < n:
            break
    vals = rng.uniform(size=n)
    if with_ties:
        vals = np.round(vals, 1)
    return scores_from(vals, labels)


class TestRocCurve:
    def test_perfect_separation_passes_through_corner(self):
        s = scores_from([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert (0.0, 1.0) in roc_curve(s)
        assert o_auroc(s) == 1.0

    def test_all_equal_scores_give_diagonal(self):
        s = scores_from([0.5, 0.5, 0.5], [1, 0, 1])
        assert roc_curve(s) == [(0.0, 0.0), (1.0, 1.0)]
        assert o_auroc(s) == pytest.approx(0.5, abs=1e-15)

    def test_threshold_sweep_hand_enumeration(self):
        s = scores_from([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0])
        assert roc_curve(s) == [
            (0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0),
        ]
        assert o_auroc(s) == pytest.approx(0.75, abs=1e-15)

    def test_monotone_endpoints(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pts = roc_curve(random_scores(rng))
            assert pts[0] == (0.0, 0.0)
            assert pts[-1] == (1.0, 1.0)
            for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
                assert x1 >= x0 and y1 >= y0

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_curve(scores_from([0.1, 0.2], [1, 1]))


class TestAuroc:
    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            s = random_scores(rng)
            assert abs(o_auroc(s) - auroc_pairwise_oracle(s)) < 1e-12

    def test_matches_sklearn(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            s = random_scores(rng)
            y = [int(x.is_seen) for x in s]
            v = [x.score for x in s]
            assert o_auroc(s) == pytest.approx(roc_auc_score(y, v), abs=1e-10)

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(3)
        s = random_scores(rng, n=40, with_ties=False)
        transformed = scores_from(
            [np.exp(2.0 * x.score + 1.0) for x in s], [x.is_seen for x in s]
        )
        assert o_auroc(transformed) == pytest.approx(o_auroc(s), abs=1e-12)

    def test_label_flip_antisymmetry(self):
        rng = np.random.default_rng(4)
        s = random_scores(rng, n=30, with_ties=False)
        flipped = scores_from([x.score for x in s], [not x.is_seen for x in s])
        assert o_auroc(flipped) == pytest.approx(1.0 - o_auroc(s), abs=1e-12)

    def test_single_pair(self):
        assert auroc_pairwise_oracle(scores_from([0.8, 0.2], [1, 0])) == 1.0


class TestAupr:
    def test_perfect_ranking(self):
        s = scores_from([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])
        assert o_aupr(s) == 1.0

    def test_two_sample_hand_example(self):
        s = scores_from([0.2, 0.9], [1, 0])
        assert o_aupr(s) == pytest.approx(0.5, abs=1e-15)

    def test_exhaustive_five_sample_patterns(self):
        vals = [0.9, 0.7, 0.5, 0.3, 0.1]
        for pattern in range(1, 32):
            labels = [(pattern >> i) & 1 for i in range(5)]
            s = scores_from(vals, labels)
            exact = average_precision_exact(labels)
            assert o_aupr(s) == pytest.approx(float(exact), abs=1e-12)

    def test_random_ranking_concentrates_at_prevalence(self):
        rng = np.random.default_rng(5)
        n = 10_000
        for prevalence in (0.2, 0.5):
            labels = rng.uniform(size=n) < prevalence
            s = scores_from(rng.uniform(size=n), labels)
            assert abs(o_aupr(s) - labels.mean()) < 0.02

    def test_tie_handling_uses_stable_input_order(self):
        # identical scores: positives listed first are counted at better ranks
        s_pos_first = scores_from([0.5, 0.5], [1, 0])
        s_neg_first = scores_from([0.5, 0.5], [0, 1])
        assert o_aupr(s_pos_first) == 1.0
        assert o_aupr(s_neg_first) == 0.5

    def test_needs_a_positive(self):
        with pytest.raises(DataError):
            o_aupr(scores_from([0.4], [0]))


class TestCAcc:
    def test_all_correct(self):
        s = scores_from([0.9, 0.8], [1, 1], preds=[1, 2], trues=[1, 2])
        assert c_acc(s) == 1.0

    def test_three_of_four(self):
        s = scores_from(
            [0.9, 0.8, 0.7, 0.6], [1, 1, 1, 1], preds=[0, 1, 2, 3], trues=[0, 1, 2, 9]
        )
        assert c_acc(s) == 0.75

    def test_unseen_samples_excluded(self):
        base = scores_from([0.9, 0.6], [1, 1], preds=[0, 1], trues=[0, 2])
        with_unseen = base + scores_from([0.1, 0.2], [0, 0], preds=[0, 1], trues=[5, 6])
        assert c_acc(with_unseen) == c_acc(base) == 0.5

    def test_missing_annotation_rejected(self):
        with pytest.raises(DataError):
            c_acc(scores_from([0.9], [1]))


class TestEvaluate:
    def test_report_fields_consistent(self):
        rng = np.random.default_rng(6)
        n = 50
        labels = rng.integers(0, 2, size=n)
        labels[:2] = [0, 1]
        s = scores_from(
            rng.uniform(size=n),
            labels,
            preds=list(rng.integers(0, 3, size=n)),
            trues=list(rng.integers(0, 3, size=n)),
        )
        rep = evaluate(s)
        assert rep.o_auroc == pytest.approx(o_auroc(s), abs=1e-15)
        assert rep.o_aupr == pytest.approx(o_aupr(s), abs=1e-15)
        assert rep.c_acc == pytest.approx(c_acc(s), abs=1e-15)
        assert rep.roc_points[0] == (0.0, 0.0)
        assert rep.roc_points[-1] == (1.0, 1.0)
        assert rep.pr_points[0] == (0.0, 1.0)

    def test_pr_curve_final_recall_is_one(self):
        rng = np.random.default_rng(7)
        s = random_scores(rng)
        pts = pr_curve(s)
        assert pts[-1][0] == 1.0
