import numpy as np
import pytest

from chatseg.eval import ciou, mean_iou, pixel_prf
from chatseg.imaging import BinaryMask, mask_iou


def random_mask(rng, h=8, w=8, p=0.5):
    return BinaryMask(rng.random((h, w)) < p)


def brute_force_confusion(pred, gt):
    tp = fp = fn = tn = 0
    for r in range(pred.height):
        for c in range(pred.width):
            p, g = bool(pred.bits[r, c]), bool(gt.bits[r, c])
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif not p and g:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


class TestPixelPrf:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        m = random_mask(rng)
        scores = pixel_prf(m, m)
        assert scores == {"precision": 1.0, "recall": 1.0, "f1": 1.0}

    def test_double_area_superset(self):
        gt = np.zeros((4, 4), dtype=bool)
        gt[:1] = True  # 4 px
        pred = np.zeros((4, 4), dtype=bool)
        pred[:2] = True  # 8 px, contains gt
        scores = pixel_prf(BinaryMask(pred), BinaryMask(gt))
        assert scores["precision"] == pytest.approx(0.5)
        assert scores["recall"] == pytest.approx(1.0)
        assert scores["f1"] == pytest.approx(2 / 3)

    def test_empty_prediction_conventions(self):
        gt = BinaryMask(np.ones((4, 4), dtype=bool))
        scores = pixel_prf(BinaryMask.zeros(4, 4), gt)
        assert scores == {"precision": 0.0, "recall": 0.0, "f1": 0.0}

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pixel_prf(BinaryMask.zeros(4, 4), BinaryMask.zeros(4, 5))

    def test_matches_confusion_matrix_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            pred = random_mask(rng, p=float(rng.uniform(0.1, 0.9)))
            gt = random_mask(rng, p=float(rng.uniform(0.1, 0.9)))
            tp, fp, fn, _ = brute_force_confusion(pred, gt)
            scores = pixel_prf(pred, gt)
            expected_p = tp / (tp + fp) if tp + fp else 0.0
            expected_r = tp / (tp + fn) if tp + fn else 0.0
            assert scores["precision"] == pytest.approx(expected_p, abs=1e-12)
            assert scores["recall"] == pytest.approx(expected_r, abs=1e-12)


class TestCiou:
    def test_identical_pairs(self):
        rng = np.random.default_rng(2)
        masks = [random_mask(rng) for _ in range(4)]
        assert ciou(masks, list(masks)) == 1.0

    def test_summed_before_dividing(self):
        # intersections {4, 0}, unions {8, 8} -> 4/16
        a1 = np.zeros((4, 4), dtype=bool)
        a1[0] = True  # 4 px
        b1 = np.zeros((4, 4), dtype=bool)
        b1[:2] = True  # 8 px, intersection 4, union 8
        a2 = np.zeros((4, 4), dtype=bool)
        a2[0] = True
        b2 = np.zeros((4, 4), dtype=bool)
        b2[3] = True  # disjoint 4+4: intersection 0, union 8
        value = ciou([BinaryMask(a1), BinaryMask(a2)], [BinaryMask(b1), BinaryMask(b2)])
        assert value == pytest.approx(4 / 16)

    def test_single_pair_equals_mask_iou(self):
        rng = np.random.default_rng(3)
        a, b = random_mask(rng), random_mask(rng)
        assert ciou([a], [b]) == pytest.approx(mask_iou(a, b))

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            ciou([], [])

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(4)
        preds = [random_mask(rng, 6, 5) for _ in range(5)]
        gts = [random_mask(rng, 6, 5) for _ in range(5)]
        inter = union = 0
        for p, g in zip(preds, gts):
            for r in range(6):
                for c in range(5):
                    inter += int(bool(p.bits[r, c]) and bool(g.bits[r, c]))
                    union += int(bool(p.bits[r, c]) or bool(g.bits[r, c]))
        assert ciou(preds, gts) == pytest.approx(inter / union, abs=1e-12)

    def test_mean_iou_differs_from_ciou_in_general(self):
        big_pred = BinaryMask(np.ones((8, 8), dtype=bool))
        big_gt = BinaryMask(np.ones((8, 8), dtype=bool))
        small_pred = BinaryMask.zeros(2, 2)
        small_gt = np.zeros((2, 2), dtype=bool)
        small_gt[0, 0] = True
        preds, gts = [big_pred, small_pred], [big_gt, BinaryMask(small_gt)]
        assert mean_iou(preds, gts) == pytest.approx(0.5)
        assert ciou(preds, gts) == pytest.approx(64 / 65)
