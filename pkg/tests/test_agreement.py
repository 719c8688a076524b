import numpy as np
import pytest

from chatseg.datagen import agreement_report, cohens_kappa
from chatseg.imaging import BinaryMask


def mask_of(bits, shape=(2, 2)):
    return BinaryMask(np.asarray(bits, dtype=bool).reshape(shape))


class TestAgreement:
    def test_identical_sets(self):
        rng = np.random.default_rng(0)
        masks = [BinaryMask(rng.random((8, 8)) < 0.5) for _ in range(5)]
        rep = agreement_report(masks, list(masks))
        assert rep["mean_iou"] == 1.0
        assert rep["kappa"] == 1.0

    def test_all_true_vs_all_false(self):
        a = [BinaryMask(np.ones((4, 4), dtype=bool))]
        b = [BinaryMask.zeros(4, 4)]
        rep = agreement_report(a, b)
        assert rep["mean_iou"] == 0.0
        assert rep["kappa"] <= 0.0

    def test_hand_built_kappa_half(self):
        # pooled pixels: A = 1100, B = 1000 -> p_o = 0.75,
        # p_e = 0.5*0.25 + 0.5*0.75 = 0.5, kappa = 0.25/0.5 = 0.5
        a = [mask_of([1, 1, 0, 0])]
        b = [mask_of([1, 0, 0, 0])]
        rep = agreement_report(a, b)
        assert rep["kappa"] == pytest.approx(0.5)

    def test_kappa_symmetric(self):
        rng = np.random.default_rng(1)
        a = [BinaryMask(rng.random((6, 6)) < 0.4) for _ in range(3)]
        b = [BinaryMask(rng.random((6, 6)) < 0.6) for _ in range(3)]
        assert cohens_kappa(a, b) == pytest.approx(cohens_kappa(b, a))

    def test_self_agreement_is_one(self):
        rng = np.random.default_rng(2)
        a = [BinaryMask(rng.random((5, 7)) < 0.3) for _ in range(4)]
        assert cohens_kappa(a, a) == 1.0

    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError):
            agreement_report([], [])

    def test_misaligned_lists_rejected(self):
        a = [BinaryMask.zeros(4, 4)]
        with pytest.raises(ValueError):
            agreement_report(a, a + a)

    def test_kappa_matches_definition_on_random_masks(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = [BinaryMask(rng.random((8, 8)) < rng.uniform(0.2, 0.8)) for _ in range(2)]
            b = [BinaryMask(rng.random((8, 8)) < rng.uniform(0.2, 0.8)) for _ in range(2)]
            # brute-force oracle straight from the definition
            fa = np.concatenate([m.bits.ravel() for m in a]).astype(int)
            fb = np.concatenate([m.bits.ravel() for m in b]).astype(int)
            p_o = np.mean(fa == fb)
            pa, pb = fa.mean(), fb.mean()
            p_e = pa * pb + (1 - pa) * (1 - pb)
            expected = (p_o - p_e) / (1 - p_e)
            assert cohens_kappa(a, b) == pytest.approx(expected, abs=1e-12)
