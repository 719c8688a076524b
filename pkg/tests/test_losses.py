import math

import numpy as np
import pytest
import torch

from chatseg.model.gradcheck import check_gradients
from chatseg.training.losses import LossWeights, bce_loss, dice_loss, text_loss, total_loss


class TestTextLoss:
    def test_perfect_prediction_near_zero(self):
        targets = torch.tensor([[1, 2, 3]])
        logits = torch.full((1, 3, 5), -100.0)
        for i, t in enumerate(targets[0]):
            logits[0, i, t] = 100.0
        mask = torch.ones(1, 3, dtype=torch.bool)
        assert float(text_loss(logits, targets, mask)) < 1e-6

    def test_uniform_logits_give_log_vocab(self):
        vocab = 17
        logits = torch.zeros(2, 4, vocab)
        targets = torch.randint(0, vocab, (2, 4))
        mask = torch.ones(2, 4, dtype=torch.bool)
        assert float(text_loss(logits, targets, mask)) == pytest.approx(math.log(vocab), abs=1e-6)

    def test_masked_positions_do_not_matter(self):
        torch.manual_seed(0)
        logits = torch.randn(1, 6, 9)
        targets = torch.randint(0, 9, (1, 6))
        mask = torch.tensor([[False, True, False, True, True, False]])
        base = float(text_loss(logits, targets, mask))
        perturbed_targets = targets.clone()
        perturbed_targets[0, 0] = (targets[0, 0] + 1) % 9
        perturbed_logits = logits.clone()
        perturbed_logits[0, 2] += 3.0
        assert float(text_loss(perturbed_logits, perturbed_targets, mask)) == pytest.approx(base)

    def test_all_masked_contributes_zero(self):
        logits = torch.randn(1, 3, 4)
        targets = torch.randint(0, 4, (1, 3))
        mask = torch.zeros(1, 3, dtype=torch.bool)
        assert float(text_loss(logits, targets, mask)) == 0.0


class TestBceLoss:
    def test_saturated_prediction_is_zero(self):
        target = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
        logits = torch.where(target > 0, torch.tensor(80.0), torch.tensor(-80.0))
        assert float(bce_loss(logits, target)) == pytest.approx(0.0, abs=1e-9)

    def test_zero_logits_give_log_two(self):
        for frac in (0.0, 0.3, 1.0):
            target = (torch.rand(8, 8) < frac).float()
            assert float(bce_loss(torch.zeros(8, 8), target)) == pytest.approx(math.log(2), abs=1e-7)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            z = rng.normal(scale=3.0, size=(8, 8))
            m = (rng.random((8, 8)) < 0.5).astype(float)
            # brute force: -[m*log(sig(z)) + (1-m)*log(1-sig(z))] per pixel
            sig = 1.0 / (1.0 + np.exp(-z))
            expected = -(m * np.log(sig) + (1 - m) * np.log(1 - sig)).mean()
            got = float(bce_loss(torch.tensor(z), torch.tensor(m)))
            assert got == pytest.approx(expected, rel=1e-6)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bce_loss(torch.zeros(4, 4), torch.zeros(4, 5))

    def test_non_negative(self):
        rng = torch.Generator().manual_seed(1)
        for _ in range(20):
            z = torch.randn(6, 6, generator=rng) * 5
            m = (torch.rand(6, 6, generator=rng) < 0.5).float()
            assert float(bce_loss(z, m)) >= 0.0


class TestDiceLoss:
    def test_saturated_prediction_near_zero(self):
        target = (torch.rand(8, 8) < 0.4).float()
        logits = torch.where(target > 0, torch.tensor(80.0), torch.tensor(-80.0))
        assert float(dice_loss(logits, target)) == pytest.approx(0.0, abs=1e-3)

    def test_half_probability_half_true_4x4(self):
        # sigma(0) = 0.5 everywhere, 8 true pixels of 16:
        # 1 - (2*4 + 1) / (8 + 8 + 1) = 1 - 9/17
        target = torch.zeros(4, 4)
        target[:2] = 1.0
        got = float(dice_loss(torch.zeros(4, 4), target))
        assert got == pytest.approx(1.0 - 9.0 / 17.0, abs=1e-7)

    def test_empty_target_empty_prediction(self):
        logits = torch.full((6, 6), -80.0)
        target = torch.zeros(6, 6)
        assert float(dice_loss(logits, target)) == pytest.approx(0.0, abs=1e-6)

    def test_bounded(self):
        rng = torch.Generator().manual_seed(2)
        for _ in range(30):
            z = torch.randn(5, 5, generator=rng) * 10
            m = (torch.rand(5, 5, generator=rng) < 0.5).float()
            val = float(dice_loss(z, m))
            assert 0.0 <= val <= 1.0 + 1e-6


class TestTotalLoss:
    def test_weighted_sum_with_default_weights(self):
        parts = {
            "text": torch.tensor(0.5),
            "bce": torch.tensor(0.2),
            "dice": torch.tensor(0.4),
        }
        got = float(total_loss(parts, LossWeights()))
        assert got == pytest.approx(0.5 * 1.0 + 0.2 * 2.0 + 0.4 * 0.5)
        assert got == pytest.approx(1.1)

    def test_all_zero_parts(self):
        parts = {k: torch.tensor(0.0) for k in ("text", "bce", "dice")}
        assert float(total_loss(parts, LossWeights())) == 0.0

    def test_zero_weights(self):
        parts = {
            "text": torch.tensor(3.0),
            "bce": torch.tensor(4.0),
            "dice": torch.tensor(0.9),
        }
        assert float(total_loss(parts, LossWeights(0.0, 0.0, 0.0))) == 0.0

    def test_non_finite_part_rejected(self):
        parts = {
            "text": torch.tensor(float("nan")),
            "bce": torch.tensor(0.0),
            "dice": torch.tensor(0.0),
        }
        with pytest.raises(ValueError):
            total_loss(parts, LossWeights())

    def test_gradient_is_weighted_sum_of_component_gradients(self):
        torch.manual_seed(3)
        z = torch.randn(4, 4, dtype=torch.float64)
        m = (torch.rand(4, 4) < 0.5).double()
        mask = torch.ones(1, 2, dtype=torch.bool)
        targets = torch.tensor([[1, 0]])
        text_logits = torch.randn(1, 2, 3, dtype=torch.float64)
        weights = LossWeights()

        def fn(tl, zl):
            parts = {
                "text": text_loss(tl, targets, mask),
                "bce": bce_loss(zl, m),
                "dice": dice_loss(zl, m),
            }
            return total_loss(parts, weights)

        assert check_gradients(fn, [text_logits, z]) < 1e-4


class TestLossGradChecks:
    def test_bce_gradients(self):
        torch.manual_seed(4)
        m = (torch.rand(3, 3) < 0.5).double()
        assert check_gradients(lambda z: bce_loss(z, m), [torch.randn(3, 3, dtype=torch.float64)]) < 1e-4

    def test_dice_gradients(self):
        torch.manual_seed(5)
        m = (torch.rand(3, 3) < 0.5).double()
        assert check_gradients(lambda z: dice_loss(z, m), [torch.randn(3, 3, dtype=torch.float64)]) < 1e-4

    def test_text_loss_gradients(self):
        torch.manual_seed(6)
        targets = torch.tensor([[2, 1, 0]])
        mask = torch.tensor([[True, False, True]])
        assert (
            check_gradients(
                lambda logits: text_loss(logits, targets, mask),
                [torch.randn(1, 3, 4, dtype=torch.float64)],
            )
            < 1e-4
        )
