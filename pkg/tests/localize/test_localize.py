"""Tests for localize.masks, localize.objective and localize.trainer."""

import numpy as np
import pytest
from autodiff.gradcheck import check_gradients
from contracts.errors import ContractError
from digits.patches import PatchGrid, gen_masks, stack_masks
from localize.masks import MaskSet, binarize_topk, default_budgets
from localize.objective import budget_penalty, loc_loss
from localize.trainer import sample_pairs, train_masks
from nets.checkpoint import clone_network
from surrogates.model_set import fit_set

GRID = PatchGrid(2, 2, 8, 8)


@pytest.fixture
def toy_surrogates(toy_source, toy_images):
    return fit_set(toy_source, toy_images, stack_masks(gen_masks(4, 10, 5)), GRID, [4])


class TestMasks:
    """Mask sets, budgets and top-k binarization."""

    def test_default_budgets(self) -> None:
        assert default_budgets([6, 16, 84], 0.3) == [2, 5, 26]
        assert default_budgets([3], 0.01) == [1]
        assert default_budgets([4], 1.0) == [4]

    def test_budget_outside_width(self) -> None:
        with pytest.raises(ContractError):
            MaskSet.initial([4, 3], [5, 1])

    def test_topk_selects_exact_budget(self) -> None:
        soft = [np.array([0.9, 0.1, 0.8, 0.3]), np.array([0.2, 0.7, 0.6])]
        binary = binarize_topk(MaskSet.from_soft(soft, [2, 1]))
        assert binary.selected == [[0, 2], [1]]
        assert [v.sum() for v in binary.binary_values()] == [2.0, 1.0]

    def test_topk_ties_go_to_lowest_index(self) -> None:
        binary = binarize_topk(MaskSet.from_soft([np.full(5, 0.5)], [2]))
        assert binary.selected == [[0, 1]]

    def test_topk_is_idempotent(self) -> None:
        rng = np.random.default_rng(0)
        masks = MaskSet.from_soft([rng.uniform(0.05, 0.95, size=8), rng.uniform(0.05, 0.95, size=6)], [3, 2])
        once = binarize_topk(masks)
        assert binarize_topk(once).selected == once.selected

    def test_from_selected_round_trip(self) -> None:
        masks = MaskSet.from_selected([4, 3], [[3, 1], [0]])
        assert masks.selected == [[1, 3], [0]]
        np.testing.assert_array_equal(masks.binary_values()[0], [0.0, 1.0, 0.0, 1.0])
        assert binarize_topk(masks).selected == masks.selected

    def test_binary_values_need_binarization(self) -> None:
        with pytest.raises(ContractError):
            MaskSet.initial([3], [1]).binary_values()

    def test_forward_masks_leave_prefix_unmasked(self) -> None:
        masks = MaskSet.full([4, 3, 2], active_from=1)
        forward = masks.forward_masks("binary")
        assert forward[0] is None
        np.testing.assert_array_equal(forward[2].data, [1.0, 1.0])

    def test_copy_is_independent(self) -> None:
        masks = MaskSet.initial([3], [1])
        copy = masks.copy()
        copy.logits[0].data += 1.0
        np.testing.assert_array_equal(masks.logits[0].data, np.zeros(3))


class TestObjective:
    """The localization loss."""

    def test_full_binary_masks_match_unmasked_source(self, toy_source, toy_surrogates, toy_images) -> None:
        positions, bits = np.arange(3), toy_surrogates.masks[:3]
        full = MaskSet.full(toy_source.mask_widths)
        masked = loc_loss(toy_source, full, toy_surrogates, toy_images, positions, bits, mode="binary")
        unmasked = loc_loss(
            toy_source, full, toy_surrogates, toy_images, positions, bits, mode="binary", active_from=2
        )
        assert masked.item() == pytest.approx(unmasked.item(), rel=1e-12)

    def test_budget_penalty_only_above_budget(self) -> None:
        from autodiff.tensor import Tensor

        assert budget_penalty([Tensor(np.full(4, 0.25))], [2], 1.0).item() == 0.0
        assert budget_penalty([Tensor(np.ones(4))], [1], 0.5).item() == pytest.approx(1.5)
        assert budget_penalty([None], [1], 1.0) is None

    def test_gradient_matches_central_differences(self, toy_source, toy_surrogates, toy_images) -> None:
        rng = np.random.default_rng(3)
        masks = MaskSet.from_soft([rng.uniform(0.2, 0.8, size=w) for w in toy_source.mask_widths], [5, 4])
        positions, bits = np.array([0, 4]), toy_surrogates.masks[[1, 2]]
        result = check_gradients(
            lambda: loc_loss(toy_source, masks, toy_surrogates, toy_images, positions, bits, penalty=0.0),
            masks.trainable(),
            name="loc_loss",
        )
        assert result.passed, result.to_dict()

    def test_unknown_surrogate_class(self, toy_target, toy_surrogates, toy_images) -> None:
        masks = MaskSet.initial(toy_target.mask_widths, [1, 1])
        with pytest.raises(ContractError):
            loc_loss(toy_target, masks, toy_surrogates, toy_images, np.arange(2), toy_surrogates.masks[:2])


class TestTrainer:
    """Mask training keeps the source frozen."""

    def test_sample_pairs_shapes(self, toy_surrogates) -> None:
        positions, bits = sample_pairs(np.random.default_rng(0), toy_surrogates, 5)
        assert positions.shape == (5,)
        assert bits.shape == (5, 4)
        assert positions.max() < len(toy_surrogates)

    def test_source_parameters_unchanged(self, toy_source, toy_surrogates, toy_images) -> None:
        before = toy_source.snapshot()
        masks = train_masks(toy_source, toy_surrogates, toy_images, [5, 4], steps=4, lr=0.05, seed=0, batch_size=4)
        assert len(masks.history) == 4
        assert not masks.is_binary
        for name, value in toy_source.snapshot().items():
            np.testing.assert_array_equal(value, before[name], err_msg=name)

    def test_training_is_seeded(self, toy_source, toy_surrogates, toy_images) -> None:
        def run():
            return train_masks(toy_source, toy_surrogates, toy_images, [5, 4], steps=3, lr=0.05, seed=9, batch_size=4)

        a, b = run(), run()
        for x, y in zip(a.soft_values(), b.soft_values()):
            np.testing.assert_array_equal(x, y)

    def test_zero_steps_returns_initial_masks(self, toy_source, toy_surrogates, toy_images) -> None:
        masks = train_masks(toy_source, toy_surrogates, toy_images, [5, 4], steps=0, lr=0.05, seed=0)
        np.testing.assert_array_equal(masks.soft_values()[0], np.full(10, 0.5))

    def test_warm_start_keeps_values_and_resets_selection(self, toy_source, toy_surrogates, toy_images) -> None:
        init = MaskSet.full(toy_source.mask_widths)
        masks = train_masks(toy_source, toy_surrogates, toy_images, [2, 2], steps=0, lr=0.05, seed=0, init=init)
        assert masks.selected is None
        assert masks.budgets == [2, 2]
        assert all(t.requires_grad for t in masks.logits)

    def test_permuting_units_permutes_the_masks(self, toy_source, toy_surrogates, toy_images) -> None:
        perm = np.random.default_rng(2).permutation(10)
        permuted = clone_network(toy_source)
        first, second = permuted.blocks[0].layers[0], permuted.blocks[1].layers[0]
        first.weight.data = first.weight.data[perm].copy()
        first.bias.data = first.bias.data[perm].copy()
        second.weight.data = second.weight.data[:, perm].copy()
        np.testing.assert_allclose(
            permuted.predict_logits(toy_images), toy_source.predict_logits(toy_images), rtol=0.0, atol=1e-12
        )

        # distinct starting values keep units that never fire apart from each other
        start = [np.linspace(0.2, 0.8, 10), np.linspace(0.3, 0.7, 9)]
        budgets = [4, 3]

        def run(net, init_values):
            return train_masks(
                net, toy_surrogates, toy_images, budgets, steps=5, lr=0.05, seed=3, batch_size=4,
                init=MaskSet.from_soft(init_values, budgets),
            )

        original = run(toy_source, start)
        moved = run(permuted, [start[0][perm], start[1]])
        np.testing.assert_allclose(moved.soft_values()[0], original.soft_values()[0][perm], rtol=0.0, atol=1e-9)
        np.testing.assert_allclose(moved.soft_values()[1], original.soft_values()[1], rtol=0.0, atol=1e-9)

        inverse = np.argsort(perm)
        selected = binarize_topk(original).selected
        assert binarize_topk(moved).selected[0] == sorted(int(inverse[j]) for j in selected[0])
        assert binarize_topk(moved).selected[1] == selected[1]
