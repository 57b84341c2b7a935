"""Tests for graft.adapter, graft.head, graft.cloned, graft.objective and graft.search."""

import math

import numpy as np
import pytest
from autodiff.gradcheck import check_gradients
from autodiff.tensor import Tensor
from contracts.errors import ContractError, ShapeError
from contracts.records import PositionRecord
from digits.patches import PatchGrid, gen_masks, stack_masks
from graft.adapter import build_adapter
from graft.cloned import ClonedModel, logits_by_label
from graft.head import build_extended_head, head_from_tensors
from graft.objective import ins_loss, kl_divergence, route_term
from graft.search import candidate_positions, finalize, fit_at_position, select_position
from localize.masks import MaskSet
from surrogates.model_set import fit_set

GRID = PatchGrid(2, 2, 8, 8)


@pytest.fixture
def toy_surrogates(toy_source, toy_images):
    return fit_set(toy_source, toy_images, stack_masks(gen_masks(4, 10, 5)), GRID, [4])


def make_cloned(target, source, position: int, cloned_classes=(4,), seed: int = 0) -> ClonedModel:
    rng = np.random.default_rng(seed)
    return ClonedModel(
        target=target,
        source=source,
        masks=MaskSet.full(source.mask_widths, active_from=position),
        position=position,
        adapter=build_adapter(target.block_input_dims(position), source.block_input_dims(position), rng),
        head=build_extended_head(target.head, source.feature_width, len(cloned_classes), rng),
        cloned_classes=list(cloned_classes),
    )


class TestAdapter:
    """Splice adapters."""

    def test_square_conv_adapter_starts_at_identity(self) -> None:
        adapter = build_adapter((3, 6, 6), (3, 6, 6), np.random.default_rng(0))
        x = np.random.default_rng(1).uniform(0.0, 1.0, size=(2, 3, 6, 6))
        assert adapter.kind == "conv"
        np.testing.assert_allclose(adapter(Tensor(x)).data, x)

    def test_conv_adapter_pools_to_branch_extents(self) -> None:
        adapter = build_adapter((4, 14, 14), (6, 7, 7), np.random.default_rng(0))
        assert adapter(Tensor(np.ones((1, 4, 14, 14)))).dims == (1, 6, 7, 7)

    def test_dense_adapter_flattens_feature_maps(self) -> None:
        adapter = build_adapter((2, 3, 3), (5,), np.random.default_rng(0))
        assert adapter.kind == "dense"
        assert adapter(Tensor(np.ones((2, 2, 3, 3)))).dims == (2, 5)

    def test_flat_trunk_cannot_feed_feature_map(self) -> None:
        with pytest.raises(ShapeError):
            build_adapter((12,), (1, 8, 8), np.random.default_rng(0))

    def test_smaller_trunk_map_rejected(self) -> None:
        with pytest.raises(ShapeError):
            build_adapter((3, 4, 4), (3, 6, 6), np.random.default_rng(0))


class TestHead:
    """The extended head."""

    def test_merged_round_trip(self, toy_target) -> None:
        head = build_extended_head(toy_target.head, 9, 2, np.random.default_rng(0))
        weight, bias = head.merged()
        assert weight.shape == (5, 17)
        split = head_from_tensors(weight, bias, num_old=3, trunk_width=8)
        np.testing.assert_array_equal(split.new_branch.data, head.new_branch.data)
        np.testing.assert_array_equal(split.old_trunk.data, toy_target.head.weight.data)
        assert not split.old_branch.data.any()

    def test_split_rejects_bad_row_count(self) -> None:
        with pytest.raises(ShapeError):
            head_from_tensors(np.zeros((3, 4)), np.zeros(3), num_old=3, trunk_width=2)


class TestClonedModel:
    """Class maps and the initial-state guarantee on old-class logits."""

    @pytest.mark.parametrize("position", [0, 1])
    def test_initial_old_logits_are_bit_exact(self, toy_target, toy_source, toy_images, position: int) -> None:
        cloned = make_cloned(toy_target, toy_source, position)
        logits = cloned.predict_logits(toy_images)
        assert logits.shape == (6, 4)
        np.testing.assert_array_equal(logits[:, cloned.old_columns], toy_target.predict_logits(toy_images))

    def test_class_map(self, toy_target, toy_source) -> None:
        cloned = make_cloned(toy_target, toy_source, 1)
        assert cloned.class_map == [0, 1, 2, 4]
        assert cloned.new_columns == [3]
        np.testing.assert_array_equal(logits_by_label(cloned, np.arange(8.0).reshape(2, 4), [4, 0]), [[3, 0], [7, 4]])

    def test_overlapping_classes_rejected(self, toy_target, toy_source) -> None:
        with pytest.raises(ContractError):
            make_cloned(toy_target, toy_source, 1, cloned_classes=(2,))

    def test_cloned_class_must_be_a_source_output(self, toy_target, toy_source) -> None:
        with pytest.raises(ContractError):
            make_cloned(toy_target, toy_source, 1, cloned_classes=(8,))

    def test_position_out_of_range(self, toy_target, toy_source) -> None:
        with pytest.raises(ContractError):
            make_cloned(toy_target, toy_source, 2)


class TestObjective:
    """KL terms, routing and the insertion loss."""

    def test_kl_of_identical_logits_is_zero(self) -> None:
        logits = np.random.default_rng(0).normal(size=(4, 3))
        assert kl_divergence(logits, Tensor(logits)).item() == pytest.approx(0.0, abs=1e-12)

    def test_kl_is_positive_for_different_logits(self) -> None:
        rng = np.random.default_rng(0)
        assert kl_divergence(rng.normal(size=(4, 3)), Tensor(rng.normal(size=(4, 3)))).item() > 0.0

    def test_kl_weights_by_the_student_distribution(self) -> None:
        # uniform student against a peaked reference: sum p (log p - log q), not the reverse
        value = kl_divergence(np.array([[4.0, 0.0, 0.0]]), Tensor(np.zeros((1, 3)))).item()
        assert value == pytest.approx(1.60403, abs=1e-3)
        assert value != pytest.approx(0.92129, abs=1e-2)

    def test_kl_gradient_matches_finite_differences(self) -> None:
        rng = np.random.default_rng(3)
        reference = rng.normal(size=(4, 3))
        student = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        result = check_gradients(lambda: kl_divergence(reference, student), [student], name="kl")
        assert result.passed, result.to_dict()

    def test_kl_shape_mismatch(self) -> None:
        with pytest.raises(ContractError):
            kl_divergence(np.zeros((2, 3)), Tensor(np.zeros((2, 2))))

    def test_route_term_at_balanced_slices(self) -> None:
        value = route_term(Tensor(np.zeros((2, 2))), [0], [1], toward_new=True).item()
        assert value == pytest.approx(math.log(2.0))

    def test_route_term_direction(self) -> None:
        logits = Tensor(np.array([[0.0, 5.0]]))
        toward_new = route_term(logits, [0], [1], toward_new=True).item()
        toward_old = route_term(logits, [0], [1], toward_new=False).item()
        assert toward_new < math.log(2.0) < toward_old

    def test_ins_loss_gradient(self, toy_target, toy_source, toy_surrogates, toy_images) -> None:
        cloned = make_cloned(toy_target, toy_source, 1)
        # keep the adapter ReLU away from its kink
        cloned.adapter.bias.data = np.random.default_rng(2).uniform(0.1, 0.3, size=cloned.adapter.bias.dims)
        positions, bits = np.array([0, 3, 5]), toy_surrogates.masks[[0, 2, 4]]
        result = check_gradients(
            lambda: ins_loss(cloned, toy_surrogates, toy_images, positions, bits),
            cloned.adapter.parameters() + cloned.head.parameters(),
            name="ins_loss",
        )
        assert result.passed, result.to_dict()

    def test_ins_loss_rejects_mismatched_surrogates(self, toy_target, toy_source, toy_surrogates, toy_images) -> None:
        cloned = make_cloned(toy_target, toy_source, 1, cloned_classes=(5,))
        with pytest.raises(ContractError):
            ins_loss(cloned, toy_surrogates, toy_images, np.arange(2), toy_surrogates.masks[:2])


class TestSearch:
    """Candidate positions, fitting at one R and the selection rule."""

    def test_candidates_run_from_last_block_down(self, toy_config) -> None:
        assert candidate_positions(3, toy_config) == [2, 1, 0]

    def test_pinned_position(self, toy_config) -> None:
        assert candidate_positions(3, toy_config.updated(position=1)) == [1]
        with pytest.raises(ContractError):
            candidate_positions(3, toy_config.updated(position=3))

    def test_no_insert_ablation_uses_input_position(self, toy_config) -> None:
        assert candidate_positions(3, toy_config.updated(ablation="no-insert")) == [0]

    def test_select_position_ties_go_to_larger_r(self) -> None:
        trace = [
            PositionRecord(position=2, convergence_value=0.5, initial_loss=1.0),
            PositionRecord(position=1, convergence_value=0.3, initial_loss=1.0),
            PositionRecord(position=0, convergence_value=0.3, initial_loss=1.0),
        ]
        assert select_position(trace) == 1

    def test_select_position_needs_a_trace(self) -> None:
        with pytest.raises(ContractError):
            select_position([])

    def test_fit_leaves_target_and_source_untouched(
        self, toy_target, toy_source, toy_surrogates, toy_images, toy_config
    ) -> None:
        target_before, source_before = toy_target.snapshot(), toy_source.snapshot()
        masks = MaskSet.initial(toy_source.mask_widths, [5, 4])
        fit = fit_at_position(toy_target, toy_source, toy_surrogates, masks, 1, toy_images, toy_config)
        assert len(fit.epoch_losses) == toy_config.epochs
        assert math.isfinite(fit.convergence_value) and math.isfinite(fit.initial_loss)
        assert fit.model.masks.is_binary
        assert [len(s) for s in fit.model.masks.selected[1:]] == [4]
        for name, value in toy_target.snapshot().items():
            np.testing.assert_array_equal(value, target_before[name], err_msg=name)
        for name, value in toy_source.snapshot().items():
            np.testing.assert_array_equal(value, source_before[name], err_msg=name)

    def test_fit_is_seeded(self, toy_target, toy_source, toy_surrogates, toy_images, toy_config) -> None:
        masks = MaskSet.initial(toy_source.mask_widths, [5, 4])
        a = fit_at_position(toy_target, toy_source, toy_surrogates, masks, 1, toy_images, toy_config)
        b = fit_at_position(toy_target, toy_source, toy_surrogates, masks, 1, toy_images, toy_config)
        assert a.epoch_losses == b.epoch_losses

    def test_finalize_freezes_everything(self, toy_target, toy_source) -> None:
        cloned = make_cloned(toy_target, toy_source, 1)
        final = finalize(cloned)
        assert final.masks.is_binary
        assert not any(t.requires_grad for t in final.trainable_parameters())
