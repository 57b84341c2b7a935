"""Tests for surrogates.kernel, surrogates.local_model and surrogates.model_set."""

import math

import numpy as np
import pytest
from contracts.errors import CheckpointFormatError, ContractError, NumericError, ShapeError
from digits.patches import PatchGrid, gen_masks, stack_masks
from surrogates.kernel import locality_weight, locality_weights
from surrogates.local_model import LocalModel, fidelity, fit_local_model, predict, weighted_ridge
from surrogates.model_set import LocalModelSet, fit_set, load_model_set, save_model_set, sim_conditional

GRID = PatchGrid(2, 2, 8, 8)


def linear_predictor(images: np.ndarray) -> np.ndarray:
    """Exactly linear in the patch bits: pixel sum and an affine copy of it."""
    total = images.reshape(images.shape[0], -1).sum(axis=1)
    return np.stack([total, 2.0 * total + 1.0], axis=1)


def patch_sums(image: np.ndarray) -> np.ndarray:
    return np.array([image[..., GRID.patch_index == p].sum() for p in range(GRID.num_patches)])


def model_set(weights: list[np.ndarray], classes: list[int]) -> LocalModelSet:
    models = [LocalModel(anchor_id=i, weights=w, classes=classes) for i, w in enumerate(weights)]
    return LocalModelSet(grid=GRID, masks=stack_masks(gen_masks(4, 6, 0)), models=models, classes=classes)


class TestKernel:
    """Locality kernel values."""

    def test_all_ones_weight_is_one(self) -> None:
        assert locality_weight(np.ones(16)) == 1.0

    def test_half_density(self) -> None:
        assert locality_weight(np.array([1, 0, 1, 0])) == pytest.approx(math.exp(-1.0))

    def test_all_zeros_weight(self) -> None:
        assert locality_weight(np.zeros(16), sigma=0.5) == pytest.approx(math.exp(-4.0))
        assert locality_weight(np.zeros(16)) == pytest.approx(0.0183, abs=1e-4)

    def test_monotone_on_nested_masks(self) -> None:
        rng = np.random.default_rng(4)
        for _ in range(20):
            bits = np.zeros(16)
            previous = locality_weight(bits)
            for p in rng.permutation(16):
                bits[p] = 1.0
                current = locality_weight(bits)
                assert current >= previous
                previous = current
            assert previous == 1.0

    def test_vectorised_matches_scalar(self) -> None:
        bits = stack_masks(gen_masks(4, 5, 1))
        expected = [locality_weight(row) for row in bits]
        np.testing.assert_allclose(locality_weights(bits), expected)


class TestLocalModel:
    """Weighted ridge fits against an exactly linear predictor."""

    def test_recovers_linear_response(self, toy_images) -> None:
        x = toy_images[0]
        masks = stack_masks(gen_masks(4, 12, 3))
        g = fit_local_model(linear_predictor, x, masks, GRID, [0, 1], ridge_lambda=1e-10)
        sums = patch_sums(x)
        np.testing.assert_allclose(g.weights[:-1, 0], sums, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(g.weights[:-1, 1], 2.0 * sums, rtol=1e-5, atol=1e-6)
        assert g.weights[-1, 1] == pytest.approx(1.0, abs=1e-5)
        assert g.residual < 1e-8

    def test_fidelity_on_heldout_masks(self, toy_images) -> None:
        x = toy_images[1]
        g = fit_local_model(linear_predictor, x, stack_masks(gen_masks(4, 12, 3)), GRID, [0, 1], ridge_lambda=1e-10)
        heldout = np.random.default_rng(9).integers(0, 2, size=(5, 4)).astype(float)
        assert fidelity(g, linear_predictor, x, heldout, GRID) < 1e-8

    def test_predict_single_and_stack(self) -> None:
        g = LocalModel(anchor_id=0, weights=np.arange(10.0).reshape(5, 2), classes=[0, 1])
        np.testing.assert_allclose(predict(g, np.ones(4)), [20.0, 25.0])
        assert predict(g, np.ones((3, 4))).shape == (3, 2)

    def test_too_few_masks(self, toy_images) -> None:
        with pytest.raises(ContractError):
            fit_local_model(linear_predictor, toy_images[0], stack_masks(gen_masks(4, 5, 0)), GRID, [0, 1])

    def test_mask_length_mismatch(self, toy_images) -> None:
        with pytest.raises(ShapeError):
            fit_local_model(linear_predictor, toy_images[0], np.ones((12, 9)), GRID, [0, 1])

    def test_singular_system(self) -> None:
        design = np.hstack([np.ones((6, 2)), np.ones((6, 1))])
        with pytest.raises(NumericError):
            weighted_ridge(design, np.zeros((6, 1)), np.ones(6), ridge_lambda=0.0)

    def test_network_slice(self, toy_source, toy_images) -> None:
        g = fit_local_model(toy_source, toy_images[0], stack_masks(gen_masks(4, 10, 2)), GRID, [4, 6])
        assert g.weights.shape == (5, 2)
        assert g.classes == [4, 6]

    def test_heldout_error_shrinks_with_more_masks(self, toy_source, toy_images) -> None:
        fine = PatchGrid(4, 4, 8, 8)
        masks = stack_masks(gen_masks(16, 200, 8))
        heldout = stack_masks(gen_masks(16, 60, 9))[1:]
        few, many = [], []
        for x in toy_images:
            few.append(fidelity(fit_local_model(toy_source, x, masks[:20], fine, [4, 5]), toy_source, x, heldout, fine))
            many.append(fidelity(fit_local_model(toy_source, x, masks, fine, [4, 5]), toy_source, x, heldout, fine))
        improved = sum(m <= f + 1e-12 for f, m in zip(few, many))
        assert improved > len(toy_images) // 2
        assert np.mean(many) <= np.mean(few)


class TestModelSet:
    """Fitting, persistence and conditional similarity of surrogate sets."""

    def test_parallel_matches_serial(self, toy_source, toy_images) -> None:
        masks = stack_masks(gen_masks(4, 10, 4))
        serial = fit_set(toy_source, toy_images, masks, GRID, [3, 4], workers=1)
        parallel = fit_set(toy_source, toy_images, masks, GRID, [3, 4], workers=3)
        assert serial.source_arch == "mlp"
        np.testing.assert_array_equal(serial.weight_stack(), parallel.weight_stack())

    def test_predict_batch_matches_models(self, toy_source, toy_images) -> None:
        masks = stack_masks(gen_masks(4, 10, 4))
        ms = fit_set(toy_source, toy_images, masks, GRID, [3, 4])
        positions = np.array([2, 0, 5])
        bits = masks[:3]
        expected = np.stack([predict(ms.models[p], b) for p, b in zip(positions, bits)])
        np.testing.assert_allclose(ms.predict_batch(positions, bits), expected)

    def test_save_load_round_trip(self, toy_source, toy_images, tmp_path) -> None:
        ms = fit_set(toy_source, toy_images, stack_masks(gen_masks(4, 10, 4)), GRID, [3, 4], seed=7)
        save_model_set(ms, tmp_path / "g.pncg")
        loaded = load_model_set(tmp_path / "g.pncg")
        assert loaded.classes == [3, 4]
        assert loaded.seed == 7
        assert loaded.grid == GRID
        np.testing.assert_array_equal(loaded.weight_stack(), ms.weight_stack())

    def test_load_rejects_other_containers(self, toy_target, tmp_path) -> None:
        from nets.checkpoint import save_checkpoint

        save_checkpoint(toy_target, tmp_path / "net.pncm")
        with pytest.raises(CheckpointFormatError):
            load_model_set(tmp_path / "net.pncm")

    def test_similarity_of_self_is_one(self) -> None:
        rng = np.random.default_rng(0)
        ms = model_set([rng.normal(size=(5, 2)) for _ in range(3)], [0, 1])
        assert sim_conditional(ms, ms) == pytest.approx(1.0)

    def test_similarity_is_scale_invariant(self) -> None:
        rng = np.random.default_rng(1)
        weights = [rng.normal(size=(5, 2)) for _ in range(3)]
        doubled = model_set([2.0 * w for w in weights], [0, 1])
        assert sim_conditional(model_set(weights, [0, 1]), doubled) == pytest.approx(1.0, abs=1e-12)

    def test_similarity_of_negation_is_minus_one(self) -> None:
        rng = np.random.default_rng(0)
        weights = [rng.normal(size=(5, 2)) for _ in range(3)]
        negated = model_set([-w for w in weights], [0, 1])
        assert sim_conditional(model_set(weights, [0, 1]), negated) == pytest.approx(-1.0)

    def test_similarity_width_mismatch(self) -> None:
        a = model_set([np.ones((5, 2))], [0, 1])
        b = model_set([np.ones((5, 3))], [0, 1, 2])
        with pytest.raises(ShapeError):
            sim_conditional(a, b)

    def test_similarity_zero_norm(self) -> None:
        a = model_set([np.zeros((5, 2))], [0, 1])
        with pytest.raises(NumericError):
            sim_conditional(a, a)

    def test_models_must_share_classes(self) -> None:
        models = [LocalModel(anchor_id=0, weights=np.ones((5, 1)), classes=[1])]
        with pytest.raises(ContractError):
            LocalModelSet(grid=GRID, masks=np.ones((6, 4)), models=models, classes=[0])
