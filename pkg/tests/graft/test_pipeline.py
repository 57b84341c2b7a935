"""End-to-end clone runs on the toy networks and synthetic 8x8 digits."""

import numpy as np
import pytest
from contracts.errors import StageError
from digits.idx import MnistData
from evaluation.reports import reports_match
from evaluation.sweep import sweep
from graft.pipeline import build_report, clone, prepare_context, run_clone
from nets.checkpoint import save_checkpoint
from packet.transfer import unpack


@pytest.fixture
def toy_mnist(make_digits) -> MnistData:
    return MnistData(train=make_digits(10, list(range(10)), seed=11), test=make_digits(4, list(range(10)), seed=12))


@pytest.fixture
def toy_zoo(tmp_path, toy_target, toy_source):
    save_checkpoint(toy_target, tmp_path / "zoo" / "target.pncm")
    save_checkpoint(toy_source, tmp_path / "zoo" / "source.pncm")
    return tmp_path / "zoo"


class TestClone:
    """The full clone pipeline."""

    def test_clone_report(self, toy_config, toy_zoo, toy_mnist, toy_target, tmp_path) -> None:
        before = toy_target.snapshot()
        model, packet, report = clone(
            toy_config,
            toy_zoo / "target.pncm",
            toy_zoo / "source.pncm",
            packet_path=tmp_path / "clone.pncp",
            mnist=toy_mnist,
        )
        assert model.class_map == [0, 1, 2, 4]
        assert [r["position"] for r in report["trace"]] == [1, 0]
        assert report["chosen_position"] == model.position == packet.position
        assert report["data"] == {"anchors": 5, "negatives": 15, "test": 16}
        assert report["packet"]["bytes"] == (tmp_path / "clone.pncp").stat().st_size
        assert report["final"]["ori_count"] == 12
        assert report["surrogates"]["anchors"] == 5
        for name, value in model.target.snapshot().items():
            np.testing.assert_array_equal(value, before[name], err_msg=name)

    def test_clone_is_reproducible(self, toy_config, toy_zoo, toy_mnist) -> None:
        _, _, first = clone(toy_config, toy_zoo / "target.pncm", toy_zoo / "source.pncm", mnist=toy_mnist)
        _, _, second = clone(toy_config, toy_zoo / "target.pncm", toy_zoo / "source.pncm", mnist=toy_mnist)
        assert reports_match(first, second)

    def test_packet_unpacks_to_the_same_model(self, toy_config, toy_zoo, toy_mnist, tmp_path) -> None:
        model, _, _ = clone(
            toy_config,
            toy_zoo / "target.pncm",
            toy_zoo / "source.pncm",
            packet_path=tmp_path / "clone.pncp",
            mnist=toy_mnist,
        )
        restored = unpack(tmp_path / "clone.pncp", toy_zoo)
        images = toy_mnist.test.images[:8]
        np.testing.assert_array_equal(restored.predict_logits(images), model.predict_logits(images))

    def test_target_class_mismatch_names_the_stage(self, toy_config, toy_zoo, toy_mnist) -> None:
        config = toy_config.updated(target_classes=[0, 1, 3], source_classes=[4, 5, 6])
        with pytest.raises(StageError) as info:
            clone(config, toy_zoo / "target.pncm", toy_zoo / "source.pncm", mnist=toy_mnist)
        assert info.value.stage == "data"

    def test_missing_checkpoint_fails_in_load(self, toy_config, toy_zoo, toy_mnist) -> None:
        with pytest.raises(StageError) as info:
            clone(toy_config, toy_zoo / "absent.pncm", toy_zoo / "source.pncm", mnist=toy_mnist)
        assert info.value.stage == "load"
        assert info.value.exit_code == 3


class TestAblations:
    """Ablation and pinned-position variants."""

    def test_pinned_position(self, toy_config, toy_target, toy_source, toy_mnist) -> None:
        context = prepare_context(toy_config, toy_target, toy_source, toy_mnist)
        outcome = run_clone(context, toy_config.updated(position=0))
        assert outcome.model.position == 0
        assert len(outcome.search.trace) == 1

    def test_no_local_keeps_full_masks(self, toy_config, toy_target, toy_source, toy_mnist) -> None:
        context = prepare_context(toy_config, toy_target, toy_source, toy_mnist)
        outcome = run_clone(context, toy_config.updated(ablation="no-local"))
        assert outcome.model.masks.selected == [list(range(10)), list(range(9))]
        report = build_report(context, outcome, toy_config)
        assert report["packet"]["ratio_to_source"] is None

    def test_position_sweep(self, toy_config, toy_target, toy_source, toy_mnist) -> None:
        context = prepare_context(toy_config, toy_target, toy_source, toy_mnist)
        frame = sweep(context, toy_config, "position")
        assert frame["position"].tolist() == [0, 1]
        assert frame["packet_bytes"].isna().all()
