"""Tests for packet.codec and packet.transfer."""

import numpy as np
import pytest
from contracts.errors import ContractError, PacketFormatError, ProvenanceError, ZooError
from contracts.wire import Container, encode
from digits.patches import PatchGrid, gen_masks, stack_masks
from graft.adapter import build_adapter
from graft.cloned import ClonedModel
from graft.head import build_extended_head
from localize.masks import MaskSet
from nets.checkpoint import load_checkpoint, save_checkpoint
from nets.zoo import build_lenet, build_mlp
from packet.codec import PACKET_MAGIC, PACKET_TENSORS, packet_bytes, packet_from_bytes, read_packet
from packet.transfer import attach, detach, pack, repair, to_packet, unpack
from surrogates.model_set import fit_set

SELECTED = [[0, 1, 2], [1, 3, 5, 7]]


@pytest.fixture
def zoo(tmp_path, toy_target, toy_source):
    directory = tmp_path / "zoo"
    save_checkpoint(toy_target, directory / "mlp-012.pncm")
    save_checkpoint(toy_source, directory / "mlp-3456.pncm")
    return directory


@pytest.fixture
def cloned(zoo) -> ClonedModel:
    target = load_checkpoint(zoo / "mlp-012.pncm")
    source = load_checkpoint(zoo / "mlp-3456.pncm")
    rng = np.random.default_rng(0)
    head = build_extended_head(target.head, source.feature_width, 1, rng)
    head.new_trunk.data = rng.normal(size=head.new_trunk.dims)
    return ClonedModel(
        target=target,
        source=source,
        masks=MaskSet.from_selected(source.mask_widths, SELECTED, active_from=1),
        position=1,
        adapter=build_adapter(target.block_input_dims(1), source.block_input_dims(1), rng),
        head=head,
        cloned_classes=[4],
        metadata={"seed": 0},
    )


class TestCodec:
    """PNCP encoding."""

    def test_packet_carries_no_backbone(self, cloned) -> None:
        packet = to_packet(cloned)
        assert set(packet.tensors) == set(PACKET_TENSORS)
        assert packet.selected == SELECTED
        assert packet.target.name == "mlp-012.pncm"
        assert packet.source.digest == cloned.source.origin.digest

    def test_bytes_round_trip(self, cloned) -> None:
        blob = packet_bytes(to_packet(cloned))
        decoded = packet_from_bytes(blob)
        assert decoded.header() == to_packet(cloned).header()
        assert packet_bytes(decoded) == blob

    def test_unexpected_tensor_set(self) -> None:
        blob = encode(Container(PACKET_MAGIC, 1, {}, {"adapter.weight": np.zeros(2)}))
        with pytest.raises(PacketFormatError, match="tensors"):
            packet_from_bytes(blob)

    def test_truncated_packet(self, cloned) -> None:
        with pytest.raises(PacketFormatError):
            packet_from_bytes(packet_bytes(to_packet(cloned))[:-3])

    def test_missing_packet_file(self, tmp_path) -> None:
        with pytest.raises(PacketFormatError, match="no such file"):
            read_packet(tmp_path / "absent.pncp")


class TestTransfer:
    """pack / unpack / attach / detach / repair."""

    def test_unpack_reproduces_logits(self, cloned, zoo, toy_images, tmp_path) -> None:
        path = tmp_path / "clone.pncp"
        assert pack(cloned, path) == path.stat().st_size
        restored = unpack(path, zoo)
        assert restored.class_map == [0, 1, 2, 4]
        assert restored.masks.selected == SELECTED
        np.testing.assert_array_equal(restored.predict_logits(toy_images), cloned.predict_logits(toy_images))

    def test_reattach_after_detach(self, cloned, toy_images) -> None:
        packet = to_packet(cloned)
        before = cloned.target.snapshot()
        target = detach(cloned)
        for name, value in target.snapshot().items():
            np.testing.assert_array_equal(value, before[name], err_msg=name)
        again = attach(packet, target, cloned.source)
        np.testing.assert_array_equal(again.predict_logits(toy_images), cloned.predict_logits(toy_images))

    def test_digest_mismatch_is_a_provenance_error(self, cloned, zoo, tmp_path) -> None:
        path = tmp_path / "clone.pncp"
        pack(cloned, path)
        other = build_mlp(4, 99, classes=[3, 4, 5, 6], input_shape=(1, 8, 8), hidden=(10, 9))
        save_checkpoint(other, zoo / "mlp-3456.pncm")
        with pytest.raises(ProvenanceError, match="digest"):
            unpack(path, zoo)

    def test_missing_zoo_entry(self, cloned, zoo, tmp_path) -> None:
        path = tmp_path / "clone.pncp"
        pack(cloned, path)
        (zoo / "mlp-012.pncm").unlink()
        with pytest.raises(ZooError):
            unpack(path, zoo)

    def test_attach_rejects_other_architecture(self, cloned, toy_source) -> None:
        packet = to_packet(cloned)
        packet.target = type(packet.target)(arch="lenet", name="x", digest="0", size=0)
        with pytest.raises(ProvenanceError, match="architecture"):
            attach(packet, cloned.target, toy_source)

    def test_attach_requires_checkpoint_origin(self, cloned, toy_source) -> None:
        packet = to_packet(cloned)
        with pytest.raises(ProvenanceError, match="no checkpoint origin"):
            attach(packet, cloned.target, toy_source)

    def test_pack_unpack_pack_is_byte_identical(self, cloned, zoo, tmp_path) -> None:
        first, second = tmp_path / "first.pncp", tmp_path / "second.pncp"
        pack(cloned, first)
        pack(unpack(first, zoo), second)
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.parametrize("position", [0, 1, 2])
    def test_lenet_packet_is_under_a_tenth_of_the_source(self, tmp_path, position: int) -> None:
        target_path, source_path = tmp_path / "lenet-01234.pncm", tmp_path / "lenet-56789.pncm"
        save_checkpoint(build_lenet(5, 0, classes=[0, 1, 2, 3, 4]), target_path)
        source_size = save_checkpoint(build_lenet(5, 1, classes=[5, 6, 7, 8, 9]), source_path)
        target, source = load_checkpoint(target_path), load_checkpoint(source_path)
        rng = np.random.default_rng(position)
        selected = [list(range(w // 2)) for w in source.mask_widths]
        model = ClonedModel(
            target=target,
            source=source,
            masks=MaskSet.from_selected(source.mask_widths, selected, active_from=position),
            position=position,
            adapter=build_adapter(target.block_input_dims(position), source.block_input_dims(position), rng),
            head=build_extended_head(target.head, source.feature_width, 3, rng),
            cloned_classes=[5, 6, 7],
        )
        size = pack(model, tmp_path / "clone.pncp")
        assert size < 0.1 * source_size

    def test_attach_rejects_other_target_classes(self, cloned) -> None:
        packet = to_packet(cloned)
        packet.target_classes = [0, 1, 3]
        with pytest.raises(ContractError):
            attach(packet, cloned.target, cloned.source)

    def test_soft_masks_cannot_be_packed(self, cloned) -> None:
        cloned.masks = MaskSet.initial(cloned.source.mask_widths, [3, 4])
        with pytest.raises(ContractError, match="binarized"):
            to_packet(cloned)

    def test_networks_without_origin_cannot_be_packed(self, cloned, toy_target) -> None:
        cloned.target = toy_target
        with pytest.raises(ContractError, match="origin"):
            to_packet(cloned)

    def test_repair_refits_at_the_packet_position(self, cloned, toy_images, toy_config) -> None:
        surrogates = fit_set(cloned.source, toy_images, stack_masks(gen_masks(4, 10, 1)), PatchGrid(2, 2, 8, 8), [4])
        adapter_before = cloned.adapter.weight.data.copy()
        fit = repair(cloned, surrogates, toy_images, toy_config)
        assert fit.position == 1
        assert fit.model.metadata["repaired"] is True
        assert [len(s) for s in fit.model.masks.selected] == [3, 4]
        np.testing.assert_array_equal(cloned.adapter.weight.data, adapter_before)
